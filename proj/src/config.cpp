#include "jrgr/config.hpp"

#include <fstream>

#include "jrgr/errors.hpp"
#include "jrgr/json_util.hpp"

namespace jrgr {
namespace fs = std::filesystem;

namespace {

void reject_seed(const nlohmann::json& j, const char* section) {
  if (j.is_object() && j.contains("seed")) {
    throw ValidationError(std::string(section) + ": seeds derive from the root 'seed' and cannot be set here");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  json_util::check_keys(j, {"seed", "data", "model", "train", "eval", "output"}, "config");
  json_util::read(j, "seed", c.seed, "config");
  if (j.contains("data")) {
    const auto& d = j.at("data");
    json_util::check_keys(d, {"manifest", "dataset_dir", "synthetic", "real", "scene", "counts"}, "data");
    std::string manifest, dir;
    json_util::read(d, "manifest", manifest, "data");
    json_util::read(d, "dataset_dir", dir, "data");
    c.data.manifest = manifest;
    c.data.dataset_dir = dir;
    if (d.contains("synthetic")) {
      reject_seed(d.at("synthetic"), "data.synthetic");
      jrgr::from_json(d.at("synthetic"), c.data.synthetic);
    }
    if (d.contains("real")) {
      reject_seed(d.at("real"), "data.real");
      jrgr::from_json(d.at("real"), c.data.real);
    }
    if (d.contains("scene")) {
      reject_seed(d.at("scene"), "data.scene");
      jrgr::from_json(d.at("scene"), c.data.scene);
    }
    if (d.contains("counts")) {
      const auto& n = d.at("counts");
      json_util::check_keys(n, {"paired", "unpaired", "test"}, "data.counts");
      json_util::read(n, "paired", c.data.counts.paired, "data.counts");
      json_util::read(n, "unpaired", c.data.counts.unpaired, "data.counts");
      json_util::read(n, "test", c.data.counts.test, "data.counts");
    }
  }
  if (j.contains("model")) {
    jrgr::from_json(j.at("model"), c.model);
  }
  if (j.contains("train")) {
    reject_seed(j.at("train"), "train");
    jrgr::from_json(j.at("train"), c.train);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    json_util::check_keys(e, {"n_per_class", "perplexity", "iterations", "learning_rate", "pca_dims"}, "eval");
    json_util::read(e, "n_per_class", c.eval.n_per_class, "eval");
    json_util::read(e, "perplexity", c.eval.tsne.perplexity, "eval");
    json_util::read(e, "iterations", c.eval.tsne.iterations, "eval");
    json_util::read(e, "learning_rate", c.eval.tsne.learning_rate, "eval");
    json_util::read(e, "pca_dims", c.eval.tsne.pca_dims, "eval");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    json_util::check_keys(o, {"dir"}, "output");
    std::string dir = c.output.string();
    json_util::read(o, "dir", dir, "output");
    c.output = dir;
  }
  c.resolve_seeds();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open config file: " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json synthetic = data.synthetic, real = data.real, scene = data.scene, train_json = train;
  synthetic.erase("seed");
  real.erase("seed");
  scene.erase("seed");
  train_json.erase("seed");
  return {{"seed", seed},
          {"data",
           {{"manifest", data.manifest.string()},
            {"dataset_dir", data.dataset_dir.string()},
            {"synthetic", synthetic},
            {"real", real},
            {"scene", scene},
            {"counts", {{"paired", data.counts.paired}, {"unpaired", data.counts.unpaired}, {"test", data.counts.test}}}}},
          {"model", model},
          {"train", train_json},
          {"eval",
           {{"n_per_class", eval.n_per_class},
            {"perplexity", eval.tsne.perplexity},
            {"iterations", eval.tsne.iterations},
            {"learning_rate", eval.tsne.learning_rate},
            {"pca_dims", eval.tsne.pca_dims}}},
          {"output", {{"dir", output.string()}}}};
}

void ExperimentConfig::resolve_seeds() {
  data.synthetic.seed = derive_seed(seed, "rain/synthetic");
  data.real.seed = derive_seed(seed, "rain/real");
  data.scene.seed = derive_seed(seed, "scene");
  train.seed = derive_seed(seed, "train");
  eval.tsne.seed = derive_seed(seed, "tsne");
}

void ExperimentConfig::validate() const {
  data.synthetic.validate();
  data.real.validate();
  data.scene.validate();
  if (data.counts.paired < 1 || data.counts.unpaired < 1 || data.counts.test < 1) {
    throw ValidationError("data.counts entries must be >= 1");
  }
  model.validate();
  train.validate();
  if (train.crop % model.removal.size_multiple() != 0 || train.crop % model.generation.size_multiple() != 0) {
    throw ValidationError("train.crop must be divisible by the U-Net size multiple");
  }
  if (train.crop > data.scene.size) {
    throw ValidationError("train.crop exceeds data.scene.size");
  }
  if (eval.n_per_class < 1 || eval.n_per_class > 500) {
    throw ValidationError("eval.n_per_class must lie in [1, 500]");
  }
  if (!(eval.tsne.perplexity > 0) || eval.tsne.iterations < 1 || !(eval.tsne.learning_rate > 0) ||
      eval.tsne.pca_dims < 2) {
    throw ValidationError("eval t-SNE options out of range");
  }
}

}  // namespace jrgr
