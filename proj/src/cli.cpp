#include "jrgr/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "jrgr/errors.hpp"
#include "jrgr/trainer.hpp"

namespace jrgr::cli {
namespace fs = std::filesystem;

fs::path output_root(const ExperimentConfig& cfg, const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("JRGR_OUT"); env != nullptr && *env != '\0') return fs::path(env);
  return cfg.output;
}

fs::path manifest_path(const ExperimentConfig& cfg, const fs::path& root) {
  return cfg.data.manifest.empty() ? root / "data" / kManifestName : cfg.data.manifest;
}

fs::path cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto m = build_toy_datasets(cfg.data.synthetic, cfg.data.real, cfg.data.scene, cfg.data.counts, out_dir);
  return m.manifest_path();
}

namespace {

TrainingData load_training_data(const ExperimentConfig& cfg, const fs::path& root) {
  if (!cfg.data.dataset_dir.empty()) return load_dataset_dir(cfg.data.dataset_dir, cfg.train.crop);
  return load_dataset(manifest_path(cfg, root), cfg.train.crop);
}

std::vector<PairedSample> load_eval_pairs(const ExperimentConfig& cfg, const fs::path& root) {
  if (cfg.data.dataset_dir.empty()) return load_test_pairs(manifest_path(cfg, root));
  std::vector<PairedSample> pairs;
  const auto rainy_dir = cfg.data.dataset_dir / "test" / "rainy";
  if (!fs::is_directory(rainy_dir)) throw DataError("no test split under " + cfg.data.dataset_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(rainy_dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    pairs.push_back({load_image(f), load_image(cfg.data.dataset_dir / "test" / "clean" / f.filename()),
                     f.filename().string()});
  }
  return pairs;
}

// Drops rows at or after `iteration` so a resumed run keeps one row per
// iteration.
void truncate_metrics(const fs::path& csv, int64_t iteration) {
  std::ifstream in(csv);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      keep.push_back(line);
      header = false;
      continue;
    }
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    if (first == std::string::npos || second == std::string::npos) continue;
    if (std::stoll(line.substr(first + 1, second - first - 1)) < iteration) keep.push_back(line);
  }
  in.close();
  std::ofstream out(csv, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

std::vector<fs::path> list_inputs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("input directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Image as_rgb(const Image& img) {
  return img.channels() == 3 ? img : Image(img.tensor().expand({3, img.height(), img.width()}));
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& root, const TrainOptions& opts) {
  cfg.validate();
  const auto data = load_training_data(cfg, root);
  TrainOutcome outcome;
  const fs::path train_dir = root / "train";
  const fs::path ckpt_dir = train_dir / "ckpt";
  outcome.metrics_csv = train_dir / "metrics.csv";

  std::unique_ptr<JrgrModel> model;
  std::optional<LoadedCheckpoint> resumed;
  if (opts.resume) {
    if (auto latest = find_latest_checkpoint(ckpt_dir)) {
      resumed = load_checkpoint(*latest, &cfg.model);
      model = std::move(resumed->model);
      truncate_metrics(outcome.metrics_csv, resumed->iteration);
    }
  }
  if (!model) {
    std::error_code ec;
    fs::remove(outcome.metrics_csv, ec);
    if (fs::is_directory(ckpt_dir)) {
      for (const auto& e : fs::directory_iterator(ckpt_dir)) {
        const auto ext = e.path().extension();
        if (ext == ".archive" || ext == ".manifest") fs::remove(e.path(), ec);
      }
    }
    model = std::make_unique<JrgrModel>(cfg.model);
    init_parameters(*model, derive_seed(cfg.train.seed, "init"));
  }
  fs::create_directories(train_dir);
  {
    std::ofstream saved(train_dir / "config.json");
    saved << cfg.to_json().dump(2) << '\n';
  }
  Trainer trainer(*model, cfg.train, data, {outcome.metrics_csv, ckpt_dir});
  if (resumed) trainer.resume_from(*resumed);
  trainer.run();
  if (auto last = trainer.last_checkpoint()) {
    outcome.checkpoint = last->manifest;
  } else {
    outcome.checkpoint = save_checkpoint(*model, cfg.train, trainer.iteration(), ckpt_dir).manifest;
  }
  return outcome;
}

void cmd_derain(const fs::path& checkpoint, const fs::path& input_dir, const fs::path& out_dir,
                const std::optional<fs::path>& clean_dir) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto files = list_inputs(input_dir);
  fs::create_directories(out_dir);
  std::vector<std::pair<Image, Image>> scored;
  std::vector<std::string> ids;
  for (const auto& f : files) {
    const Image out = derain(*ckpt.model, as_rgb(load_image(f)));
    save_image(out, out_dir / fs::path(f.filename()).replace_extension(".png"));
    if (clean_dir) {
      scored.emplace_back(out, as_rgb(load_image(*clean_dir / f.filename())));
      ids.push_back(f.filename().string());
    }
  }
  if (clean_dir) {
    const auto result = score_pairs(scored, ids);
    std::ofstream csv(out_dir / "metrics.csv");
    if (!csv) throw IoError("cannot write metrics.csv in " + out_dir.string());
    csv << std::setprecision(10) << "image,psnr,ssim\n";
    for (const auto& p : result.images) csv << p.id << ',' << p.psnr << ',' << p.ssim << '\n';
    csv << "mean," << result.psnr << ',' << result.ssim << '\n';
  }
}

GeneratedImage generate_one(const JrgrModel& model, const Image& input, Domain origin) {
  torch::NoGradGuard no_grad;
  const int64_t m = std::max(model.config.removal.size_multiple(), model.config.generation.size_multiple());
  const int64_t h = input.height(), w = input.width();
  const int64_t ph = (m - h % m) % m, pw = (m - w % m) % m;
  auto x = as_rgb(input).tensor().unsqueeze(0);
  if (ph > 0 || pw > 0) {
    x = (ph < h && pw < w) ? torch::reflection_pad2d(x, {0, pw, 0, ph}) : torch::replication_pad2d(x, {0, pw, 0, ph});
  }
  for (const auto& [name, net] : model.named_networks()) net->eval();
  auto bundle = origin == Domain::kSynthetic ? s2r_forward(model, x) : r2s_forward(model, x);
  for (const auto& [name, net] : model.named_networks()) net->train();
  using torch::indexing::Slice;
  for (auto* t : {&bundle.input, &bundle.background1, &bundle.rain1, &bundle.rain2, &bundle.generated,
                  &bundle.background2, &bundle.rain3, &bundle.rain4, &bundle.reconstruction}) {
    *t = t->index({Slice(), Slice(), Slice(0, h), Slice(0, w)}).contiguous();
  }
  GeneratedImage g;
  g.generated = Image(bundle.generated[0]);
  g.background = Image(bundle.background1[0]);
  g.rain = Image(bundle.rain2[0].expand({3, h, w}));
  g.bundle = std::move(bundle);
  return g;
}

void cmd_generate(const fs::path& checkpoint, const fs::path& input_dir, const fs::path& out_dir, Domain origin) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto files = list_inputs(input_dir);
  fs::create_directories(out_dir);
  const std::string tag = origin == Domain::kSynthetic ? "s2r" : "r2s";
  for (const auto& f : files) {
    const auto g = generate_one(*ckpt.model, load_image(f), origin);
    const std::string stem = f.stem().string() + "_" + tag;
    save_image(g.generated, out_dir / (stem + "_generated.png"));
    save_image(g.background, out_dir / (stem + "_background.png"));
    save_image(g.rain, out_dir / (stem + "_rain.png"));
    save_image(image_grid(bundle_panels(g.bundle)), out_dir / (stem + "_panels.png"));
  }
}

std::string centroid_table(const EmbeddingResult& e) {
  std::ostringstream out;
  out << std::setw(16) << "";
  for (auto l : kRainLabels) out << std::setw(16) << to_string(l);
  out << '\n' << std::fixed << std::setprecision(3);
  for (auto a : kRainLabels) {
    out << std::setw(16) << to_string(a);
    for (auto b : kRainLabels) out << std::setw(16) << e.centroid_distance(a, b);
    out << '\n';
  }
  return out.str();
}

AnalyzeOutcome cmd_analyze(const fs::path& checkpoint, const ExperimentConfig& cfg, const fs::path& root,
                           const fs::path& out_dir) {
  cfg.validate();
  const auto ckpt = load_checkpoint(checkpoint);
  const auto data = load_training_data(cfg, root);
  const auto test = load_eval_pairs(cfg, root);
  const JrgrModel& model = *ckpt.model;

  AnalyzeOutcome outcome;
  outcome.methods.emplace_back("rainy input", evaluate_identity(test));
  outcome.methods.emplace_back("synthetic removal (F_s)",
                               evaluate_removal(*model.removal_syn, model.config.removal.size_multiple(), test));
  outcome.methods.emplace_back("JRGR (F_r)",
                               evaluate_removal(*model.removal_real, model.config.removal.size_multiple(), test));
  outcome.embedding = collect_rain_embeddings(model, data.paired, data.unpaired, cfg.eval.n_per_class, cfg.eval.tsne);

  ReportInputs report;
  report.methods = outcome.methods;
  report.embedding = outcome.embedding;
  {
    torch::NoGradGuard no_grad;
    Rng rng(derive_seed(cfg.seed, "report/bundle"));
    auto sample = data.paired.crop(0, rng);
    for (const auto& [name, net] : model.named_networks()) net->eval();
    report.bundle = s2r_forward(model, sample.rainy.tensor().unsqueeze(0));
    for (const auto& [name, net] : model.named_networks()) net->train();
  }
  emit_report(report, out_dir);
  return outcome;
}

// ---------------------------------------------------------------------------

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(flags.config);
  if (flags.seed) {
    cfg.seed = *flags.seed;
  }
  cfg.resolve_seeds();
  return cfg;
}

std::optional<fs::path> as_path(const std::optional<std::string>& s) {
  return s ? std::optional<fs::path>(*s) : std::nullopt;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Joint rain generation and removal: toy data synthesis, training, deraining and analysis.\n"
               "Exit codes: 0 success, 1 validation error, 2 runtime error, 3 NaN abort."};
  app.require_subcommand(1);

  CommonFlags common;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("-c,--config", common.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    if (with_config) sub->add_option("--seed", common.seed, "Override the root seed");
    sub->add_option("-o,--out", common.out, "Output directory (overrides $JRGR_OUT and the config)");
  };

  auto* synth = app.add_subcommand("synth", "Write the procedural two-domain toy dataset");
  add_common(synth, true);

  auto* train = app.add_subcommand("train", "Run the staged training schedule");
  add_common(train, true);
  std::optional<std::string> strategy;
  std::vector<std::string> disabled;
  std::optional<int64_t> pretrain_epochs, joint_epochs, log_every;
  bool resume = false;
  train->add_option("--strategy", strategy, "init-1 | init-2 | proposed")
      ->check(CLI::IsMember({"init-1", "init-2", "proposed"}));
  train->add_option("--disable-loss", disabled,
                    "Ablate a loss: adv_B, adv_O, cyc, mse or a single term (adv_Os, cyc_Br, ...); repeatable");
  train->add_option("--pretrain-epochs", pretrain_epochs, "Override train.pretrain_epochs");
  train->add_option("--joint-epochs", joint_epochs, "Override train.joint_epochs");
  train->add_option("--log-every", log_every, "Print losses every N iterations");
  train->add_flag("--resume", resume, "Continue from the latest checkpoint under <out>/train/ckpt");

  std::string checkpoint, input_dir;
  std::optional<std::string> clean_dir;
  auto* derain_cmd = app.add_subcommand("derain", "Remove rain with the real-domain removal network");
  add_common(derain_cmd, false);
  derain_cmd->add_option("--checkpoint", checkpoint, "Checkpoint manifest")->required();
  derain_cmd->add_option("--input", input_dir, "Directory of rainy images")->required();
  derain_cmd->add_option("--clean", clean_dir, "Directory of ground-truth backgrounds (same filenames)");

  std::string direction = "s2r";
  auto* generate = app.add_subcommand("generate", "Translate rainy images across rain domains");
  add_common(generate, false);
  generate->add_option("--checkpoint", checkpoint, "Checkpoint manifest")->required();
  generate->add_option("--input", input_dir, "Directory of input images")->required();
  generate->add_option("--direction", direction, "s2r | r2s")->check(CLI::IsMember({"s2r", "r2s"}));

  auto* analyze = app.add_subcommand("analyze", "Metrics, rain-layer t-SNE and report figures");
  add_common(analyze, true);
  analyze->add_option("--checkpoint", checkpoint, "Checkpoint manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kValidation;
  }

  try {
    if (synth->parsed()) {
      auto cfg = resolve_config(common);
      cfg.validate();
      const auto root = output_root(cfg, std::nullopt);
      const fs::path out = common.out ? fs::path(*common.out) : root / "data";
      std::cout << cmd_synth(cfg, out).string() << '\n';
    } else if (train->parsed()) {
      auto cfg = resolve_config(common);
      if (strategy) cfg.train.strategy = strategy_from_string(*strategy);
      for (const auto& name : disabled) cfg.train.ablation.disable(name);
      if (pretrain_epochs) cfg.train.pretrain_epochs = *pretrain_epochs;
      if (joint_epochs) cfg.train.joint_epochs = *joint_epochs;
      if (log_every) cfg.train.log_every = *log_every;
      cfg.validate();
      const auto root = output_root(cfg, as_path(common.out));
      const auto outcome = cmd_train(cfg, root, {resume});
      std::cout << outcome.checkpoint.string() << '\n';
    } else if (derain_cmd->parsed()) {
      const fs::path out = common.out ? fs::path(*common.out) : output_root(ExperimentConfig{}, std::nullopt) / "derain";
      cmd_derain(checkpoint, input_dir, out, as_path(clean_dir));
    } else if (generate->parsed()) {
      const fs::path out = common.out ? fs::path(*common.out) : output_root(ExperimentConfig{}, std::nullopt) / "generate";
      cmd_generate(checkpoint, input_dir, out, direction == "s2r" ? Domain::kSynthetic : Domain::kReal);
    } else if (analyze->parsed()) {
      auto cfg = resolve_config(common);
      cfg.validate();
      auto root = output_root(cfg, std::nullopt);
      if (!fs::exists(manifest_path(cfg, root))) {
        // Checkpoints live in <run>/train/ckpt; fall back to that run's dataset.
        const auto run = fs::path(checkpoint).parent_path().parent_path().parent_path();
        if (fs::exists(manifest_path(cfg, run))) root = run;
      }
      const fs::path out = common.out ? fs::path(*common.out) : root / "analysis";
      const auto outcome = cmd_analyze(checkpoint, cfg, root, out);
      std::cout << centroid_table(outcome.embedding);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const CompatibilityError& e) {
    std::cerr << "incompatible checkpoint: " << e.what() << '\n';
    return kValidation;
  } catch (const NanAbort& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kNanAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kSuccess;
}

}  // namespace jrgr::cli
