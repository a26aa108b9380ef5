#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "jrgr/networks.hpp"
#include "jrgr/rainsynth.hpp"
#include "jrgr/trainer.hpp"
#include "jrgr/tsne.hpp"

namespace jrgr {

struct DataConfig {
  std::filesystem::path manifest;     // empty = <output>/data/manifest.json
  std::filesystem::path dataset_dir;  // plain directory layout instead of a manifest
  RainDomainSpec synthetic = RainDomainSpec::synthetic_preset();
  RainDomainSpec real = RainDomainSpec::real_preset();
  SceneSpec scene;
  DatasetCounts counts;
};

struct EvalConfig {
  int64_t n_per_class = 200;
  TsneOptions tsne;
};

// Whole-experiment configuration. Every field has a default; unknown keys
// are rejected. Module seeds are not configured individually: they are
// expanded from the root seed by resolve_seeds().
struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model = ModelConfig::toy();
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path output = "runs/default";

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Derives rain, scene, training and embedding seeds from `seed`.
  void resolve_seeds();
  void validate() const;
};

}  // namespace jrgr
