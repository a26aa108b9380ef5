#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jrgr/imaging.hpp"
#include "jrgr/rng.hpp"

namespace jrgr {

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const Range&) const = default;
};

// Parameters of one procedural rain style.
struct RainDomainSpec {
  double angle_mean = 5.0;  // degrees from vertical
  double angle_std = 1.0;
  double density = 0.004;   // expected streaks per pixel
  Range length{8.0, 20.0};
  Range width{1.0, 1.6};
  Range intensity{0.25, 0.5};
  double blur_sigma = 0.5;
  double veil_strength = 0.0;
  std::uint64_t seed = 1;

  // Throws ValidationError naming the offending field.
  void validate() const;

  // Narrow, sharp streaks without haze.
  static RainDomainSpec synthetic_preset();
  // More diverse angles, softer streaks, and an additive veil.
  static RainDomainSpec real_preset();

  bool operator==(const RainDomainSpec&) const = default;
};

enum class TextureKind { kGradient, kChecker, kNoise, kPhoto };

struct SceneSpec {
  int64_t size = 64;
  TextureKind texture = TextureKind::kNoise;
  std::filesystem::path photo_dir;  // used by kPhoto only
  std::uint64_t seed = 7;

  void validate() const;
};

inline constexpr int64_t kCheckerBlock = 8;

struct RainSample {
  Image layer;  // 1 x size x size, non-negative
  int64_t streaks = 0;
};

RainSample synth_rain_sample(const RainDomainSpec& spec, int64_t size, Rng& rng);
Image synth_rain_layer(const RainDomainSpec& spec, int64_t size, Rng& rng);

Image synth_background(const SceneSpec& spec, Rng& rng);

struct DatasetCounts {
  int64_t paired = 200;
  int64_t unpaired = 200;
  int64_t test = 50;
};

// Description of a dataset written by build_toy_datasets. All paths are
// relative to the manifest's directory.
struct DatasetManifest {
  struct Entry {
    std::string id;
    std::filesystem::path rainy;
    std::filesystem::path clean;  // empty when not available
    std::uint64_t background_seed = 0;
    std::uint64_t rain_seed = 0;
  };

  std::filesystem::path root;
  int64_t image_size = 0;
  std::uint64_t seed = 0;
  RainDomainSpec synthetic;
  RainDomainSpec real;
  SceneSpec scene;
  std::vector<Entry> paired;
  std::vector<Entry> unpaired;  // clean = held-out counterpart, evaluation only
  std::vector<Entry> test;

  std::filesystem::path manifest_path() const { return root / "manifest.json"; }

  static DatasetManifest load(const std::filesystem::path& path);
  void save() const;
};

inline constexpr const char* kManifestName = "manifest.json";

// Writes paired/{rainy,clean}, unpaired/rainy, unpaired_heldout/clean,
// test/{rainy,clean} and manifest.json under out_dir.
DatasetManifest build_toy_datasets(const RainDomainSpec& synthetic, const RainDomainSpec& real,
                                   const SceneSpec& scene, const DatasetCounts& counts,
                                   const std::filesystem::path& out_dir);

void to_json(nlohmann::json& j, const RainDomainSpec& s);
void from_json(const nlohmann::json& j, RainDomainSpec& s);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
std::string to_string(TextureKind kind);
TextureKind texture_from_string(const std::string& name);

}  // namespace jrgr
