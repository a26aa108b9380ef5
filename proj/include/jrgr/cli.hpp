#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jrgr/config.hpp"
#include "jrgr/eval.hpp"
#include "jrgr/pipeline.hpp"

namespace jrgr::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 1, kRuntime = 2, kNanAbort = 3 };

// Output root: explicit flag, else $JRGR_OUT, else the config value.
std::filesystem::path output_root(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& flag);

std::filesystem::path manifest_path(const ExperimentConfig& cfg, const std::filesystem::path& root);

// Builds the toy dataset; returns the manifest path.
std::filesystem::path cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct TrainOptions {
  bool resume = false;
};

struct TrainOutcome {
  std::filesystem::path checkpoint;  // last written manifest
  std::filesystem::path metrics_csv;
};

// Trains into <root>/train/{metrics.csv,ckpt/}. NanAbort propagates.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& root, const TrainOptions& opts = {});

// Derains every image of input_dir into out_dir (same filenames, PNG).
// When clean_dir is given, also writes out_dir/metrics.csv.
void cmd_derain(const std::filesystem::path& checkpoint, const std::filesystem::path& input_dir,
                const std::filesystem::path& out_dir, const std::optional<std::filesystem::path>& clean_dir);

struct GeneratedImage {
  Image generated;   // O_gen
  Image background;  // B1
  Image rain;        // R2, three channels
  TranslationBundle bundle;
};

// One image through s2r (origin synthetic) or r2s (origin real); sizes not
// divisible by the network multiple are reflection-padded and cropped back.
GeneratedImage generate_one(const JrgrModel& model, const Image& input, Domain origin);

void cmd_generate(const std::filesystem::path& checkpoint, const std::filesystem::path& input_dir,
                  const std::filesystem::path& out_dir, Domain origin);

struct AnalyzeOutcome {
  EmbeddingResult embedding;
  std::vector<std::pair<std::string, MetricResult>> methods;
};

AnalyzeOutcome cmd_analyze(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg,
                           const std::filesystem::path& root, const std::filesystem::path& out_dir);

std::string centroid_table(const EmbeddingResult& e);

// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace jrgr::cli
