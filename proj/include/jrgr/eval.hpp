#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jrgr/datasets.hpp"
#include "jrgr/metrics.hpp"
#include "jrgr/networks.hpp"
#include "jrgr/pipeline.hpp"
#include "jrgr/tsne.hpp"

namespace jrgr {

struct MetricResult {
  struct PerImage {
    std::string id;
    double psnr = 0;
    double ssim = 0;
  };
  double psnr = 0;  // mean over images
  double ssim = 0;
  std::vector<PerImage> images;
};

// Scores (output, reference) pairs. Throws DimensionError on a mismatch.
MetricResult score_pairs(const std::vector<std::pair<Image, Image>>& outputs_and_refs,
                         const std::vector<std::string>& ids);

// PSNR/SSIM of removal(rainy) against clean over full-size pairs.
MetricResult evaluate_removal(ImageNetImpl& removal, int64_t size_multiple, const std::vector<PairedSample>& pairs);
// The no-op baseline: the rainy input scored against its background.
MetricResult evaluate_identity(const std::vector<PairedSample>& pairs);

enum class RainLabel { kDecomposedSyn, kGeneratedSyn, kDecomposedReal, kGeneratedReal };
inline constexpr std::array<RainLabel, 4> kRainLabels = {RainLabel::kDecomposedSyn, RainLabel::kGeneratedSyn,
                                                          RainLabel::kDecomposedReal, RainLabel::kGeneratedReal};
std::string to_string(RainLabel label);

struct EmbeddingResult {
  std::vector<std::array<double, 2>> points;
  std::vector<RainLabel> labels;
  // centroids[k] is the mean point of label k; distances is symmetric with a
  // zero diagonal.
  std::array<std::array<double, 2>, 4> centroids{};
  std::array<std::array<double, 4>, 4> distances{};

  double centroid_distance(RainLabel a, RainLabel b) const {
    return distances[static_cast<size_t>(a)][static_cast<size_t>(b)];
  }
};

inline constexpr int64_t kMaxEmbeddingPerClass = 500;
inline constexpr int64_t kEmbeddingSide = 32;

// Rain layers to t-SNE features: channel mean, area-downsampled to 32x32,
// flattened, standardized per dimension.
torch::Tensor rain_features(const std::vector<torch::Tensor>& rain_layers);

// Draws n_per_class synthetic and real crops, runs both translation
// directions and embeds the four rain-layer populations.
EmbeddingResult collect_rain_embeddings(const JrgrModel& model, const PairedCollection& paired,
                                        const UnpairedCollection& unpaired, int64_t n_per_class,
                                        const TsneOptions& options = {});

EmbeddingResult summarize_embedding(std::vector<std::array<double, 2>> points, std::vector<RainLabel> labels);

// Concatenates equally-sized 3-channel panels left to right.
Image image_grid(const std::vector<Image>& panels);

struct ReportInputs {
  std::vector<std::pair<std::string, MetricResult>> methods;
  std::optional<TranslationBundle> bundle;
  std::optional<EmbeddingResult> embedding;
};

// Writes metrics.csv and table.md, plus grid.png when a bundle is given and
// tsne_points.csv / tsne.png when an embedding is given.
void emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

void write_tsne_csv(const EmbeddingResult& e, const std::filesystem::path& path);
Image render_scatter(const EmbeddingResult& e, int64_t size = 512);

}  // namespace jrgr
