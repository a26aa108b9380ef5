#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "jrgr/imaging.hpp"
#include "jrgr/rng.hpp"

namespace jrgr {

struct PairedSample {
  Image rainy;  // O_s
  Image clean;  // B
  std::string id;
};

struct UnpairedSample {
  Image rainy;  // O_r
  std::string id;
};

// Full-size images held in memory; crops are drawn on access. Read-only
// after construction.
class PairedCollection {
 public:
  PairedCollection() = default;
  PairedCollection(std::vector<PairedSample> samples, int64_t crop);

  size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int64_t crop_size() const { return crop_; }
  const PairedSample& full(size_t i) const { return samples_.at(i); }
  // Rainy and clean crops share one offset.
  PairedSample crop(size_t i, Rng& rng) const;

 private:
  std::vector<PairedSample> samples_;
  int64_t crop_ = 0;
};

class UnpairedCollection {
 public:
  UnpairedCollection() = default;
  UnpairedCollection(std::vector<UnpairedSample> samples, int64_t crop);

  size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int64_t crop_size() const { return crop_; }
  const UnpairedSample& full(size_t i) const { return samples_.at(i); }
  UnpairedSample crop(size_t i, Rng& rng) const;

 private:
  std::vector<UnpairedSample> samples_;
  int64_t crop_ = 0;
};

struct TrainingData {
  PairedCollection paired;
  UnpairedCollection unpaired;
};

// Loads the training splits of a manifest (file or its directory). Throws
// DataError naming the first missing file, or when a split is empty.
TrainingData load_dataset(const std::filesystem::path& manifest, int64_t crop);

// Same directory layout as a manifest dataset, without the manifest:
// paired/{rainy,clean}/*.png and unpaired/rainy/*.png matched by filename.
TrainingData load_dataset_dir(const std::filesystem::path& root, int64_t crop);

// Full-size (rainy, clean) pairs for evaluation: the test split, or the
// unpaired split joined with its held-out clean images.
std::vector<PairedSample> load_test_pairs(const std::filesystem::path& manifest);
std::vector<PairedSample> load_heldout_unpaired_pairs(const std::filesystem::path& manifest);

struct TrainingBatch {
  torch::Tensor rainy_syn;   // N x 3 x H x W (O_s)
  torch::Tensor clean_syn;   // N x 3 x H x W (B), index-aligned with rainy_syn
  torch::Tensor rainy_real;  // N x 3 x H x W (O_r)
};

// Independent uniform draws with replacement from each collection.
TrainingBatch sample_training_batch(const PairedCollection& paired, const UnpairedCollection& unpaired,
                                    int64_t batch, Rng& rng);
torch::Tensor sample_paired_batch(const PairedCollection& paired, int64_t batch, Rng& rng,
                                  torch::Tensor* clean_out);

// History buffer of generated images for discriminator updates.
class ImagePool {
 public:
  explicit ImagePool(size_t capacity = 50, double swap_probability = 0.5, std::uint64_t seed = 0);

  // Returns fresh while filling; afterwards returns fresh with probability
  // 1 - swap_probability, otherwise swaps it for a random stored image.
  torch::Tensor query(const torch::Tensor& fresh);
  // Applies query to every image of an N x C x H x W batch.
  torch::Tensor query_batch(const torch::Tensor& batch);

  size_t size() const { return buffer_.size(); }
  size_t capacity() const { return capacity_; }
  const std::vector<torch::Tensor>& contents() const { return buffer_; }

 private:
  size_t capacity_;
  double swap_probability_;
  Rng rng_;
  std::vector<torch::Tensor> buffer_;
};

}  // namespace jrgr
