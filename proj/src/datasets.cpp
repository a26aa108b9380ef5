#include "jrgr/datasets.hpp"

#include <algorithm>

#include "jrgr/errors.hpp"
#include "jrgr/rainsynth.hpp"

namespace jrgr {
namespace fs = std::filesystem;

namespace {

Image load_required(const fs::path& path) {
  if (!fs::exists(path)) {
    throw DataError("missing dataset file: " + path.string());
  }
  Image img = load_image(path);
  if (img.channels() == 1) {
    img = Image(img.tensor().expand({3, img.height(), img.width()}));
  }
  return img;
}

void check_crop(const Image& img, int64_t crop, const std::string& id) {
  if (crop > 0 && (img.height() < crop || img.width() < crop)) {
    throw SizeError("sample " + id + " smaller than crop " + std::to_string(crop));
  }
}

}  // namespace

PairedCollection::PairedCollection(std::vector<PairedSample> samples, int64_t crop)
    : samples_(std::move(samples)), crop_(crop) {
  for (const auto& s : samples_) {
    if (!s.rainy.same_shape(s.clean)) {
      throw DimensionError("paired sample " + s.id + ": rainy and clean shapes differ");
    }
    check_crop(s.rainy, crop_, s.id);
  }
}

PairedSample PairedCollection::crop(size_t i, Rng& rng) const {
  const auto& s = samples_.at(i);
  std::uniform_int_distribution<int64_t> dy(0, s.rainy.height() - crop_);
  std::uniform_int_distribution<int64_t> dx(0, s.rainy.width() - crop_);
  const int64_t top = dy(rng);
  const int64_t left = dx(rng);
  return {jrgr::crop(s.rainy, top, left, crop_), jrgr::crop(s.clean, top, left, crop_), s.id};
}

UnpairedCollection::UnpairedCollection(std::vector<UnpairedSample> samples, int64_t crop)
    : samples_(std::move(samples)), crop_(crop) {
  for (const auto& s : samples_) {
    check_crop(s.rainy, crop_, s.id);
  }
}

UnpairedSample UnpairedCollection::crop(size_t i, Rng& rng) const {
  const auto& s = samples_.at(i);
  return {random_crop(s.rainy, crop_, rng), s.id};
}

TrainingData load_dataset(const fs::path& manifest_path, int64_t crop) {
  const auto m = DatasetManifest::load(manifest_path);
  if (m.paired.empty()) {
    throw DataError("manifest has an empty paired split");
  }
  if (m.unpaired.empty()) {
    throw DataError("manifest has an empty unpaired split");
  }
  std::vector<PairedSample> paired;
  for (const auto& e : m.paired) {
    paired.push_back({load_required(m.root / e.rainy), load_required(m.root / e.clean), e.id});
  }
  std::vector<UnpairedSample> unpaired;
  for (const auto& e : m.unpaired) {
    unpaired.push_back({load_required(m.root / e.rainy), e.id});
  }
  return {PairedCollection(std::move(paired), crop), UnpairedCollection(std::move(unpaired), crop)};
}

namespace {

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) {
    return out;
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PairedSample> load_pairs(const fs::path& root,
                                     const std::vector<DatasetManifest::Entry>& entries) {
  std::vector<PairedSample> out;
  for (const auto& e : entries) {
    if (e.clean.empty()) {
      throw DataError("entry " + e.id + " has no clean counterpart");
    }
    out.push_back({load_required(root / e.rainy), load_required(root / e.clean), e.id});
  }
  return out;
}

}  // namespace

TrainingData load_dataset_dir(const fs::path& root, int64_t crop) {
  std::vector<PairedSample> paired;
  for (const auto& rainy : list_images(root / "paired" / "rainy")) {
    const auto clean = root / "paired" / "clean" / rainy.filename();
    paired.push_back({load_required(rainy), load_required(clean), rainy.filename().string()});
  }
  std::vector<UnpairedSample> unpaired;
  for (const auto& rainy : list_images(root / "unpaired" / "rainy")) {
    unpaired.push_back({load_required(rainy), rainy.filename().string()});
  }
  if (paired.empty()) {
    throw DataError("no paired images under " + (root / "paired").string());
  }
  if (unpaired.empty()) {
    throw DataError("no unpaired images under " + (root / "unpaired").string());
  }
  return {PairedCollection(std::move(paired), crop), UnpairedCollection(std::move(unpaired), crop)};
}

std::vector<PairedSample> load_test_pairs(const fs::path& manifest) {
  const auto m = DatasetManifest::load(manifest);
  if (m.test.empty()) {
    throw DataError("manifest has an empty test split");
  }
  return load_pairs(m.root, m.test);
}

std::vector<PairedSample> load_heldout_unpaired_pairs(const fs::path& manifest) {
  const auto m = DatasetManifest::load(manifest);
  return load_pairs(m.root, m.unpaired);
}

torch::Tensor sample_paired_batch(const PairedCollection& paired, int64_t batch, Rng& rng,
                                  torch::Tensor* clean_out) {
  if (paired.empty()) {
    throw DataError("paired collection is empty");
  }
  std::uniform_int_distribution<size_t> pick(0, paired.size() - 1);
  std::vector<torch::Tensor> rainy, clean;
  for (int64_t b = 0; b < batch; ++b) {
    auto s = paired.crop(pick(rng), rng);
    rainy.push_back(s.rainy.tensor());
    clean.push_back(s.clean.tensor());
  }
  if (clean_out != nullptr) {
    *clean_out = torch::stack(clean);
  }
  return torch::stack(rainy);
}

TrainingBatch sample_training_batch(const PairedCollection& paired, const UnpairedCollection& unpaired,
                                    int64_t batch, Rng& rng) {
  if (unpaired.empty()) {
    throw DataError("unpaired collection is empty");
  }
  TrainingBatch out;
  out.rainy_syn = sample_paired_batch(paired, batch, rng, &out.clean_syn);
  std::uniform_int_distribution<size_t> pick(0, unpaired.size() - 1);
  std::vector<torch::Tensor> real;
  for (int64_t b = 0; b < batch; ++b) {
    real.push_back(unpaired.crop(pick(rng), rng).rainy.tensor());
  }
  out.rainy_real = torch::stack(real);
  return out;
}

ImagePool::ImagePool(size_t capacity, double swap_probability, std::uint64_t seed)
    : capacity_(capacity), swap_probability_(swap_probability), rng_(seed) {}

torch::Tensor ImagePool::query(const torch::Tensor& fresh) {
  auto image = fresh.detach().clone();
  if (capacity_ == 0) {
    return image;
  }
  if (buffer_.size() < capacity_) {
    buffer_.push_back(image);
    return image;
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng_) >= swap_probability_) {
    return image;
  }
  std::uniform_int_distribution<size_t> pick(0, buffer_.size() - 1);
  const size_t slot = pick(rng_);
  auto stored = buffer_[slot];
  buffer_[slot] = image;
  return stored;
}

torch::Tensor ImagePool::query_batch(const torch::Tensor& batch) {
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<size_t>(batch.size(0)));
  for (int64_t i = 0; i < batch.size(0); ++i) {
    out.push_back(query(batch[i]));
  }
  return torch::stack(out);
}

}  // namespace jrgr
