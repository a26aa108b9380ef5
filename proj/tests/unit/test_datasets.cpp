#include <cmath>

#include <gtest/gtest.h>

#include "jrgr/datasets.hpp"
#include "jrgr/errors.hpp"
#include "jrgr/rainsynth.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace jrgr;

namespace {

const fs::path& toy_dataset() {
  static TempDir dir;
  static bool built = false;
  if (!built) {
    build_toy_datasets(RainDomainSpec::synthetic_preset(), RainDomainSpec::real_preset(), SceneSpec{}, {4, 4, 2},
                       dir.path());
    built = true;
  }
  return dir.path();
}

double correlation(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.flatten().to(torch::kFloat64);
  auto y = b.flatten().to(torch::kFloat64);
  x = x - x.mean();
  y = y - y.mean();
  return (x * y).sum().item<double>() / std::sqrt((x * x).sum().item<double>() * (y * y).sum().item<double>());
}

}  // namespace

TEST(Datasets, ManifestSizes) {
  const auto data = load_dataset(toy_dataset() / "manifest.json", 32);
  EXPECT_EQ(data.paired.size(), 4u);
  EXPECT_EQ(data.unpaired.size(), 4u);
  // The directory is accepted in place of the manifest file.
  EXPECT_EQ(load_dataset(toy_dataset(), 32).paired.size(), 4u);
  EXPECT_EQ(load_test_pairs(toy_dataset() / "manifest.json").size(), 2u);
  EXPECT_EQ(load_heldout_unpaired_pairs(toy_dataset() / "manifest.json").size(), 4u);
}

TEST(Datasets, PairedCropsAligned) {
  const auto data = load_dataset(toy_dataset() / "manifest.json", 32);
  Rng rng(9);
  for (int i = 0; i < 40; ++i) {
    const auto s = data.paired.crop(static_cast<size_t>(i % 4), rng);
    EXPECT_EQ(s.rainy.height(), 32);
    EXPECT_GE(extract_rain(s.rainy, s.clean).tensor().min().item<double>(), -1.0 / 255.0 - 1e-7);
  }
}

TEST(Datasets, AlignedCropCorrelatesBetter) {
  const auto data = load_dataset(toy_dataset() / "manifest.json", 32);
  const auto& full = data.paired.full(0);
  Rng rng(4);
  const auto s = data.paired.crop(0, rng);
  // The same crop of the clean image shifted by a few pixels.
  int64_t top = -1, left = -1;
  for (int64_t y = 0; y + 32 <= full.clean.height() && top < 0; ++y)
    for (int64_t x = 0; x + 32 <= full.clean.width(); ++x)
      if (torch::equal(crop(full.clean, y, x, 32).tensor(), s.clean.tensor())) {
        top = y;
        left = x;
        break;
      }
  ASSERT_GE(top, 0);
  const int64_t shifted_top = top >= 8 ? top - 8 : top + 8;
  const Image other = crop(full.clean, shifted_top, left, 32);
  EXPECT_GT(correlation(s.rainy.tensor(), s.clean.tensor()), correlation(s.rainy.tensor(), other.tensor()));
}

TEST(Datasets, MissingFileNamed) {
  TempDir dir;
  build_toy_datasets(RainDomainSpec::synthetic_preset(), RainDomainSpec::real_preset(), SceneSpec{}, {2, 2, 1},
                     dir.path());
  fs::remove(dir.path() / "unpaired/rainy/0001.png");
  try {
    load_dataset(dir.path() / "manifest.json", 32);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("unpaired/rainy/0001.png"), std::string::npos);
  }
}

TEST(Datasets, EmptyUnpairedSplitRejected) {
  TempDir dir;
  auto m = build_toy_datasets(RainDomainSpec::synthetic_preset(), RainDomainSpec::real_preset(), SceneSpec{},
                              {2, 2, 1}, dir.path());
  m.unpaired.clear();
  m.save();
  EXPECT_THROW(load_dataset(dir.path() / "manifest.json", 32), DataError);
}

TEST(Datasets, PlainDirectoryLayout) {
  const auto data = load_dataset_dir(toy_dataset(), 48);
  EXPECT_EQ(data.paired.size(), 4u);
  EXPECT_EQ(data.unpaired.size(), 4u);
}

TEST(Batches, SingletonCollections) {
  const Image rainy = Image::filled(3, 8, 8, 0.7f), clean = Image::filled(3, 8, 8, 0.4f);
  const Image real = Image::filled(3, 8, 8, 0.9f);
  PairedCollection paired({{rainy, clean, "p"}}, 8);
  UnpairedCollection unpaired({{real, "u"}}, 8);
  Rng rng(1);
  const auto batch = sample_training_batch(paired, unpaired, 1, rng);
  EXPECT_TRUE(torch::equal(batch.rainy_syn[0], rainy.tensor()));
  EXPECT_TRUE(torch::equal(batch.clean_syn[0], clean.tensor()));
  EXPECT_TRUE(torch::equal(batch.rainy_real[0], real.tensor()));
}

TEST(Batches, AlignedAndDeterministic) {
  const auto data = load_dataset(toy_dataset() / "manifest.json", 32);
  Rng a(123), b(123);
  const auto x = sample_training_batch(data.paired, data.unpaired, 6, a);
  const auto y = sample_training_batch(data.paired, data.unpaired, 6, b);
  EXPECT_TRUE(torch::equal(x.rainy_syn, y.rainy_syn));
  EXPECT_TRUE(torch::equal(x.clean_syn, y.clean_syn));
  EXPECT_TRUE(torch::equal(x.rainy_real, y.rainy_real));
  EXPECT_EQ(x.rainy_syn.sizes(), (std::vector<int64_t>{6, 3, 32, 32}));
  EXPECT_GE((x.rainy_syn - x.clean_syn).min().item<double>(), -1.0 / 255.0 - 1e-7);
}

TEST(Pool, FillsThenReturnsFresh) {
  ImagePool pool(50, 0.5, 1);
  const auto x = torch::rand({3, 4, 4});
  EXPECT_TRUE(torch::equal(pool.query(x), x));
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_TRUE(torch::equal(pool.contents()[0], x));
}

TEST(Pool, CapacityOneSwap) {
  const auto a = torch::full({1, 2, 2}, 1.0f), b = torch::full({1, 2, 2}, 2.0f);
  // Swap probability 1 forces the swap branch.
  ImagePool pool(1, 1.0, 3);
  pool.query(a);
  EXPECT_TRUE(torch::equal(pool.query(b), a));
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_TRUE(torch::equal(pool.contents()[0], b));
}

TEST(Pool, FreshFractionIsHalf) {
  ImagePool pool(50, 0.5, 77);
  for (int i = 0; i < 50; ++i) pool.query(torch::full({1}, static_cast<float>(-1 - i)));
  const int n = 10000;
  int fresh = 0;
  for (int i = 0; i < n; ++i) {
    const auto x = torch::full({1}, static_cast<float>(i));
    fresh += torch::equal(pool.query(x), x);
    ASSERT_LE(pool.size(), 50u);
  }
  EXPECT_LE(std::abs(fresh - n * 0.5), 3 * std::sqrt(n * 0.25));
}

TEST(Pool, ContentsOnlyPastInputs) {
  ImagePool pool(5, 0.5, 8);
  std::vector<torch::Tensor> seen;
  for (int i = 0; i < 200; ++i) {
    const auto x = torch::full({1}, static_cast<float>(i));
    seen.push_back(x);
    const auto out = pool.query_batch(x.unsqueeze(0))[0];
    EXPECT_LE(out.item<float>(), static_cast<float>(i));
  }
  for (const auto& t : pool.contents()) {
    const float v = t.item<float>();
    EXPECT_EQ(v, std::round(v));
    EXPECT_GE(v, 0.0f);
  }
}
