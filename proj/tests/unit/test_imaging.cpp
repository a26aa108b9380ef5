#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "jrgr/errors.hpp"
#include "jrgr/imaging.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace jrgr;

TEST(Imaging, LoadWhitePixel) {
  TempDir dir;
  const auto path = dir.path() / "white.png";
  cv::imwrite(path.string(), cv::Mat(1, 1, CV_8UC3, cv::Scalar(255, 255, 255)));
  const Image img = load_image(path);
  ASSERT_EQ(img.channels(), 3);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(img.at(c, 0, 0), 1.0f);
}

TEST(Imaging, LoadBlackPixel) {
  TempDir dir;
  const auto path = dir.path() / "black.png";
  cv::imwrite(path.string(), cv::Mat(1, 1, CV_8UC3, cv::Scalar(0, 0, 0)));
  EXPECT_EQ(load_image(path).tensor().abs().max().item<float>(), 0.0f);
}

TEST(Imaging, LoadGrayKeepsOneChannel) {
  TempDir dir;
  const auto path = dir.path() / "gray.png";
  cv::imwrite(path.string(), cv::Mat(2, 2, CV_8UC1, cv::Scalar(128)));
  const Image img = load_image(path);
  ASSERT_EQ(img.channels(), 1);
  const float expected = static_cast<float>(128.0 / 255.0);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) EXPECT_NEAR(img.at(0, y, x), expected, 1e-7);
  EXPECT_NEAR(expected, 0.50196, 1e-5);
}

TEST(Imaging, LoadKeepsRgbOrder) {
  TempDir dir;
  const auto path = dir.path() / "red.png";
  // OpenCV stores BGR; a pure red pixel is (0, 0, 255).
  cv::imwrite(path.string(), cv::Mat(1, 1, CV_8UC3, cv::Scalar(0, 0, 255)));
  const Image img = load_image(path);
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(2, 0, 0), 0.0f);
}

TEST(Imaging, LoadErrors) {
  TempDir dir;
  EXPECT_THROW(load_image(dir.path() / "missing.png"), IoError);
  const auto deep = dir.path() / "deep.png";
  cv::imwrite(deep.string(), cv::Mat(2, 2, CV_16UC3, cv::Scalar(1000, 1000, 1000)));
  EXPECT_THROW(load_image(deep), FormatError);
  const auto alpha = dir.path() / "alpha.png";
  cv::imwrite(alpha.string(), cv::Mat(2, 2, CV_8UC4, cv::Scalar(1, 2, 3, 4)));
  EXPECT_THROW(load_image(alpha), FormatError);
}

TEST(Imaging, QuantizeHalfUp) {
  EXPECT_EQ(quantize(0.5f), 128);
  EXPECT_EQ(quantize(1.3f), 255);
  EXPECT_EQ(quantize(-0.2f), 0);
  for (int k = 0; k <= 255; ++k) EXPECT_EQ(quantize(static_cast<float>(k / 255.0)), k);
}

TEST(Imaging, SaveGolden) {
  TempDir dir;
  const auto path = dir.path() / "half.png";
  save_image(Image::filled(3, 4, 4, 0.5f), path);
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(raw.type(), CV_8UC3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(raw.at<cv::Vec3b>(y, x)[c], 128);

  save_image(Image::filled(1, 2, 2, 1.3f), path);
  EXPECT_EQ(cv::imread(path.string(), cv::IMREAD_UNCHANGED).at<uchar>(0, 0), 255);
  save_image(Image::filled(1, 2, 2, -0.2f), path);
  EXPECT_EQ(cv::imread(path.string(), cv::IMREAD_UNCHANGED).at<uchar>(0, 0), 0);
}

TEST(Imaging, SaveLoadRoundTrip) {
  TempDir dir;
  torch::manual_seed(3);
  const Image x(torch::rand({3, 17, 23}) * 1.4 - 0.2);
  save_image(x, dir.path() / "rt.png");
  const Image y = load_image(dir.path() / "rt.png");
  const double err = (y.tensor() - x.tensor().clamp(0, 1)).abs().max().item<double>();
  EXPECT_LE(err, 1.0 / 510.0 + 1e-7);
}

TEST(Imaging, SaveToUnwritablePath) {
  // A regular file sits where the parent directory should be.
  TempDir dir;
  std::ofstream(dir.path() / "blocker") << "x";
  EXPECT_THROW(save_image(Image::filled(3, 2, 2, 0.1f), dir.path() / "blocker" / "y.png"), IoError);
}

TEST(Imaging, ComposeExamples) {
  EXPECT_NEAR(compose_rainy(Image::filled(3, 4, 4, 0.5f), Image::filled(3, 4, 4, 0.0f)).at(1, 2, 2), 0.5, 1e-7);
  EXPECT_NEAR(compose_rainy(Image::filled(3, 4, 4, 0.4f), Image::filled(3, 4, 4, 0.3f)).at(0, 0, 0), 0.7, 1e-6);
  EXPECT_NEAR(compose_rainy(Image::filled(3, 4, 4, 0.9f), Image::filled(3, 4, 4, 0.4f)).at(2, 3, 3), 1.3, 1e-6);
  EXPECT_THROW(compose_rainy(Image::filled(3, 4, 4, 0.f), Image::filled(3, 4, 5, 0.f)), DimensionError);
}

TEST(Imaging, ComposeBroadcastsLuminanceRain) {
  const Image o = compose_rainy(Image::filled(3, 4, 4, 0.2f), Image::filled(1, 4, 4, 0.1f));
  ASSERT_EQ(o.channels(), 3);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(o.at(c, 1, 1), 0.3, 1e-6);
}

TEST(Imaging, ExtractExamples) {
  const Image b = Image::filled(3, 4, 4, 0.4f);
  EXPECT_EQ(extract_rain(b, b).tensor().abs().max().item<float>(), 0.0f);
  EXPECT_NEAR(extract_rain(Image::filled(3, 4, 4, 0.7f), b).at(0, 1, 1), 0.3, 1e-6);
  EXPECT_THROW(extract_rain(b, Image::filled(1, 4, 4, 0.f)), DimensionError);
}

TEST(Imaging, ComposeExtractRoundTrip) {
  torch::manual_seed(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Image o(torch::rand({3, 16, 16}) * 2 - 0.5);
    const Image b(torch::rand({3, 16, 16}));
    const Image back = compose_rainy(b, extract_rain(o, b));
    EXPECT_LT((back.tensor() - o.tensor()).abs().max().item<double>(), 1e-6);
  }
}

TEST(Imaging, RejectsNonFinite) {
  auto t = torch::zeros({3, 2, 2});
  t[0][0][0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(Image{t}, Error);
  EXPECT_THROW(Image{torch::zeros({2, 2, 2})}, Error);
}

TEST(Imaging, CropIdentityWhenSizesMatch) {
  torch::manual_seed(1);
  const Image img(torch::rand({3, 32, 32}));
  Rng rng(5);
  EXPECT_TRUE(torch::equal(random_crop(img, 32, rng).tensor(), img.tensor()));
}

TEST(Imaging, CropTooLarge) {
  Rng rng(5);
  EXPECT_THROW(random_crop(Image::filled(3, 10, 12, 0.f), 11, rng), SizeError);
}

TEST(Imaging, CropOffsetsUniform) {
  // A 5x5 image cropped to 4x4 has four offsets; each pixel value encodes
  // its position so the top-left crop pixel identifies the offset.
  auto t = torch::arange(25, torch::kFloat32).reshape({1, 5, 5}) / 25.0;
  const Image img(t);
  Rng rng(2024);
  std::array<int, 4> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const float v = random_crop(img, 4, rng).at(0, 0, 0) * 25.0f;
    const int idx = static_cast<int>(std::lround(v));
    const int top = idx / 5, left = idx % 5;
    ASSERT_LE(top, 1);
    ASSERT_LE(left, 1);
    ++counts[top * 2 + left];
  }
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  double chi2 = 0;
  for (int c : counts) {
    EXPECT_LE(std::abs(c - n * 0.25), 3 * sigma);
    chi2 += (c - n * 0.25) * (c - n * 0.25) / (n * 0.25);
  }
  // 99.9th percentile of chi-square with 3 degrees of freedom.
  EXPECT_LT(chi2, 16.27);
}

TEST(Imaging, CropDeterministic) {
  torch::manual_seed(2);
  const Image img(torch::rand({3, 40, 40}));
  Rng a(77), b(77);
  EXPECT_TRUE(torch::equal(random_crop(img, 16, a).tensor(), random_crop(img, 16, b).tensor()));
}

TEST(Imaging, Luminance) {
  auto t = torch::stack({torch::full({2, 2}, 0.3), torch::full({2, 2}, 0.6), torch::full({2, 2}, 0.9)});
  const Image l = to_luminance(Image(t));
  ASSERT_EQ(l.channels(), 1);
  EXPECT_NEAR(l.at(0, 1, 1), 0.6, 1e-6);
}
