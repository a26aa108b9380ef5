#pragma once

#include <filesystem>

#include <torch/torch.h>

#include "jrgr/rng.hpp"

namespace jrgr {

// Channel-first float image (C x H x W, C in {1, 3}). Displayable images
// live in [0, 1]; rain layers and intermediates may leave that range but
// are always finite.
class Image {
 public:
  Image() = default;
  // Takes a C x H x W tensor; converts to contiguous float32 and validates.
  explicit Image(torch::Tensor data);

  static Image filled(int64_t channels, int64_t height, int64_t width, float value);

  int64_t channels() const { return data_.size(0); }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }
  bool empty() const { return !data_.defined(); }

  const torch::Tensor& tensor() const { return data_; }
  float at(int64_t c, int64_t y, int64_t x) const;

  bool same_shape(const Image& other) const;

 private:
  torch::Tensor data_;
};

// Reads an 8-bit PNG or JPEG (grayscale or RGB, no alpha). Values are
// divided by 255.
Image load_image(const std::filesystem::path& path);

// Clamps to [0, 1], quantizes with round-half-up on v * 255 and writes an
// 8-bit PNG.
void save_image(const Image& img, const std::filesystem::path& path);

// The quantization rule used by save_image, exposed for golden tests.
std::uint8_t quantize(float v);

// O = B + R, unclamped. A single-channel rain layer is broadcast over a
// three-channel background.
Image compose_rainy(const Image& background, const Image& rain);

// R = O - B.
Image extract_rain(const Image& rainy, const Image& background);

// Square crop at a uniformly drawn offset.
Image random_crop(const Image& img, int64_t size, Rng& rng);
Image crop(const Image& img, int64_t top, int64_t left, int64_t size);

// Channel mean, keeping a leading channel dimension of 1.
Image to_luminance(const Image& img);

}  // namespace jrgr
