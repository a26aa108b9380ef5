#pragma once

#include "jrgr/imaging.hpp"

namespace jrgr {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) on images clamped to [0, 1]; identical images give
// kPsnrCap.
double psnr(const Image& a, const Image& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

// Mean SSIM over all fully-contained Gaussian windows of the channel-mean
// grayscale images (inputs clamped to [0, 1]).
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

}  // namespace jrgr
