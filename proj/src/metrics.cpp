#include "jrgr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "jrgr/errors.hpp"

namespace jrgr {

double psnr(const Image& a, const Image& b) {
  if (a.empty() || !a.same_shape(b)) {
    throw DimensionError("psnr: shape mismatch");
  }
  const auto x = a.tensor().to(torch::kFloat64).clamp(0.0, 1.0);
  const auto y = b.tensor().to(torch::kFloat64).clamp(0.0, 1.0);
  const double mse = (x - y).pow(2).mean().item<double>();
  if (mse <= 0.0) {
    return kPsnrCap;
  }
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

using Plane = std::vector<double>;

Plane gray(const Image& img) {
  const auto g = img.tensor().to(torch::kFloat64).clamp(0.0, 1.0).mean(0).contiguous();
  const double* p = g.data_ptr<double>();
  return Plane(p, p + g.numel());
}

// Separable "valid" filtering: output is (h - n + 1) x (w - n + 1).
Plane filter_valid(const Plane& in, int64_t h, int64_t w, const std::vector<double>& k) {
  const auto n = static_cast<int64_t>(k.size());
  const int64_t ow = w - n + 1;
  const int64_t oh = h - n + 1;
  Plane rows(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += k[static_cast<size_t>(i)] * in[static_cast<size_t>(y * w + x + i)];
      rows[static_cast<size_t>(y * ow + x)] = acc;
    }
  }
  Plane out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i) acc += k[static_cast<size_t>(i)] * rows[static_cast<size_t>((y + i) * ow + x)];
      out[static_cast<size_t>(y * ow + x)] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& opt) {
  if (a.empty() || !a.same_shape(b)) {
    throw DimensionError("ssim: shape mismatch");
  }
  const int64_t h = a.height();
  const int64_t w = a.width();
  if (h < opt.window || w < opt.window) {
    throw SizeError("ssim: image smaller than the " + std::to_string(opt.window) + "-pixel window");
  }
  std::vector<double> k(static_cast<size_t>(opt.window));
  double sum = 0.0;
  const double c = (opt.window - 1) / 2.0;
  for (int i = 0; i < opt.window; ++i) {
    k[static_cast<size_t>(i)] = std::exp(-((i - c) * (i - c)) / (2.0 * opt.sigma * opt.sigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (auto& v : k) v /= sum;

  const Plane x = gray(a);
  const Plane y = gray(b);
  Plane xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const Plane mx = filter_valid(x, h, w, k);
  const Plane my = filter_valid(y, h, w, k);
  const Plane sxx = filter_valid(xx, h, w, k);
  const Plane syy = filter_valid(yy, h, w, k);
  const Plane sxy = filter_valid(xy, h, w, k);

  const double c1 = std::pow(opt.k1 * opt.data_range, 2);
  const double c2 = std::pow(opt.k2 * opt.data_range, 2);
  double total = 0.0;
  for (size_t i = 0; i < mx.size(); ++i) {
    const double var_x = sxx[i] - mx[i] * mx[i];
    const double var_y = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (var_x + var_y + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace jrgr
