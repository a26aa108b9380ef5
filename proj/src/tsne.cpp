#include "jrgr/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "jrgr/errors.hpp"

namespace jrgr {

double effective_perplexity(double requested, int64_t n) {
  return std::min(requested, std::max(1.0, static_cast<double>(n - 1) / 3.0));
}

torch::Tensor pca_project(const torch::Tensor& features, int64_t k) {
  auto x = features.to(torch::kFloat64);
  x = x - x.mean(0, /*keepdim=*/true);
  k = std::min({k, x.size(0), x.size(1)});
  auto [u, s, vh] = torch::linalg_svd(x, /*full_matrices=*/false);
  using torch::indexing::Slice;
  return u.index({Slice(), Slice(0, k)}) * s.index({Slice(0, k)});
}

namespace {

// Row-conditional affinities by bisection on the Gaussian precision so that
// each row's entropy matches log(perplexity).
std::vector<double> conditional_affinities(const std::vector<double>& d2, int64_t n, double perplexity) {
  std::vector<double> p(static_cast<size_t>(n * n), 0.0);
  const double target = std::log(perplexity);
  for (int64_t i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double* row = &p[static_cast<size_t>(i * n)];
    const double* dist = &d2[static_cast<size_t>(i * n)];
    for (int step = 0; step < 200; ++step) {
      double min_d = std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < n; ++j) {
        if (j != i) min_d = std::min(min_d, dist[j]);
      }
      double sum = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (dist[j] - min_d));
        sum += row[j];
      }
      double weighted = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        row[j] /= sum;
        weighted += row[j] * (dist[j] - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
  }
  return p;
}

}  // namespace

std::vector<std::array<double, 2>> tsne_embed(const torch::Tensor& features, const TsneOptions& opt) {
  if (features.dim() != 2 || features.size(0) < 2) {
    throw DataError("t-SNE needs at least two feature rows");
  }
  const int64_t n = features.size(0);
  if (n > kMaxTsnePoints) {
    throw DataError("exact t-SNE is limited to " + std::to_string(kMaxTsnePoints) + " points");
  }
  const auto reduced = pca_project(features, opt.pca_dims).contiguous();
  const int64_t d = reduced.size(1);
  const double* x = reduced.data_ptr<double>();

  std::vector<double> d2(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < d; ++k) {
        const double diff = x[i * d + k] - x[j * d + k];
        s += diff * diff;
      }
      d2[static_cast<size_t>(i * n + j)] = d2[static_cast<size_t>(j * n + i)] = s;
    }
  }
  auto cond = conditional_affinities(d2, n, effective_perplexity(opt.perplexity, n));
  std::vector<double> p(cond.size());
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      const auto ij = static_cast<size_t>(i * n + j), ji = static_cast<size_t>(j * n + i);
      p[ij] = std::max((cond[ij] + cond[ji]) / (2.0 * static_cast<double>(n)), 1e-12);
    }
  }

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  std::vector<double> y(static_cast<size_t>(2 * n)), velocity(y.size(), 0.0), gains(y.size(), 1.0);
  for (auto& v : y) v = init(rng);

  std::vector<double> num(static_cast<size_t>(n * n));
  std::vector<double> grad(y.size());
  for (int it = 0; it < opt.iterations; ++it) {
    const double exaggeration = it < opt.exaggeration_iterations ? opt.early_exaggeration : 1.0;
    const double momentum = it < opt.exaggeration_iterations ? 0.5 : 0.8;
    double z = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = i + 1; j < n; ++j) {
        const double dx = y[2 * i] - y[2 * j];
        const double dy = y[2 * i + 1] - y[2 * j + 1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[static_cast<size_t>(i * n + j)] = num[static_cast<size_t>(j * n + i)] = q;
        z += 2.0 * q;
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num[static_cast<size_t>(i * n + j)];
        const double mult = (exaggeration * p[static_cast<size_t>(i * n + j)] - q / z) * q;
        grad[2 * i] += 4.0 * mult * (y[2 * i] - y[2 * j]);
        grad[2 * i + 1] += 4.0 * mult * (y[2 * i + 1] - y[2 * j + 1]);
      }
    }
    for (size_t k = 0; k < y.size(); ++k) {
      const bool same_sign = (grad[k] > 0) == (velocity[k] > 0);
      gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
      velocity[k] = momentum * velocity[k] - opt.learning_rate * gains[k] * grad[k];
      y[k] += velocity[k];
    }
    double mx = 0.0, my = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= n;
    my /= n;
    for (int64_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
  }
  std::vector<std::array<double, 2>> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = {y[2 * i], y[2 * i + 1]};
  return out;
}

}  // namespace jrgr
