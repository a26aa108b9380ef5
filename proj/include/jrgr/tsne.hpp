#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace jrgr {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  int64_t pca_dims = 50;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 0;
};

inline constexpr int64_t kMaxTsnePoints = 2000;

// Perplexity actually used for n points: min(requested, (n - 1) / 3).
double effective_perplexity(double requested, int64_t n);

// Projects the rows of `features` (N x D) onto their top-k principal
// components (k = min(k, N, D)).
torch::Tensor pca_project(const torch::Tensor& features, int64_t k);

// Exact (O(N^2)) t-SNE to two dimensions, with PCA preprocessing.
std::vector<std::array<double, 2>> tsne_embed(const torch::Tensor& features, const TsneOptions& options = {});

}  // namespace jrgr
