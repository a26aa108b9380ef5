#include "jrgr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "jrgr/errors.hpp"

namespace jrgr {
namespace fs = std::filesystem;

MetricResult score_pairs(const std::vector<std::pair<Image, Image>>& pairs, const std::vector<std::string>& ids) {
  MetricResult r;
  for (size_t i = 0; i < pairs.size(); ++i) {
    MetricResult::PerImage p;
    p.id = i < ids.size() ? ids[i] : std::to_string(i);
    p.psnr = psnr(pairs[i].first, pairs[i].second);
    p.ssim = ssim(pairs[i].first, pairs[i].second);
    r.psnr += p.psnr;
    r.ssim += p.ssim;
    r.images.push_back(std::move(p));
  }
  if (!pairs.empty()) {
    r.psnr /= static_cast<double>(pairs.size());
    r.ssim /= static_cast<double>(pairs.size());
  }
  return r;
}

MetricResult evaluate_removal(ImageNetImpl& removal, int64_t size_multiple, const std::vector<PairedSample>& pairs) {
  std::vector<std::pair<Image, Image>> scored;
  std::vector<std::string> ids;
  for (const auto& s : pairs) {
    scored.emplace_back(remove_rain(removal, size_multiple, s.rainy), s.clean);
    ids.push_back(s.id);
  }
  return score_pairs(scored, ids);
}

MetricResult evaluate_identity(const std::vector<PairedSample>& pairs) {
  std::vector<std::pair<Image, Image>> scored;
  std::vector<std::string> ids;
  for (const auto& s : pairs) {
    scored.emplace_back(s.rainy, s.clean);
    ids.push_back(s.id);
  }
  return score_pairs(scored, ids);
}

std::string to_string(RainLabel label) {
  switch (label) {
    case RainLabel::kDecomposedSyn: return "decomposed-syn";
    case RainLabel::kGeneratedSyn: return "generated-syn";
    case RainLabel::kDecomposedReal: return "decomposed-real";
    case RainLabel::kGeneratedReal: return "generated-real";
  }
  return "?";
}

torch::Tensor rain_features(const std::vector<torch::Tensor>& rain_layers) {
  std::vector<torch::Tensor> rows;
  for (const auto& r : rain_layers) {
    auto x = r.detach().to(torch::kFloat64);
    if (x.dim() == 3) x = x.unsqueeze(0);
    x = x.mean(1, /*keepdim=*/true);
    x = torch::adaptive_avg_pool2d(x, {kEmbeddingSide, kEmbeddingSide});
    rows.push_back(x.reshape({x.size(0), -1}));
  }
  auto f = torch::cat(rows, 0);
  auto mean = f.mean(0, true);
  auto std = f.std(0, /*unbiased=*/false, true);
  return torch::where(std > 1e-12, (f - mean) / std.clamp_min(1e-12), torch::zeros_like(f));
}

namespace {

std::vector<size_t> draw_indices(size_t available, int64_t n, Rng& rng) {
  std::vector<size_t> idx(available);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<size_t>(n));
  return idx;
}

}  // namespace

EmbeddingResult summarize_embedding(std::vector<std::array<double, 2>> points, std::vector<RainLabel> labels) {
  EmbeddingResult e;
  e.points = std::move(points);
  e.labels = std::move(labels);
  std::array<double, 4> counts{};
  for (size_t i = 0; i < e.points.size(); ++i) {
    const auto k = static_cast<size_t>(e.labels[i]);
    e.centroids[k][0] += e.points[i][0];
    e.centroids[k][1] += e.points[i][1];
    counts[k] += 1.0;
  }
  for (size_t k = 0; k < 4; ++k) {
    if (counts[k] > 0) {
      e.centroids[k][0] /= counts[k];
      e.centroids[k][1] /= counts[k];
    }
  }
  for (size_t a = 0; a < 4; ++a) {
    for (size_t b = 0; b < 4; ++b) {
      e.distances[a][b] = a == b ? 0.0
                                 : std::hypot(e.centroids[a][0] - e.centroids[b][0],
                                              e.centroids[a][1] - e.centroids[b][1]);
    }
  }
  return e;
}

EmbeddingResult collect_rain_embeddings(const JrgrModel& model, const PairedCollection& paired,
                                        const UnpairedCollection& unpaired, int64_t n_per_class,
                                        const TsneOptions& options) {
  if (n_per_class < 1 || n_per_class > kMaxEmbeddingPerClass) {
    throw DataError("n_per_class must lie in [1, " + std::to_string(kMaxEmbeddingPerClass) + "]");
  }
  if (static_cast<int64_t>(paired.size()) < n_per_class || static_cast<int64_t>(unpaired.size()) < n_per_class) {
    throw DataError("requested " + std::to_string(n_per_class) + " samples per class but only " +
                    std::to_string(std::min(paired.size(), unpaired.size())) + " are available");
  }
  Rng rng(derive_seed(options.seed, "embedding"));
  const auto syn_idx = draw_indices(paired.size(), n_per_class, rng);
  const auto real_idx = draw_indices(unpaired.size(), n_per_class, rng);

  torch::NoGradGuard no_grad;
  for (const auto& [name, net] : model.named_networks()) net->eval();
  std::array<std::vector<torch::Tensor>, 4> layers;
  const auto dtype = model.removal_syn->parameters().front().scalar_type();
  constexpr size_t kChunk = 16;
  for (size_t start = 0; start < syn_idx.size(); start += kChunk) {
    const size_t end = std::min(syn_idx.size(), start + kChunk);
    std::vector<torch::Tensor> syn, real;
    for (size_t i = start; i < end; ++i) {
      syn.push_back(paired.crop(syn_idx[i], rng).rainy.tensor());
      real.push_back(unpaired.crop(real_idx[i], rng).rainy.tensor());
    }
    const auto s2r = s2r_forward(model, torch::stack(syn).to(dtype));
    const auto r2s = r2s_forward(model, torch::stack(real).to(dtype));
    layers[static_cast<size_t>(RainLabel::kDecomposedSyn)].push_back(s2r.rain1);
    layers[static_cast<size_t>(RainLabel::kGeneratedSyn)].push_back(r2s.rain2);
    layers[static_cast<size_t>(RainLabel::kDecomposedReal)].push_back(r2s.rain1);
    layers[static_cast<size_t>(RainLabel::kGeneratedReal)].push_back(s2r.rain2);
  }
  for (const auto& [name, net] : model.named_networks()) net->train();

  std::vector<torch::Tensor> all;
  std::vector<RainLabel> labels;
  for (auto label : kRainLabels) {
    for (const auto& t : layers[static_cast<size_t>(label)]) {
      all.push_back(t);
      for (int64_t i = 0; i < t.size(0); ++i) labels.push_back(label);
    }
  }
  auto points = tsne_embed(rain_features(all), options);
  return summarize_embedding(std::move(points), std::move(labels));
}

Image image_grid(const std::vector<Image>& panels) {
  if (panels.empty()) {
    throw DimensionError("image_grid needs at least one panel");
  }
  std::vector<torch::Tensor> cols;
  for (const auto& p : panels) {
    if (p.height() != panels.front().height() || p.width() != panels.front().width()) {
      throw DimensionError("image_grid panels must share a size");
    }
    cols.push_back(p.channels() == 1 ? p.tensor().expand({3, p.height(), p.width()}) : p.tensor());
  }
  return Image(torch::cat(cols, 2));
}

void write_tsne_csv(const EmbeddingResult& e, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(10) << "x,y,label\n";
  for (size_t i = 0; i < e.points.size(); ++i) {
    out << e.points[i][0] << ',' << e.points[i][1] << ',' << to_string(e.labels[i]) << '\n';
  }
}

Image render_scatter(const EmbeddingResult& e, int64_t size) {
  auto canvas = torch::ones({3, size, size});
  if (e.points.empty()) return Image(canvas);
  double x0 = e.points[0][0], x1 = x0, y0 = e.points[0][1], y1 = y0;
  for (const auto& p : e.points) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-9});
  const double margin = 0.05 * static_cast<double>(size);
  const double scale = (static_cast<double>(size) - 2.0 * margin) / span;
  static constexpr float kColors[4][3] = {{0.12f, 0.47f, 0.71f}, {0.55f, 0.80f, 0.95f}, {0.84f, 0.15f, 0.16f},
                                          {1.00f, 0.60f, 0.55f}};
  float* px = canvas.data_ptr<float>();
  for (size_t i = 0; i < e.points.size(); ++i) {
    const auto cx = static_cast<int64_t>(margin + (e.points[i][0] - x0) * scale);
    const auto cy = static_cast<int64_t>(margin + (y1 - e.points[i][1]) * scale);
    const auto* color = kColors[static_cast<size_t>(e.labels[i])];
    for (int64_t dy = -2; dy <= 2; ++dy) {
      for (int64_t dx = -2; dx <= 2; ++dx) {
        const int64_t y = cy + dy, x = cx + dx;
        if (y < 0 || y >= size || x < 0 || x >= size) continue;
        for (int64_t c = 0; c < 3; ++c) px[(c * size + y) * size + x] = color[c];
      }
    }
  }
  return Image(canvas);
}

void emit_report(const ReportInputs& inputs, const fs::path& out_dir) {
  if (inputs.methods.empty()) {
    throw ValidationError("emit_report needs at least one metric result");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create report directory: " + out_dir.string());

  {
    std::ofstream csv(out_dir / "metrics.csv");
    if (!csv) throw IoError("cannot write metrics.csv in " + out_dir.string());
    csv << std::setprecision(10) << "method,image,psnr,ssim\n";
    for (const auto& [method, r] : inputs.methods) {
      for (const auto& p : r.images) csv << method << ',' << p.id << ',' << p.psnr << ',' << p.ssim << '\n';
      csv << method << ",mean," << r.psnr << ',' << r.ssim << '\n';
    }
  }
  {
    std::ofstream md(out_dir / "table.md");
    if (!md) throw IoError("cannot write table.md in " + out_dir.string());
    md << "| Method | PSNR | SSIM |\n|---|---|---|\n" << std::fixed;
    for (const auto& [method, r] : inputs.methods) {
      md << "| " << method << " | " << std::setprecision(2) << r.psnr << " | " << std::setprecision(4) << r.ssim
         << " |\n";
    }
  }
  if (inputs.bundle) {
    save_image(image_grid(bundle_panels(*inputs.bundle)), out_dir / "grid.png");
  }
  if (inputs.embedding) {
    write_tsne_csv(*inputs.embedding, out_dir / "tsne_points.csv");
    save_image(render_scatter(*inputs.embedding), out_dir / "tsne.png");
  }
}

}  // namespace jrgr
