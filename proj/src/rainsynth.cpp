#include "jrgr/rainsynth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <iomanip>

#include "jrgr/errors.hpp"
#include "jrgr/json_util.hpp"

namespace jrgr {
namespace fs = std::filesystem;

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) {
    throw ValidationError("rain spec field '" + field + "' " + what);
  }
}

void require_range(const Range& r, const std::string& field, bool non_negative) {
  require(std::isfinite(r.min) && std::isfinite(r.max), field, "must be finite");
  require(r.min <= r.max, field, "must satisfy min <= max");
  if (non_negative) {
    require(r.min >= 0.0, field, "must be non-negative");
  }
}

// Catmull-Rom weights for fractional offset t in [0, 1).
std::array<double, 4> cubic_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
          0.5 * (t3 - t2)};
}

// Bicubic upsampling of a g x g grid to size x size, grid samples at cell
// centres, edges clamped.
std::vector<float> upsample_grid(const std::vector<double>& grid, int64_t g, int64_t size) {
  std::vector<float> out(static_cast<size_t>(size * size));
  auto at = [&](int64_t y, int64_t x) {
    y = std::clamp<int64_t>(y, 0, g - 1);
    x = std::clamp<int64_t>(x, 0, g - 1);
    return grid[static_cast<size_t>(y * g + x)];
  };
  for (int64_t y = 0; y < size; ++y) {
    const double gy = (y + 0.5) * static_cast<double>(g) / size - 0.5;
    const auto y0 = static_cast<int64_t>(std::floor(gy));
    const auto wy = cubic_weights(gy - y0);
    for (int64_t x = 0; x < size; ++x) {
      const double gx = (x + 0.5) * static_cast<double>(g) / size - 0.5;
      const auto x0 = static_cast<int64_t>(std::floor(gx));
      const auto wx = cubic_weights(gx - x0);
      double v = 0.0;
      for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 4; ++k) {
          v += wy[i] * wx[k] * at(y0 - 1 + i, x0 - 1 + k);
        }
      }
      out[static_cast<size_t>(y * size + x)] = static_cast<float>(v);
    }
  }
  return out;
}

std::vector<float> noise_field(int64_t grid, int64_t size, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> g(static_cast<size_t>(grid * grid));
  for (auto& v : g) {
    v = u(rng);
  }
  auto field = upsample_grid(g, grid, size);
  for (auto& v : field) {
    v = std::clamp(v, 0.0f, 1.0f);
  }
  return field;
}

void gaussian_blur(std::vector<float>& img, int64_t size, double sigma) {
  if (sigma <= 0.0) {
    return;
  }
  const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double k = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<size_t>(i + radius)] = k;
    sum += k;
  }
  for (auto& k : kernel) {
    k /= sum;
  }
  auto reflect = [size](int64_t i) {
    while (i < 0 || i >= size) {
      i = i < 0 ? -i - 1 : 2 * size - i - 1;
    }
    return i;
  };
  std::vector<float> tmp(img.size());
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int64_t i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<size_t>(i + radius)] * img[static_cast<size_t>(y * size + reflect(x + i))];
      }
      tmp[static_cast<size_t>(y * size + x)] = static_cast<float>(acc);
    }
  }
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int64_t i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(reflect(y + i) * size + x)];
      }
      img[static_cast<size_t>(y * size + x)] = static_cast<float>(acc);
    }
  }
}

// Adds an anti-aliased segment: coverage falls off linearly over one pixel
// beyond the half width.
void draw_streak(std::vector<float>& img, int64_t size, double cx, double cy, double angle_deg,
                 double length, double width, double intensity) {
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::sin(theta) * 0.5 * length;
  const double dy = std::cos(theta) * 0.5 * length;
  const double ax = cx - dx, ay = cy - dy, bx = cx + dx, by = cy + dy;
  const double half = 0.5 * width;
  const double pad = half + 1.0;
  const auto x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(std::min(ax, bx) - pad)));
  const auto x1 = std::min<int64_t>(size - 1, static_cast<int64_t>(std::ceil(std::max(ax, bx) + pad)));
  const auto y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(std::min(ay, by) - pad)));
  const auto y1 = std::min<int64_t>(size - 1, static_cast<int64_t>(std::ceil(std::max(ay, by) + pad)));
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  for (int64_t y = y0; y <= y1; ++y) {
    for (int64_t x = x0; x <= x1; ++x) {
      const double px = x + 0.5 - ax, py = y + 0.5 - ay;
      const double t = len2 > 0.0 ? std::clamp((px * vx + py * vy) / len2, 0.0, 1.0) : 0.0;
      const double ex = px - t * vx, ey = py - t * vy;
      const double d = std::sqrt(ex * ex + ey * ey);
      const double coverage = std::clamp(half + 0.5 - d, 0.0, 1.0);
      if (coverage > 0.0) {
        img[static_cast<size_t>(y * size + x)] += static_cast<float>(intensity * coverage);
      }
    }
  }
}

Image to_image(const std::vector<float>& plane, int64_t size) {
  auto t = torch::from_blob(const_cast<float*>(plane.data()), {1, size, size}, torch::kFloat32).clone();
  return Image(t);
}

}  // namespace

void RainDomainSpec::validate() const {
  require(std::isfinite(angle_mean), "angle_mean", "must be finite");
  require(std::isfinite(angle_std) && angle_std >= 0.0, "angle_std", "must be >= 0");
  require(std::isfinite(density) && density >= 0.0, "density", "must be >= 0");
  require_range(length, "length_range", true);
  require_range(width, "width_range", true);
  require_range(intensity, "intensity_range", true);
  require(intensity.max <= 1.0, "intensity_range", "must lie in [0, 1]");
  require(std::isfinite(blur_sigma) && blur_sigma >= 0.0, "blur_sigma", "must be >= 0");
  require(std::isfinite(veil_strength) && veil_strength >= 0.0 && veil_strength <= 1.0,
          "veil_strength", "must lie in [0, 1]");
}

RainDomainSpec RainDomainSpec::synthetic_preset() {
  RainDomainSpec s;
  s.angle_std = 1.0;
  s.blur_sigma = 0.5;
  s.veil_strength = 0.0;
  s.seed = 101;
  return s;
}

RainDomainSpec RainDomainSpec::real_preset() {
  RainDomainSpec s;
  s.angle_std = 8.0;
  s.blur_sigma = 1.5;
  s.veil_strength = 0.15;
  s.seed = 202;
  return s;
}

void SceneSpec::validate() const {
  if (size < 32) {
    throw ValidationError("scene field 'size' must be >= 32");
  }
  if (texture == TextureKind::kPhoto && photo_dir.empty()) {
    throw ValidationError("scene field 'photo_dir' required for photo textures");
  }
}

RainSample synth_rain_sample(const RainDomainSpec& spec, int64_t size, Rng& rng) {
  spec.validate();
  if (size < 32) {
    throw SizeError("rain layer size must be >= 32");
  }
  std::vector<float> plane(static_cast<size_t>(size * size), 0.0f);

  const double mean = spec.density * static_cast<double>(size * size);
  int64_t count = 0;
  if (mean > 0.0) {
    std::poisson_distribution<int64_t> poisson(mean);
    count = poisson(rng);
  }
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(size));
  std::normal_distribution<double> angle(spec.angle_mean, spec.angle_std);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in_range = [&](const Range& r) { return r.min + (r.max - r.min) * unit(rng); };
  for (int64_t i = 0; i < count; ++i) {
    const double cx = pos(rng);
    const double cy = pos(rng);
    const double a = spec.angle_std > 0.0 ? angle(rng) : spec.angle_mean;
    const double len = in_range(spec.length);
    const double wid = in_range(spec.width);
    const double inten = in_range(spec.intensity);
    draw_streak(plane, size, cx, cy, a, len, wid, inten);
  }
  gaussian_blur(plane, size, spec.blur_sigma);

  // The veil grid is always drawn so the stream position does not depend on
  // veil_strength.
  const auto veil = noise_field(4, size, rng);
  for (size_t i = 0; i < plane.size(); ++i) {
    plane[i] = std::max(0.0f, plane[i]) + static_cast<float>(spec.veil_strength) * veil[i];
  }
  return {to_image(plane, size), count};
}

Image synth_rain_layer(const RainDomainSpec& spec, int64_t size, Rng& rng) {
  return synth_rain_sample(spec, size, rng).layer;
}

namespace {

Image noise_background(int64_t size, Rng& rng) {
  auto data = torch::empty({3, size, size});
  float* out = data.data_ptr<float>();
  for (int64_t c = 0; c < 3; ++c) {
    const auto coarse = noise_field(4, size, rng);
    const auto mid = noise_field(8, size, rng);
    const auto fine = noise_field(16, size, rng);
    for (int64_t i = 0; i < size * size; ++i) {
      const auto k = static_cast<size_t>(i);
      out[c * size * size + i] = 0.55f * coarse[k] + 0.3f * mid[k] + 0.15f * fine[k];
    }
  }
  // A few flat rectangles give the scenes hard edges.
  std::uniform_int_distribution<int> n_rects(2, 4);
  std::uniform_int_distribution<int64_t> coord(0, size - 1);
  std::uniform_real_distribution<float> color(0.0f, 1.0f);
  const int rects = n_rects(rng);
  for (int r = 0; r < rects; ++r) {
    int64_t ya = coord(rng), yb = coord(rng), xa = coord(rng), xb = coord(rng);
    if (ya > yb) std::swap(ya, yb);
    if (xa > xb) std::swap(xa, xb);
    const float rgb[3] = {color(rng), color(rng), color(rng)};
    for (int64_t c = 0; c < 3; ++c) {
      for (int64_t y = ya; y <= yb; ++y) {
        for (int64_t x = xa; x <= xb; ++x) {
          float& v = out[(c * size + y) * size + x];
          v = 0.4f * v + 0.6f * rgb[c];
        }
      }
    }
  }
  // Leave headroom above the background for additive rain.
  return Image(data * 0.75f + 0.05f);
}

Image photo_background(const SceneSpec& spec, Rng& rng) {
  std::vector<fs::path> files;
  if (fs::is_directory(spec.photo_dir)) {
    for (const auto& e : fs::directory_iterator(spec.photo_dir)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) {
        files.push_back(e.path());
      }
    }
  }
  if (files.empty()) {
    throw DataError("no clean images found in " + spec.photo_dir.string());
  }
  std::sort(files.begin(), files.end());
  std::uniform_int_distribution<size_t> pick(0, files.size() - 1);
  Image photo = load_image(files[pick(rng)]);
  if (photo.channels() == 1) {
    photo = Image(photo.tensor().expand({3, photo.height(), photo.width()}));
  }
  return random_crop(photo, spec.size, rng);
}

}  // namespace

Image synth_background(const SceneSpec& spec, Rng& rng) {
  spec.validate();
  const int64_t n = spec.size;
  switch (spec.texture) {
    case TextureKind::kGradient: {
      auto ramp = torch::linspace(0.0, 1.0, n).view({1, n, 1});
      return Image(ramp.expand({3, n, n}));
    }
    case TextureKind::kChecker: {
      auto idx = torch::arange(n, torch::kLong).div(kCheckerBlock, "floor");
      auto board = (idx.view({n, 1}) + idx.view({1, n})).remainder(2).to(torch::kFloat32);
      return Image(board.unsqueeze(0).expand({3, n, n}));
    }
    case TextureKind::kNoise:
      return noise_background(n, rng);
    case TextureKind::kPhoto:
      return photo_background(spec, rng);
  }
  throw ValidationError("unknown texture kind");
}

std::string to_string(TextureKind kind) {
  switch (kind) {
    case TextureKind::kGradient: return "gradient";
    case TextureKind::kChecker: return "checker";
    case TextureKind::kNoise: return "noise";
    case TextureKind::kPhoto: return "photo";
  }
  return "noise";
}

TextureKind texture_from_string(const std::string& name) {
  if (name == "gradient") return TextureKind::kGradient;
  if (name == "checker") return TextureKind::kChecker;
  if (name == "noise") return TextureKind::kNoise;
  if (name == "photo") return TextureKind::kPhoto;
  throw ValidationError("scene field 'texture' has unknown value '" + name + "'");
}

void to_json(nlohmann::json& j, const RainDomainSpec& s) {
  j = {{"angle_mean", s.angle_mean},
       {"angle_std", s.angle_std},
       {"density", s.density},
       {"length_range", {s.length.min, s.length.max}},
       {"width_range", {s.width.min, s.width.max}},
       {"intensity_range", {s.intensity.min, s.intensity.max}},
       {"blur_sigma", s.blur_sigma},
       {"veil_strength", s.veil_strength},
       {"seed", s.seed}};
}

namespace {

void read_range(const nlohmann::json& j, const char* key, Range& r) {
  if (!j.contains(key)) {
    return;
  }
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ValidationError(std::string("rain spec field '") + key + "' must be [min, max]");
  }
  r.min = v[0].get<double>();
  r.max = v[1].get<double>();
}

}  // namespace

void from_json(const nlohmann::json& j, RainDomainSpec& s) {
  json_util::check_keys(j,
                        {"angle_mean", "angle_std", "density", "length_range", "width_range",
                         "intensity_range", "blur_sigma", "veil_strength", "seed"},
                        "rain spec");
  json_util::read(j, "angle_mean", s.angle_mean, "rain spec");
  json_util::read(j, "angle_std", s.angle_std, "rain spec");
  json_util::read(j, "density", s.density, "rain spec");
  read_range(j, "length_range", s.length);
  read_range(j, "width_range", s.width);
  read_range(j, "intensity_range", s.intensity);
  json_util::read(j, "blur_sigma", s.blur_sigma, "rain spec");
  json_util::read(j, "veil_strength", s.veil_strength, "rain spec");
  json_util::read(j, "seed", s.seed, "rain spec");
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"size", s.size}, {"texture", to_string(s.texture)}, {"photo_dir", s.photo_dir.string()},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  json_util::check_keys(j, {"size", "texture", "photo_dir", "seed"}, "scene");
  json_util::read(j, "size", s.size, "scene");
  std::string texture = to_string(s.texture);
  json_util::read(j, "texture", texture, "scene");
  s.texture = texture_from_string(texture);
  std::string dir = s.photo_dir.string();
  json_util::read(j, "photo_dir", dir, "scene");
  s.photo_dir = dir;
  json_util::read(j, "seed", s.seed, "scene");
}

namespace {

nlohmann::json entries_to_json(const std::vector<DatasetManifest::Entry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"id", e.id},
                   {"rainy", e.rainy.generic_string()},
                   {"clean", e.clean.generic_string()},
                   {"background_seed", e.background_seed},
                   {"rain_seed", e.rain_seed}});
  }
  return arr;
}

std::vector<DatasetManifest::Entry> entries_from_json(const nlohmann::json& j, const char* split) {
  std::vector<DatasetManifest::Entry> out;
  if (!j.contains(split)) {
    return out;
  }
  for (const auto& e : j.at(split)) {
    DatasetManifest::Entry entry;
    entry.id = e.at("id").get<std::string>();
    entry.rainy = e.at("rainy").get<std::string>();
    entry.clean = e.value("clean", std::string());
    entry.background_seed = e.value("background_seed", std::uint64_t{0});
    entry.rain_seed = e.value("rain_seed", std::uint64_t{0});
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

void DatasetManifest::save() const {
  nlohmann::json j = {{"format", "jrgr-dataset/1"},
                      {"image_size", image_size},
                      {"seed", seed},
                      {"synthetic_spec", synthetic},
                      {"real_spec", real},
                      {"scene", scene},
                      {"splits",
                       {{"paired", entries_to_json(paired)},
                        {"unpaired", entries_to_json(unpaired)},
                        {"test", entries_to_json(test)}}}};
  std::ofstream out(manifest_path());
  if (!out) {
    throw IoError("cannot write manifest: " + manifest_path().string());
  }
  out << j.dump(2) << '\n';
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestName : path;
  std::ifstream in(file);
  if (!in) {
    throw DataError("cannot open manifest: " + file.string());
  }
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.root = file.parent_path();
    m.image_size = j.value("image_size", int64_t{0});
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("synthetic_spec")) m.synthetic = j.at("synthetic_spec").get<RainDomainSpec>();
    if (j.contains("real_spec")) m.real = j.at("real_spec").get<RainDomainSpec>();
    if (j.contains("scene")) m.scene = j.at("scene").get<SceneSpec>();
    const auto& splits = j.at("splits");
    m.paired = entries_from_json(splits, "paired");
    m.unpaired = entries_from_json(splits, "unpaired");
    m.test = entries_from_json(splits, "test");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + file.string() + ": " + e.what());
  }
  return m;
}

DatasetManifest build_toy_datasets(const RainDomainSpec& synthetic, const RainDomainSpec& real,
                                   const SceneSpec& scene, const DatasetCounts& counts,
                                   const fs::path& out_dir) {
  synthetic.validate();
  real.validate();
  scene.validate();
  if (counts.paired < 1 || counts.unpaired < 1 || counts.test < 1) {
    throw ValidationError("dataset counts must all be >= 1");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }

  DatasetManifest m;
  m.root = out_dir;
  m.image_size = scene.size;
  m.seed = scene.seed;
  m.synthetic = synthetic;
  m.real = real;
  m.scene = scene;

  std::set<std::uint64_t> background_seeds;
  auto make_split = [&](const std::string& split, int64_t n, const RainDomainSpec& rain,
                        const fs::path& rainy_dir, const fs::path& clean_dir) {
    std::vector<DatasetManifest::Entry> entries;
    for (int64_t i = 0; i < n; ++i) {
      std::ostringstream name;
      name << std::setw(4) << std::setfill('0') << i << ".png";
      DatasetManifest::Entry e;
      e.id = split + "/" + std::to_string(i);
      e.background_seed = derive_seed(scene.seed, "background/" + split, static_cast<std::uint64_t>(i));
      e.rain_seed = derive_seed(rain.seed, "rain/" + split, static_cast<std::uint64_t>(i));
      if (!background_seeds.insert(e.background_seed).second) {
        throw DataError("background seed collision across splits");
      }
      Rng bg_rng(e.background_seed);
      Rng rain_rng(e.rain_seed);
      const Image clean = synth_background(scene, bg_rng);
      const Image layer = synth_rain_layer(rain, scene.size, rain_rng);
      const Image rainy = compose_rainy(clean, layer);
      e.rainy = rainy_dir / name.str();
      e.clean = clean_dir / name.str();
      save_image(rainy, out_dir / e.rainy);
      save_image(clean, out_dir / e.clean);
      entries.push_back(std::move(e));
    }
    return entries;
  };

  m.paired = make_split("paired", counts.paired, synthetic, "paired/rainy", "paired/clean");
  m.unpaired = make_split("unpaired", counts.unpaired, real, "unpaired/rainy", "unpaired_heldout/clean");
  m.test = make_split("test", counts.test, real, "test/rainy", "test/clean");
  m.save();
  return m;
}

}  // namespace jrgr
