#include "jrgr/imaging.hpp"

#include <cmath>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "jrgr/errors.hpp"

namespace jrgr {

Image::Image(torch::Tensor data) {
  if (!data.defined() || data.dim() != 3) {
    throw DimensionError("image tensor must be C x H x W");
  }
  const auto c = data.size(0);
  if (c != 1 && c != 3) {
    throw DimensionError("image must have 1 or 3 channels, got " + std::to_string(c));
  }
  if (data.size(1) < 1 || data.size(2) < 1) {
    throw DimensionError("image height and width must be at least 1");
  }
  data_ = data.detach().to(torch::kFloat32).contiguous();
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw DimensionError("image contains non-finite values");
  }
}

Image Image::filled(int64_t channels, int64_t height, int64_t width, float value) {
  return Image(torch::full({channels, height, width}, value));
}

float Image::at(int64_t c, int64_t y, int64_t x) const {
  return data_.data_ptr<float>()[(c * height() + y) * width() + x];
}

bool Image::same_shape(const Image& other) const {
  return data_.sizes() == other.data_.sizes();
}

std::uint8_t quantize(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::floor(clamped * 255.0f + 0.5f));
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("no such file: " + path.string());
  }
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) {
    throw FormatError("cannot decode image: " + path.string());
  }
  if (mat.depth() != CV_8U) {
    throw FormatError("only 8-bit images are supported: " + path.string());
  }
  const int channels = mat.channels();
  if (channels != 1 && channels != 3) {
    throw FormatError("expected grayscale or RGB without alpha: " + path.string());
  }
  const int64_t h = mat.rows;
  const int64_t w = mat.cols;
  auto data = torch::empty({channels, h, w});
  float* out = data.data_ptr<float>();
  for (int64_t y = 0; y < h; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(static_cast<int>(y));
    for (int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        // OpenCV stores BGR.
        const int src = channels == 3 ? 2 - c : 0;
        out[(c * h + y) * w + x] = static_cast<float>(row[x * channels + src]) / 255.0f;
      }
    }
  }
  return Image(data);
}

void save_image(const Image& img, const std::filesystem::path& path) {
  const int channels = static_cast<int>(img.channels());
  const int h = static_cast<int>(img.height());
  const int w = static_cast<int>(img.width());
  cv::Mat mat(h, w, channels == 3 ? CV_8UC3 : CV_8UC1);
  const float* in = img.tensor().data_ptr<float>();
  for (int y = 0; y < h; ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const int dst = channels == 3 ? 2 - c : 0;
        row[x * channels + dst] = quantize(in[(static_cast<int64_t>(c) * h + y) * w + x]);
      }
    }
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) {
    throw IoError("cannot write image: " + path.string());
  }
}

namespace {

void require_compatible(const Image& a, const Image& b, const char* op) {
  const bool spatial = a.height() == b.height() && a.width() == b.width();
  const bool channels = a.channels() == b.channels() || b.channels() == 1;
  if (a.empty() || b.empty() || !spatial || !channels) {
    throw DimensionError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Image compose_rainy(const Image& background, const Image& rain) {
  require_compatible(background, rain, "compose_rainy");
  return Image(background.tensor() + rain.tensor());
}

Image extract_rain(const Image& rainy, const Image& background) {
  if (!rainy.same_shape(background)) {
    throw DimensionError("extract_rain: shape mismatch");
  }
  return Image(rainy.tensor() - background.tensor());
}

Image crop(const Image& img, int64_t top, int64_t left, int64_t size) {
  if (top < 0 || left < 0 || top + size > img.height() || left + size > img.width()) {
    throw SizeError("crop window outside image");
  }
  using torch::indexing::Slice;
  return Image(img.tensor().index({Slice(), Slice(top, top + size), Slice(left, left + size)}));
}

Image random_crop(const Image& img, int64_t size, Rng& rng) {
  if (size < 1 || img.height() < size || img.width() < size) {
    throw SizeError("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                    " smaller than crop " + std::to_string(size));
  }
  std::uniform_int_distribution<int64_t> dy(0, img.height() - size);
  std::uniform_int_distribution<int64_t> dx(0, img.width() - size);
  const int64_t top = dy(rng);
  const int64_t left = dx(rng);
  return crop(img, top, left, size);
}

Image to_luminance(const Image& img) {
  return Image(img.tensor().mean(0, /*keepdim=*/true));
}

}  // namespace jrgr
