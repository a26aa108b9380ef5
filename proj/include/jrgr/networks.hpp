#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace jrgr {

enum class Norm { kInstance, kNone };

// kSingleConv builds a one-layer linear network; it exists for gradient
// checking at miniature scale.
enum class NetArch { kStandard, kSingleConv };

struct UNetConfig {
  int64_t in_channels = 3;
  int64_t out_channels = 3;
  int64_t base_width = 16;
  int64_t depth = 3;
  int64_t convs_per_level = 1;
  Norm norm = Norm::kInstance;
  NetArch arch = NetArch::kStandard;

  // Spatial sizes must be multiples of this.
  int64_t size_multiple() const { return arch == NetArch::kSingleConv ? 1 : int64_t{1} << depth; }
  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

struct PatchDiscConfig {
  int64_t in_channels = 3;
  int64_t base_width = 16;
  Norm norm = Norm::kInstance;
  NetArch arch = NetArch::kStandard;

  void validate() const;
  bool operator==(const PatchDiscConfig&) const = default;
};

// Common base so the model can hold heterogeneous networks uniformly.
class ImageNetImpl : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
  // The last (linear) layer; zeroing it zeroes the output.
  virtual torch::nn::Conv2d head() = 0;
};

// Encoder-decoder with skip concatenation at every level and a linear 1x1
// output head. The outermost level is left unnormalized: instance norm
// discards each image's mean, which a background predictor has to keep.
class UNetImpl : public ImageNetImpl {
 public:
  explicit UNetImpl(const UNetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;
  torch::nn::Conv2d head() override { return head_; }
  const UNetConfig& config() const { return cfg_; }

 private:
  torch::nn::Sequential conv_block(int64_t in, int64_t out, bool normalize);

  UNetConfig cfg_;
  std::vector<torch::nn::Sequential> encoders_;
  torch::nn::Sequential bottleneck_{nullptr};
  std::vector<torch::nn::ConvTranspose2d> upsamplers_;
  std::vector<torch::nn::Sequential> decoders_;
  torch::nn::Conv2d head_{nullptr};
};

// Three stride-2 and one stride-1 kernel-4 conv blocks followed by a
// one-channel stride-1 head. Emits raw scores, one per patch.
class PatchDiscriminatorImpl : public ImageNetImpl {
 public:
  explicit PatchDiscriminatorImpl(const PatchDiscConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;
  torch::nn::Conv2d head() override { return head_; }

  static int64_t output_size(int64_t input);

 private:
  PatchDiscConfig cfg_;
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};

// One convolution, no activation. Translators use kernel 3 / stride 1 so
// the shape is preserved; critics use kernel 4 / stride 2.
class SingleConvImpl : public ImageNetImpl {
 public:
  SingleConvImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding);
  torch::Tensor forward(const torch::Tensor& x) override;
  torch::nn::Conv2d head() override { return conv_; }

 private:
  torch::nn::Conv2d conv_{nullptr};
};

using ImageNet = std::shared_ptr<ImageNetImpl>;

ImageNet make_translator(const UNetConfig& cfg);
ImageNet make_discriminator(const PatchDiscConfig& cfg);

struct ModelConfig {
  UNetConfig removal;     // F_s, F_r: 3 -> 3
  UNetConfig generation;  // G_s, G_r: rain_channels -> rain_channels
  PatchDiscConfig discriminator;
  int64_t rain_channels = 1;  // 1 = luminance rain layers, 3 = colour

  static ModelConfig toy();
  // One linear conv per network; used by the gradient checks.
  static ModelConfig miniature();
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// The seven networks of the joint generation/removal model.
struct JrgrModel {
  explicit JrgrModel(const ModelConfig& cfg);

  ModelConfig config;
  ImageNet removal_syn;   // F_s
  ImageNet removal_real;  // F_r
  ImageNet gen_syn;       // G_s: rain layer -> synthetic-style rain layer
  ImageNet gen_real;      // G_r: rain layer -> real-style rain layer
  ImageNet disc_background;  // D_B
  ImageNet disc_syn;         // D_Os
  ImageNet disc_real;        // D_Or

  // name -> network, fixed order F_s, F_r, G_s, G_r, D_B, D_Os, D_Or.
  std::vector<std::pair<std::string, ImageNet>> named_networks() const;
  std::vector<torch::Tensor> generator_parameters() const;
  std::vector<torch::Tensor> discriminator_parameters() const;
  std::vector<torch::Tensor> all_parameters() const;

  void to(torch::Dtype dtype);
  void train(bool on = true);
  void set_discriminators_trainable(bool on);
};

// Convolution weights ~ N(0, 0.02), biases 0.
void init_parameters(JrgrModel& model, std::uint64_t seed);
void init_network(ImageNetImpl& net, torch::Generator& gen);

int64_t parameter_count(const torch::nn::Module& module);
// Order-sensitive double-precision fingerprint of every parameter value.
double parameter_checksum(const torch::nn::Module& module);

void to_json(nlohmann::json& j, const UNetConfig& c);
void from_json(const nlohmann::json& j, UNetConfig& c);
void to_json(nlohmann::json& j, const PatchDiscConfig& c);
void from_json(const nlohmann::json& j, PatchDiscConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace jrgr
