#include "jrgr/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "jrgr/errors.hpp"
#include "jrgr/json_util.hpp"
#include "jrgr/rng.hpp"

namespace jrgr {
namespace nn = torch::nn;

void UNetConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) {
    throw ValidationError("unet channels must be >= 1");
  }
  if (arch == NetArch::kStandard) {
    if (depth < 1) throw ValidationError("unet field 'depth' must be >= 1");
    if (base_width < 1) throw ValidationError("unet field 'base_width' must be >= 1");
    if (convs_per_level < 1) throw ValidationError("unet field 'convs_per_level' must be >= 1");
  }
}

void PatchDiscConfig::validate() const {
  if (in_channels < 1) throw ValidationError("discriminator field 'in_channels' must be >= 1");
  if (arch == NetArch::kStandard && base_width < 1) {
    throw ValidationError("discriminator field 'base_width' must be >= 1");
  }
}

UNetImpl::UNetImpl(const UNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int64_t channels = cfg_.in_channels;
  for (int64_t level = 0; level < cfg_.depth; ++level) {
    const int64_t width = cfg_.base_width << level;
    encoders_.push_back(register_module("enc" + std::to_string(level), conv_block(channels, width, level > 0)));
    channels = width;
  }
  bottleneck_ = register_module("bottleneck", conv_block(channels, cfg_.base_width << cfg_.depth, true));
  channels = cfg_.base_width << cfg_.depth;
  for (int64_t level = cfg_.depth - 1; level >= 0; --level) {
    const int64_t width = cfg_.base_width << level;
    upsamplers_.push_back(register_module(
        "up" + std::to_string(level),
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(channels, width, 2).stride(2))));
    decoders_.push_back(register_module("dec" + std::to_string(level), conv_block(2 * width, width, level > 0)));
    channels = width;
  }
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(channels, cfg_.out_channels, 1)));
}

nn::Sequential UNetImpl::conv_block(int64_t in, int64_t out, bool normalize) {
  nn::Sequential block;
  for (int64_t i = 0; i < cfg_.convs_per_level; ++i) {
    block->push_back(nn::Conv2d(nn::Conv2dOptions(i == 0 ? in : out, out, 3).padding(1)));
    if (normalize && cfg_.norm == Norm::kInstance) {
      block->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out)));
    }
    block->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  }
  return block;
}

torch::Tensor UNetImpl::forward(const torch::Tensor& input) {
  const int64_t m = cfg_.size_multiple();
  if (input.dim() != 4 || input.size(2) % m != 0 || input.size(3) % m != 0) {
    throw DimensionError("unet input spatial size must be divisible by " + std::to_string(m));
  }
  std::vector<torch::Tensor> skips;
  auto x = input;
  for (auto& enc : encoders_) {
    x = enc->forward(x);
    skips.push_back(x);
    x = torch::max_pool2d(x, 2);
  }
  x = bottleneck_->forward(x);
  for (size_t i = 0; i < decoders_.size(); ++i) {
    x = upsamplers_[i]->forward(x);
    x = torch::cat({x, skips[skips.size() - 1 - i]}, 1);
    x = decoders_[i]->forward(x);
  }
  return head_->forward(x);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const PatchDiscConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  body_ = nn::Sequential();
  const int64_t w = cfg_.base_width;
  const int64_t widths[4] = {w, 2 * w, 4 * w, 8 * w};
  const int64_t strides[4] = {2, 2, 2, 1};
  int64_t channels = cfg_.in_channels;
  for (int i = 0; i < 4; ++i) {
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, widths[i], 4).stride(strides[i]).padding(1)));
    if (i > 0 && cfg_.norm == Norm::kInstance) {
      body_->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(widths[i])));
    }
    body_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    channels = widths[i];
  }
  body_ = register_module("body", body_);
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(channels, 1, 4).stride(1).padding(1)));
}

int64_t PatchDiscriminatorImpl::output_size(int64_t input) {
  auto conv = [](int64_t n, int64_t stride) { return (n + 2 - 4) / stride + 1; };
  int64_t n = input;
  n = conv(n, 2);
  n = conv(n, 2);
  n = conv(n, 2);
  n = conv(n, 1);
  return conv(n, 1);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  // Below 24 pixels the stride-1 stages collapse to nothing.
  if (x.dim() != 4 || x.size(2) < 24 || x.size(3) < 24) {
    throw DimensionError("discriminator input must be at least 24x24");
  }
  return head_->forward(body_->forward(x));
}

SingleConvImpl::SingleConvImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding) {
  conv_ = register_module("conv", nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding)));
}

torch::Tensor SingleConvImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4) {
    throw DimensionError("expected an N x C x H x W batch");
  }
  return conv_->forward(x);
}

ImageNet make_translator(const UNetConfig& cfg) {
  cfg.validate();
  if (cfg.arch == NetArch::kSingleConv) {
    return std::make_shared<SingleConvImpl>(cfg.in_channels, cfg.out_channels, 3, 1, 1);
  }
  return std::make_shared<UNetImpl>(cfg);
}

ImageNet make_discriminator(const PatchDiscConfig& cfg) {
  cfg.validate();
  if (cfg.arch == NetArch::kSingleConv) {
    return std::make_shared<SingleConvImpl>(cfg.in_channels, 1, 4, 2, 1);
  }
  return std::make_shared<PatchDiscriminatorImpl>(cfg);
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.removal = UNetConfig{};
  c.generation = UNetConfig{};
  c.generation.in_channels = c.generation.out_channels = c.rain_channels;
  return c;
}

ModelConfig ModelConfig::miniature() {
  ModelConfig c;
  c.rain_channels = 1;
  c.removal.arch = NetArch::kSingleConv;
  c.removal.norm = Norm::kNone;
  c.generation = c.removal;
  c.generation.in_channels = c.generation.out_channels = 1;
  c.discriminator.arch = NetArch::kSingleConv;
  c.discriminator.norm = Norm::kNone;
  return c;
}

void ModelConfig::validate() const {
  removal.validate();
  generation.validate();
  discriminator.validate();
  if (rain_channels != 1 && rain_channels != 3) {
    throw ValidationError("model field 'rain_channels' must be 1 or 3");
  }
  if (removal.in_channels != 3 || removal.out_channels != 3) {
    throw ValidationError("removal networks must map 3 channels to 3 channels");
  }
  if (generation.in_channels != rain_channels || generation.out_channels != rain_channels) {
    throw ValidationError("generation networks must map rain_channels to rain_channels");
  }
  if (discriminator.in_channels != 3) {
    throw ValidationError("discriminators take 3-channel images");
  }
}

JrgrModel::JrgrModel(const ModelConfig& cfg) : config(cfg) {
  config.validate();
  removal_syn = make_translator(config.removal);
  removal_real = make_translator(config.removal);
  gen_syn = make_translator(config.generation);
  gen_real = make_translator(config.generation);
  disc_background = make_discriminator(config.discriminator);
  disc_syn = make_discriminator(config.discriminator);
  disc_real = make_discriminator(config.discriminator);
}

std::vector<std::pair<std::string, ImageNet>> JrgrModel::named_networks() const {
  return {{"F_s", removal_syn}, {"F_r", removal_real},    {"G_s", gen_syn},  {"G_r", gen_real},
          {"D_B", disc_background}, {"D_Os", disc_syn}, {"D_Or", disc_real}};
}

namespace {

void append(std::vector<torch::Tensor>& out, const ImageNet& net) {
  for (auto& p : net->parameters()) {
    out.push_back(p);
  }
}

}  // namespace

std::vector<torch::Tensor> JrgrModel::generator_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& net : {removal_syn, removal_real, gen_syn, gen_real}) append(out, net);
  return out;
}

std::vector<torch::Tensor> JrgrModel::discriminator_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& net : {disc_background, disc_syn, disc_real}) append(out, net);
  return out;
}

std::vector<torch::Tensor> JrgrModel::all_parameters() const {
  auto out = generator_parameters();
  for (auto& p : discriminator_parameters()) out.push_back(p);
  return out;
}

void JrgrModel::to(torch::Dtype dtype) {
  for (auto& [name, net] : named_networks()) net->to(dtype);
}

void JrgrModel::train(bool on) {
  for (auto& [name, net] : named_networks()) net->train(on);
}

void JrgrModel::set_discriminators_trainable(bool on) {
  for (auto& p : discriminator_parameters()) p.set_requires_grad(on);
}

void init_network(ImageNetImpl& net, torch::Generator& gen) {
  torch::NoGradGuard no_grad;
  for (auto& module : net.modules(/*include_self=*/false)) {
    if (auto* conv = module->as<nn::Conv2dImpl>()) {
      conv->weight.normal_(0.0, 0.02, gen);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* up = module->as<nn::ConvTranspose2dImpl>()) {
      up->weight.normal_(0.0, 0.02, gen);
      if (up->bias.defined()) up->bias.zero_();
    }
  }
}

void init_parameters(JrgrModel& model, std::uint64_t seed) {
  for (auto& [name, net] : model.named_networks()) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, "init/" + name));
    init_network(*net, gen);
  }
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

double parameter_checksum(const torch::nn::Module& module) {
  double sum = 0.0;
  double k = 1.0;
  for (const auto& p : module.parameters()) {
    auto flat = p.detach().to(torch::kFloat64).flatten();
    auto weights = torch::arange(flat.numel(), torch::kFloat64).mul(1e-3).add(k);
    sum += (flat * weights).sum().item<double>();
    k += 1.0;
  }
  return sum;
}

namespace {

std::string norm_name(Norm n) { return n == Norm::kInstance ? "instance" : "none"; }
Norm norm_from(const std::string& s) {
  if (s == "instance") return Norm::kInstance;
  if (s == "none") return Norm::kNone;
  throw ValidationError("unknown norm '" + s + "'");
}
std::string arch_name(NetArch a) { return a == NetArch::kStandard ? "standard" : "single_conv"; }
NetArch arch_from(const std::string& s) {
  if (s == "standard") return NetArch::kStandard;
  if (s == "single_conv") return NetArch::kSingleConv;
  throw ValidationError("unknown arch '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const UNetConfig& c) {
  j = {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"base_width", c.base_width},
       {"depth", c.depth}, {"convs_per_level", c.convs_per_level}, {"norm", norm_name(c.norm)},
       {"arch", arch_name(c.arch)}};
}

void from_json(const nlohmann::json& j, UNetConfig& c) {
  json_util::check_keys(j, {"in_channels", "out_channels", "base_width", "depth", "convs_per_level", "norm", "arch"},
                        "unet");
  json_util::read(j, "in_channels", c.in_channels, "unet");
  json_util::read(j, "out_channels", c.out_channels, "unet");
  json_util::read(j, "base_width", c.base_width, "unet");
  json_util::read(j, "depth", c.depth, "unet");
  json_util::read(j, "convs_per_level", c.convs_per_level, "unet");
  std::string norm = norm_name(c.norm), arch = arch_name(c.arch);
  json_util::read(j, "norm", norm, "unet");
  json_util::read(j, "arch", arch, "unet");
  c.norm = norm_from(norm);
  c.arch = arch_from(arch);
}

void to_json(nlohmann::json& j, const PatchDiscConfig& c) {
  j = {{"in_channels", c.in_channels}, {"base_width", c.base_width}, {"norm", norm_name(c.norm)},
       {"arch", arch_name(c.arch)}};
}

void from_json(const nlohmann::json& j, PatchDiscConfig& c) {
  json_util::check_keys(j, {"in_channels", "base_width", "norm", "arch"}, "discriminator");
  json_util::read(j, "in_channels", c.in_channels, "discriminator");
  json_util::read(j, "base_width", c.base_width, "discriminator");
  std::string norm = norm_name(c.norm), arch = arch_name(c.arch);
  json_util::read(j, "norm", norm, "discriminator");
  json_util::read(j, "arch", arch, "discriminator");
  c.norm = norm_from(norm);
  c.arch = arch_from(arch);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"removal", c.removal}, {"generation", c.generation}, {"discriminator", c.discriminator},
       {"rain_channels", c.rain_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  json_util::check_keys(j, {"removal", "generation", "discriminator", "rain_channels"}, "model");
  json_util::read(j, "rain_channels", c.rain_channels, "model");
  c.generation.in_channels = c.generation.out_channels = c.rain_channels;
  if (j.contains("removal")) from_json(j.at("removal"), c.removal);
  if (j.contains("generation")) from_json(j.at("generation"), c.generation);
  if (j.contains("discriminator")) from_json(j.at("discriminator"), c.discriminator);
}

}  // namespace jrgr
