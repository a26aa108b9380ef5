#include "jrgr/pipeline.hpp"

#include "jrgr/errors.hpp"

namespace jrgr {

std::string to_string(Domain d) { return d == Domain::kSynthetic ? "synthetic" : "real"; }

torch::Tensor rain_for_generator(const JrgrModel& model, const torch::Tensor& rain) {
  return model.config.rain_channels == 1 ? rain.mean(1, /*keepdim=*/true) : rain;
}

namespace {

TranslationBundle translate(const JrgrModel& model, Domain origin, const torch::Tensor& input,
                            ImageNetImpl& removal, ImageNetImpl& generation,
                            ImageNetImpl& removal_back, ImageNetImpl& generation_back) {
  if (input.dim() != 4 || input.size(1) != 3) {
    throw DimensionError("translation input must be an N x 3 x H x W batch");
  }
  TranslationBundle b;
  b.origin = origin;
  b.input = input;
  b.background1 = removal.forward(input);
  b.rain1 = input - b.background1;
  b.rain2 = generation.forward(rain_for_generator(model, b.rain1));
  b.generated = b.background1 + b.rain2;
  b.background2 = removal_back.forward(b.generated);
  b.rain3 = b.generated - b.background2;
  b.rain4 = generation_back.forward(rain_for_generator(model, b.rain3));
  b.reconstruction = b.background2 + b.rain4;
  return b;
}

}  // namespace

TranslationBundle s2r_forward(const JrgrModel& model, const torch::Tensor& rainy_syn) {
  return translate(model, Domain::kSynthetic, rainy_syn, *model.removal_syn, *model.gen_real,
                   *model.removal_real, *model.gen_syn);
}

TranslationBundle r2s_forward(const JrgrModel& model, const torch::Tensor& rainy_real) {
  return translate(model, Domain::kReal, rainy_real, *model.removal_real, *model.gen_syn,
                   *model.removal_syn, *model.gen_real);
}

Image remove_rain(ImageNetImpl& removal, int64_t size_multiple, const Image& rainy) {
  if (rainy.channels() != 3) {
    throw DimensionError("derain expects a 3-channel image");
  }
  torch::NoGradGuard no_grad;
  const bool was_training = removal.is_training();
  removal.eval();
  const int64_t h = rainy.height();
  const int64_t w = rainy.width();
  const int64_t ph = (size_multiple - h % size_multiple) % size_multiple;
  const int64_t pw = (size_multiple - w % size_multiple) % size_multiple;
  auto x = rainy.tensor().unsqueeze(0).to(removal.parameters().front().scalar_type());
  if (ph > 0 || pw > 0) {
    if (ph >= h || pw >= w) {
      x = torch::replication_pad2d(x, {0, pw, 0, ph});
    } else {
      x = torch::reflection_pad2d(x, {0, pw, 0, ph});
    }
  }
  using torch::indexing::Slice;
  auto y = removal.forward(x).index({0, Slice(), Slice(0, h), Slice(0, w)});
  removal.train(was_training);
  return Image(y.clamp(0.0, 1.0));
}

Image derain(const JrgrModel& model, const Image& rainy) {
  return remove_rain(*model.removal_real, model.config.removal.size_multiple(), rainy);
}

std::vector<std::string> bundle_panel_names() {
  return {"O_in", "B1", "R1", "R2", "O_gen", "B2", "R3", "R4", "O_rec", "cycle_error"};
}

std::vector<Image> bundle_panels(const TranslationBundle& b, int64_t index) {
  auto pick = [index](const torch::Tensor& t) {
    auto x = t[index].detach().to(torch::kFloat32);
    return Image(x.size(0) == 1 ? x.expand({3, x.size(1), x.size(2)}) : x);
  };
  return {pick(b.input),      pick(b.background1), pick(b.rain1), pick(b.rain2),
          pick(b.generated),  pick(b.background2), pick(b.rain3), pick(b.rain4),
          pick(b.reconstruction), pick((b.input - b.reconstruction).abs())};
}

}  // namespace jrgr
