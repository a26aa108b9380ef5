#include "jrgr/losses.hpp"

#include <cmath>

#include "jrgr/errors.hpp"

namespace jrgr {

void LossWeights::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError(std::string("loss weight '") + name + "' must be >= 0");
    }
  };
  check(alpha, "alpha");
  check(lambda_adv, "lambda_adv");
  check(lambda_cyc, "lambda_cyc");
  check(lambda_mse, "lambda_mse");
}

std::string to_string(LossTerm term) {
  switch (term) {
    case LossTerm::kAdvB: return "adv_B";
    case LossTerm::kAdvOs: return "adv_Os";
    case LossTerm::kAdvOr: return "adv_Or";
    case LossTerm::kCycOs: return "cyc_Os";
    case LossTerm::kCycOr: return "cyc_Or";
    case LossTerm::kCycBs: return "cyc_Bs";
    case LossTerm::kCycBr: return "cyc_Br";
    case LossTerm::kMseBs: return "mse_Bs";
  }
  return "?";
}

void AblationMask::disable(const std::string& name) {
  if (name == "adv_O") {
    disable(LossTerm::kAdvOs);
    disable(LossTerm::kAdvOr);
    return;
  }
  if (name == "cyc") {
    for (auto t : {LossTerm::kCycOs, LossTerm::kCycOr, LossTerm::kCycBs, LossTerm::kCycBr}) disable(t);
    return;
  }
  if (name == "mse") {
    disable(LossTerm::kMseBs);
    return;
  }
  for (auto t : kAllLossTerms) {
    if (to_string(t) == name) {
      disable(t);
      return;
    }
  }
  throw ValidationError("unknown loss term '" + name + "'");
}

std::vector<std::string> AblationMask::names() const {
  std::vector<std::string> out;
  for (auto t : disabled_) out.push_back(to_string(t));
  return out;
}

double LossReport::term(LossTerm t) const {
  switch (t) {
    case LossTerm::kAdvB: return adv_B;
    case LossTerm::kAdvOs: return adv_Os;
    case LossTerm::kAdvOr: return adv_Or;
    case LossTerm::kCycOs: return cyc_Os;
    case LossTerm::kCycOr: return cyc_Or;
    case LossTerm::kCycBs: return cyc_Bs;
    case LossTerm::kCycBr: return cyc_Br;
    case LossTerm::kMseBs: return mse_Bs;
  }
  return 0.0;
}

bool LossReport::finite() const {
  for (double v : {adv_B, adv_Os, adv_Or, cyc_Os, cyc_Or, cyc_Bs, cyc_Br, mse_Bs, total, d_B, d_Os, d_Or}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

torch::Tensor bce_real(const torch::Tensor& scores) { return torch::softplus(-scores).mean(); }

torch::Tensor bce_fake(const torch::Tensor& scores) { return torch::softplus(scores).mean(); }

torch::Tensor adv_real(const torch::Tensor& scores, GanMode mode) {
  return mode == GanMode::kBce ? bce_real(scores) : (scores - 1.0).pow(2).mean();
}

torch::Tensor adv_fake(const torch::Tensor& scores, GanMode mode) {
  return mode == GanMode::kBce ? bce_fake(scores) : scores.pow(2).mean();
}

std::vector<torch::Tensor> decomposed_backgrounds(const TranslationBundle& s2r, const TranslationBundle& r2s) {
  return {s2r.background1, s2r.background2, r2s.background1, r2s.background2};
}

torch::Tensor loss_adv_B_generator(const JrgrModel& model, const TranslationBundle& s2r,
                                   const TranslationBundle& r2s, GanMode mode) {
  auto& disc = *model.disc_background;
  torch::Tensor sum;
  for (const auto& b : decomposed_backgrounds(s2r, r2s)) {
    auto term = adv_real(disc.forward(b), mode);
    sum = sum.defined() ? sum + term : term;
  }
  return sum / 4.0;
}

torch::Tensor loss_adv_B_discriminator(const JrgrModel& model, const std::vector<torch::Tensor>& fakes,
                                       const torch::Tensor& real_background, const LossWeights& weights,
                                       GanMode mode) {
  auto& disc = *model.disc_background;
  auto loss = weights.alpha * adv_real(disc.forward(real_background), mode);
  for (const auto& fake : fakes) {
    loss = loss + adv_fake(disc.forward(fake.detach()), mode);
  }
  return loss;
}

ImageNet& rainy_discriminator(JrgrModel& model, Domain origin) {
  return origin == Domain::kSynthetic ? model.disc_real : model.disc_syn;
}

const ImageNet& rainy_discriminator(const JrgrModel& model, Domain origin) {
  return origin == Domain::kSynthetic ? model.disc_real : model.disc_syn;
}

torch::Tensor loss_adv_O_generator(const JrgrModel& model, const TranslationBundle& bundle, GanMode mode) {
  return adv_real(rainy_discriminator(model, bundle.origin)->forward(bundle.generated), mode);
}

torch::Tensor loss_adv_O_discriminator(const JrgrModel& model, const TranslationBundle& bundle,
                                       const torch::Tensor& real_target, ImagePool* pool, GanMode mode) {
  auto& disc = *rainy_discriminator(model, bundle.origin);
  auto fake = bundle.generated.detach();
  if (pool != nullptr) {
    fake = pool->query_batch(fake);
  }
  return adv_real(disc.forward(real_target), mode) + adv_fake(disc.forward(fake), mode);
}

torch::Tensor loss_cyc_O(const TranslationBundle& bundle) {
  return (bundle.input - bundle.reconstruction).abs().mean();
}

torch::Tensor loss_cyc_B(const TranslationBundle& bundle) {
  return (bundle.background1 - bundle.background2).abs().mean();
}

torch::Tensor loss_mse_Bs(const TranslationBundle& s2r, const torch::Tensor& clean) {
  if (s2r.background1.sizes() != clean.sizes() || s2r.background2.sizes() != clean.sizes()) {
    throw DimensionError("loss_mse_Bs: ground truth shape mismatch");
  }
  return (s2r.background1 - clean).pow(2).mean() + (s2r.background2 - clean).pow(2).mean();
}

const torch::Tensor& GeneratorTerms::get(LossTerm t) const {
  switch (t) {
    case LossTerm::kAdvB: return adv_B;
    case LossTerm::kAdvOs: return adv_Os;
    case LossTerm::kAdvOr: return adv_Or;
    case LossTerm::kCycOs: return cyc_Os;
    case LossTerm::kCycOr: return cyc_Or;
    case LossTerm::kCycBs: return cyc_Bs;
    case LossTerm::kCycBr: return cyc_Br;
    case LossTerm::kMseBs: return mse_Bs;
  }
  return adv_B;
}

GeneratorTerms generator_terms(const JrgrModel& model, const TranslationBundle& s2r,
                               const TranslationBundle& r2s, const torch::Tensor& clean,
                               const AblationMask& mask, GanMode mode) {
  if (s2r.origin != Domain::kSynthetic || r2s.origin != Domain::kReal) {
    throw DimensionError("generator_terms expects an s2r and an r2s bundle");
  }
  auto zero = torch::zeros({}, s2r.input.options());
  auto when = [&](LossTerm t, auto&& compute) -> torch::Tensor {
    return mask.enabled(t) ? compute() : zero;
  };
  GeneratorTerms g;
  g.adv_B = when(LossTerm::kAdvB, [&] { return loss_adv_B_generator(model, s2r, r2s, mode); });
  g.adv_Os = when(LossTerm::kAdvOs, [&] { return loss_adv_O_generator(model, r2s, mode); });
  g.adv_Or = when(LossTerm::kAdvOr, [&] { return loss_adv_O_generator(model, s2r, mode); });
  g.cyc_Os = when(LossTerm::kCycOs, [&] { return loss_cyc_O(s2r); });
  g.cyc_Or = when(LossTerm::kCycOr, [&] { return loss_cyc_O(r2s); });
  g.cyc_Bs = when(LossTerm::kCycBs, [&] { return loss_cyc_B(s2r); });
  g.cyc_Br = when(LossTerm::kCycBr, [&] { return loss_cyc_B(r2s); });
  g.mse_Bs = when(LossTerm::kMseBs, [&] { return loss_mse_Bs(s2r, clean); });
  return g;
}

torch::Tensor full_objective(const GeneratorTerms& t, const LossWeights& w) {
  return w.lambda_adv * (t.adv_B + t.adv_Os + t.adv_Or) +
         w.lambda_cyc * (t.cyc_Os + t.cyc_Or + t.cyc_Bs + t.cyc_Br) + w.lambda_mse * t.mse_Bs;
}

double full_objective(const LossReport& r, const LossWeights& w) {
  return w.lambda_adv * (r.adv_B + r.adv_Os + r.adv_Or) +
         w.lambda_cyc * (r.cyc_Os + r.cyc_Or + r.cyc_Bs + r.cyc_Br) + w.lambda_mse * r.mse_Bs;
}

LossReport make_report(const GeneratorTerms& t, const LossWeights& weights) {
  auto v = [](const torch::Tensor& x) { return x.detach().item<double>(); };
  LossReport r;
  r.adv_B = v(t.adv_B);
  r.adv_Os = v(t.adv_Os);
  r.adv_Or = v(t.adv_Or);
  r.cyc_Os = v(t.cyc_Os);
  r.cyc_Or = v(t.cyc_Or);
  r.cyc_Bs = v(t.cyc_Bs);
  r.cyc_Br = v(t.cyc_Br);
  r.mse_Bs = v(t.mse_Bs);
  r.total = full_objective(r, weights);
  return r;
}

}  // namespace jrgr
