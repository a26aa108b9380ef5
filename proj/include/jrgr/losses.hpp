#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "jrgr/datasets.hpp"
#include "jrgr/networks.hpp"
#include "jrgr/pipeline.hpp"

namespace jrgr {

struct LossWeights {
  double alpha = 4.0;  // weight of the discriminator's real-background term
  double lambda_adv = 10.0;
  double lambda_cyc = 1.0;
  double lambda_mse = 10.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Adversarial formulation. kBce is the default; kLeastSquares swaps the
// log-likelihood terms for squared distances to 1 / 0.
enum class GanMode { kBce, kLeastSquares };

enum class LossTerm { kAdvB, kAdvOs, kAdvOr, kCycOs, kCycOr, kCycBs, kCycBr, kMseBs };

inline constexpr std::array<LossTerm, 8> kAllLossTerms = {
    LossTerm::kAdvB,  LossTerm::kAdvOs, LossTerm::kAdvOr, LossTerm::kCycOs,
    LossTerm::kCycOr, LossTerm::kCycBs, LossTerm::kCycBr, LossTerm::kMseBs};

std::string to_string(LossTerm term);

// Set of disabled generator-side terms. Disabling an adversarial term also
// skips the matching discriminator update.
class AblationMask {
 public:
  AblationMask() = default;
  bool enabled(LossTerm t) const { return !disabled_.contains(t); }
  void disable(LossTerm t) { disabled_.insert(t); }
  // Accepts term names (adv_B, cyc_Os, ...) and the groups adv_O, cyc, mse.
  void disable(const std::string& name);
  const std::set<LossTerm>& disabled() const { return disabled_; }
  std::vector<std::string> names() const;
  bool operator==(const AblationMask&) const = default;

 private:
  std::set<LossTerm> disabled_;
};

struct LossReport {
  double adv_B = 0, adv_Os = 0, adv_Or = 0;
  double cyc_Os = 0, cyc_Or = 0, cyc_Bs = 0, cyc_Br = 0;
  double mse_Bs = 0;
  double total = 0;
  double d_B = 0, d_Os = 0, d_Or = 0;

  double term(LossTerm t) const;
  bool finite() const;
};

// Mean over patches of -log sigmoid(s), in softplus form.
torch::Tensor bce_real(const torch::Tensor& scores);
// Mean over patches of -log(1 - sigmoid(s)).
torch::Tensor bce_fake(const torch::Tensor& scores);
torch::Tensor adv_real(const torch::Tensor& scores, GanMode mode);
torch::Tensor adv_fake(const torch::Tensor& scores, GanMode mode);

// Non-saturating generator side of the background adversarial loss:
// mean of adv_real(D_B(x)) over the four decomposed backgrounds.
torch::Tensor loss_adv_B_generator(const JrgrModel& model, const TranslationBundle& s2r,
                                   const TranslationBundle& r2s, GanMode mode = GanMode::kBce);

// alpha * adv_real(D_B(real_B)) + sum over fakes of adv_fake(D_B(fake)).
// Fakes are detached here; gradients reach D_B only.
torch::Tensor loss_adv_B_discriminator(const JrgrModel& model, const std::vector<torch::Tensor>& fakes,
                                       const torch::Tensor& real_background, const LossWeights& weights,
                                       GanMode mode = GanMode::kBce);

// The four decomposed backgrounds judged by D_B, in the order
// s2r.B1, s2r.B2, r2s.B1, r2s.B2.
std::vector<torch::Tensor> decomposed_backgrounds(const TranslationBundle& s2r, const TranslationBundle& r2s);

// D_Or for bundles of synthetic origin, D_Os for real origin.
ImageNet& rainy_discriminator(JrgrModel& model, Domain origin);
const ImageNet& rainy_discriminator(const JrgrModel& model, Domain origin);

torch::Tensor loss_adv_O_generator(const JrgrModel& model, const TranslationBundle& bundle,
                                   GanMode mode = GanMode::kBce);
// adv_real on real images of the target domain plus adv_fake on the
// (optionally pooled) detached generated images.
torch::Tensor loss_adv_O_discriminator(const JrgrModel& model, const TranslationBundle& bundle,
                                       const torch::Tensor& real_target, ImagePool* pool,
                                       GanMode mode = GanMode::kBce);

// Mean |O_in - O_rec|.
torch::Tensor loss_cyc_O(const TranslationBundle& bundle);
// Mean |B1 - B2|.
torch::Tensor loss_cyc_B(const TranslationBundle& bundle);
// mean((B1 - B)^2) + mean((B2 - B)^2) on a synthetic-origin bundle.
torch::Tensor loss_mse_Bs(const TranslationBundle& s2r, const torch::Tensor& clean);

struct GeneratorTerms {
  torch::Tensor adv_B, adv_Os, adv_Or;
  torch::Tensor cyc_Os, cyc_Or, cyc_Bs, cyc_Br;
  torch::Tensor mse_Bs;

  const torch::Tensor& get(LossTerm t) const;
};

// Disabled terms come back as zero scalars with no graph.
GeneratorTerms generator_terms(const JrgrModel& model, const TranslationBundle& s2r,
                               const TranslationBundle& r2s, const torch::Tensor& clean,
                               const AblationMask& mask = {}, GanMode mode = GanMode::kBce);

// lambda_adv * (adv_B + adv_Os + adv_Or) + lambda_cyc * (four cycle terms)
// + lambda_mse * mse_Bs.
torch::Tensor full_objective(const GeneratorTerms& terms, const LossWeights& weights);
double full_objective(const LossReport& report, const LossWeights& weights);

// Term values in double precision; total recomputed from them.
LossReport make_report(const GeneratorTerms& terms, const LossWeights& weights);

}  // namespace jrgr
