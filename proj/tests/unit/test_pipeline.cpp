#include <gtest/gtest.h>

#include "jrgr/errors.hpp"
#include "jrgr/pipeline.hpp"

using namespace jrgr;

namespace {

double max_err(const torch::Tensor& a, const torch::Tensor& b) { return (a - b).abs().max().item<double>(); }

// Single-conv translator that copies its input.
void make_identity(ImageNet& net) {
  torch::NoGradGuard ng;
  auto w = net->head()->weight;
  w.zero_();
  for (int64_t c = 0; c < w.size(0); ++c) w[c][c][1][1] = 1.0;
  net->head()->bias.zero_();
}

void make_zero(ImageNet& net) {
  torch::NoGradGuard ng;
  net->head()->weight.zero_();
  net->head()->bias.zero_();
}

JrgrModel miniature() {
  JrgrModel m(ModelConfig::miniature());
  init_parameters(m, 3);
  return m;
}

void expect_additive(const TranslationBundle& b) {
  EXPECT_LT(max_err(b.background1 + b.rain1, b.input), 1e-6);
  EXPECT_LT(max_err(b.background1 + b.rain2, b.generated), 1e-6);
  EXPECT_LT(max_err(b.background2 + b.rain3, b.generated), 1e-6);
  EXPECT_LT(max_err(b.background2 + b.rain4, b.reconstruction), 1e-6);
}

}  // namespace

TEST(Pipeline, IdentityRemovalAndZeroGenerator) {
  auto m = miniature();
  make_identity(m.removal_syn);
  make_zero(m.gen_real);
  make_identity(m.removal_real);
  make_zero(m.gen_syn);
  const auto x = torch::rand({2, 3, 16, 16});
  const auto s2r = s2r_forward(m, x);
  EXPECT_TRUE(torch::equal(s2r.generated, x));
  EXPECT_EQ(s2r.rain1.abs().max().item<float>(), 0.0f);
  const auto r2s = r2s_forward(m, x);
  EXPECT_TRUE(torch::equal(r2s.generated, x));
}

TEST(Pipeline, FullIdentityChainReconstructs) {
  for (auto origin : {Domain::kSynthetic, Domain::kReal}) {
    auto m = miniature();
    make_identity(m.removal_syn);
    make_identity(m.removal_real);
    make_identity(m.gen_syn);
    make_identity(m.gen_real);
    const auto x = torch::rand({1, 3, 16, 16});
    const auto b = origin == Domain::kSynthetic ? s2r_forward(m, x) : r2s_forward(m, x);
    EXPECT_TRUE(torch::equal(b.reconstruction, x));
    EXPECT_EQ((b.input - b.reconstruction).abs().mean().item<float>(), 0.0f);
    EXPECT_EQ(b.origin, origin);
  }
}

TEST(Pipeline, AdditiveInvariantsRandomNetworks) {
  JrgrModel m(ModelConfig::toy());
  for (int trial = 0; trial < 3; ++trial) {
    init_parameters(m, static_cast<std::uint64_t>(trial));
    torch::NoGradGuard ng;
    const auto x = torch::rand({2, 3, 32, 32});
    expect_additive(s2r_forward(m, x));
    expect_additive(r2s_forward(m, x));
  }
}

TEST(Pipeline, RoutingUsesDocumentedNetworks) {
  // Distinct constant outputs reveal which removal network ran at each stage.
  auto m = miniature();
  torch::NoGradGuard ng;
  for (auto* net : {&m.removal_syn, &m.removal_real, &m.gen_syn, &m.gen_real}) make_zero(*net);
  m.removal_syn->head()->bias.fill_(0.1);
  m.removal_real->head()->bias.fill_(0.2);
  m.gen_syn->head()->bias.fill_(0.01);
  m.gen_real->head()->bias.fill_(0.02);
  const auto x = torch::rand({1, 3, 8, 8});
  const auto s2r = s2r_forward(m, x);
  EXPECT_NEAR(s2r.background1.mean().item<double>(), 0.1, 1e-6);
  EXPECT_NEAR(s2r.rain2.mean().item<double>(), 0.02, 1e-6);
  EXPECT_NEAR(s2r.background2.mean().item<double>(), 0.2, 1e-6);
  EXPECT_NEAR(s2r.rain4.mean().item<double>(), 0.01, 1e-6);
  const auto r2s = r2s_forward(m, x);
  EXPECT_NEAR(r2s.background1.mean().item<double>(), 0.2, 1e-6);
  EXPECT_NEAR(r2s.rain2.mean().item<double>(), 0.01, 1e-6);
  EXPECT_NEAR(r2s.background2.mean().item<double>(), 0.1, 1e-6);
  EXPECT_NEAR(r2s.rain4.mean().item<double>(), 0.02, 1e-6);
}

TEST(Pipeline, SymmetricWhenParametersShared) {
  auto m = miniature();
  {
    torch::NoGradGuard ng;
    auto copy = [](const ImageNet& from, const ImageNet& to) {
      auto src = from->parameters();
      auto dst = to->parameters();
      for (size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
    };
    copy(m.removal_syn, m.removal_real);
    copy(m.gen_syn, m.gen_real);
  }
  const auto x = torch::rand({2, 3, 16, 16});
  const auto a = s2r_forward(m, x);
  const auto b = r2s_forward(m, x);
  EXPECT_TRUE(torch::equal(a.reconstruction, b.reconstruction));
  EXPECT_TRUE(torch::equal(a.generated, b.generated));
  EXPECT_NE(a.origin, b.origin);
}

TEST(Pipeline, LuminanceRainForGenerators) {
  auto m = miniature();
  const auto b = s2r_forward(m, torch::rand({1, 3, 8, 8}));
  EXPECT_EQ(b.rain2.size(1), 1);
  EXPECT_EQ(b.generated.size(1), 3);
  const auto rain = torch::rand({1, 3, 4, 4});
  EXPECT_TRUE(torch::allclose(rain_for_generator(m, rain), rain.mean(1, true)));
}

TEST(Pipeline, InputNotMutated) {
  JrgrModel m(ModelConfig::toy());
  init_parameters(m, 4);
  const auto x = torch::rand({1, 3, 32, 32});
  const auto copy = x.clone();
  s2r_forward(m, x);
  EXPECT_TRUE(torch::equal(x, copy));
}

TEST(Derain, ZeroHeadGivesZeros) {
  JrgrModel m(ModelConfig::toy());
  init_parameters(m, 1);
  make_zero(m.removal_real);
  const Image out = derain(m, Image(torch::rand({3, 32, 32})));
  EXPECT_EQ(out.tensor().abs().max().item<float>(), 0.0f);
}

TEST(Derain, PadCropOddSizes) {
  JrgrModel m(ModelConfig::toy());
  init_parameters(m, 1);
  const Image out = derain(m, Image(torch::rand({3, 65, 67})));
  EXPECT_EQ(out.height(), 65);
  EXPECT_EQ(out.width(), 67);
  EXPECT_GE(out.tensor().min().item<float>(), 0.0f);
  EXPECT_LE(out.tensor().max().item<float>(), 1.0f);
}

TEST(Panels, TenPanels) {
  auto m = miniature();
  const auto b = s2r_forward(m, torch::rand({2, 3, 16, 16}));
  const auto panels = bundle_panels(b, 1);
  ASSERT_EQ(panels.size(), 10u);
  ASSERT_EQ(bundle_panel_names().size(), 10u);
  for (const auto& p : panels) EXPECT_EQ(p.channels(), 3);
}
