#include <fstream>

#include <gtest/gtest.h>

#include "jrgr/errors.hpp"
#include "jrgr/rainsynth.hpp"
#include "jrgr/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace jrgr;

namespace {

// Small in-memory toy data at 32x32.
const TrainingData& toy_data() {
  static const TrainingData data = [] {
    std::vector<PairedSample> paired;
    std::vector<UnpairedSample> unpaired;
    SceneSpec scene;
    scene.size = 32;
    for (int i = 0; i < 16; ++i) {
      Rng rng(derive_seed(11, "trainer-test", static_cast<std::uint64_t>(i)));
      const Image clean = synth_background(scene, rng);
      paired.push_back({compose_rainy(clean, synth_rain_layer(RainDomainSpec::synthetic_preset(), 32, rng)), clean,
                        std::to_string(i)});
      const Image other = synth_background(scene, rng);
      unpaired.push_back({compose_rainy(other, synth_rain_layer(RainDomainSpec::real_preset(), 32, rng)),
                          std::to_string(i)});
    }
    return TrainingData{PairedCollection(std::move(paired), 32), UnpairedCollection(std::move(unpaired), 32)};
  }();
  return data;
}

TrainConfig small_config(Strategy s, std::uint64_t seed = 1) {
  TrainConfig c;
  c.strategy = s;
  c.batch = 4;
  c.crop = 32;
  c.pretrain_epochs = 1;
  c.joint_epochs = 1;
  c.seed = seed;
  return c;
}

ModelConfig narrow_model() {
  ModelConfig m = ModelConfig::toy();
  m.removal.base_width = m.generation.base_width = m.discriminator.base_width = 8;
  return m;
}

std::vector<double> checksums(const JrgrModel& m) {
  std::vector<double> out;
  for (const auto& [name, net] : m.named_networks()) out.push_back(parameter_checksum(*net));
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string l;
  while (std::getline(in, l)) lines.push_back(l);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') out.emplace_back();
    else out.back() += c;
  }
  return out;
}

double mean_abs_change(const std::vector<torch::Tensor>& before, const ImageNet& net) {
  double sum = 0;
  int64_t n = 0;
  auto params = net->parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    sum += (params[i].detach() - before[i]).abs().sum().item<double>();
    n += params[i].numel();
  }
  return sum / static_cast<double>(n);
}

std::vector<torch::Tensor> snapshot(const ImageNet& net) {
  std::vector<torch::Tensor> out;
  for (const auto& p : net->parameters()) out.push_back(p.detach().clone());
  return out;
}

}  // namespace

TEST(Schedule, EpochArithmetic) {
  EXPECT_EQ(iterations_per_epoch(200, 200, 8), 25);
  EXPECT_EQ(iterations_per_epoch(200, 150, 16), 13);
  TrainConfig c;
  EXPECT_EQ(c.pretrain_epochs, 20);
  EXPECT_EQ(c.joint_epochs, 50);
  const auto s = make_schedule(c, 200, 200);
  EXPECT_EQ(s.pretrain_iterations, 500);
  EXPECT_EQ(s.joint_iterations, 1250);
  EXPECT_EQ(s.phase_at(499), Phase::kPretrain);
  EXPECT_EQ(s.phase_at(500), Phase::kJoint);
  EXPECT_EQ(s.phase_at(1750), Phase::kDone);
  c.strategy = Strategy::kInit1;
  EXPECT_EQ(make_schedule(c, 200, 200).pretrain_iterations, 0);
}

TEST(Config, PaperDefaults) {
  const TrainConfig c;
  EXPECT_EQ(c.base_lr, 1e-4);
  EXPECT_EQ(c.lr_divisor_Fr, 10.0);
  EXPECT_EQ(c.lr_divisor_Fs, 100.0);
  EXPECT_EQ(c.lr_pretrain(), c.base_lr);
  EXPECT_EQ(c.beta1, 0.5);
  EXPECT_EQ(c.beta2, 0.999);
  EXPECT_EQ(c.pool_capacity, 50);
  TrainConfig bad;
  bad.lr_divisor_Fs = 0.5;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.pretrain_lr = -1e-3;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(LearningRates, FirstStepUpdateRatios) {
  // Adam's first step moves every parameter by lr * g / |g| = lr, so equal
  // unit gradients expose the configured rates directly.
  struct Case {
    Strategy strategy;
    double fs_ratio, fr_ratio;
  };
  for (const auto& c : {Case{Strategy::kProposed, 0.01, 0.1}, Case{Strategy::kInit2, 0.01, 1.0},
                        Case{Strategy::kInit1, 1.0, 1.0}}) {
    JrgrModel m(narrow_model());
    init_parameters(m, 2);
    TrainConfig cfg = small_config(c.strategy);
    auto opt = make_joint_optimizers(m, cfg);
    const auto fs_before = snapshot(m.removal_syn), fr_before = snapshot(m.removal_real),
               gr_before = snapshot(m.gen_real);
    for (const auto& p : m.generator_parameters()) p.mutable_grad() = torch::ones_like(p);
    opt.removal_syn->step();
    opt.removal_real->step();
    opt.gen_real->step();
    const double gr = mean_abs_change(gr_before, m.gen_real);
    EXPECT_NEAR(gr, cfg.base_lr, cfg.base_lr * 1e-3);
    EXPECT_NEAR(mean_abs_change(fs_before, m.removal_syn) / gr, c.fs_ratio, c.fs_ratio * 1e-3);
    EXPECT_NEAR(mean_abs_change(fr_before, m.removal_real) / gr, c.fr_ratio, c.fr_ratio * 1e-3);
  }
}

TEST(Pretrain, HalvesTrainingMse) {
  std::vector<double> ratios;
  for (std::uint64_t seed : {1, 2, 3}) {
    JrgrModel m(narrow_model());
    init_parameters(m, seed);
    TrainConfig cfg = small_config(Strategy::kInit2, seed);
    cfg.pretrain_epochs = 50;  // 4 iterations per epoch
    Rng rng(derive_seed(seed, "probe"));
    torch::Tensor clean;
    const auto rainy = sample_paired_batch(toy_data().paired, 8, rng, &clean);
    auto mse = [&] {
      torch::NoGradGuard ng;
      return (m.removal_syn->forward(rainy) - clean).pow(2).mean().item<double>();
    };
    const double before = mse();
    pretrain_removal(m, toy_data().paired, cfg);
    ratios.push_back(mse() / before);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_LE(ratios[1], 0.5);
}

TEST(Pretrain, Init1IsNoOp) {
  JrgrModel m(narrow_model());
  init_parameters(m, 4);
  const auto before = checksums(m);
  pretrain_removal(m, toy_data().paired, small_config(Strategy::kInit1));
  EXPECT_EQ(checksums(m), before);
}

TEST(Pretrain, PretrainLrOverridesBaseLr) {
  auto pretrained = [](double base_lr, double pretrain_lr) {
    JrgrModel m(narrow_model());
    init_parameters(m, 4);
    TrainConfig cfg = small_config(Strategy::kProposed);
    cfg.base_lr = base_lr;
    cfg.pretrain_lr = pretrain_lr;
    pretrain_removal(m, toy_data().paired, cfg);
    return checksums(m);
  };
  const auto reference = pretrained(1e-4, 0.0);
  EXPECT_EQ(pretrained(5e-3, 1e-4), reference);
  EXPECT_NE(pretrained(1e-4, 1e-3), reference);
}

TEST(Pretrain, Init2LeavesRealRemovalUntouched) {
  JrgrModel m(narrow_model());
  init_parameters(m, 4);
  const double fr = parameter_checksum(*m.removal_real), fs = parameter_checksum(*m.removal_syn);
  pretrain_removal(m, toy_data().paired, small_config(Strategy::kInit2));
  EXPECT_EQ(parameter_checksum(*m.removal_real), fr);
  EXPECT_NE(parameter_checksum(*m.removal_syn), fs);
}

TEST(Pretrain, Reproducible) {
  auto run = [] {
    JrgrModel m(narrow_model());
    init_parameters(m, 9);
    Trainer t(m, small_config(Strategy::kProposed, 9), toy_data());
    double last = 0;
    for (int i = 0; i < 5; ++i) {
      Rng rng(derive_seed(9, "batch", static_cast<std::uint64_t>(i)));
      torch::Tensor clean;
      const auto rainy = sample_paired_batch(toy_data().paired, 4, rng, &clean);
      last = t.pretrain_step(rainy, clean);
    }
    return last;
  };
  EXPECT_NEAR(run(), run(), 1e-6);
}

TEST(Pretrain, EmptyPairedSet) {
  JrgrModel m(narrow_model());
  EXPECT_THROW(pretrain_removal(m, PairedCollection(), small_config(Strategy::kProposed)), DataError);
}

TEST(Joint, FiniteLossesFor100Iterations) {
  for (std::uint64_t seed : {1, 2, 3}) {
    JrgrModel m(narrow_model());
    init_parameters(m, seed);
    TrainConfig cfg = small_config(Strategy::kInit1, seed);
    cfg.joint_epochs = 25;  // 100 iterations
    Trainer t(m, cfg, toy_data());
    ASSERT_EQ(t.schedule().joint_iterations, 100);
    for (int i = 0; i < 100; ++i) {
      Rng rng(derive_seed(seed, "batch", static_cast<std::uint64_t>(i)));
      const auto report = t.joint_step(sample_training_batch(toy_data().paired, toy_data().unpaired, 4, rng));
      ASSERT_TRUE(report.finite()) << "seed " << seed << " iteration " << i;
    }
  }
}

TEST(Joint, GeneratorAndDiscriminatorStepsAreSeparate) {
  Rng rng(5);
  const auto batch = sample_training_batch(toy_data().paired, toy_data().unpaired, 4, rng);
  {
    // Every generator-side term off: only the discriminators may move.
    JrgrModel m(narrow_model());
    init_parameters(m, 5);
    TrainConfig cfg = small_config(Strategy::kInit1);
    for (auto name : {"cyc", "mse"}) cfg.ablation.disable(name);
    cfg.weights.lambda_adv = 0;
    Trainer t(m, cfg, toy_data());
    const auto before = checksums(m);
    t.joint_step(batch);
    const auto after = checksums(m);
    for (size_t i = 0; i < 4; ++i) EXPECT_EQ(after[i], before[i]);
    for (size_t i = 4; i < 7; ++i) EXPECT_NE(after[i], before[i]);
  }
  {
    // No adversarial terms: discriminator updates are skipped entirely.
    JrgrModel m(narrow_model());
    init_parameters(m, 5);
    TrainConfig cfg = small_config(Strategy::kInit1);
    for (auto name : {"adv_B", "adv_O"}) cfg.ablation.disable(name);
    Trainer t(m, cfg, toy_data());
    const auto before = checksums(m);
    t.joint_step(batch);
    const auto after = checksums(m);
    for (size_t i = 0; i < 4; ++i) EXPECT_NE(after[i], before[i]);
    for (size_t i = 4; i < 7; ++i) EXPECT_EQ(after[i], before[i]);
  }
}

TEST(Joint, MseAblationRemovesTerm) {
  JrgrModel m(narrow_model());
  init_parameters(m, 6);
  TrainConfig cfg = small_config(Strategy::kInit1);
  cfg.ablation.disable("mse");
  Trainer t(m, cfg, toy_data());
  Rng rng(6);
  const auto r = t.joint_step(sample_training_batch(toy_data().paired, toy_data().unpaired, 4, rng));
  EXPECT_EQ(r.mse_Bs, 0.0);
  EXPECT_NEAR(r.total, full_objective(r, cfg.weights), 1e-9);
  EXPECT_GT(r.cyc_Os, 0.0);
}

TEST(Joint, NanAbortsWithSnapshot) {
  TempDir dir;
  JrgrModel m(narrow_model());
  init_parameters(m, 7);
  Trainer t(m, small_config(Strategy::kInit1), toy_data(), {"", dir.path() / "ckpt"});
  Rng rng(7);
  auto batch = sample_training_batch(toy_data().paired, toy_data().unpaired, 4, rng);
  batch.rainy_real[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(t.joint_step(batch), NanAbort);
  EXPECT_TRUE(find_latest_checkpoint(dir.path() / "ckpt").has_value());
}

TEST(Metrics, OneRowPerIterationAndPhases) {
  for (auto strategy : {Strategy::kInit1, Strategy::kInit2, Strategy::kProposed}) {
    TempDir dir;
    JrgrModel m(narrow_model());
    init_parameters(m, 3);
    Trainer t(m, small_config(strategy), toy_data(), {dir.path() / "metrics.csv", ""});
    t.run();
    const auto lines = read_lines(dir.path() / "metrics.csv");
    const int64_t total = t.schedule().total();
    ASSERT_EQ(static_cast<int64_t>(lines.size()), 1 + total);
    int pretrain = 0, joint = 0;
    for (size_t i = 1; i < lines.size(); ++i) {
      const auto f = split_csv(lines[i]);
      ASSERT_EQ(f.size(), MetricsLog::columns().size()) << lines[i];
      EXPECT_EQ(std::stoll(f[1]), static_cast<int64_t>(i - 1));
      if (f[0] == "pretrain") {
        ++pretrain;
        EXPECT_FALSE(f[15].empty());
        // F_r's column is filled only when it is pretrained.
        EXPECT_EQ(!f[16].empty(), strategy == Strategy::kProposed) << lines[i];
      } else {
        ASSERT_EQ(f[0], "joint");
        ++joint;
        for (size_t k = 3; k < 15; ++k) EXPECT_FALSE(f[k].empty()) << lines[i];
      }
    }
    EXPECT_EQ(pretrain, strategy == Strategy::kInit1 ? 0 : 4);
    EXPECT_EQ(joint, 4);
  }
}

TEST(Checkpoint, RoundTripRestoresParameters) {
  TempDir dir;
  JrgrModel m(narrow_model());
  init_parameters(m, 8);
  const auto cfg = small_config(Strategy::kProposed);
  const auto info = save_checkpoint(m, cfg, 42, dir.path());
  EXPECT_TRUE(fs::exists(dir.path() / "42.archive"));
  EXPECT_TRUE(fs::exists(dir.path() / "42.manifest"));
  const auto loaded = load_checkpoint(info.manifest);
  EXPECT_EQ(loaded.iteration, 42);
  EXPECT_EQ(loaded.config, cfg);
  EXPECT_EQ(checksums(*loaded.model), checksums(m));
  EXPECT_EQ(checksums(*load_checkpoint(dir.path() / "42").model), checksums(m));
  for (const auto& e : fs::directory_iterator(dir.path())) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Checkpoint, IncompatibleArchitecture) {
  TempDir dir;
  JrgrModel m(narrow_model());
  const auto info = save_checkpoint(m, small_config(Strategy::kProposed), 1, dir.path());
  ModelConfig wider = narrow_model();
  wider.removal.base_width = 16;
  EXPECT_THROW(load_checkpoint(info.manifest, &wider), CompatibilityError);
  // A manifest edited to claim another width no longer matches the archive.
  auto text = read_lines(info.manifest);
  std::ofstream out(info.manifest);
  bool replaced = false;
  for (auto& l : text) {
    if (!replaced && l.find("\"base_width\": 8") != std::string::npos) {
      l.replace(l.find('8'), 1, "16");
      replaced = true;
    }
    out << l << '\n';
  }
  out.close();
  EXPECT_THROW(load_checkpoint(info.manifest), CompatibilityError);
}

TEST(Checkpoint, ResumeContinuesAtNextIteration) {
  TempDir dir;
  const auto ckpt_dir = dir.path() / "ckpt";
  TrainConfig cfg = small_config(Strategy::kProposed);
  cfg.checkpoint_every = 3;
  {
    JrgrModel m(narrow_model());
    init_parameters(m, 1);
    Trainer t(m, cfg, toy_data(), {"", ckpt_dir});
    // Stop partway through the joint phase.
    t.pretrain_removal();
    Rng rng(1);
    t.joint_step(sample_training_batch(toy_data().paired, toy_data().unpaired, 4, rng));
    EXPECT_TRUE(fs::exists(ckpt_dir / "3.manifest"));
    EXPECT_TRUE(fs::exists(ckpt_dir / "4.manifest"));
  }
  auto loaded = load_checkpoint(*find_latest_checkpoint(ckpt_dir));
  ASSERT_EQ(loaded.iteration, 4);
  Trainer t(*loaded.model, cfg, toy_data(), {"", ckpt_dir});
  t.resume_from(loaded);
  cfg.checkpoint_every = 1;
  Trainer one_step(*loaded.model, cfg, toy_data(), {"", ckpt_dir});
  one_step.resume_from(loaded);
  Rng rng(derive_seed(cfg.seed, "batch", 4));
  one_step.joint_step(sample_training_batch(toy_data().paired, toy_data().unpaired, 4, rng));
  // Run the remaining schedule through the public driver.
  one_step.joint_train();
  EXPECT_EQ(one_step.iteration(), one_step.schedule().total());
  EXPECT_TRUE(fs::exists(ckpt_dir / "5.manifest"));
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  TempDir a, b;
  TrainConfig cfg = small_config(Strategy::kProposed);
  cfg.checkpoint_every = 2;
  JrgrModel full(narrow_model());
  init_parameters(full, 3);
  Trainer(full, cfg, toy_data(), {"", a.path()}).run();

  JrgrModel part(narrow_model());
  init_parameters(part, 3);
  {
    Trainer t(part, cfg, toy_data(), {"", b.path()});
    t.pretrain_removal();
  }
  auto loaded = load_checkpoint(*find_latest_checkpoint(b.path()));
  EXPECT_EQ(loaded.phase, Phase::kPretrain);
  Trainer t(*loaded.model, cfg, toy_data(), {"", b.path()});
  t.resume_from(loaded);
  t.run();
  EXPECT_EQ(checksums(*loaded.model), checksums(full));
}
