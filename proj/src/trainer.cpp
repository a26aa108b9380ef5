#include "jrgr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "jrgr/errors.hpp"
#include "jrgr/json_util.hpp"

namespace jrgr {
namespace fs = std::filesystem;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kInit1: return "init-1";
    case Strategy::kInit2: return "init-2";
    case Strategy::kProposed: return "proposed";
  }
  return "proposed";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "init-1") return Strategy::kInit1;
  if (name == "init-2") return Strategy::kInit2;
  if (name == "proposed") return Strategy::kProposed;
  throw ValidationError("train field 'strategy' has unknown value '" + name + "'");
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kPretrain: return "pretrain";
    case Phase::kJoint: return "joint";
    case Phase::kDone: return "done";
  }
  return "done";
}

namespace {

Phase phase_from_string(const std::string& s) {
  if (s == "pretrain") return Phase::kPretrain;
  if (s == "joint") return Phase::kJoint;
  return Phase::kDone;
}

std::string gan_mode_name(GanMode m) { return m == GanMode::kBce ? "bce" : "lsgan"; }

GanMode gan_mode_from(const std::string& s) {
  if (s == "bce") return GanMode::kBce;
  if (s == "lsgan") return GanMode::kLeastSquares;
  throw ValidationError("train field 'gan_mode' has unknown value '" + s + "'");
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw ValidationError("train field '" + field + "' " + what);
  };
  if (pretrain_epochs < 0) fail("pretrain_epochs", "must be >= 0");
  if (joint_epochs < 0) fail("joint_epochs", "must be >= 0");
  if (!(base_lr > 0.0)) fail("base_lr", "must be > 0");
  if (!(pretrain_lr >= 0.0)) fail("pretrain_lr", "must be >= 0");
  if (!(lr_divisor_Fr >= 1.0)) fail("lr_divisor_Fr", "must be >= 1");
  if (!(lr_divisor_Fs >= 1.0)) fail("lr_divisor_Fs", "must be >= 1");
  if (batch < 1) fail("batch", "must be >= 1");
  if (crop < 1) fail("crop", "must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (pool_capacity < 0) fail("pool_capacity", "must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
  if (log_every < 0) fail("log_every", "must be >= 0");
  weights.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"strategy", to_string(c.strategy)},
       {"pretrain_epochs", c.pretrain_epochs},
       {"joint_epochs", c.joint_epochs},
       {"base_lr", c.base_lr},
       {"pretrain_lr", c.pretrain_lr},
       {"lr_divisor_Fr", c.lr_divisor_Fr},
       {"lr_divisor_Fs", c.lr_divisor_Fs},
       {"batch", c.batch},
       {"crop", c.crop},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"weights",
        {{"alpha", c.weights.alpha},
         {"lambda_adv", c.weights.lambda_adv},
         {"lambda_cyc", c.weights.lambda_cyc},
         {"lambda_mse", c.weights.lambda_mse}}},
       {"disable_losses", c.ablation.names()},
       {"gan_mode", gan_mode_name(c.gan_mode)},
       {"pool_capacity", c.pool_capacity},
       {"checkpoint_every", c.checkpoint_every},
       {"log_every", c.log_every},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const char* ctx = "train";
  json_util::check_keys(j,
                        {"strategy", "pretrain_epochs", "joint_epochs", "base_lr", "pretrain_lr", "lr_divisor_Fr",
                         "lr_divisor_Fs", "batch", "crop", "beta1", "beta2", "weights", "disable_losses",
                         "gan_mode", "pool_capacity", "checkpoint_every", "log_every", "seed"},
                        ctx);
  std::string strategy = to_string(c.strategy);
  json_util::read(j, "strategy", strategy, ctx);
  c.strategy = strategy_from_string(strategy);
  json_util::read(j, "pretrain_epochs", c.pretrain_epochs, ctx);
  json_util::read(j, "joint_epochs", c.joint_epochs, ctx);
  json_util::read(j, "base_lr", c.base_lr, ctx);
  json_util::read(j, "pretrain_lr", c.pretrain_lr, ctx);
  json_util::read(j, "lr_divisor_Fr", c.lr_divisor_Fr, ctx);
  json_util::read(j, "lr_divisor_Fs", c.lr_divisor_Fs, ctx);
  json_util::read(j, "batch", c.batch, ctx);
  json_util::read(j, "crop", c.crop, ctx);
  json_util::read(j, "beta1", c.beta1, ctx);
  json_util::read(j, "beta2", c.beta2, ctx);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    json_util::check_keys(w, {"alpha", "lambda_adv", "lambda_cyc", "lambda_mse"}, "train.weights");
    json_util::read(w, "alpha", c.weights.alpha, "train.weights");
    json_util::read(w, "lambda_adv", c.weights.lambda_adv, "train.weights");
    json_util::read(w, "lambda_cyc", c.weights.lambda_cyc, "train.weights");
    json_util::read(w, "lambda_mse", c.weights.lambda_mse, "train.weights");
  }
  if (j.contains("disable_losses")) {
    std::vector<std::string> names;
    json_util::read(j, "disable_losses", names, ctx);
    c.ablation = AblationMask();
    for (const auto& n : names) c.ablation.disable(n);
  }
  std::string mode = gan_mode_name(c.gan_mode);
  json_util::read(j, "gan_mode", mode, ctx);
  c.gan_mode = gan_mode_from(mode);
  json_util::read(j, "pool_capacity", c.pool_capacity, ctx);
  json_util::read(j, "checkpoint_every", c.checkpoint_every, ctx);
  json_util::read(j, "log_every", c.log_every, ctx);
  json_util::read(j, "seed", c.seed, ctx);
}

int64_t iterations_per_epoch(size_t paired, size_t unpaired, int64_t batch) {
  const auto n = static_cast<int64_t>(std::max(paired, unpaired));
  return std::max<int64_t>(1, (n + batch - 1) / batch);
}

Phase Schedule::phase_at(int64_t iteration) const {
  if (iteration < pretrain_iterations) return Phase::kPretrain;
  if (iteration < total()) return Phase::kJoint;
  return Phase::kDone;
}

Schedule make_schedule(const TrainConfig& cfg, size_t paired, size_t unpaired) {
  const int64_t per_epoch = iterations_per_epoch(paired, unpaired, cfg.batch);
  Schedule s;
  s.pretrain_iterations = cfg.pretrains_synthetic() ? cfg.pretrain_epochs * per_epoch : 0;
  s.joint_iterations = cfg.joint_epochs * per_epoch;
  return s;
}

namespace {

std::unique_ptr<torch::optim::Adam> adam(const ImageNet& net, double lr, const TrainConfig& cfg) {
  return std::make_unique<torch::optim::Adam>(
      net->parameters(), torch::optim::AdamOptions(lr).betas({cfg.beta1, cfg.beta2}));
}

}  // namespace

std::vector<std::pair<std::string, torch::optim::Optimizer*>> JointOptimizers::named() {
  return {{"F_s", removal_syn.get()},
          {"F_r", removal_real.get()},
          {"G_s", gen_syn.get()},
          {"G_r", gen_real.get()},
          {"D", discriminators.get()}};
}

JointOptimizers make_joint_optimizers(const JrgrModel& model, const TrainConfig& cfg) {
  JointOptimizers o;
  o.removal_syn = adam(model.removal_syn, cfg.lr_removal_syn(), cfg);
  o.removal_real = adam(model.removal_real, cfg.lr_removal_real(), cfg);
  o.gen_syn = adam(model.gen_syn, cfg.base_lr, cfg);
  o.gen_real = adam(model.gen_real, cfg.base_lr, cfg);
  o.discriminators = std::make_unique<torch::optim::Adam>(
      model.discriminator_parameters(), torch::optim::AdamOptions(cfg.base_lr).betas({cfg.beta1, cfg.beta2}));
  return o;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<std::string> MetricsLog::columns() {
  return {"phase",  "iteration", "epoch",  "adv_B",  "adv_Os", "adv_Or",          "cyc_Os",
          "cyc_Or", "cyc_Bs",    "cyc_Br", "mse_Bs", "total",  "d_B",             "d_Os",
          "d_Or",   "pretrain_mse_Fs", "pretrain_mse_Fr", "wall_clock_s"};
}

MetricsLog::MetricsLog(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) {
    throw IoError("cannot open metrics log: " + path.string());
  }
  out_ << std::setprecision(10);
  if (fresh) {
    const auto cols = columns();
    for (size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << '\n';
    out_.flush();
  }
}

void MetricsLog::pretrain_row(int64_t iteration, int64_t epoch, double mse_syn, std::optional<double> mse_real,
                              double wall_clock) {
  if (!enabled()) return;
  out_ << "pretrain," << iteration << ',' << epoch << ",,,,,,,,,,,,," << mse_syn << ',';
  if (mse_real) out_ << *mse_real;
  out_ << ',' << wall_clock << '\n';
  out_.flush();
}

void MetricsLog::joint_row(int64_t iteration, int64_t epoch, const LossReport& r, double wall_clock) {
  if (!enabled()) return;
  out_ << "joint," << iteration << ',' << epoch << ',' << r.adv_B << ',' << r.adv_Os << ',' << r.adv_Or << ','
       << r.cyc_Os << ',' << r.cyc_Or << ',' << r.cyc_Bs << ',' << r.cyc_Br << ',' << r.mse_Bs << ',' << r.total
       << ',' << r.d_B << ',' << r.d_Os << ',' << r.d_Or << ",,," << wall_clock << '\n';
  out_.flush();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void atomic_write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string module_key(const std::string& net, const std::string& param) { return net + "." + param; }

}  // namespace

CheckpointInfo save_checkpoint(const JrgrModel& model, const TrainConfig& cfg, int64_t iteration,
                               const fs::path& ckpt_dir,
                               const std::vector<std::pair<std::string, torch::optim::Optimizer*>>& optimizers,
                               Phase phase) {
  std::error_code ec;
  fs::create_directories(ckpt_dir, ec);
  if (!fs::is_directory(ckpt_dir)) {
    throw IoError("cannot create checkpoint directory: " + ckpt_dir.string());
  }
  CheckpointInfo info;
  info.iteration = iteration;
  info.archive = ckpt_dir / (std::to_string(iteration) + ".archive");
  info.manifest = ckpt_dir / (std::to_string(iteration) + ".manifest");

  torch::serialize::OutputArchive archive;
  for (const auto& [name, net] : model.named_networks()) {
    for (const auto& item : net->named_parameters()) {
      archive.write(module_key(name, item.key()), item.value().detach());
    }
  }
  for (const auto& [name, opt] : optimizers) {
    if (opt == nullptr) continue;
    torch::serialize::OutputArchive sub;
    opt->save(sub);
    archive.write("optim." + to_string(phase) + "." + name, sub);
  }
  const fs::path tmp = info.archive.string() + ".tmp";
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint archive: " + tmp.string());
  }
  fs::rename(tmp, info.archive);

  nlohmann::json manifest = {{"format", "jrgr-checkpoint/1"},
                             {"iteration", iteration},
                             {"phase", to_string(phase)},
                             {"archive", info.archive.filename().string()},
                             {"model", model.config},
                             {"train", cfg},
                             {"seed", cfg.seed}};
  atomic_write_text(info.manifest, manifest.dump(2) + "\n");
  return info;
}

namespace {

fs::path manifest_for(const fs::path& path) {
  if (path.extension() == ".manifest") return path;
  if (path.extension() == ".archive") return fs::path(path).replace_extension(".manifest");
  return fs::path(path.string() + ".manifest");
}

}  // namespace

LoadedCheckpoint load_checkpoint(const fs::path& path, const ModelConfig* expected) {
  const fs::path manifest_path = manifest_for(path);
  std::ifstream in(manifest_path);
  if (!in) {
    throw IoError("cannot open checkpoint manifest: " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  LoadedCheckpoint out;
  ModelConfig model_cfg;
  try {
    model_cfg = manifest.at("model").get<ModelConfig>();
    out.config = manifest.at("train").get<TrainConfig>();
    out.iteration = manifest.at("iteration").get<int64_t>();
    out.phase = phase_from_string(manifest.value("phase", std::string("done")));
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError("incomplete checkpoint manifest: " + std::string(e.what()));
  }
  if (expected != nullptr && !(*expected == model_cfg)) {
    throw CompatibilityError("checkpoint architecture differs from the requested model configuration");
  }
  out.archive = manifest_path.parent_path() / manifest.value("archive", manifest_path.stem().string() + ".archive");
  out.model = std::make_unique<JrgrModel>(model_cfg);

  torch::serialize::InputArchive archive;
  try {
    archive.load_from(out.archive.string());
  } catch (const c10::Error&) {
    throw IoError("cannot read checkpoint archive: " + out.archive.string());
  }
  torch::NoGradGuard no_grad;
  for (const auto& [name, net] : out.model->named_networks()) {
    for (auto& item : net->named_parameters()) {
      torch::Tensor stored;
      const auto key = module_key(name, item.key());
      if (!archive.try_read(key, stored)) {
        throw CompatibilityError("checkpoint lacks parameter " + key);
      }
      if (stored.sizes() != item.value().sizes()) {
        throw CompatibilityError("checkpoint parameter " + key + " has a different shape");
      }
      item.value().copy_(stored);
    }
  }
  return out;
}

bool load_optimizer_states(const fs::path& archive_path, Phase phase,
                           const std::vector<std::pair<std::string, torch::optim::Optimizer*>>& optimizers) {
  torch::serialize::InputArchive archive;
  archive.load_from(archive_path.string());
  bool any = false;
  for (const auto& [name, opt] : optimizers) {
    torch::serialize::InputArchive sub;
    if (opt != nullptr && archive.try_read("optim." + to_string(phase) + "." + name, sub)) {
      opt->load(sub);
      any = true;
    }
  }
  return any;
}

std::optional<fs::path> find_latest_checkpoint(const fs::path& ckpt_dir) {
  if (!fs::is_directory(ckpt_dir)) return std::nullopt;
  std::optional<fs::path> best;
  int64_t best_iter = -1;
  for (const auto& e : fs::directory_iterator(ckpt_dir)) {
    if (e.path().extension() != ".manifest") continue;
    const auto stem = e.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    const int64_t it = std::stoll(stem);
    if (it > best_iter) {
      best_iter = it;
      best = e.path();
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(JrgrModel& model, TrainConfig cfg, const TrainingData& data, TrainerPaths paths)
    : model_(model),
      cfg_(std::move(cfg)),
      data_(data),
      paths_(std::move(paths)),
      pool_background_(static_cast<size_t>(cfg_.pool_capacity), 0.5, derive_seed(cfg_.seed, "pool/B")),
      pool_syn_(static_cast<size_t>(cfg_.pool_capacity), 0.5, derive_seed(cfg_.seed, "pool/Os")),
      pool_real_(static_cast<size_t>(cfg_.pool_capacity), 0.5, derive_seed(cfg_.seed, "pool/Or")),
      start_(std::chrono::steady_clock::now()) {
  cfg_.validate();
  schedule_ = make_schedule(cfg_, data_.paired.size(), data_.unpaired.size());
  iterations_per_epoch_ = iterations_per_epoch(data_.paired.size(), data_.unpaired.size(), cfg_.batch);
  if (!paths_.metrics_csv.empty()) {
    metrics_ = MetricsLog(paths_.metrics_csv);
  }
}

double Trainer::elapsed() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

int64_t Trainer::epoch_of(int64_t iteration) const {
  const int64_t local = iteration < schedule_.pretrain_iterations ? iteration
                                                                  : iteration - schedule_.pretrain_iterations;
  return local / iterations_per_epoch_;
}

void Trainer::ensure_pretrain_optimizers() {
  if (!pretrain_syn_) {
    pretrain_syn_ = adam(model_.removal_syn, cfg_.lr_pretrain(), cfg_);
    if (cfg_.pretrains_real()) pretrain_real_ = adam(model_.removal_real, cfg_.lr_pretrain(), cfg_);
  }
}

void Trainer::ensure_joint_optimizers() {
  if (!joint_opt_.gen_real) joint_opt_ = make_joint_optimizers(model_, cfg_);
}

void Trainer::resume_from(const LoadedCheckpoint& ckpt) {
  iteration_ = ckpt.iteration;
  const Phase phase = schedule_.phase_at(iteration_);
  if (iteration_ > schedule_.pretrain_iterations || (iteration_ == schedule_.pretrain_iterations && iteration_ > 0)) {
    pretrain_end_reported_ = true;
  }
  if (phase == Phase::kPretrain) {
    ensure_pretrain_optimizers();
    if (ckpt.archive.empty()) return;
    load_optimizer_states(ckpt.archive, Phase::kPretrain,
                          {{"F_s", pretrain_syn_.get()}, {"F_r", pretrain_real_.get()}});
  } else if (phase == Phase::kJoint) {
    ensure_joint_optimizers();
    if (ckpt.archive.empty()) return;
    load_optimizer_states(ckpt.archive, Phase::kJoint, joint_opt_.named());
  }
}

void Trainer::checkpoint(Phase phase) {
  if (paths_.checkpoint_dir.empty()) return;
  std::vector<std::pair<std::string, torch::optim::Optimizer*>> opts;
  if (phase == Phase::kPretrain) {
    opts = {{"F_s", pretrain_syn_.get()}, {"F_r", pretrain_real_.get()}};
  } else if (phase == Phase::kJoint) {
    opts = joint_opt_.named();
  }
  last_checkpoint_ = save_checkpoint(model_, cfg_, iteration_, paths_.checkpoint_dir, opts, phase);
}

double Trainer::pretrain_step(const torch::Tensor& rainy, const torch::Tensor& clean, double* mse_real) {
  ensure_pretrain_optimizers();
  model_.train(true);
  auto loss_syn = (model_.removal_syn->forward(rainy) - clean).pow(2).mean();
  pretrain_syn_->zero_grad();
  loss_syn.backward();
  const double syn = loss_syn.item<double>();
  if (!std::isfinite(syn)) throw NanAbort("non-finite pretraining loss for F_s at iteration " + std::to_string(iteration_));
  pretrain_syn_->step();
  if (pretrain_real_) {
    auto loss_real = (model_.removal_real->forward(rainy) - clean).pow(2).mean();
    pretrain_real_->zero_grad();
    loss_real.backward();
    const double real = loss_real.item<double>();
    if (!std::isfinite(real)) throw NanAbort("non-finite pretraining loss for F_r at iteration " + std::to_string(iteration_));
    pretrain_real_->step();
    if (mse_real) *mse_real = real;
  }
  return syn;
}

void Trainer::pretrain_removal() {
  if (data_.paired.empty()) {
    throw DataError("pretraining requires paired data");
  }
  while (iteration_ < schedule_.pretrain_iterations) {
    Rng rng(derive_seed(cfg_.seed, "batch", static_cast<std::uint64_t>(iteration_)));
    torch::Tensor clean;
    auto rainy = sample_paired_batch(data_.paired, cfg_.batch, rng, &clean);
    double mse_real = 0.0;
    const double mse_syn = pretrain_step(rainy, clean, &mse_real);
    metrics_.pretrain_row(iteration_, epoch_of(iteration_), mse_syn,
                          cfg_.pretrains_real() ? std::optional<double>(mse_real) : std::nullopt, elapsed());
    if (cfg_.log_every > 0 && iteration_ % cfg_.log_every == 0) {
      std::cerr << "[pretrain] it " << iteration_ << " mse_Fs " << mse_syn << '\n';
    }
    ++iteration_;
    if (cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0) checkpoint(Phase::kPretrain);
  }
  if (!pretrain_end_reported_) {
    pretrain_end_reported_ = true;
    if (schedule_.pretrain_iterations > 0) checkpoint(Phase::kPretrain);
    if (on_pretrain_end) on_pretrain_end(*this);
  }
}

LossReport Trainer::joint_step(const TrainingBatch& batch) {
  ensure_joint_optimizers();
  model_.train(true);

  // Generator update; discriminators are frozen so no gradient reaches them.
  model_.set_discriminators_trainable(false);
  const auto s2r = s2r_forward(model_, batch.rainy_syn);
  const auto r2s = r2s_forward(model_, batch.rainy_real);
  const auto terms = generator_terms(model_, s2r, r2s, batch.clean_syn, cfg_.ablation, cfg_.gan_mode);
  auto total = full_objective(terms, cfg_.weights);
  LossReport report = make_report(terms, cfg_.weights);
  if (!report.finite()) {
    checkpoint(Phase::kDone);
    throw NanAbort("non-finite generator loss at iteration " + std::to_string(iteration_));
  }
  for (auto& [name, opt] : joint_opt_.named()) {
    if (name != "D") opt->zero_grad();
  }
  if (total.requires_grad()) total.backward();
  joint_opt_.removal_syn->step();
  joint_opt_.removal_real->step();
  joint_opt_.gen_syn->step();
  joint_opt_.gen_real->step();

  // Discriminator update on detached, pooled fakes.
  model_.set_discriminators_trainable(true);
  const auto& mask = cfg_.ablation;
  torch::Tensor d_total = torch::zeros({}, batch.rainy_syn.options());
  if (mask.enabled(LossTerm::kAdvB)) {
    std::vector<torch::Tensor> fakes;
    for (const auto& b : decomposed_backgrounds(s2r, r2s)) {
      fakes.push_back(pool_background_.query_batch(b.detach()));
    }
    auto d_b = loss_adv_B_discriminator(model_, fakes, batch.clean_syn, cfg_.weights, cfg_.gan_mode);
    report.d_B = d_b.item<double>();
    d_total = d_total + d_b;
  }
  if (mask.enabled(LossTerm::kAdvOr)) {
    auto d_or = loss_adv_O_discriminator(model_, s2r, batch.rainy_real, &pool_real_, cfg_.gan_mode);
    report.d_Or = d_or.item<double>();
    d_total = d_total + d_or;
  }
  if (mask.enabled(LossTerm::kAdvOs)) {
    auto d_os = loss_adv_O_discriminator(model_, r2s, batch.rainy_syn, &pool_syn_, cfg_.gan_mode);
    report.d_Os = d_os.item<double>();
    d_total = d_total + d_os;
  }
  if (!report.finite()) {
    checkpoint(Phase::kDone);
    throw NanAbort("non-finite discriminator loss at iteration " + std::to_string(iteration_));
  }
  joint_opt_.discriminators->zero_grad();
  if (d_total.requires_grad()) {
    d_total.backward();
    joint_opt_.discriminators->step();
  }
  return report;
}

void Trainer::joint_train() {
  if (data_.paired.empty() || data_.unpaired.empty()) {
    throw DataError("joint training requires paired and unpaired data");
  }
  ensure_joint_optimizers();
  while (iteration_ < schedule_.total()) {
    Rng rng(derive_seed(cfg_.seed, "batch", static_cast<std::uint64_t>(iteration_)));
    const auto batch = sample_training_batch(data_.paired, data_.unpaired, cfg_.batch, rng);
    const auto report = joint_step(batch);
    metrics_.joint_row(iteration_, epoch_of(iteration_), report, elapsed());
    if (cfg_.log_every > 0 && iteration_ % cfg_.log_every == 0) {
      std::cerr << "[joint] it " << iteration_ << " total " << report.total << " mse_Bs " << report.mse_Bs
                << " adv " << report.adv_B << '/' << report.adv_Os << '/' << report.adv_Or << " d "
                << report.d_B << '/' << report.d_Os << '/' << report.d_Or << '\n';
    }
    ++iteration_;
    if (cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0) checkpoint(Phase::kJoint);
  }
  if (schedule_.joint_iterations > 0) checkpoint(Phase::kJoint);
}

void Trainer::run() {
  if (schedule_.phase_at(iteration_) == Phase::kPretrain || !pretrain_end_reported_) {
    pretrain_removal();
  }
  joint_train();
}

void pretrain_removal(JrgrModel& model, const PairedCollection& paired, const TrainConfig& cfg) {
  if (paired.empty()) {
    throw DataError("pretraining requires paired data");
  }
  TrainingData data{paired, UnpairedCollection()};
  Trainer trainer(model, cfg, data);
  trainer.pretrain_removal();
}

void joint_train(JrgrModel& model, const PairedCollection& paired, const UnpairedCollection& unpaired,
                 const TrainConfig& cfg) {
  TrainingData data{paired, unpaired};
  Trainer trainer(model, cfg, data);
  // Start directly at the joint phase.
  LoadedCheckpoint position;
  position.iteration = trainer.schedule().pretrain_iterations;
  trainer.resume_from(position);
  trainer.joint_train();
}

}  // namespace jrgr
