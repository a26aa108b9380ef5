#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "jrgr/datasets.hpp"
#include "jrgr/losses.hpp"
#include "jrgr/networks.hpp"

namespace jrgr {

// init-1: no pretraining. init-2: pretrain F_s only. proposed: pretrain
// F_s and F_r.
enum class Strategy { kInit1, kInit2, kProposed };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

enum class Phase { kPretrain, kJoint, kDone };
std::string to_string(Phase p);

struct TrainConfig {
  Strategy strategy = Strategy::kProposed;
  int64_t pretrain_epochs = 20;
  int64_t joint_epochs = 50;
  double base_lr = 1e-4;
  double pretrain_lr = 0.0;  // 0 = base_lr
  double lr_divisor_Fr = 10.0;
  double lr_divisor_Fs = 100.0;
  int64_t batch = 8;
  int64_t crop = 64;
  double beta1 = 0.5;
  double beta2 = 0.999;
  LossWeights weights;
  AblationMask ablation;
  GanMode gan_mode = GanMode::kBce;
  int64_t pool_capacity = 50;
  int64_t checkpoint_every = 0;  // iterations; 0 = at phase ends only
  int64_t log_every = 0;         // iterations; 0 = silent
  std::uint64_t seed = 0;

  void validate() const;
  bool pretrains_synthetic() const { return strategy != Strategy::kInit1; }
  bool pretrains_real() const { return strategy == Strategy::kProposed; }
  double lr_pretrain() const { return pretrain_lr > 0.0 ? pretrain_lr : base_lr; }
  // Joint-phase learning rates; non-pretrained removal nets use base_lr.
  double lr_removal_syn() const { return pretrains_synthetic() ? base_lr / lr_divisor_Fs : base_lr; }
  double lr_removal_real() const { return pretrains_real() ? base_lr / lr_divisor_Fr : base_lr; }
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// One epoch = ceil(max(set sizes) / batch) iterations.
int64_t iterations_per_epoch(size_t paired, size_t unpaired, int64_t batch);

// Global iteration layout: pretrain iterations first, then joint ones.
struct Schedule {
  int64_t pretrain_iterations = 0;
  int64_t joint_iterations = 0;
  int64_t total() const { return pretrain_iterations + joint_iterations; }
  Phase phase_at(int64_t iteration) const;
};

Schedule make_schedule(const TrainConfig& cfg, size_t paired, size_t unpaired);

// Per-network Adam optimizers of the joint phase.
struct JointOptimizers {
  std::unique_ptr<torch::optim::Adam> removal_syn, removal_real, gen_syn, gen_real, discriminators;

  std::vector<std::pair<std::string, torch::optim::Optimizer*>> named();
};

JointOptimizers make_joint_optimizers(const JrgrModel& model, const TrainConfig& cfg);

// Append-only CSV with one row per generator iteration.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::filesystem::path& path);

  void pretrain_row(int64_t iteration, int64_t epoch, double mse_syn, std::optional<double> mse_real,
                    double wall_clock);
  void joint_row(int64_t iteration, int64_t epoch, const LossReport& report, double wall_clock);
  bool enabled() const { return out_.is_open(); }

  static std::vector<std::string> columns();

 private:
  std::ofstream out_;
};

struct CheckpointInfo {
  std::filesystem::path manifest;
  std::filesystem::path archive;
  int64_t iteration = 0;
};

// Writes ckpt_dir/{iteration}.archive and ckpt_dir/{iteration}.manifest via
// write-to-temp-then-rename. Optimizer states, when given, go into the
// archive tagged with the phase they belong to.
CheckpointInfo save_checkpoint(const JrgrModel& model, const TrainConfig& cfg, int64_t iteration,
                               const std::filesystem::path& ckpt_dir,
                               const std::vector<std::pair<std::string, torch::optim::Optimizer*>>& optimizers = {},
                               Phase phase = Phase::kDone);

struct LoadedCheckpoint {
  std::unique_ptr<JrgrModel> model;
  TrainConfig config;
  int64_t iteration = 0;
  Phase phase = Phase::kDone;
  std::filesystem::path archive;
};

// Accepts a manifest path, an archive path or their common stem. When
// `expected` is given, a differing architecture is a CompatibilityError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);
// Restores the optimizers saved with the checkpoint if they belong to
// `phase`; returns false when none were stored for it.
bool load_optimizer_states(const std::filesystem::path& archive, Phase phase,
                           const std::vector<std::pair<std::string, torch::optim::Optimizer*>>& optimizers);
std::optional<std::filesystem::path> find_latest_checkpoint(const std::filesystem::path& ckpt_dir);

struct TrainerPaths {
  std::filesystem::path metrics_csv;     // empty = no metrics
  std::filesystem::path checkpoint_dir;  // empty = no checkpoints
};

// Runs the staged schedule: supervised pretraining of the removal networks
// (per strategy) followed by alternating generator / discriminator steps on
// the full objective.
class Trainer {
 public:
  Trainer(JrgrModel& model, TrainConfig cfg, const TrainingData& data, TrainerPaths paths = {});

  void run();
  // Phase-limited drivers; both continue from the current iteration.
  void pretrain_removal();
  void joint_train();

  // Restore position (and matching optimizer state) from a checkpoint.
  void resume_from(const LoadedCheckpoint& ckpt);

  double pretrain_step(const torch::Tensor& rainy, const torch::Tensor& clean, double* mse_real = nullptr);
  LossReport joint_step(const TrainingBatch& batch);

  int64_t iteration() const { return iteration_; }
  const Schedule& schedule() const { return schedule_; }
  const TrainConfig& config() const { return cfg_; }
  JointOptimizers& joint_optimizers() { return joint_opt_; }
  std::optional<CheckpointInfo> last_checkpoint() const { return last_checkpoint_; }

  // Called once when the pretrain phase completes (also for init-1, where
  // it is empty).
  std::function<void(const Trainer&)> on_pretrain_end;

 private:
  void checkpoint(Phase phase);
  void ensure_pretrain_optimizers();
  void ensure_joint_optimizers();
  int64_t epoch_of(int64_t iteration) const;
  double elapsed() const;

  JrgrModel& model_;
  TrainConfig cfg_;
  const TrainingData& data_;
  TrainerPaths paths_;
  Schedule schedule_;
  int64_t iterations_per_epoch_ = 1;
  int64_t iteration_ = 0;
  bool pretrain_end_reported_ = false;
  MetricsLog metrics_;
  std::unique_ptr<torch::optim::Adam> pretrain_syn_, pretrain_real_;
  JointOptimizers joint_opt_;
  ImagePool pool_background_, pool_syn_, pool_real_;
  std::optional<CheckpointInfo> last_checkpoint_;
  std::chrono::steady_clock::time_point start_;
};

// Convenience wrappers around Trainer.
void pretrain_removal(JrgrModel& model, const PairedCollection& paired, const TrainConfig& cfg);
void joint_train(JrgrModel& model, const PairedCollection& paired, const UnpairedCollection& unpaired,
                 const TrainConfig& cfg);

}  // namespace jrgr
