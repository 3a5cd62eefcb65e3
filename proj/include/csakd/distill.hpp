#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csakd/datagen.hpp"
#include "csakd/losses.hpp"
#include "csakd/metrics.hpp"
#include "csakd/model.hpp"

namespace csakd::distill {

struct AugmentConfig {
  int crop_hr = 0;     // 0 = full frame; otherwise divisible by b_r
  bool rotate = true;  // rotations from {0, 90, 180, 270} degrees
};

struct ExtPhase {
  int extra_epochs = 40;
  double lr = 5e-5;
};

struct TrainNoise {
  bool enabled = false;
  double snr_min = 25.0;
  double snr_max = 45.0;
  datagen::NoiseTargets targets = datagen::NoiseTargets::lr_hsi_only;
};

struct TrainConfig {
  int batch_size = 4;
  int epochs = 50;     // desk default; the paper's runs use 600
  double lr = 1e-4;
  std::uint64_t seed = 1;
  int blur_factor = 4;
  AugmentConfig augment;
  std::optional<ExtPhase> ext;
  losses::LossConfig loss;
  dts::NetworkConfig teacher_cfg = dts::NetworkConfig::teacher();
  dts::NetworkConfig student_cfg = dts::NetworkConfig::student();
  FusionMode fusion = FusionMode::csa;
  int teacher_warmup_epochs = 0;  // teacher-only epochs before joint updates
  TrainNoise train_noise;

  void validate() const;
  int total_epochs() const { return epochs + (ext ? ext->extra_epochs : 0); }
};

// Named presets: teacher_student, teacher_student_large, large_ext.
TrainConfig preset(const std::string& name);

// Cosine annealing to zero over the main phase; the ext phase restarts a
// second cosine from its own rate.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Same crop window (scaled by b_r between grids) and the same rotation
// applied to lr_hsi / hr_msi / truth.
datagen::FusionSample augment_pair(const datagen::FusionSample& s,
                                   const AugmentConfig& aug, int blur_factor,
                                   Rng& rng);

Array rotate90(const Array& a, int quarter_turns);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(ParameterStore& ps, double lr);
  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }  // restored from optimizer.json

  void save(const std::filesystem::path& base) const;
  static Adam load(const std::filesystem::path& base);

 private:
  double b1_, b2_, eps_;
  long t_ = 0;
  std::map<std::string, Array> m_, v_;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double loss_t = 0.0, loss_s = 0.0;
  double val_psnr_t = 0.0, val_psnr_s = 0.0;
  double val_sam_t = 0.0, val_sam_s = 0.0;
  double val_rmse_t = 0.0, val_rmse_s = 0.0;
  double lr = 0.0;
};

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochRecord>& history);

struct Checkpoint {
  ParameterStore teacher{"teacher"}, student{"student"};
  Adam opt_teacher, opt_student;
  int epoch = 0;  // epochs completed
  Rng::State train_rng, noise_rng;
  nlohmann::json config_snapshot;

  void save(const std::filesystem::path& dir) const;
  static Checkpoint load(const std::filesystem::path& dir);
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Joint online distillation: each step forwards teacher and student on the
// same augmented batch, computes the Eq. 14 / Eq. 15 totals and updates both
// parameter sets under one cosine-annealed Adam schedule. Aborts with
// DivergenceError on non-finite loss.
TrainResult train_joint(const std::vector<datagen::FusionSample>& train_set,
                        const std::vector<datagen::FusionSample>& val_set,
                        const TrainConfig& cfg,
                        const nlohmann::json& config_snapshot = {},
                        const EpochCallback& on_epoch = {},
                        const Checkpoint* resume = nullptr);

// Mean metrics of one model over a sample list (no-grad forward).
struct EvalSummary {
  double psnr = 0.0, sam = 0.0, rmse = 0.0;
  std::vector<metrics::EvalReport> per_sample;
};
EvalSummary evaluate_model(const FusionModel& model,
                           const std::vector<datagen::FusionSample>& samples,
                           int workers = 1);

}  // namespace csakd::distill
