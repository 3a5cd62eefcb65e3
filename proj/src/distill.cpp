#include "csakd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <thread>

#include "csakd/errors.hpp"

namespace csakd::distill {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
  if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be > 0");
  if (blur_factor < 1) throw ConfigError("TrainConfig: blur_factor must be >= 1");
  if (augment.crop_hr != 0 && augment.crop_hr % blur_factor != 0)
    throw ConfigError("TrainConfig: crop size not divisible by blur factor");
  if (teacher_warmup_epochs < 0)
    throw ConfigError("TrainConfig: teacher_warmup_epochs must be >= 0");
  loss.validate();
  teacher_cfg.validate();
  student_cfg.validate();
  if (teacher_cfg.role != "teacher" || student_cfg.role != "student")
    throw ConfigError("TrainConfig: teacher/student roles mismatched");
}

TrainConfig preset(const std::string& name) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 600;
  cfg.lr = 1e-4;
  if (name == "teacher_student") {
    cfg.teacher_cfg = dts::NetworkConfig::teacher();
    cfg.student_cfg = dts::NetworkConfig::student();
  } else if (name == "teacher_student_large") {
    cfg.teacher_cfg = dts::NetworkConfig::teacher_large();
    cfg.student_cfg = dts::NetworkConfig::student_large();
  } else if (name == "large_ext") {
    cfg.teacher_cfg = dts::NetworkConfig::teacher_large();
    cfg.student_cfg = dts::NetworkConfig::student_large();
    cfg.ext = ExtPhase{40, 5e-5};
  } else {
    throw ConfigError("preset: unknown name " + name);
  }
  return cfg;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < cfg.epochs || !cfg.ext) {
    const int e = std::min(epoch, cfg.epochs - 1);
    if (cfg.epochs <= 1) return cfg.lr;
    return 0.5 * cfg.lr * (1.0 + std::cos(M_PI * e / (cfg.epochs - 1)));
  }
  const int e = epoch - cfg.epochs;
  if (cfg.ext->extra_epochs <= 1) return cfg.ext->lr;
  return 0.5 * cfg.ext->lr * (1.0 + std::cos(M_PI * e / (cfg.ext->extra_epochs - 1)));
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

Array rotate90(const Array& a, int quarter_turns) {
  int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return a;
  const int c_count = a.channels(), h = a.height(), w = a.width();
  const int oh = (k % 2 == 0) ? h : w;
  const int ow = (k % 2 == 0) ? w : h;
  Array out({c_count, oh, ow});
  for (int c = 0; c < c_count; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int sy, sx;  // counterclockwise rotations
        switch (k) {
          case 1: sy = x; sx = w - 1 - y; break;
          case 2: sy = h - 1 - y; sx = w - 1 - x; break;
          default: sy = h - 1 - x; sx = y; break;
        }
        out.at(c, y, x) = a.at(c, sy, sx);
      }
  return out;
}

namespace {

Array crop(const Array& a, int y0, int x0, int h, int w) {
  Array out({a.channels(), h, w});
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < h; ++y)
      std::copy_n(a.data() + (static_cast<std::size_t>(c) * a.height() + y0 + y) *
                                 a.width() + x0,
                  w, out.data() + (static_cast<std::size_t>(c) * h + y) * w);
  return out;
}

}  // namespace

datagen::FusionSample augment_pair(const datagen::FusionSample& s,
                                   const AugmentConfig& aug, int blur_factor,
                                   Rng& rng) {
  const int hr_h = s.truth.height(), hr_w = s.truth.width();
  int crop_hr = aug.crop_hr == 0 ? std::min(hr_h, hr_w) : aug.crop_hr;
  if (crop_hr % blur_factor != 0)
    throw ConfigError("augment_pair: crop not divisible by blur factor");
  if (crop_hr > hr_h || crop_hr > hr_w)
    throw DataError("augment_pair: crop larger than image");
  const int crop_lr = crop_hr / blur_factor;
  const int lr_h = s.lr_hsi.height(), lr_w = s.lr_hsi.width();

  const int y0 = rng.uniform_int(lr_h - crop_lr + 1);
  const int x0 = rng.uniform_int(lr_w - crop_lr + 1);
  const int rot = aug.rotate ? rng.uniform_int(4) : 0;

  datagen::FusionSample out;
  out.id = s.id;
  out.noise = s.noise;
  out.lr_hsi = HyperCube(rotate90(crop(s.lr_hsi.data, y0, x0, crop_lr, crop_lr), rot),
                         s.lr_hsi.wavelengths);
  out.hr_msi = HyperCube(rotate90(crop(s.hr_msi.data, y0 * blur_factor,
                                       x0 * blur_factor, crop_hr, crop_hr), rot),
                         s.hr_msi.wavelengths);
  out.truth = HyperCube(rotate90(crop(s.truth.data, y0 * blur_factor,
                                      x0 * blur_factor, crop_hr, crop_hr), rot),
                        s.truth.wavelengths);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

void Adam::step(ParameterStore& ps, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, t_);
  const double bc2 = 1.0 - std::pow(b2_, t_);
  for (const std::string& name : ps.names()) {
    Tensor p = ps.get(name);
    if (!p.has_grad()) continue;
    const Array& g = p.grad();
    Array& m = m_.try_emplace(name, Array(g.shape())).first->second;
    Array& v = v_.try_emplace(name, Array(g.shape())).first->second;
    Array& val = p.value_mut();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      val[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

void Adam::save(const std::filesystem::path& base) const {
  ParameterStore tmp("adam");
  for (const auto& [name, m] : m_)
    tmp.param(name + ".m", m.shape(), [&](Array& a) { a = m; });
  for (const auto& [name, v] : v_)
    tmp.param(name + ".v", v.shape(), [&](Array& a) { a = v; });
  tmp.save(base);
}

Adam Adam::load(const std::filesystem::path& base) {
  Adam out;
  ParameterStore tmp = ParameterStore::load(base);
  for (const std::string& name : tmp.names()) {
    const Array& a = tmp.get(name).value();
    if (name.size() > 2 && name.substr(name.size() - 2) == ".m")
      out.m_[name.substr(0, name.size() - 2)] = a;
    else if (name.size() > 2 && name.substr(name.size() - 2) == ".v")
      out.v_[name.substr(0, name.size() - 2)] = a;
  }
  return out;
}

// ---------------------------------------------------------------------------
// History / checkpoint IO
// ---------------------------------------------------------------------------

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochRecord>& history) {
  std::ofstream f(path);
  if (!f) throw DataError("write_history_csv: cannot open " + path.string());
  f << "epoch,loss_t,loss_s,val_psnr_t,val_psnr_s,val_sam_t,val_sam_s,"
       "val_rmse_t,val_rmse_s,lr\n";
  f << std::setprecision(12);
  for (const EpochRecord& r : history)
    f << r.epoch << ',' << r.loss_t << ',' << r.loss_s << ',' << r.val_psnr_t << ','
      << r.val_psnr_s << ',' << r.val_sam_t << ',' << r.val_sam_s << ','
      << r.val_rmse_t << ',' << r.val_rmse_s << ',' << r.lr << '\n';
}

namespace {

json rng_state_json(const Rng::State& s) {
  return {{"state", s.state}, {"has_spare", s.has_spare}, {"spare", s.spare}};
}

Rng::State rng_state_from_json(const json& j) {
  Rng::State s;
  s.state = j.at("state").get<std::uint64_t>();
  s.has_spare = j.at("has_spare").get<bool>();
  s.spare = j.at("spare").get<double>();
  return s;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  teacher.save(dir / "teacher");
  student.save(dir / "student");
  opt_teacher.save(dir / "opt_teacher");
  opt_student.save(dir / "opt_student");
  json opt = {{"t_teacher", opt_teacher.steps()},
              {"t_student", opt_student.steps()},
              {"epoch", epoch}};
  std::ofstream of(dir / "optimizer.json");
  of << opt.dump(2) << "\n";
  json rj = {{"train_rng", rng_state_json(train_rng)},
             {"noise_rng", rng_state_json(noise_rng)}};
  std::ofstream rf(dir / "rng.json");
  rf << rj.dump(2) << "\n";
  std::ofstream cf(dir / "config.json");
  cf << config_snapshot.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::filesystem::path& dir) {
  Checkpoint ck;
  ck.teacher = ParameterStore::load(dir / "teacher");
  ck.student = ParameterStore::load(dir / "student");
  ck.opt_teacher = Adam::load(dir / "opt_teacher");
  ck.opt_student = Adam::load(dir / "opt_student");
  std::ifstream of(dir / "optimizer.json");
  if (!of) throw DataError("Checkpoint::load: missing optimizer.json");
  json opt = json::parse(of);
  ck.epoch = opt.at("epoch").get<int>();
  ck.opt_teacher.set_steps(opt.at("t_teacher").get<long>());
  ck.opt_student.set_steps(opt.at("t_student").get<long>());
  std::ifstream rf(dir / "rng.json");
  if (!rf) throw DataError("Checkpoint::load: missing rng.json");
  json rj = json::parse(rf);
  ck.train_rng = rng_state_from_json(rj.at("train_rng"));
  ck.noise_rng = rng_state_from_json(rj.at("noise_rng"));
  std::ifstream cf(dir / "config.json");
  if (cf) ck.config_snapshot = json::parse(cf);
  return ck;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalSummary evaluate_model(const FusionModel& model,
                           const std::vector<datagen::FusionSample>& samples,
                           int workers) {
  EvalSummary out;
  out.per_sample.resize(samples.size());
  auto eval_range = [&](std::size_t lo, std::size_t hi) {
    NoGradGuard ng;
    for (std::size_t i = lo; i < hi; ++i) {
      FusionModel::Output y = model.forward(samples[i].lr_hsi, samples[i].hr_msi);
      out.per_sample[i] = metrics::evaluate(
          samples[i].id.empty() ? "sample_" + std::to_string(i) : samples[i].id,
          y.y.value(), samples[i].truth.data);
    }
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
  if (workers == 1 || samples.size() < 2) {
    eval_range(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(samples.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(eval_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  for (const metrics::EvalReport& r : out.per_sample) {
    out.psnr += r.psnr_db;
    out.sam += r.sam_deg;
    out.rmse += r.rmse;
  }
  if (!out.per_sample.empty()) {
    const double n = static_cast<double>(out.per_sample.size());
    out.psnr /= n;
    out.sam /= n;
    out.rmse /= n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Joint training
// ---------------------------------------------------------------------------

TrainResult train_joint(const std::vector<datagen::FusionSample>& train_set,
                        const std::vector<datagen::FusionSample>& val_set,
                        const TrainConfig& cfg, const json& config_snapshot,
                        const EpochCallback& on_epoch, const Checkpoint* resume) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train_joint: empty training set");
  const int hsi_b = train_set[0].truth.bands();
  const int msi_b = train_set[0].hr_msi.bands();

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  Rng aug_rng(Rng::mix(cfg.seed, 0xA0617));
  Rng noise_rng(Rng::mix(cfg.seed, 0x015E));
  int start_epoch = 0;
  if (resume) {
    ck.teacher = resume->teacher.clone();
    ck.student = resume->student.clone();
    ck.opt_teacher = resume->opt_teacher;
    ck.opt_student = resume->opt_student;
    aug_rng.set_state(resume->train_rng);
    noise_rng.set_state(resume->noise_rng);
    start_epoch = resume->epoch;
  }
  ck.config_snapshot = config_snapshot;

  FusionModel teacher(ck.teacher, cfg.teacher_cfg, hsi_b, msi_b, cfg.fusion,
                      Rng::mix(cfg.seed, 0x7EAC));
  FusionModel student(ck.student, cfg.student_cfg, hsi_b, msi_b, cfg.fusion,
                      Rng::mix(cfg.seed, 0x57D0));

  const int n = static_cast<int>(train_set.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int e = start_epoch; e < cfg.total_epochs(); ++e) {
    const double lr = lr_at_epoch(cfg, e);
    const bool warmup = e < cfg.teacher_warmup_epochs;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[aug_rng.uniform_int(i + 1)]);

    double sum_lt = 0.0, sum_ls = 0.0;
    int count = 0;
    for (int b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const int bn = std::min(cfg.batch_size, n - b0);
      ck.teacher.zero_grads();
      ck.student.zero_grads();
      for (int i = 0; i < bn; ++i) {
        datagen::FusionSample s =
            augment_pair(train_set[order[b0 + i]], cfg.augment, cfg.blur_factor, aug_rng);
        if (cfg.train_noise.enabled) {
          const double snr = noise_rng.uniform(cfg.train_noise.snr_min,
                                               cfg.train_noise.snr_max);
          const std::uint64_t nseed = noise_rng.next_u64();
          datagen::NoiseSpec lr_spec =
              datagen::NoiseSpec::make(snr, cfg.train_noise.targets, Rng::mix(nseed, 0x4C52));
          s.lr_hsi = datagen::inject_awgn(s.lr_hsi, lr_spec);
          if (cfg.train_noise.targets == datagen::NoiseTargets::both) {
            datagen::NoiseSpec m_spec =
                datagen::NoiseSpec::make(snr, cfg.train_noise.targets, Rng::mix(nseed, 0x4D53));
            s.hr_msi = datagen::inject_awgn(s.hr_msi, m_spec);
          }
        }
        Tensor x_h = cube_tensor(s.lr_hsi);
        Tensor x_m = cube_tensor(s.hr_msi);
        Tensor y = cube_tensor(s.truth);

        FusionModel::Output t_out = teacher.forward(x_h, x_m);
        Tensor l_t = losses::teacher_total(t_out.y, y, cfg.loss);
        if (!std::isfinite(l_t.item()))
          throw DivergenceError("train_joint: non-finite teacher loss at epoch " +
                                std::to_string(e) + " step " +
                                std::to_string(b0 / cfg.batch_size));
        sum_lt += l_t.item();

        Tensor total;
        if (warmup) {
          total = scale(l_t, 1.0 / bn);
        } else {
          FusionModel::Output s_out = student.forward(x_h, x_m);
          Tensor l_s = losses::student_total(s_out.y, y, t_out.y, s_out.z_fused,
                                             t_out.z_fused, cfg.loss);
          if (!std::isfinite(l_s.item()))
            throw DivergenceError("train_joint: non-finite student loss at epoch " +
                                  std::to_string(e) + " step " +
                                  std::to_string(b0 / cfg.batch_size));
          sum_ls += l_s.item();
          total = scale(add(l_t, l_s), 1.0 / bn);
        }
        backward(total);
        ++count;
      }
      ck.opt_teacher.step(ck.teacher, lr);
      if (!warmup) ck.opt_student.step(ck.student, lr);
    }

    EpochRecord rec;
    rec.epoch = e;
    rec.lr = lr;
    rec.loss_t = sum_lt / count;
    rec.loss_s = warmup ? nan : sum_ls / count;
    if (!val_set.empty()) {
      EvalSummary ts = evaluate_model(teacher, val_set);
      rec.val_psnr_t = ts.psnr;
      rec.val_sam_t = ts.sam;
      rec.val_rmse_t = ts.rmse;
      EvalSummary ss = evaluate_model(student, val_set);
      rec.val_psnr_s = ss.psnr;
      rec.val_sam_s = ss.sam;
      rec.val_rmse_s = ss.rmse;
    } else {
      rec.val_psnr_t = rec.val_sam_t = rec.val_rmse_t = nan;
      rec.val_psnr_s = rec.val_sam_s = rec.val_rmse_s = nan;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  ck.epoch = cfg.total_epochs();
  ck.train_rng = aug_rng.state();
  ck.noise_rng = noise_rng.state();
  return result;
}

}  // namespace csakd::distill
