#include "csakd/losses.hpp"

#include <cmath>

#include "csakd/errors.hpp"

namespace csakd::losses {

namespace {
constexpr double kKdClamp = 1e-7;
}

void LossConfig::validate() const {
  if (beta <= 0.0) throw ConfigError("LossConfig: beta must be > 0");
  if (eps <= 0.0) throw ConfigError("LossConfig: eps must be > 0");
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
    throw ConfigError("LossConfig: lambdas must be >= 0");
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred.value(), target.value(), "l1_loss");
  const Array& p = pred.value();
  const Array& t = target.value();
  const std::size_t n = p.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(p[i] - t[i]);
  auto pp = pred.node(), pt = target.node();
  return make_op(Array::scalar(sum / n), {pred, target}, [pp, pt, n](detail::Node& nd) {
    const double up = nd.grad[0] / static_cast<double>(n);
    const Array& p = pp->value;
    const Array& t = pt->value;
    if (pp->requires_grad) {
      Array& g = pp->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const double d = p[i] - t[i];
        g[i] += up * (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0);
      }
    }
    if (pt->requires_grad) {
      Array& g = pt->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const double d = p[i] - t[i];
        g[i] -= up * (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0);
      }
    }
  });
}

Tensor beba_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
  check_same_shape(pred.value(), target.value(), "beba_loss");
  cfg.validate();
  const Array& p = pred.value();
  const Array& t = target.value();
  if (p.rank() != 3) throw std::invalid_argument("beba_loss: rank-3 input expected");
  const int bands = p.channels();
  const std::size_t plane = p.plane();
  const double alpha = cfg.alpha, beta = cfg.beta, eps = cfg.eps;

  std::vector<double> num(bands, 0.0), den(bands, 0.0);
  for (int b = 0; b < bands; ++b) {
    const double* pb = p.data() + b * plane;
    const double* tb = t.data() + b * plane;
    double ns = 0.0, ds = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d2 = (pb[i] - tb[i]) * (pb[i] - tb[i]);
      ns += alpha * d2 / beta + std::max(0.0, d2 - beta) - alpha * beta;
      ds += tb[i] * tb[i] + eps;
    }
    num[b] = ns / plane;
    den[b] = ds / plane;
  }
  double loss = 0.0;
  for (int b = 0; b < bands; ++b) loss += num[b] / den[b];
  loss /= bands;

  auto pp = pred.node(), pt = target.node();
  return make_op(Array::scalar(loss), {pred, target},
                 [pp, pt, num, den, bands, plane, alpha, beta](detail::Node& nd) {
    const double up = nd.grad[0];
    const Array& p = pp->value;
    const Array& t = pt->value;
    const double inv_bs = 1.0 / (static_cast<double>(bands) * plane);
    double* gp = pp->requires_grad ? pp->grad_buffer().data() : nullptr;
    double* gt = pt->requires_grad ? pt->grad_buffer().data() : nullptr;
    for (int b = 0; b < bands; ++b) {
      const double* pb = p.data() + b * plane;
      const double* tb = t.data() + b * plane;
      const double c = up * inv_bs / den[b];
      const double cden = up * num[b] / (den[b] * den[b]) * inv_bs;
      for (std::size_t i = 0; i < plane; ++i) {
        const double diff = pb[i] - tb[i];
        const double d2 = diff * diff;
        const double slope = alpha / beta + (d2 > beta ? 1.0 : 0.0);
        if (gp) gp[b * plane + i] += c * slope * 2.0 * diff;
        if (gt) gt[b * plane + i] += -c * slope * 2.0 * diff - cden * 2.0 * tb[i];
      }
    }
  });
}

Tensor sam_loss(const Tensor& pred, const Tensor& target, double eps) {
  check_same_shape(pred.value(), target.value(), "sam_loss");
  const Array& p = pred.value();
  const Array& t = target.value();
  if (p.rank() != 3) throw std::invalid_argument("sam_loss: rank-3 input expected");
  const int bands = p.channels();
  const std::size_t plane = p.plane();

  double cos_sum = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int b = 0; b < bands; ++b) {
      const double pv = p[b * plane + i], tv = t[b * plane + i];
      dot += pv * tv;
      na += pv * pv;
      nb += tv * tv;
    }
    cos_sum += dot / (std::sqrt(na) * std::sqrt(nb) + eps);
  }
  const double loss = 1.0 - cos_sum / plane;

  auto pp = pred.node(), pt = target.node();
  return make_op(Array::scalar(loss), {pred, target},
                 [pp, pt, bands, plane, eps](detail::Node& nd) {
    const double up = nd.grad[0];
    const Array& p = pp->value;
    const Array& t = pt->value;
    const double scale = -up / static_cast<double>(plane);
    double* gp = pp->requires_grad ? pp->grad_buffer().data() : nullptr;
    double* gt = pt->requires_grad ? pt->grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < plane; ++i) {
      double dot = 0.0, na2 = 0.0, nb2 = 0.0;
      for (int b = 0; b < bands; ++b) {
        const double pv = p[b * plane + i], tv = t[b * plane + i];
        dot += pv * tv;
        na2 += pv * pv;
        nb2 += tv * tv;
      }
      const double na = std::sqrt(na2), nb = std::sqrt(nb2);
      const double denom = na * nb + eps;
      for (int b = 0; b < bands; ++b) {
        const double pv = p[b * plane + i], tv = t[b * plane + i];
        if (gp) {
          double d = tv / denom;
          if (na > 0.0) d -= dot * nb * (pv / na) / (denom * denom);
          gp[b * plane + i] += scale * d;
        }
        if (gt) {
          double d = pv / denom;
          if (nb > 0.0) d -= dot * na * (tv / nb) / (denom * denom);
          gt[b * plane + i] += scale * d;
        }
      }
    }
  });
}

Tensor kd_loss(const Tensor& z_s, const Tensor& z_t) {
  check_same_shape(z_s.value(), z_t.value(), "kd_loss");
  const Array& zs = z_s.value();
  const Array& zt = z_t.value();
  const std::size_t n = zs.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-zs[i]));
    const double t = std::clamp(1.0 / (1.0 + std::exp(-zt[i])), kKdClamp, 1.0 - kKdClamp);
    sum += -(s * std::log(t) + (1.0 - s) * std::log(1.0 - t));
  }
  auto ps = z_s.node(), pt = z_t.node();
  return make_op(Array::scalar(sum / n), {z_s, z_t}, [ps, pt, n](detail::Node& nd) {
    const double up = nd.grad[0] / static_cast<double>(n);
    const Array& zs = ps->value;
    const Array& zt = pt->value;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-zs[i]));
      const double t_raw = 1.0 / (1.0 + std::exp(-zt[i]));
      const bool clamped = t_raw < kKdClamp || t_raw > 1.0 - kKdClamp;
      const double t = std::clamp(t_raw, kKdClamp, 1.0 - kKdClamp);
      if (ps->requires_grad)
        ps->grad_buffer()[i] +=
            up * s * (1.0 - s) * (std::log(1.0 - t) - std::log(t));
      if (pt->requires_grad && !clamped)
        pt->grad_buffer()[i] +=
            up * (-(s / t) + (1.0 - s) / (1.0 - t)) * t_raw * (1.0 - t_raw);
    }
  });
}

Tensor teacher_total(const Tensor& y_t, const Tensor& y, const LossConfig& cfg) {
  Tensor loss = l1_loss(y_t, y);
  if (cfg.lambda1 != 0.0) loss = add(loss, scale(beba_loss(y_t, y, cfg), cfg.lambda1));
  if (cfg.lambda2 != 0.0) loss = add(loss, scale(sam_loss(y_t, y, cfg.eps), cfg.lambda2));
  return loss;
}

Tensor student_total(const Tensor& y_s, const Tensor& y, const Tensor& y_t,
                     const Tensor& z_s, const Tensor& z_t, const LossConfig& cfg) {
  Tensor loss = l1_loss(y_s, y);
  if (cfg.lambda1 != 0.0) loss = add(loss, scale(beba_loss(y_s, y, cfg), cfg.lambda1));
  if (cfg.lambda2 != 0.0) loss = add(loss, scale(sam_loss(y_s, y, cfg.eps), cfg.lambda2));

  if (cfg.lambda3 != 0.0) {
    Tensor zs = z_s, zt = z_t;
    const int cs = zs.value().channels(), ct = zt.value().channels();
    if (cs != ct) {
      const int cmin = std::min(cs, ct);
      if (cs % cmin != 0 || ct % cmin != 0)
        throw ConfigError("student_total: fused channel counts not pool-compatible");
      zs = channel_avg_pool(zs, cmin);
      zt = channel_avg_pool(zt, cmin);
    }
    if (cfg.teacher_stop_gradient) zt = stop_gradient(zt);
    loss = add(loss, scale(kd_loss(zs, zt), cfg.lambda3));
  }
  if (cfg.lambda4 != 0.0) {
    Tensor yt = cfg.teacher_stop_gradient ? stop_gradient(y_t) : y_t;
    loss = add(loss, scale(l1_loss(y_s, yt), cfg.lambda4));
  }
  return loss;
}

}  // namespace csakd::losses
