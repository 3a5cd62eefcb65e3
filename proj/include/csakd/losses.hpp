#pragma once

#include "csakd/autograd.hpp"

namespace csakd::losses {

struct LossConfig {
  double alpha = 0.5;
  double beta = 1.0;
  double eps = 1e-8;
  double lambda1 = 0.1;  // BEBA
  double lambda2 = 0.1;  // SAM
  double lambda3 = 0.1;  // KD
  double lambda4 = 0.1;  // student-vs-teacher L1
  bool teacher_stop_gradient = true;

  void validate() const;
};

// Mean absolute difference over all elements.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Band-energy-balance-aware loss: with D = (pred - target)^2,
// per band num = spatial_mean(alpha D / beta + relu(D - beta) - alpha beta),
// den = spatial_mean(target^2 + eps); loss = band mean of num/den.
// Quadratic below beta, linear above; can be negative (minimum at D = 0).
Tensor beba_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

// 1 - mean over pixels of cos(pred_n, target_n); cosine denominator guarded
// by eps. Inputs are (B, H, W); pixels with zero norm contribute cos = 0.
Tensor sam_loss(const Tensor& pred, const Tensor& target, double eps);

// Sigmoid cross-entropy between fused feature maps, student as the label
// distribution: mean of -[s log t + (1 - s) log(1 - t)] with s = sigmoid(z_s)
// and t = sigmoid(z_t) clamped to [1e-7, 1 - 1e-7].
Tensor kd_loss(const Tensor& z_s, const Tensor& z_t);

// l_t = l1 + lambda1 beba + lambda2 sam.
Tensor teacher_total(const Tensor& y_t, const Tensor& y, const LossConfig& cfg);

// l_s = l1 + lambda1 beba + lambda2 sam + lambda3 kd + lambda4 l1(y_s, y_t).
// Teacher-derived arguments are gradient-blocked when cfg.teacher_stop_gradient.
// Fused maps of different channel counts are average-pooled to the smaller
// count before the KD term.
Tensor student_total(const Tensor& y_s, const Tensor& y, const Tensor& y_t,
                     const Tensor& z_s, const Tensor& z_t, const LossConfig& cfg);

}  // namespace csakd::losses
