#pragma once

#include "csakd/dts.hpp"

namespace csakd::csa {

// Cross-Self-Attention fusion head: reduce the four branch features with 1x1
// projections, run multi-head cross-attention (tokens = spatial positions),
// gate the four modalities with per-pixel sigmoid weights, and reconstruct
// the HR-HSI with a 3x3 convolution.
class CsaFusion {
 public:
  CsaFusion(ParameterStore& ps, const dts::NetworkConfig& cfg, int hsi_bands,
            Rng& rng);

  struct Output {
    Tensor y;        // (B, H, W) reconstruction
    Tensor z_fused;  // (r, H, W) fused feature, the distillation operand
    Tensor gates;    // (4, H, W) sigmoid weights, diagnostics and tests
  };

  Output fuse(const dts::BranchFeatures& bf, Array* attn_out = nullptr) const;

  const dts::CsaConfig& config() const { return cfg_; }

 private:
  dts::CsaConfig cfg_;
  dts::Conv proj_q_, proj_k_, proj_v_, proj_hm_;  // width -> r
  dts::Conv proj_o_;                              // r -> r
  dts::Conv proj_c_;                              // 4r -> 4
  dts::Conv out_;                                 // r -> B, 3x3
};

// Spec-facing pieces, also used by the fusion head internally.

Tensor project_reduce(const Tensor& x, const dts::Conv& proj);

// O = Proj_O(Cat(heads of softmax(Q K^T / sqrt(r)) V)) + z_hm_r.
Tensor cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                       const Tensor& z_hm_r, const dts::Conv& proj_o, int heads,
                       Array* attn_out = nullptr);

// W = sigmoid(Proj_C(Cat(q,k,v,o))); z = W1*q + W2*k + W3*v + W4*o.
Tensor gate_and_fuse(const Tensor& q, const Tensor& k, const Tensor& v,
                     const Tensor& o, const dts::Conv& proj_c,
                     Tensor* gates_out = nullptr);

}  // namespace csakd::csa
