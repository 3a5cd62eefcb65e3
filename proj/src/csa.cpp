#include "csakd/csa.hpp"

#include "csakd/errors.hpp"

namespace csakd::csa {

Tensor project_reduce(const Tensor& x, const dts::Conv& proj) {
  return proj(x);
}

Tensor cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                       const Tensor& z_hm_r, const dts::Conv& proj_o, int heads,
                       Array* attn_out) {
  check_same_shape(q.value(), z_hm_r.value(), "cross_attention");
  Tensor heads_cat = multi_head_attention(q, k, v, heads, attn_out);
  return add(proj_o(heads_cat), z_hm_r);
}

Tensor gate_and_fuse(const Tensor& q, const Tensor& k, const Tensor& v,
                     const Tensor& o, const dts::Conv& proj_c, Tensor* gates_out) {
  Tensor c = concat_channels({q, k, v, o});
  Tensor w = sigmoid(proj_c(c));
  if (gates_out) *gates_out = w;
  Tensor z = add(add(mul_channel(q, slice_channels(w, 0, 1)),
                     mul_channel(k, slice_channels(w, 1, 2))),
                 add(mul_channel(v, slice_channels(w, 2, 3)),
                     mul_channel(o, slice_channels(w, 3, 4))));
  return z;
}

CsaFusion::CsaFusion(ParameterStore& ps, const dts::NetworkConfig& cfg,
                     int hsi_bands, Rng& rng)
    : cfg_(cfg.csa) {
  const int w = cfg.width, r = cfg.csa.r;
  proj_q_ = dts::make_conv(ps, "csa.proj_q", w, r, 1, 1, rng);
  proj_k_ = dts::make_conv(ps, "csa.proj_k", w, r, 1, 1, rng);
  proj_v_ = dts::make_conv(ps, "csa.proj_v", w, r, 1, 1, rng);
  proj_hm_ = dts::make_conv(ps, "csa.proj_hm", w, r, 1, 1, rng);
  proj_o_ = dts::make_conv(ps, "csa.proj_o", r, r, 1, 1, rng);
  proj_c_ = dts::make_conv(ps, "csa.proj_c", 4 * r, 4, 1, 1, rng);
  out_ = dts::make_conv(ps, "csa.out", r, hsi_bands, 3, 1, rng);
}

CsaFusion::Output CsaFusion::fuse(const dts::BranchFeatures& bf,
                                  Array* attn_out) const {
  Tensor q = project_reduce(dts::bicubic_resample(bf.z_h, 4, 1), proj_q_);
  Tensor k = project_reduce(bf.z_m, proj_k_);
  Tensor v = project_reduce(dts::bicubic_resample(bf.z_mh, 4, 1), proj_v_);
  Tensor z_hm_r = project_reduce(bf.z_hm, proj_hm_);

  Tensor o = cross_attention(q, k, v, z_hm_r, proj_o_, cfg_.heads, attn_out);

  Output out;
  out.z_fused = gate_and_fuse(q, k, v, o, proj_c_, &out.gates);
  out.y = out_(out.z_fused);
  return out;
}

}  // namespace csakd::csa
