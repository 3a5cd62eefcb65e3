#include "csakd/model.hpp"

#include "csakd/errors.hpp"

namespace csakd {

const char* to_string(FusionMode m) { return m == FusionMode::csa ? "csa" : "naive"; }

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "csa") return FusionMode::csa;
  if (s == "naive") return FusionMode::naive;
  throw ConfigError("unknown fusion mode: " + s);
}

FusionModel::FusionModel(ParameterStore& ps, const dts::NetworkConfig& cfg,
                         int hsi_bands, int msi_bands, FusionMode mode,
                         std::uint64_t init_seed)
    : mode_(mode),
      hsi_bands_(hsi_bands),
      msi_bands_(msi_bands),
      dts_([&]() -> dts::DtsNetwork {
        Rng rng(init_seed);
        return dts::DtsNetwork(ps, cfg, hsi_bands, msi_bands, rng,
                               mode == FusionMode::naive);
      }()) {
  if (mode_ == FusionMode::csa) {
    // Continue the init stream past the DTS draws deterministically.
    Rng rng(Rng::mix(init_seed, 0xC5A0));
    csa_ = std::make_unique<csa::CsaFusion>(ps, cfg, hsi_bands, rng);
  }
}

int FusionModel::fused_channels() const {
  return mode_ == FusionMode::csa ? config().csa.r : config().width;
}

FusionModel::Output FusionModel::forward(const Tensor& x_h, const Tensor& x_m,
                                         Array* attn_out) const {
  dts::BranchFeatures bf = dts_.forward(x_h, x_m);
  Output out;
  if (mode_ == FusionMode::csa) {
    csa::CsaFusion::Output co = csa_->fuse(bf, attn_out);
    out.y = co.y;
    out.z_fused = co.z_fused;
    out.gates = co.gates;
  } else {
    out.y = dts_.naive_ensemble(bf, &out.z_fused);
  }
  return out;
}

FusionModel::Output FusionModel::forward(const HyperCube& x_h,
                                         const HyperCube& x_m) const {
  return forward(cube_tensor(x_h), cube_tensor(x_m));
}

Tensor cube_tensor(const HyperCube& c) { return Tensor::constant(c.data); }

}  // namespace csakd
