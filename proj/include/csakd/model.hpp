#pragma once

#include <cstdint>
#include <memory>

#include "csakd/csa.hpp"
#include "csakd/dts.hpp"
#include "csakd/hypercube.hpp"

namespace csakd {

enum class FusionMode { csa, naive };

const char* to_string(FusionMode m);
FusionMode fusion_mode_from_string(const std::string& s);

// One complete fusion network: DTS backbone plus either the CSA head or the
// plain ensemble head (the ablation baseline). Parameters live in the given
// store under dts.* / csa.* / ens.*.
class FusionModel {
 public:
  FusionModel(ParameterStore& ps, const dts::NetworkConfig& cfg, int hsi_bands,
              int msi_bands, FusionMode mode, std::uint64_t init_seed);

  struct Output {
    Tensor y;        // reconstructed HR-HSI
    Tensor z_fused;  // distillation operand (r channels in csa mode,
                     // the pre-head ensemble sum in naive mode)
    Tensor gates;    // defined only in csa mode
  };

  Output forward(const Tensor& x_h, const Tensor& x_m, Array* attn_out = nullptr) const;
  Output forward(const HyperCube& x_h, const HyperCube& x_m) const;

  dts::BranchFeatures branches(const Tensor& x_h, const Tensor& x_m) const {
    return dts_.forward(x_h, x_m);
  }

  const dts::NetworkConfig& config() const { return dts_.config(); }
  FusionMode mode() const { return mode_; }
  int hsi_bands() const { return hsi_bands_; }
  int msi_bands() const { return msi_bands_; }
  int fused_channels() const;

 private:
  FusionMode mode_;
  int hsi_bands_, msi_bands_;
  dts::DtsNetwork dts_;
  std::unique_ptr<csa::CsaFusion> csa_;
};

Tensor cube_tensor(const HyperCube& c);

}  // namespace csakd
