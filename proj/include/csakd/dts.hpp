#pragma once

#include <array>
#include <string>
#include <vector>

#include "csakd/autograd.hpp"
#include "csakd/params.hpp"
#include "csakd/rng.hpp"

namespace csakd::dts {

struct CsaConfig {
  int r = 0;      // reduced channel count
  int heads = 4;  // h_a
  int head_dim() const { return r / heads; }
};

// Fully determines a teacher/student/Large architecture. Stacks are CLRA
// repetitions per branch in the order (n_h, n_hm, n_mh, n_m).
struct NetworkConfig {
  std::array<int, 4> stacks{6, 6, 4, 4};
  int width = 64;
  int g_c = 4;
  CsaConfig csa{32, 4};
  std::string role = "teacher";

  void validate() const;

  static NetworkConfig teacher(int width = 64);
  static NetworkConfig student(int width = 32);
  static NetworkConfig teacher_large(int width = 64);
  static NetworkConfig student_large(int width = 32);
};

struct BranchFeatures {
  Tensor z_h;   // LR grid
  Tensor z_hm;  // HR grid
  Tensor z_mh;  // LR grid
  Tensor z_m;   // HR grid
};

// Bicubic up/down by the fixed 4x factor used throughout this artifact.
Tensor bicubic_resample(const Tensor& x, int num, int den);

struct Conv {
  Tensor w, b;
  int pad = 1, groups = 1;
  Tensor operator()(const Tensor& x) const { return conv2d(x, w, b, pad, groups); }
};

Conv make_conv(ParameterStore& ps, const std::string& name, int cin, int cout,
               int k, int groups, Rng& rng);

// Dense block: three 3x3 conv+LeakyReLU(0.2) stages, each seeing the concat
// of the block input and all previous stage outputs, a 1x1 fusion conv back
// to width, and an identity residual.
struct ClrbBlock {
  Conv conv1, conv2, conv3, fuse;
  int groups = 1;
  Tensor forward(const Tensor& x) const;
};

// Three CLRBs plus a residual connection from module input to output.
struct ClraModule {
  ClrbBlock b1, b2, b3;
  Tensor forward(const Tensor& x) const;
};

struct Branch {
  Conv lift;
  std::vector<ClraModule> clras;
  Tensor forward(const Tensor& x) const;
};

ClrbBlock make_clrb(ParameterStore& ps, const std::string& name, int width,
                    int groups, Rng& rng);
ClraModule make_clra(ParameterStore& ps, const std::string& name, int width,
                     int groups, Rng& rng);

// The four-branch DTS backbone (Z_h, Z_hm, Z_mh, Z_m) plus the plain
// modalities-ensemble head used as the CSA ablation baseline.
class DtsNetwork {
 public:
  DtsNetwork(ParameterStore& ps, const NetworkConfig& cfg, int hsi_bands,
             int msi_bands, Rng& rng, bool with_naive_head = false);

  BranchFeatures forward(const Tensor& x_h, const Tensor& x_m) const;

  // Y* = Conv1x1(up(Z_mh) + up(Z_h) + Z_m + Z_hm); also exposes the summed
  // feature (pre-head) which stands in for Z_fused in naive-mode distillation.
  Tensor naive_ensemble(const BranchFeatures& bf, Tensor* summed = nullptr) const;

  const NetworkConfig& config() const { return cfg_; }

 private:
  NetworkConfig cfg_;
  int hsi_bands_, msi_bands_;
  Branch branch_h_, branch_hm_, branch_mh_, branch_m_;
  Conv naive_out_;
  bool has_naive_ = false;
};

}  // namespace csakd::dts
