#include "csakd/dts.hpp"

#include <cmath>

#include "csakd/errors.hpp"

namespace csakd::dts {

void NetworkConfig::validate() const {
  for (int s : stacks)
    if (s < 1) throw ConfigError("NetworkConfig: stacks must be >= 1");
  if (width < 1) throw ConfigError("NetworkConfig: width must be >= 1");
  if (g_c < 1 || width % g_c != 0)
    throw ConfigError("NetworkConfig: width not divisible by g_c");
  if (csa.r < 1 || csa.r > width)
    throw ConfigError("NetworkConfig: csa.r must be in [1, width]");
  if (csa.heads < 1 || csa.r % csa.heads != 0)
    throw ConfigError("NetworkConfig: csa.r not divisible by heads");
  if (role != "teacher" && role != "student")
    throw ConfigError("NetworkConfig: role must be teacher or student");
}

NetworkConfig NetworkConfig::teacher(int width) {
  return {{6, 6, 4, 4}, width, 4, {width / 2, 4}, "teacher"};
}
NetworkConfig NetworkConfig::student(int width) {
  return {{1, 4, 4, 1}, width, 4, {width / 2, 4}, "student"};
}
NetworkConfig NetworkConfig::teacher_large(int width) {
  return {{8, 8, 6, 6}, width, 4, {width / 2, 4}, "teacher"};
}
NetworkConfig NetworkConfig::student_large(int width) {
  return {{2, 4, 4, 4}, width, 4, {width / 2, 4}, "student"};
}

Tensor bicubic_resample(const Tensor& x, int num, int den) {
  if (!((num == 4 && den == 1) || (num == 1 && den == 4)))
    throw ConfigError("bicubic_resample: factor must be 4 or 1/4");
  const int h = x.value().height(), w = x.value().width();
  const int oh = h * num / den, ow = w * num / den;
  if (oh < 1 || ow < 1) throw DataError("bicubic_resample: output too small");
  if (den == 4 && (h % 4 != 0 || w % 4 != 0))
    throw DataError("bicubic_resample: dims not divisible by 4");
  return resize_bicubic(x, oh, ow);
}

Conv make_conv(ParameterStore& ps, const std::string& name, int cin, int cout,
               int k, int groups, Rng& rng) {
  if (cin % groups != 0 || cout % groups != 0)
    throw ConfigError("make_conv: channels not divisible by groups: " + name);
  Conv c;
  const int fan_in = (cin / groups) * k * k;
  // Kaiming-uniform, fan-in, LeakyReLU(0.2) gain.
  const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  c.w = ps.param(name + ".w", {cout, cin / groups, k, k}, [&](Array& a) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-bound, bound);
  });
  c.b = ps.param(name + ".b", {cout}, [](Array&) {});
  c.pad = (k - 1) / 2;
  c.groups = groups;
  return c;
}

Tensor ClrbBlock::forward(const Tensor& x) const {
  const double slope = 0.2;
  Tensor c1 = leaky_relu(conv1(x), slope);
  Tensor c2 = leaky_relu(conv2(concat_channels({x, c1}, groups)), slope);
  Tensor c3 = leaky_relu(conv3(concat_channels({x, c1, c2}, groups)), slope);
  Tensor f = fuse(concat_channels({x, c1, c2, c3}, groups));
  return add(f, x);
}

Tensor ClraModule::forward(const Tensor& x) const {
  return add(b3.forward(b2.forward(b1.forward(x))), x);
}

Tensor Branch::forward(const Tensor& x) const {
  Tensor z = lift(x);
  for (const ClraModule& m : clras) z = m.forward(z);
  return z;
}

ClrbBlock make_clrb(ParameterStore& ps, const std::string& name, int width,
                    int groups, Rng& rng) {
  ClrbBlock b;
  b.groups = groups;
  b.conv1 = make_conv(ps, name + ".c1", width, width, 3, groups, rng);
  b.conv2 = make_conv(ps, name + ".c2", 2 * width, width, 3, groups, rng);
  b.conv3 = make_conv(ps, name + ".c3", 3 * width, width, 3, groups, rng);
  b.fuse = make_conv(ps, name + ".fuse", 4 * width, width, 1, groups, rng);
  return b;
}

ClraModule make_clra(ParameterStore& ps, const std::string& name, int width,
                     int groups, Rng& rng) {
  ClraModule m;
  m.b1 = make_clrb(ps, name + ".b0", width, groups, rng);
  m.b2 = make_clrb(ps, name + ".b1", width, groups, rng);
  m.b3 = make_clrb(ps, name + ".b2", width, groups, rng);
  return m;
}

namespace {

Branch make_branch(ParameterStore& ps, const std::string& name, int cin, int width,
                   int stacks, int groups, Rng& rng) {
  Branch br;
  br.lift = make_conv(ps, name + ".lift", cin, width, 3, 1, rng);
  for (int i = 0; i < stacks; ++i)
    br.clras.push_back(make_clra(ps, name + ".clra" + std::to_string(i), width,
                                 groups, rng));
  return br;
}

}  // namespace

DtsNetwork::DtsNetwork(ParameterStore& ps, const NetworkConfig& cfg, int hsi_bands,
                       int msi_bands, Rng& rng, bool with_naive_head)
    : cfg_(cfg), hsi_bands_(hsi_bands), msi_bands_(msi_bands) {
  cfg_.validate();
  branch_h_ = make_branch(ps, "dts.h", hsi_bands, cfg.width, cfg.stacks[0], cfg.g_c, rng);
  branch_hm_ = make_branch(ps, "dts.hm", hsi_bands + msi_bands, cfg.width,
                           cfg.stacks[1], 1, rng);
  branch_mh_ = make_branch(ps, "dts.mh", msi_bands + hsi_bands, cfg.width,
                           cfg.stacks[2], 1, rng);
  branch_m_ = make_branch(ps, "dts.m", msi_bands, cfg.width, cfg.stacks[3], 1, rng);
  if (with_naive_head) {
    naive_out_ = make_conv(ps, "ens.out", cfg.width, hsi_bands, 1, 1, rng);
    has_naive_ = true;
  }
}

BranchFeatures DtsNetwork::forward(const Tensor& x_h, const Tensor& x_m) const {
  const Array& hv = x_h.value();
  const Array& mv = x_m.value();
  if (hv.channels() != hsi_bands_ || mv.channels() != msi_bands_)
    throw DataError("DtsNetwork::forward: band count mismatch");
  if (mv.height() != 4 * hv.height() || mv.width() != 4 * hv.width())
    throw DataError("DtsNetwork::forward: HR grid must be 4x the LR grid");

  Tensor x_h_up = bicubic_resample(x_h, 4, 1);
  Tensor x_m_dn = bicubic_resample(x_m, 1, 4);

  BranchFeatures bf;
  bf.z_h = branch_h_.forward(x_h);
  bf.z_hm = branch_hm_.forward(concat_channels({x_h_up, x_m}));
  bf.z_mh = branch_mh_.forward(concat_channels({x_m_dn, x_h}));
  bf.z_m = branch_m_.forward(x_m);
  return bf;
}

Tensor DtsNetwork::naive_ensemble(const BranchFeatures& bf, Tensor* summed) const {
  if (!has_naive_) throw ConfigError("naive_ensemble: head not built");
  Tensor s = add(add(bicubic_resample(bf.z_mh, 4, 1), bicubic_resample(bf.z_h, 4, 1)),
                 add(bf.z_m, bf.z_hm));
  if (summed) *summed = s;
  return naive_out_(s);
}

}  // namespace csakd::dts
