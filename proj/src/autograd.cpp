#include "csakd/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace csakd {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::leaf(Array v, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return from_node(std::move(n));
}

Tensor make_op(Array value, const std::vector<Tensor>& inputs,
               std::function<void(detail::Node&)> backprop) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  bool need = false;
  if (g_grad_enabled)
    for (const Tensor& t : inputs)
      if (t.requires_grad()) need = true;
  if (need) {
    n->requires_grad = true;
    for (const Tensor& t : inputs) n->parents.push_back(t.node());
    n->backprop = std::move(backprop);
  }
  return Tensor::from_node(std::move(n));
}

void backward(const Tensor& scalar_out) {
  if (!scalar_out.defined() || scalar_out.value().size() != 1)
    throw std::logic_error("backward: output must be a defined scalar");
  detail::Node* root = scalar_out.node().get();
  if (!root->requires_grad) return;

  // Iterative postorder DFS; reverse postorder = order of accumulation.
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      detail::Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer().fill(1.0);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
    // Intermediate grads are no longer needed once propagated.
    if (n->backprop) n->grad = Array();
  }
}

// ---------------------------------------------------------------------------
// Elementwise / structural ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a.value(), b.value(), "add");
  Array out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto pa = a.node(), pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb](detail::Node& n) {
    if (pa->requires_grad) pa->accumulate(n.grad);
    if (pb->requires_grad) pb->accumulate(n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Array out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  auto pa = a.node(), pb = b.node();
  return make_op(std::move(out), {a, b}, [pa, pb](detail::Node& n) {
    if (pa->requires_grad) pa->accumulate(n.grad);
    if (pb->requires_grad) {
      Array& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Array out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  auto pa = a.node();
  return make_op(std::move(out), {a}, [pa, s](detail::Node& n) {
    if (!pa->requires_grad) return;
    Array& g = pa->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Array out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  auto px = x.node();
  return make_op(std::move(out), {x}, [px, slope](detail::Node& n) {
    if (!px->requires_grad) return;
    Array& g = px->grad_buffer();
    const Array& xv = px->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += (xv[i] >= 0.0 ? 1.0 : slope) * n.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  Array out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  auto px = x.node();
  return make_op(std::move(out), {x}, [px](detail::Node& n) {
    if (!px->requires_grad) return;
    Array& g = px->grad_buffer();
    const Array& y = n.value;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += y[i] * (1.0 - y[i]) * n.grad[i];
  });
}

Tensor stop_gradient(const Tensor& x) {
  // Value pass-through with no parents: gradients never cross.
  return Tensor::constant(x.value());
}

Tensor concat_channels(const std::vector<Tensor>& xs, int groups) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int h = xs[0].value().height(), w = xs[0].value().width();
  int ctot = 0;
  for (const Tensor& t : xs) {
    const Array& v = t.value();
    if (v.rank() != 3 || v.height() != h || v.width() != w)
      throw std::invalid_argument("concat_channels: spatial shape mismatch");
    if (v.channels() % groups != 0)
      throw std::invalid_argument("concat_channels: channels not divisible by groups");
    ctot += v.channels();
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  // out channel -> (input index, input channel)
  std::vector<std::pair<int, int>> map;
  map.reserve(ctot);
  for (int g = 0; g < groups; ++g)
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const int cg = xs[i].value().channels() / groups;
      for (int c = 0; c < cg; ++c) map.push_back({static_cast<int>(i), g * cg + c});
    }

  Array out({ctot, h, w});
  for (int oc = 0; oc < ctot; ++oc) {
    auto [i, ic] = map[oc];
    std::memcpy(out.data() + oc * plane, xs[i].value().data() + ic * plane,
                plane * sizeof(double));
  }

  std::vector<std::shared_ptr<detail::Node>> pnodes;
  for (const Tensor& t : xs) pnodes.push_back(t.node());
  return make_op(std::move(out), xs, [pnodes, map, plane](detail::Node& n) {
    for (std::size_t oc = 0; oc < map.size(); ++oc) {
      auto [i, ic] = map[oc];
      if (!pnodes[i]->requires_grad) continue;
      double* dst = pnodes[i]->grad_buffer().data() + ic * plane;
      const double* src = n.grad.data() + oc * plane;
      for (std::size_t j = 0; j < plane; ++j) dst[j] += src[j];
    }
  });
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  const Array& v = x.value();
  if (v.rank() != 3 || c0 < 0 || c1 > v.channels() || c0 >= c1)
    throw std::invalid_argument("slice_channels: bad range");
  const std::size_t plane = v.plane();
  Array out({c1 - c0, v.height(), v.width()});
  std::memcpy(out.data(), v.data() + c0 * plane, out.size() * sizeof(double));
  auto px = x.node();
  return make_op(std::move(out), {x}, [px, c0, plane](detail::Node& n) {
    if (!px->requires_grad) return;
    double* dst = px->grad_buffer().data() + c0 * plane;
    const double* src = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
  });
}

Tensor mul_channel(const Tensor& x, const Tensor& gate) {
  const Array& xv = x.value();
  const Array& gv = gate.value();
  if (gv.channels() != 1 || gv.height() != xv.height() || gv.width() != xv.width())
    throw std::invalid_argument("mul_channel: gate must be (1, H, W) matching x");
  const std::size_t plane = xv.plane();
  Array out = xv;
  for (int c = 0; c < xv.channels(); ++c) {
    double* o = out.data() + c * plane;
    const double* g = gv.data();
    for (std::size_t i = 0; i < plane; ++i) o[i] *= g[i];
  }
  auto px = x.node(), pg = gate.node();
  return make_op(std::move(out), {x, gate}, [px, pg, plane](detail::Node& n) {
    const Array& xv = px->value;
    const Array& gv = pg->value;
    const int c_count = xv.channels();
    if (px->requires_grad) {
      Array& gx = px->grad_buffer();
      for (int c = 0; c < c_count; ++c) {
        double* d = gx.data() + c * plane;
        const double* up = n.grad.data() + c * plane;
        const double* g = gv.data();
        for (std::size_t i = 0; i < plane; ++i) d[i] += up[i] * g[i];
      }
    }
    if (pg->requires_grad) {
      Array& gg = pg->grad_buffer();
      for (int c = 0; c < c_count; ++c) {
        double* d = gg.data();
        const double* up = n.grad.data() + c * plane;
        const double* xd = xv.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) d[i] += up[i] * xd[i];
      }
    }
  });
}

Tensor channel_avg_pool(const Tensor& x, int target_channels) {
  const Array& v = x.value();
  if (v.rank() != 3 || target_channels <= 0 || v.channels() % target_channels != 0)
    throw std::invalid_argument("channel_avg_pool: channels not divisible by target");
  const int f = v.channels() / target_channels;
  if (f == 1) return x;
  const std::size_t plane = v.plane();
  const double inv = 1.0 / f;
  Array out({target_channels, v.height(), v.width()});
  for (int t = 0; t < target_channels; ++t) {
    double* o = out.data() + t * plane;
    for (int j = 0; j < f; ++j) {
      const double* s = v.data() + (t * f + j) * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] += s[i] * inv;
    }
  }
  auto px = x.node();
  return make_op(std::move(out), {x}, [px, f, inv, plane, target_channels](detail::Node& n) {
    if (!px->requires_grad) return;
    Array& g = px->grad_buffer();
    for (int t = 0; t < target_channels; ++t) {
      const double* up = n.grad.data() + t * plane;
      for (int j = 0; j < f; ++j) {
        double* d = g.data() + (t * f + j) * plane;
        for (std::size_t i = 0; i < plane; ++i) d[i] += up[i] * inv;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  int cin, h, w, cout, cin_g, k, pad, groups, ho, wo;
  std::size_t n;  // output pixels
  int kk() const { return cin_g * k * k; }
};

ConvDims conv_dims(const Array& x, const Array& w, int pad, int groups) {
  if (x.rank() != 3 || w.rank() != 4) throw std::invalid_argument("conv2d: bad ranks");
  ConvDims d;
  d.cin = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.cout = w.dim(0);
  d.cin_g = w.dim(1);
  d.k = w.dim(2);
  d.pad = pad;
  d.groups = groups;
  if (w.dim(3) != d.k) throw std::invalid_argument("conv2d: non-square kernel");
  if (d.cin % groups != 0 || d.cout % groups != 0 || d.cin / groups != d.cin_g)
    throw std::invalid_argument("conv2d: channel/group mismatch");
  d.ho = d.h + 2 * pad - d.k + 1;
  d.wo = d.w + 2 * pad - d.k + 1;
  if (d.ho <= 0 || d.wo <= 0) throw std::invalid_argument("conv2d: output too small");
  d.n = static_cast<std::size_t>(d.ho) * d.wo;
  return d;
}

// Fills col (kk x nb, row-major) for output pixels [n0, n0+nb) of one group.
void fill_col(const Array& x, const ConvDims& d, int group, std::size_t n0,
              std::size_t nb, double* col) {
  for (int ci = 0; ci < d.cin_g; ++ci) {
    const double* xc = x.data() + (static_cast<std::size_t>(group) * d.cin_g + ci) *
                                      d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky)
      for (int kx = 0; kx < d.k; ++kx) {
        double* crow = col + (static_cast<std::size_t>((ci * d.k + ky) * d.k + kx)) * nb;
        std::size_t n = n0;
        while (n < n0 + nb) {
          const int oy = static_cast<int>(n / d.wo);
          const int ox0 = static_cast<int>(n % d.wo);
          const std::size_t run = std::min<std::size_t>(d.wo - ox0, n0 + nb - n);
          double* dst = crow + (n - n0);
          const int iy = oy + ky - d.pad;
          if (iy < 0 || iy >= d.h) {
            std::memset(dst, 0, run * sizeof(double));
          } else {
            // valid input columns: 0 <= ox + kx - pad < w
            const int lo = std::max(0, d.pad - kx - ox0);
            const int hi = std::min(static_cast<int>(run), d.w + d.pad - kx - ox0);
            if (lo > 0)
              std::memset(dst, 0, std::min(lo, static_cast<int>(run)) * sizeof(double));
            if (hi > lo)
              std::memcpy(dst + lo, xc + static_cast<std::size_t>(iy) * d.w +
                                        (ox0 + lo + kx - d.pad),
                          (hi - lo) * sizeof(double));
            if (hi < static_cast<int>(run))
              std::memset(dst + std::max(hi, 0), 0,
                          (run - std::max(hi, 0)) * sizeof(double));
          }
          n += run;
        }
      }
  }
}

// Scatter-adds dcol (kk x nb) back into dx for one group/block.
void scatter_col(Array& dx, const ConvDims& d, int group, std::size_t n0,
                 std::size_t nb, const double* dcol) {
  for (int ci = 0; ci < d.cin_g; ++ci) {
    double* xc = dx.data() + (static_cast<std::size_t>(group) * d.cin_g + ci) *
                                 d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky)
      for (int kx = 0; kx < d.k; ++kx) {
        const double* crow =
            dcol + (static_cast<std::size_t>((ci * d.k + ky) * d.k + kx)) * nb;
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t n = n0 + j;
          const int oy = static_cast<int>(n / d.wo);
          const int ox = static_cast<int>(n % d.wo);
          const int iy = oy + ky - d.pad;
          const int ix = ox + kx - d.pad;
          if (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
            xc[static_cast<std::size_t>(iy) * d.w + ix] += crow[j];
        }
      }
  }
}

std::size_t conv_block_size(const ConvDims& d) {
  // Bound im2col scratch near 32 MB.
  const std::size_t budget = (32u << 20) / sizeof(double);
  std::size_t nb = std::max<std::size_t>(std::size_t(256), budget / std::max(1, d.kk()));
  return std::min(nb, d.n);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad, int groups) {
  const ConvDims d = conv_dims(x.value(), w.value(), pad, groups);
  if (b.value().size() != static_cast<std::size_t>(d.cout))
    throw std::invalid_argument("conv2d: bias size mismatch");

  const int cout_g = d.cout / d.groups;
  const std::size_t kk = d.kk();
  const std::size_t nb_max = conv_block_size(d);

  Array out({d.cout, d.ho, d.wo});
  std::vector<double> col(kk * nb_max);
  MatRM og(cout_g, static_cast<Eigen::Index>(nb_max));
  for (int g = 0; g < d.groups; ++g) {
    CMapRM wg(w.value().data() + static_cast<std::size_t>(g) * cout_g * kk, cout_g, kk);
    for (std::size_t n0 = 0; n0 < d.n; n0 += nb_max) {
      const std::size_t nb = std::min(nb_max, d.n - n0);
      fill_col(x.value(), d, g, n0, nb, col.data());
      CMapRM cm(col.data(), kk, nb);
      og.leftCols(nb).noalias() = wg * cm;
      for (int co = 0; co < cout_g; ++co)
        std::memcpy(out.data() + (static_cast<std::size_t>(g) * cout_g + co) * d.n + n0,
                    og.data() + static_cast<std::size_t>(co) * nb_max, nb * sizeof(double));
    }
  }
  for (int co = 0; co < d.cout; ++co) {
    const double bias = b.value()[co];
    double* o = out.data() + static_cast<std::size_t>(co) * d.n;
    for (std::size_t i = 0; i < d.n; ++i) o[i] += bias;
  }

  auto px = x.node(), pw = w.node(), pb = b.node();
  return make_op(std::move(out), {x, w, b}, [px, pw, pb, d](detail::Node& n) {
    const int cout_g = d.cout / d.groups;
    const std::size_t kk = d.kk();
    const std::size_t nb_max = conv_block_size(d);
    std::vector<double> col(kk * nb_max), dcol;
    const bool need_x = px->requires_grad, need_w = pw->requires_grad;
    if (need_x) dcol.resize(kk * nb_max);

    for (int g = 0; g < d.groups; ++g) {
      CMapRM wg(pw->value.data() + static_cast<std::size_t>(g) * cout_g * kk, cout_g, kk);
      for (std::size_t n0 = 0; n0 < d.n; n0 += nb_max) {
        const std::size_t nb = std::min(nb_max, d.n - n0);
        if (need_x || need_w) fill_col(px->value, d, g, n0, nb, col.data());
        CMapRM cm(col.data(), kk, nb);
        // gather dOut rows for this group/block
        MatRM dog(cout_g, nb);
        for (int co = 0; co < cout_g; ++co)
          std::memcpy(dog.data() + static_cast<std::size_t>(co) * nb,
                      n.grad.data() + (static_cast<std::size_t>(g) * cout_g + co) * d.n + n0,
                      nb * sizeof(double));
        if (need_w) {
          MapRM dwg(pw->grad_buffer().data() + static_cast<std::size_t>(g) * cout_g * kk,
                    cout_g, kk);
          dwg.noalias() += dog * cm.transpose();
        }
        if (need_x) {
          MapRM dcm(dcol.data(), kk, nb);
          dcm.noalias() = wg.transpose() * dog;
          scatter_col(px->grad_buffer(), d, g, n0, nb, dcol.data());
        }
      }
    }
    if (pb->requires_grad) {
      Array& db = pb->grad_buffer();
      for (int co = 0; co < d.cout; ++co) {
        const double* up = n.grad.data() + static_cast<std::size_t>(co) * d.n;
        double s = 0.0;
        for (std::size_t i = 0; i < d.n; ++i) s += up[i];
        db[co] += s;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

namespace {

void softmax_rows(MatRM& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r).array();
    const double mx = row.maxCoeff();
    row = (row - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int heads, Array* attn_out) {
  const Array& qv = q.value();
  check_same_shape(qv, k.value(), "multi_head_attention");
  check_same_shape(qv, v.value(), "multi_head_attention");
  const int r = qv.channels();
  if (heads <= 0 || r % heads != 0)
    throw std::invalid_argument("multi_head_attention: r not divisible by heads");
  const int ro = r / heads;
  const std::size_t t_count = qv.plane();
  const double sm_scale = 1.0 / std::sqrt(static_cast<double>(r));
  const Eigen::Index t = static_cast<Eigen::Index>(t_count);

  if (attn_out) *attn_out = Array({heads, static_cast<int>(t_count), static_cast<int>(t_count)});

  Array out(qv.shape());
  const bool build_graph = g_grad_enabled && (q.requires_grad() || k.requires_grad() ||
                                              v.requires_grad());
  for (int hh = 0; hh < heads; ++hh) {
    const std::size_t off = static_cast<std::size_t>(hh) * ro * t_count;
    CMapRM qc(qv.data() + off, ro, t), kc(k.value().data() + off, ro, t),
        vc(v.value().data() + off, ro, t);
    MapRM oc(out.data() + off, ro, t);
    if (build_graph || attn_out || t_count <= 4096) {
      MatRM a(t, t);
      a.noalias() = qc.transpose() * kc;
      a *= sm_scale;
      softmax_rows(a);
      if (attn_out)
        std::memcpy(attn_out->data() + static_cast<std::size_t>(hh) * t_count * t_count,
                    a.data(), t_count * t_count * sizeof(double));
      oc.noalias() = vc * a.transpose();
    } else {
      // Inference on large grids: stream query blocks, never materialize A.
      const Eigen::Index bq = std::max<Eigen::Index>(
          1, static_cast<Eigen::Index>((8u << 20) / sizeof(double) / t_count));
      for (Eigen::Index t0 = 0; t0 < t; t0 += bq) {
        const Eigen::Index nb = std::min(bq, t - t0);
        MatRM a(nb, t);
        a.noalias() = qc.middleCols(t0, nb).transpose() * kc;
        a *= sm_scale;
        softmax_rows(a);
        oc.middleCols(t0, nb).noalias() = vc * a.transpose();
      }
    }
  }

  auto pq = q.node(), pk = k.node(), pv = v.node();
  return make_op(std::move(out), {q, k, v},
                 [pq, pk, pv, heads, ro, t_count, sm_scale](detail::Node& n) {
    const Eigen::Index t = static_cast<Eigen::Index>(t_count);
    for (int hh = 0; hh < heads; ++hh) {
      const std::size_t off = static_cast<std::size_t>(hh) * ro * t_count;
      CMapRM qc(pq->value.data() + off, ro, t), kc(pk->value.data() + off, ro, t),
          vc(pv->value.data() + off, ro, t);
      CMapRM doc(n.grad.data() + off, ro, t);

      MatRM a(t, t);  // recomputed, cheaper than retaining per head
      a.noalias() = qc.transpose() * kc;
      a *= sm_scale;
      softmax_rows(a);

      if (pv->requires_grad) {
        MapRM dvc(pv->grad_buffer().data() + off, ro, t);
        dvc.noalias() += doc * a;
      }
      if (pq->requires_grad || pk->requires_grad) {
        MatRM da(t, t);
        da.noalias() = doc.transpose() * vc;
        // softmax backward, rowwise
        for (Eigen::Index rr = 0; rr < t; ++rr) {
          const double s = da.row(rr).dot(a.row(rr));
          da.row(rr) = (a.row(rr).array() * (da.row(rr).array() - s)).matrix();
        }
        if (pq->requires_grad) {
          MapRM dqc(pq->grad_buffer().data() + off, ro, t);
          dqc.noalias() += sm_scale * (kc * da.transpose());
        }
        if (pk->requires_grad) {
          MapRM dkc(pk->grad_buffer().data() + off, ro, t);
          dkc.noalias() += sm_scale * (qc * da);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

namespace {

double keys_kernel(double t) {
  t = std::abs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

struct AxisMap {
  std::vector<int> idx;     // 4 per output sample
  std::vector<double> wts;  // 4 per output sample
};

AxisMap build_axis(int in_n, int out_n) {
  AxisMap m;
  m.idx.resize(4 * out_n);
  m.wts.resize(4 * out_n);
  const double ratio = static_cast<double>(in_n) / out_n;
  for (int o = 0; o < out_n; ++o) {
    const double src = (o + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double f = src - base;
    const int b = static_cast<int>(base);
    const double w[4] = {keys_kernel(1.0 + f), keys_kernel(f), keys_kernel(1.0 - f),
                         keys_kernel(2.0 - f)};
    for (int j = 0; j < 4; ++j) {
      m.idx[4 * o + j] = reflect_index(b - 1 + j, in_n);
      m.wts[4 * o + j] = w[j];
    }
  }
  return m;
}

// rows pass: (c, in_h, w) -> (c, out_h, w)
void apply_rows(const Array& in, const AxisMap& m, Array& out, bool transpose) {
  const int c_count = in.channels(), w = in.width();
  const int out_h = transpose ? in.height() : out.height();
  for (int c = 0; c < c_count; ++c)
    for (int o = 0; o < out_h; ++o)
      for (int j = 0; j < 4; ++j) {
        const double wt = m.wts[4 * o + j];
        const int iy = m.idx[4 * o + j];
        if (!transpose) {
          double* dst = out.data() + (static_cast<std::size_t>(c) * out.height() + o) * w;
          const double* src = in.data() + (static_cast<std::size_t>(c) * in.height() + iy) * w;
          for (int x = 0; x < w; ++x) dst[x] += wt * src[x];
        } else {
          double* dst = out.data() + (static_cast<std::size_t>(c) * out.height() + iy) * w;
          const double* src = in.data() + (static_cast<std::size_t>(c) * in.height() + o) * w;
          for (int x = 0; x < w; ++x) dst[x] += wt * src[x];
        }
      }
}

// cols pass: (c, h, in_w) -> (c, h, out_w)
void apply_cols(const Array& in, const AxisMap& m, Array& out, bool transpose) {
  const int c_count = in.channels(), h = in.height();
  const int out_w = transpose ? in.width() : out.width();
  for (int c = 0; c < c_count; ++c)
    for (int y = 0; y < h; ++y) {
      const double* src = in.data() + (static_cast<std::size_t>(c) * h + y) *
                                          static_cast<std::size_t>(in.width());
      double* dst = out.data() + (static_cast<std::size_t>(c) * h + y) *
                                     static_cast<std::size_t>(out.width());
      if (!transpose) {
        for (int o = 0; o < out_w; ++o) {
          double s = 0.0;
          for (int j = 0; j < 4; ++j) s += m.wts[4 * o + j] * src[m.idx[4 * o + j]];
          dst[o] += s;
        }
      } else {
        for (int o = 0; o < out_w; ++o) {
          const double g = src[o];
          for (int j = 0; j < 4; ++j) dst[m.idx[4 * o + j]] += m.wts[4 * o + j] * g;
        }
      }
    }
}

}  // namespace

Array resize_bicubic_array(const Array& x, int out_h, int out_w) {
  if (x.rank() != 3) throw std::invalid_argument("resize_bicubic: rank-3 input expected");
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_bicubic: non-positive output size");
  const AxisMap mh = build_axis(x.height(), out_h);
  const AxisMap mw = build_axis(x.width(), out_w);
  Array tmp({x.channels(), out_h, x.width()});
  apply_rows(x, mh, tmp, false);
  Array out({x.channels(), out_h, out_w});
  apply_cols(tmp, mw, out, false);
  return out;
}

Tensor resize_bicubic(const Tensor& x, int out_h, int out_w) {
  Array out = resize_bicubic_array(x.value(), out_h, out_w);
  auto px = x.node();
  const int in_h = x.value().height(), in_w = x.value().width();
  return make_op(std::move(out), {x}, [px, in_h, in_w, out_h, out_w](detail::Node& n) {
    if (!px->requires_grad) return;
    const AxisMap mh = build_axis(in_h, out_h);
    const AxisMap mw = build_axis(in_w, out_w);
    Array dtmp({n.grad.channels(), out_h, in_w});
    apply_cols(n.grad, mw, dtmp, true);
    apply_rows(dtmp, mh, px->grad_buffer(), true);
  });
}

}  // namespace csakd
