#include <doctest.h>

#include <cmath>
#include <vector>

#include "csakd/losses.hpp"
#include "test_helpers.hpp"

using namespace csakd;
using namespace csakd::losses;
using csakd::testing::collect_grads;
using csakd::testing::fd_compare;
using csakd::testing::random_array;

// ---------------------------------------------------------------------------
// Independent scalar oracles, written straight from the formulas with plain
// loops. They never touch the implementation path they check.
// ---------------------------------------------------------------------------

namespace oracle {

double l1(const Array& p, const Array& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - t[i]);
  return s / p.size();
}

double beba(const Array& p, const Array& t, double alpha, double beta, double eps) {
  const int bands = p.channels();
  const std::size_t plane = p.plane();
  double acc = 0.0;
  for (int b = 0; b < bands; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double pv = p[b * plane + i], tv = t[b * plane + i];
      const double d = (pv - tv) * (pv - tv);
      num += alpha * d / beta + (d > beta ? d - beta : 0.0) - alpha * beta;
      den += tv * tv + eps;
    }
    acc += (num / plane) / (den / plane);
  }
  return acc / bands;
}

double sam(const Array& p, const Array& t, double eps) {
  const int bands = p.channels();
  const std::size_t plane = p.plane();
  double csum = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    double dot = 0.0, a = 0.0, b = 0.0;
    for (int k = 0; k < bands; ++k) {
      dot += p[k * plane + i] * t[k * plane + i];
      a += p[k * plane + i] * p[k * plane + i];
      b += t[k * plane + i] * t[k * plane + i];
    }
    csum += dot / (std::sqrt(a) * std::sqrt(b) + eps);
  }
  return 1.0 - csum / plane;
}

double kd(const Array& zs, const Array& zt) {
  double s = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double a = 1.0 / (1.0 + std::exp(-zs[i]));
    double b = 1.0 / (1.0 + std::exp(-zt[i]));
    b = std::min(std::max(b, 1e-7), 1.0 - 1e-7);
    s += -(a * std::log(b) + (1.0 - a) * std::log(1.0 - b));
  }
  return s / zs.size();
}

}  // namespace oracle

namespace {

Array filled(const std::vector<int>& shape, double v) {
  Array a(shape);
  a.fill(v);
  return a;
}

double loss_value(const Tensor& t) { return t.item(); }

}  // namespace

TEST_CASE("l1 loss examples and oracle agreement") {
  Array ones = filled({1, 2, 2}, 1.0);
  CHECK(loss_value(l1_loss(Tensor::constant(ones), Tensor::constant(ones))) == 0.0);

  Array off = filled({1, 2, 2}, 3.0);
  CHECK(loss_value(l1_loss(Tensor::constant(off), Tensor::constant(ones))) ==
        doctest::Approx(2.0));

  Array p({1, 1, 2}, std::vector<double>{0.0, 1.0});
  Array t({1, 1, 2}, std::vector<double>{1.0, 3.0});
  CHECK(loss_value(l1_loss(Tensor::constant(p), Tensor::constant(t))) ==
        doctest::Approx(1.5).epsilon(1e-12));

  Rng rng(2);
  Array rp = random_array({3, 4, 4}, rng), rt = random_array({3, 4, 4}, rng);
  CHECK(loss_value(l1_loss(Tensor::constant(rp), Tensor::constant(rt))) ==
        doctest::Approx(oracle::l1(rp, rt)).epsilon(1e-12));
}

TEST_CASE("beba loss matches the oracle at the three spec points") {
  LossConfig cfg;
  Array ones = filled({2, 3, 3}, 1.0);

  // D = 0: loss ~ -alpha = -0.5
  const double at0 = loss_value(beba_loss(Tensor::constant(ones), Tensor::constant(ones), cfg));
  CHECK(at0 == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(at0 == doctest::Approx(oracle::beba(ones, ones, 0.5, 1.0, 1e-8)).epsilon(1e-9));

  // D = beta exactly: the regimes meet at 0
  Array at_beta = filled({2, 3, 3}, 2.0);  // pred - target = 1, D = 1 = beta
  const double atb =
      loss_value(beba_loss(Tensor::constant(at_beta), Tensor::constant(ones), cfg));
  CHECK(atb == doctest::Approx(0.0).epsilon(1e-9));

  // D = 2: linear regime, 0.5*2 + 1 - 0.5 = 1.5
  Array at2 = filled({2, 3, 3}, 1.0 + std::sqrt(2.0));
  const double v2 =
      loss_value(beba_loss(Tensor::constant(at2), Tensor::constant(ones), cfg));
  CHECK(v2 == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(v2 == doctest::Approx(oracle::beba(at2, ones, 0.5, 1.0, 1e-8)).epsilon(1e-9));

  // random agreement
  Rng rng(3);
  Array rp = random_array({3, 4, 4}, rng, 0.2, 2.0);
  Array rt = random_array({3, 4, 4}, rng, 0.2, 2.0);
  CHECK(loss_value(beba_loss(Tensor::constant(rp), Tensor::constant(rt), cfg)) ==
        doctest::Approx(oracle::beba(rp, rt, 0.5, 1.0, 1e-8)).epsilon(1e-12));
}

TEST_CASE("beba is continuous at the regime boundary and monotone in |error|") {
  LossConfig cfg;
  Array ones = filled({1, 2, 2}, 1.0);
  Array below = filled({1, 2, 2}, 1.0 + std::sqrt(1.0 - 1e-6));
  Array above = filled({1, 2, 2}, 1.0 + std::sqrt(1.0 + 1e-6));
  const double lb = loss_value(beba_loss(Tensor::constant(below), Tensor::constant(ones), cfg));
  const double la = loss_value(beba_loss(Tensor::constant(above), Tensor::constant(ones), cfg));
  CHECK(std::abs(la - lb) < 1e-4);

  // random perturbation pairs: growing |pred - target| never lowers the loss
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    Array t = random_array({2, 3, 3}, rng, 0.5, 1.5);
    Array d = random_array({2, 3, 3}, rng, -1.0, 1.0);
    const double s1 = rng.uniform(0.0, 1.5), s2 = s1 + rng.uniform(0.0, 1.5);
    Array p1 = t, p2 = t;
    for (std::size_t i = 0; i < t.size(); ++i) {
      p1[i] += s1 * d[i];
      p2[i] += s2 * d[i];
    }
    const double v1 = loss_value(beba_loss(Tensor::constant(p1), Tensor::constant(t), cfg));
    const double v2 = loss_value(beba_loss(Tensor::constant(p2), Tensor::constant(t), cfg));
    CHECK(v2 >= v1 - 1e-12);
  }
}

TEST_CASE("beba minimum matches the closed form, found by gradient descent") {
  LossConfig cfg;
  Rng rng(11);
  Array target = random_array({2, 3, 3}, rng, 0.5, 2.0);
  const std::size_t plane = target.plane();
  double expect = 0.0;
  for (int b = 0; b < 2; ++b) {
    double den = 0.0;
    for (std::size_t i = 0; i < plane; ++i)
      den += target[b * plane + i] * target[b * plane + i] + cfg.eps;
    expect += 1.0 / (den / plane);
  }
  expect *= -cfg.alpha * cfg.beta / 2.0;

  Tensor pred = Tensor::leaf(random_array({2, 3, 3}, rng, 0.0, 2.5));
  Tensor t = Tensor::constant(target);
  double loss = 0.0;
  for (int it = 0; it < 4000; ++it) {
    pred.zero_grad();
    Tensor l = beba_loss(pred, t, cfg);
    backward(l);
    loss = l.item();
    Array& v = pred.value_mut();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= 0.05 * pred.grad()[i];
  }
  CHECK(loss == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("sam loss at the three spec angles") {
  // identical spectra -> ~0
  Array a({2, 1, 1}, std::vector<double>{3.0, 4.0});
  CHECK(loss_value(sam_loss(Tensor::constant(a), Tensor::constant(a), 1e-8)) ==
        doctest::Approx(0.0).epsilon(1e-8));

  // orthogonal -> 1
  Array e1({2, 1, 1}, std::vector<double>{1.0, 0.0});
  Array e2({2, 1, 1}, std::vector<double>{0.0, 1.0});
  CHECK(loss_value(sam_loss(Tensor::constant(e1), Tensor::constant(e2), 1e-8)) ==
        doctest::Approx(1.0).epsilon(1e-9));

  // 45 degrees -> 1 - 1/sqrt(2)
  Array d({2, 1, 1}, std::vector<double>{1.0, 1.0});
  CHECK(loss_value(sam_loss(Tensor::constant(e1), Tensor::constant(d), 1e-8)) ==
        doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-7));

  Rng rng(7);
  Array rp = random_array({4, 3, 3}, rng, 0.1, 2.0);
  Array rt = random_array({4, 3, 3}, rng, 0.1, 2.0);
  CHECK(loss_value(sam_loss(Tensor::constant(rp), Tensor::constant(rt), 1e-8)) ==
        doctest::Approx(oracle::sam(rp, rt, 1e-8)).epsilon(1e-12));
}

TEST_CASE("sam loss stays in [0,2] and is scale invariant") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Array p = random_array({3, 3, 3}, rng, -2.0, 2.0);
    Array t = random_array({3, 3, 3}, rng, -2.0, 2.0);
    const double v = loss_value(sam_loss(Tensor::constant(p), Tensor::constant(t), 1e-8));
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
    Array p2 = p;
    for (std::size_t i = 0; i < p2.size(); ++i) p2[i] *= 4.2;
    const double v2 = loss_value(sam_loss(Tensor::constant(p2), Tensor::constant(t), 1e-8));
    CHECK(v2 == doctest::Approx(v).epsilon(1e-6));
  }
}

TEST_CASE("kd loss: log 2 at zeros, saturation, clamped mismatch") {
  Array z0 = filled({2, 2, 2}, 0.0);
  CHECK(loss_value(kd_loss(Tensor::constant(z0), Tensor::constant(z0))) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));

  Array z20 = filled({2, 2, 2}, 20.0);
  CHECK(loss_value(kd_loss(Tensor::constant(z20), Tensor::constant(z20))) ==
        doctest::Approx(0.0).epsilon(1e-6));

  Array zm20 = filled({2, 2, 2}, -20.0);
  const double clamped = loss_value(kd_loss(Tensor::constant(z20), Tensor::constant(zm20)));
  CHECK(clamped == doctest::Approx(-std::log(1e-7)).epsilon(1e-4));

  Rng rng(17);
  Array rs = random_array({2, 3, 3}, rng, -3.0, 3.0);
  Array rt = random_array({2, 3, 3}, rng, -3.0, 3.0);
  CHECK(loss_value(kd_loss(Tensor::constant(rs), Tensor::constant(rt))) ==
        doctest::Approx(oracle::kd(rs, rt)).epsilon(1e-12));
}

TEST_CASE("kd loss is minimized over z_t at z_t == z_s (1-D scan)") {
  Array zs = filled({1, 1, 1}, 0.8);
  double best_v = 1e300, best_t = 0.0;
  for (double zt = -4.0; zt <= 4.0; zt += 0.01) {
    const double v =
        loss_value(kd_loss(Tensor::constant(zs), Tensor::constant(filled({1, 1, 1}, zt))));
    if (v < best_v) {
      best_v = v;
      best_t = zt;
    }
  }
  CHECK(best_t == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("teacher and student totals compose the parts") {
  LossConfig cfg;
  Array ones = filled({2, 2, 2}, 1.0);
  Tensor y = Tensor::constant(ones);

  const double lt = loss_value(teacher_total(y, y, cfg));
  CHECK(lt == doctest::Approx(-0.05).epsilon(1e-6));

  LossConfig pure;
  pure.lambda1 = pure.lambda2 = 0.0;
  Array off = filled({2, 2, 2}, 1.5);
  CHECK(loss_value(teacher_total(Tensor::constant(off), y, pure)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  Array z0 = filled({3, 2, 2}, 0.0);
  const double ls = loss_value(student_total(y, y, y, Tensor::constant(z0),
                                             Tensor::constant(z0), cfg));
  CHECK(ls == doctest::Approx(-0.05 + 0.1 * std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("loss gradients match central finite differences") {
  Rng rng(19);
  LossConfig cfg;
  Tensor p = Tensor::leaf(random_array({3, 4, 4}, rng, 0.2, 2.0));
  Tensor t = Tensor::leaf(random_array({3, 4, 4}, rng, 0.2, 2.0));

  SUBCASE("l1") {
    auto g = [&] { return l1_loss(p, t); };
    backward(g());
    auto stats = fd_compare({p, t}, collect_grads({p, t}), [&] { return g().item(); });
    CHECK(stats.pass_fraction() >= 0.95);  // |.| kinks possible
  }
  SUBCASE("beba") {
    auto g = [&] { return beba_loss(p, t, cfg); };
    backward(g());
    auto stats = fd_compare({p, t}, collect_grads({p, t}), [&] { return g().item(); });
    CHECK(stats.pass_fraction() >= 0.95);  // relu(D - beta) kink possible
  }
  SUBCASE("sam") {
    auto g = [&] { return sam_loss(p, t, cfg.eps); };
    backward(g());
    auto stats = fd_compare({p, t}, collect_grads({p, t}), [&] { return g().item(); });
    CHECK(stats.failed == 0);
  }
  SUBCASE("kd") {
    Tensor zs = Tensor::leaf(random_array({2, 3, 3}, rng, -2.0, 2.0));
    Tensor zt = Tensor::leaf(random_array({2, 3, 3}, rng, -2.0, 2.0));
    auto g = [&] { return kd_loss(zs, zt); };
    backward(g());
    auto stats = fd_compare({zs, zt}, collect_grads({zs, zt}), [&] { return g().item(); });
    CHECK(stats.failed == 0);
  }
  SUBCASE("student_total with stop-gradient blocks teacher-side grads") {
    LossConfig sg = cfg;
    sg.teacher_stop_gradient = true;
    Tensor y = Tensor::constant(random_array({3, 4, 4}, rng, 0.2, 2.0));
    Tensor yt = Tensor::leaf(random_array({3, 4, 4}, rng, 0.2, 2.0));
    Tensor zs = Tensor::leaf(random_array({2, 4, 4}, rng, -1.0, 1.0));
    Tensor zt = Tensor::leaf(random_array({2, 4, 4}, rng, -1.0, 1.0));
    backward(student_total(p, y, yt, zs, zt, sg));
    CHECK_FALSE(yt.has_grad());
    CHECK_FALSE(zt.has_grad());
    CHECK(p.has_grad());
    CHECK(zs.has_grad());

    // with the flag off, gradients reach the teacher-side tensors
    sg.teacher_stop_gradient = false;
    backward(student_total(p, y, yt, zs, zt, sg));
    CHECK(yt.has_grad());
    CHECK(zt.has_grad());
  }
}
