#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/gradcheck.hpp"
#include "core/init.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"

using namespace lsen;
using D = Tensor<double>;

namespace {

// Reference cross-correlation, written independently of the library path.
std::vector<double> conv_reference(const std::vector<double>& x, int64_t h, int64_t w,
                                   const std::vector<double>& k, int64_t kh, int64_t kw,
                                   int stride, int pad, int64_t& oh, int64_t& ow) {
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<size_t>(oh * ow), 0.0);
  for (int64_t oy = 0; oy < oh; ++oy)
    for (int64_t ox = 0; ox < ow; ++ox) {
      double acc = 0;
      for (int64_t ky = 0; ky < kh; ++ky)
        for (int64_t kx = 0; kx < kw; ++kx) {
          const int64_t iy = oy * stride - pad + ky;
          const int64_t ix = ox * stride - pad + kx;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w)
            acc += x[static_cast<size_t>(iy * w + ix)] * k[static_cast<size_t>(ky * kw + kx)];
        }
      out[static_cast<size_t>(oy * ow + ox)] = acc;
    }
  return out;
}

D random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  D t = D::zeros(std::move(shape));
  uniform_fill(t, lo, hi, rng);
  return t;
}

}  // namespace

TEST_CASE("conv2d identity kernel") {
  D x = D::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  D k = D::from_data({1, 1, 1, 1}, {1.0});
  D y = ops::conv2d(x, k, D(), 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d hand cross-correlation") {
  D x = D::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  D k = D::from_data({1, 1, 2, 2}, {1, 0, 0, 1});
  D y = ops::conv2d(x, k, D(), 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("conv2d 11x11 padding 5 preserves spatial shape") {
  Rng rng(7);
  D x = random_tensor({1, 2, 224, 224}, rng);
  D k = random_tensor({1, 2, 11, 11}, rng);
  D y = ops::conv2d(x, k, D(), 1, 5);
  CHECK(y.shape() == Shape{1, 1, 224, 224});
}

TEST_CASE("conv2d matches reference on random shapes") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const int64_t h = rng.uniform_int(3, 9), w = rng.uniform_int(3, 9);
    const int64_t kh = rng.uniform_int(1, 3), kw = rng.uniform_int(1, 3);
    const int pad = static_cast<int>(rng.uniform_int(0, 2));
    const int stride = static_cast<int>(rng.uniform_int(1, 2));
    if (h + 2 * pad < kh || w + 2 * pad < kw) continue;
    D x = random_tensor({1, 1, h, w}, rng);
    D k = random_tensor({1, 1, kh, kw}, rng);
    D y = ops::conv2d(x, k, D(), stride, pad);
    int64_t oh = 0, ow = 0;
    auto ref = conv_reference(x.vec(), h, w, k.vec(), kh, kw, stride, pad, oh, ow);
    REQUIRE(y.shape() == Shape{1, 1, oh, ow});
    for (int64_t i = 0; i < oh * ow; ++i)
      CHECK(y.data()[i] == doctest::Approx(ref[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d error paths") {
  Rng rng(3);
  D x = random_tensor({1, 2, 4, 4}, rng);
  D k3 = random_tensor({1, 3, 3, 3}, rng);  // channel mismatch
  CHECK_THROWS_AS(ops::conv2d(x, k3, D(), 1, 1), DimensionError);
  D k = random_tensor({1, 2, 3, 3}, rng);
  CHECK_THROWS_AS(ops::conv2d(x, k, D(), 0, 1), ArgumentError);   // stride < 1
  CHECK_THROWS_AS(ops::conv2d(x, k, D(), 1, -1), ArgumentError);  // negative padding
}

TEST_CASE("conv2d linearity") {
  Rng rng(13);
  D x = random_tensor({1, 3, 6, 6}, rng);
  D y = random_tensor({1, 3, 6, 6}, rng);
  D k = random_tensor({2, 3, 3, 3}, rng);
  const double a = 1.7, b = -0.4;
  D lhs = ops::conv2d(ops::add(ops::affine(x, a, 0.0), ops::affine(y, b, 0.0)), k, D(), 1, 1);
  D rhs = ops::add(ops::affine(ops::conv2d(x, k, D(), 1, 1), a, 0.0),
                   ops::affine(ops::conv2d(y, k, D(), 1, 1), b, 0.0));
  for (int64_t i = 0; i < lhs.numel(); ++i)
    CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) < 1e-10);
}

TEST_CASE("group_norm constant input collapses to beta") {
  D x = D::full({2, 4, 3, 3}, 3.25);
  D gamma = D::full({4}, 1.0);
  D beta = D::zeros({4});
  D y = ops::group_norm(x, 2, gamma, beta, 1e-5);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(0.0));

  D beta5 = D::full({4}, 5.0);
  D gamma0 = D::zeros({4});
  D y5 = ops::group_norm(x, 2, gamma0, beta5, 1e-5);
  for (int64_t i = 0; i < y5.numel(); ++i) CHECK(y5.data()[i] == doctest::Approx(5.0));
}

TEST_CASE("group_norm standardizes a known vector") {
  // mean 2.5, population variance 1.25 -> [-1.342, -0.447, 0.447, 1.342]
  D x = D::from_data({1, 1, 1, 4}, {1, 2, 3, 4});
  D y = ops::group_norm(x, 1, D::full({1}, 1.0), D::zeros({1}), 1e-12);
  CHECK(y.data()[0] == doctest::Approx(-1.3416407865).epsilon(1e-6));
  CHECK(y.data()[1] == doctest::Approx(-0.4472135955).epsilon(1e-6));
  CHECK(y.data()[2] == doctest::Approx(0.4472135955).epsilon(1e-6));
  CHECK(y.data()[3] == doctest::Approx(1.3416407865).epsilon(1e-6));
}

TEST_CASE("group_norm rejects indivisible groups") {
  D x = D::zeros({1, 6, 2, 2});
  CHECK_THROWS_AS(ops::group_norm(x, 4, D::full({6}, 1.0), D::zeros({6}), 1e-5), ArgumentError);
}

TEST_CASE("group_norm normalizes per (batch, group)") {
  Rng rng(17);
  const int groups = 2;
  D x = random_tensor({2, 8, 5, 5}, rng, -4.0, 4.0);
  D y = ops::group_norm(x, groups, D::full({8}, 1.0), D::zeros({8}), 1e-10);
  const int64_t gsize = 4 * 25;
  for (int g = 0; g < 2 * groups; ++g) {
    double mean = 0, var = 0;
    const double* p = y.data() + g * gsize;
    for (int64_t i = 0; i < gsize; ++i) mean += p[i];
    mean /= static_cast<double>(gsize);
    for (int64_t i = 0; i < gsize; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(gsize);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("softmax uniform, stabilized, closed-form") {
  D a = ops::softmax_lastdim(D::from_data({3}, {0, 0, 0}));
  for (int i = 0; i < 3; ++i) CHECK(a.data()[i] == doctest::Approx(1.0 / 3));

  D b = ops::softmax_lastdim(D::from_data({2}, {1000, 1000}));
  CHECK(b.data()[0] == doctest::Approx(0.5));
  CHECK(b.data()[1] == doctest::Approx(0.5));

  D c = ops::softmax_lastdim(D::from_data({2}, {0, std::log(3.0)}));
  CHECK(c.data()[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(c.data()[1] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("softmax rows sum to one with entries in [0,1]") {
  Rng rng(23);
  D x = random_tensor({4, 6, 9}, rng, -30.0, 30.0);
  D y = ops::softmax_lastdim(x);
  for (int64_t r = 0; r < 24; ++r) {
    double sum = 0;
    for (int64_t j = 0; j < 9; ++j) {
      const double v = y.data()[r * 9 + j];
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("float softmax keeps the sum-to-one invariant") {
  Rng rng(29);
  Tensor<float> x = Tensor<float>::zeros({64, 225});
  uniform_fill(x, -12.0, 12.0, rng);
  Tensor<float> y = ops::softmax_lastdim(x);
  for (int64_t r = 0; r < 64; ++r) {
    float sum = 0;
    for (int64_t j = 0; j < 225; ++j) sum += y.data()[r * 225 + j];
    CHECK(std::abs(sum - 1.f) < 1e-5f);
  }
}

TEST_CASE("pool2d examples") {
  D x = D::from_data({1, 1, 2, 2}, {1, 3, 5, 7});
  CHECK(ops::pool2d(x, PoolKind::kAvg, 2, 2).item() == doctest::Approx(4.0));
  CHECK(ops::pool2d(x, PoolKind::kMax, 2, 2).item() == doctest::Approx(7.0));

  Rng rng(31);
  D r = random_tensor({2, 3, 4, 4}, rng);
  D id_avg = ops::pool2d(r, PoolKind::kAvg, 1, 1);
  D id_max = ops::pool2d(r, PoolKind::kMax, 1, 1);
  for (int64_t i = 0; i < r.numel(); ++i) {
    CHECK(id_avg.data()[i] == r.data()[i]);
    CHECK(id_max.data()[i] == r.data()[i]);
  }

  D odd = D::zeros({1, 1, 5, 5});
  CHECK_THROWS_AS(ops::pool2d(odd, PoolKind::kAvg, 2, 2), ArgumentError);
}

TEST_CASE("resize_bilinear identity and convexity") {
  Rng rng(37);
  D x = random_tensor({1, 2, 4, 4}, rng);
  D same = ops::resize_bilinear(x, 4, 4);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(same.data()[i] == x.data()[i]);

  D c = D::full({1, 1, 3, 5}, 0.73);
  D grown = ops::resize_bilinear(c, 9, 11);
  for (int64_t i = 0; i < grown.numel(); ++i) CHECK(grown.data()[i] == doctest::Approx(0.73));

  CHECK_THROWS_AS(ops::resize_bilinear(x, 0, 4), ArgumentError);
}

TEST_CASE("resize_bilinear half-pixel-center oracle") {
  // 1x2 -> 1x4: src = (j+0.5)*0.5 - 0.5 for j=0..3 -> -0.25, 0.25, 0.75, 1.25
  // clamped: 0, 0.25, 0.75, 1 -> values 0, 0.5, 1.5, 2
  D x = D::from_data({1, 1, 1, 2}, {0, 2});
  D y = ops::resize_bilinear(x, 1, 4);
  CHECK(y.data()[0] == doctest::Approx(0.0));
  CHECK(y.data()[1] == doctest::Approx(0.5));
  CHECK(y.data()[2] == doctest::Approx(1.5));
  CHECK(y.data()[3] == doctest::Approx(2.0));
}

TEST_CASE("pad2d zero border and crop round trip") {
  D x = D::from_data({1, 1, 1, 1}, {42.0});
  D padded = ops::pad2d(x, 1, 1, 1, 1);
  REQUIRE(padded.shape() == Shape{1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) CHECK(padded.data()[i] == (i == 4 ? 42.0 : 0.0));

  Rng rng(41);
  D r = random_tensor({2, 3, 7, 5}, rng);
  D round = ops::crop2d(ops::pad2d(r, 3, 3, 3, 3), 3, 3, 3, 3);
  for (int64_t i = 0; i < r.numel(); ++i) CHECK(round.data()[i] == r.data()[i]);

  CHECK_THROWS_AS(ops::pad2d(r, -1, 0, 0, 0), ArgumentError);
  CHECK_THROWS_AS(ops::crop2d(r, 4, 4, 0, 0), ArgumentError);
}

TEST_CASE("uneven divisibility pad splits floor before, ceil after") {
  // H=5 to a multiple of 2 needs 1: top 0, bottom 1.
  const int total = (2 - 5 % 2) % 2;
  CHECK(total == 1);
  CHECK(total / 2 == 0);
  CHECK(total - total / 2 == 1);
}

TEST_CASE("matmul identity, hand product, batch independence") {
  Rng rng(43);
  D a = random_tensor({3, 3}, rng);
  D eye = D::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0;
  D ai = ops::matmul(a, eye);
  for (int64_t i = 0; i < 9; ++i) CHECK(ai.data()[i] == doctest::Approx(a.data()[i]));

  D m = D::from_data({2, 2}, {1, 2, 3, 4});
  D v = D::from_data({2, 1}, {5, 6});
  D mv = ops::matmul(m, v);
  CHECK(mv.data()[0] == doctest::Approx(17.0));
  CHECK(mv.data()[1] == doctest::Approx(39.0));

  D ba = random_tensor({2, 2, 2}, rng);
  D bb = random_tensor({2, 2, 2}, rng);
  D bc = ops::matmul(ba, bb);
  for (int b = 0; b < 2; ++b) {
    D sa = D::from_data({2, 2}, {ba.data()[b * 4], ba.data()[b * 4 + 1], ba.data()[b * 4 + 2],
                                 ba.data()[b * 4 + 3]});
    D sb = D::from_data({2, 2}, {bb.data()[b * 4], bb.data()[b * 4 + 1], bb.data()[b * 4 + 2],
                                 bb.data()[b * 4 + 3]});
    D sc = ops::matmul(sa, sb);
    for (int i = 0; i < 4; ++i) CHECK(bc.data()[b * 4 + i] == doctest::Approx(sc.data()[i]));
  }

  D bad = random_tensor({2, 3}, rng);
  CHECK_THROWS_AS(ops::matmul(a, bad), DimensionError);
}

TEST_CASE("grad_check quadratic sanity") {
  D x = D::from_data({2}, {1, 2});
  x.set_requires_grad(true);
  auto f = [&] { return ops::sum_all(ops::mul(x, x)); };
  // analytic [2, 4]
  {
    Tape<double> tape;
    D loss = f();
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
  }
  CHECK(grad_check<double>(f, {x}) < 1e-7);
}

TEST_CASE("grad_check rejects non-scalar f") {
  D x = D::from_data({2}, {1, 2});
  x.set_requires_grad(true);
  auto f = [&] { return ops::mul(x, x); };
  CHECK_THROWS_AS(grad_check<double>(f, {x}), ArgumentError);
}

TEST_CASE("per-primitive gradient checks in double precision") {
  Rng rng(53);
  const GradCheckOptions opts;

  auto check_unary = [&](const char* name, auto make) {
    D x = random_tensor({2, 3, 4, 5}, rng, 0.15, 0.85);
    x.set_requires_grad(true);
    auto f = [&] { return ops::mean_all(make(x)); };
    const double err = grad_check<double>(f, {x}, opts);
    INFO(name);
    CHECK(err < 1e-5);
  };
  check_unary("relu", [](const D& t) { return ops::relu(ops::affine(t, 1.0, -0.5)); });
  check_unary("sigmoid", [](const D& t) { return ops::sigmoid(t); });
  check_unary("log", [](const D& t) { return ops::log(t); });
  check_unary("affine", [](const D& t) { return ops::affine(t, -2.5, 0.75); });
  check_unary("softmax", [](const D& t) { return ops::softmax_lastdim(t); });
  check_unary("resize", [](const D& t) { return ops::resize_bilinear(t, 7, 3); });
  check_unary("pad", [](const D& t) { return ops::pad2d(t, 1, 0, 2, 1); });
  check_unary("crop", [](const D& t) { return ops::crop2d(t, 1, 1, 1, 1); });
  check_unary("mean_lastdim", [](const D& t) { return ops::mean_lastdim(t); });
  check_unary("clamp", [](const D& t) { return ops::clamp(t, 0.2, 0.8); });

  // conv2d with bias
  {
    D x = random_tensor({2, 3, 6, 6}, rng);
    D k = random_tensor({4, 3, 3, 3}, rng, -0.4, 0.4);
    D b = random_tensor({4}, rng, -0.2, 0.2);
    x.set_requires_grad(true);
    k.set_requires_grad(true);
    b.set_requires_grad(true);
    auto f = [&] { return ops::mean_all(ops::sigmoid(ops::conv2d(x, k, b, 1, 1))); };
    CHECK(grad_check<double>(f, {x, k, b}, opts) < 1e-5);
  }
  // group_norm
  {
    D x = random_tensor({2, 8, 4, 4}, rng, -2.0, 2.0);
    D g = random_tensor({8}, rng, 0.5, 1.5);
    D b = random_tensor({8}, rng, -0.5, 0.5);
    x.set_requires_grad(true);
    g.set_requires_grad(true);
    b.set_requires_grad(true);
    auto f = [&] { return ops::mean_all(ops::sigmoid(ops::group_norm(x, 2, g, b, 1e-5))); };
    CHECK(grad_check<double>(f, {x, g, b}, opts) < 1e-5);
  }
  // pooling (max probed away from ties by construction of random input)
  {
    D x = random_tensor({1, 2, 4, 4}, rng);
    x.set_requires_grad(true);
    auto favg = [&] { return ops::mean_all(ops::sigmoid(ops::pool2d(x, PoolKind::kAvg, 2, 2))); };
    auto fmax = [&] { return ops::mean_all(ops::sigmoid(ops::pool2d(x, PoolKind::kMax, 2, 2))); };
    CHECK(grad_check<double>(favg, {x}, opts) < 1e-5);
    CHECK(grad_check<double>(fmax, {x}, opts) < 1e-5);
  }
  // batched matmul with broadcast
  {
    D a = random_tensor({3, 4, 5}, rng);
    D b = random_tensor({5, 2}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto f = [&] { return ops::mean_all(ops::sigmoid(ops::matmul(a, b))); };
    CHECK(grad_check<double>(f, {a, b}, opts) < 1e-5);
  }
  // binary ops with broadcasting
  {
    D a = random_tensor({2, 3, 4}, rng, 0.3, 1.2);
    D b = random_tensor({3, 1}, rng, 0.4, 1.5);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto f = [&] {
      return ops::mean_all(
          ops::div(ops::mul(ops::add(a, b), ops::sub(a, ops::affine(b, 0.5, 0.0))), b));
    };
    CHECK(grad_check<double>(f, {a, b}, opts) < 1e-5);
  }
  // concat + permute + reshape
  {
    D a = random_tensor({2, 2, 3, 3}, rng);
    D b = random_tensor({2, 4, 3, 3}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto f = [&] {
      D cat = ops::concat<double>({a, b}, 1);
      D pm = ops::permute(cat, {0, 2, 3, 1});
      return ops::mean_all(ops::sigmoid(ops::reshape(pm, {-1, 6})));
    };
    CHECK(grad_check<double>(f, {a, b}, opts) < 1e-5);
  }
}

TEST_CASE("backward accumulates over shared use") {
  D x = D::from_data({1}, {3.0});
  x.set_requires_grad(true);
  Tape<double> tape;
  D y = ops::mul(x, x);   // d/dx = 2x = 6
  D z = ops::add(y, x);   // + 1
  tape.backward(ops::sum_all(z));
  CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("no tape means no recording") {
  D x = D::from_data({1}, {2.0});
  x.set_requires_grad(true);
  D y = ops::mul(x, x);
  CHECK_FALSE(y.requires_grad());  // nothing recorded without an active tape
}

TEST_CASE("finite checks flag non-finite op output") {
  set_finite_checks(true);
  D x = D::from_data({1}, {-1.0});
  CHECK_THROWS_AS(ops::log(x), NumericError);
  set_finite_checks(false);
  CHECK_NOTHROW(ops::log(x));
}
