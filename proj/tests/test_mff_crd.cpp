#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/gradcheck.hpp"
#include "core/init.hpp"
#include "core/ops.hpp"
#include "crd/crd.hpp"
#include "mff/mff.hpp"

using namespace lsen;
using D = Tensor<double>;

namespace {

D random_map(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  D t = D::zeros(std::move(shape));
  uniform_fill(t, lo, hi, rng);
  return t;
}

int64_t conv_block_params(int64_t cin, int64_t cout, int64_t k) {
  return cout * cin * k * k + cout + 2 * cout;  // kernel + bias + GN affine
}

}  // namespace

TEST_CASE("channel attention: zero excitation layer halves the input") {
  Rng rng(1);
  auto ca = ChannelAttentionParams<double>::init(16, 16, rng);
  // init already zeroes the final layer; assert and rely on it
  for (double v : ca.w2.vec()) CHECK(v == 0.0);
  D x = random_map({2, 16, 4, 4}, rng);
  D y = channel_attention(x, ca);
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.data()[i] == doctest::Approx(0.5 * x.data()[i]).epsilon(1e-12));
}

TEST_CASE("channel attention never amplifies magnitudes") {
  Rng rng(2);
  auto ca = ChannelAttentionParams<double>::init(16, 16, rng);
  normal_fill(ca.w2, 0.0, 0.7, rng);
  normal_fill(ca.b2, 0.0, 0.7, rng);
  D x = random_map({2, 16, 5, 5}, rng, -2.0, 2.0);
  D y = channel_attention(x, ca);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y.data()[i]) <= std::abs(x.data()[i]));
}

TEST_CASE("channel attention gradient check") {
  Rng rng(3);
  auto ca = ChannelAttentionParams<double>::init(16, 16, rng);
  normal_fill(ca.w2, 0.0, 0.3, rng);  // move off the zero init for a generic point
  normal_fill(ca.b2, 0.0, 0.3, rng);
  D x = random_map({1, 16, 4, 4}, rng);
  x.set_requires_grad(true);
  std::vector<ParamRef<double>> refs;
  ca.collect(refs, "ca");
  std::vector<D> tensors{x};
  for (auto& r : refs) tensors.push_back(r.tensor);
  auto f = [&] { return ops::mean_all(ops::sigmoid(channel_attention(x, ca))); };
  CHECK(grad_check<double>(f, tensors) < 1e-5);
}

TEST_CASE("mff zero network collapses to zero output") {
  Rng rng(4);
  auto p = MffParams<double>::init(1, 8, true, rng);
  for (auto& block : {&p.pre, &p.branch_1, &p.branch_3, &p.branch_5, &p.fuse, &p.out}) {
    fill(block->kernel, 0.0);
    fill(block->bias, 0.0);
    fill(block->gn_beta, 0.0);
  }
  D x_in = random_map({1, 1, 8, 8}, rng, 0.0, 1.0);
  D x_down = random_map({1, 8, 8, 8}, rng);
  D y = mff_forward(x_in, x_down, p);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("mff shape contract and resolution mismatch error") {
  Rng rng(5);
  auto p = MffParams<double>::init(1, 64, true, rng);
  D x_in = random_map({2, 1, 56, 56}, rng, 0.0, 1.0);
  D x_down = random_map({2, 64, 56, 56}, rng);
  CHECK(mff_forward(x_in, x_down, p).shape() == Shape{2, 64, 56, 56});

  D bad = random_map({2, 64, 28, 28}, rng);
  CHECK_THROWS_AS(mff_forward(x_in, bad, p), DimensionError);

  auto p0 = MffParams<double>::init(1, 64, false, rng);
  CHECK_THROWS_AS(mff_forward(x_in, x_down, p0), ArgumentError);
  CHECK(mff_forward(x_in, D(), p0).shape() == Shape{2, 64, 56, 56});
}

TEST_CASE("mff inner-stage parameter count matches the closed-form sum") {
  Rng rng(6);
  const int c = 64;
  auto p = MffParams<double>::init(1, c, true, rng);
  std::vector<ParamRef<double>> refs;
  p.collect(refs, "mff");
  int64_t actual = 0;
  for (auto& r : refs) actual += r.tensor.numel();

  const int64_t c3 = 3 * c;
  const int64_t hidden = c3 / 16;
  const int64_t expected = conv_block_params(1, c, 3)        // pre
                           + conv_block_params(c, c, 1)      // branch 1
                           + conv_block_params(c, c, 3)      // branch 3
                           + conv_block_params(c, c, 5)      // branch 5
                           + (c3 * hidden + hidden)          // CA squeeze
                           + (hidden * c3 + c3)              // CA excite
                           + conv_block_params(4 * c, c, 1)  // fuse
                           + conv_block_params(c, c, 3);     // out
  CHECK(actual == expected);
  CHECK(actual == 203148);  // decided widths, inner stage
}

TEST_CASE("all-equal-branch property: identical branch functions agree") {
  Rng rng(7);
  auto p = MffParams<double>::init(1, 8, false, rng);
  // Configure branch_3 and branch_5 to compute exactly branch_1's function:
  // center-tap-only kernels equal to the 1x1 kernel, same affine.
  fill(p.branch_3.kernel, 0.0);
  fill(p.branch_5.kernel, 0.0);
  for (int co = 0; co < 8; ++co)
    for (int ci = 0; ci < 8; ++ci) {
      const double w = p.branch_1.kernel.data()[co * 8 + ci];
      p.branch_3.kernel.data()[(co * 8 + ci) * 9 + 4] = w;
      p.branch_5.kernel.data()[(co * 8 + ci) * 25 + 12] = w;
    }
  p.branch_3.bias.vec() = p.branch_1.bias.vec();
  p.branch_5.bias.vec() = p.branch_1.bias.vec();
  p.branch_3.gn_gamma.vec() = p.branch_1.gn_gamma.vec();
  p.branch_5.gn_gamma.vec() = p.branch_1.gn_gamma.vec();
  p.branch_3.gn_beta.vec() = p.branch_1.gn_beta.vec();
  p.branch_5.gn_beta.vec() = p.branch_1.gn_beta.vec();

  D x_in = random_map({1, 1, 8, 8}, rng, 0.0, 1.0);
  D pre = p.pre.forward(x_in);
  D b1 = p.branch_1.forward(pre);
  D b3 = p.branch_3.forward(pre);
  D b5 = p.branch_5.forward(pre);
  for (int64_t i = 0; i < b1.numel(); ++i) {
    CHECK(std::abs(b3.data()[i] - b1.data()[i]) < 1e-10);
    CHECK(std::abs(b5.data()[i] - b1.data()[i]) < 1e-10);
  }
}

TEST_CASE("conv blocks enforce GroupNorm 8 channels per group") {
  Rng rng(8);
  CHECK_THROWS_AS(ConvBlockParams<double>::init(4, 12, 3, rng), ArgumentError);
  auto ok = ConvBlockParams<double>::init(4, 16, 3, rng);
  CHECK(ok.groups() == 2);
}

TEST_CASE("mff full-stage gradient check") {
  Rng rng(9);
  auto p = MffParams<double>::init(1, 8, true, rng);
  normal_fill(p.ca.w2, 0.0, 0.2, rng);
  D x_in = random_map({1, 1, 6, 6}, rng, 0.0, 1.0);
  D x_down = random_map({1, 8, 6, 6}, rng);
  x_down.set_requires_grad(true);
  std::vector<ParamRef<double>> refs;
  p.collect(refs, "mff");
  std::vector<D> tensors{x_down};
  for (auto& r : refs) tensors.push_back(r.tensor);
  auto f = [&] { return ops::mean_all(ops::sigmoid(mff_forward(x_in, x_down, p))); };
  GradCheckOptions opts;
  opts.max_elems_per_param = 30;
  CHECK(grad_check<double>(f, tensors, opts) < 1e-4);
}

TEST_CASE("crd zero parameters give zero output") {
  Rng rng(10);
  auto p = CrdParams<double>::init(8, rng);
  for (auto* block : {&p.refine, &p.conv_a, &p.conv_b}) {
    fill(block->kernel, 0.0);
    fill(block->bias, 0.0);
    fill(block->gn_beta, 0.0);
  }
  D up = random_map({1, 8, 6, 6}, rng);
  D skip = random_map({1, 8, 6, 6}, rng);
  D y = crd_stage(up, skip, p);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("crd shape contract and parameter count") {
  Rng rng(11);
  auto p = CrdParams<double>::init(64, rng);
  D up = random_map({2, 64, 28, 28}, rng);
  D skip = random_map({2, 64, 28, 28}, rng);
  CHECK(crd_stage(up, skip, p).shape() == Shape{2, 64, 28, 28});

  D bad = random_map({2, 64, 14, 14}, rng);
  CHECK_THROWS_AS(crd_stage(up, bad, p), DimensionError);

  std::vector<ParamRef<double>> refs;
  p.collect(refs, "crd");
  int64_t actual = 0;
  for (auto& r : refs) actual += r.tensor.numel();
  const int64_t expected = conv_block_params(128, 64, 1) + 2 * conv_block_params(64, 64, 3);
  CHECK(actual == expected);
  CHECK(actual == 82496);
}

TEST_CASE("crd gradient check") {
  Rng rng(12);
  auto p = CrdParams<double>::init(8, rng);
  D up = random_map({1, 8, 4, 4}, rng);
  D skip = random_map({1, 8, 4, 4}, rng);
  up.set_requires_grad(true);
  skip.set_requires_grad(true);
  std::vector<ParamRef<double>> refs;
  p.collect(refs, "crd");
  std::vector<D> tensors{up, skip};
  for (auto& r : refs) tensors.push_back(r.tensor);
  auto f = [&] { return ops::mean_all(ops::sigmoid(crd_stage(up, skip, p))); };
  GradCheckOptions opts;
  opts.max_elems_per_param = 30;
  CHECK(grad_check<double>(f, tensors, opts) < 1e-4);
}

TEST_CASE("out_conv zero kernel gives 0.5 after sigmoid") {
  Rng rng(13);
  auto p = OutConvParams<double>::init_large(8, rng);
  fill(p.kernel, 0.0);
  D x = random_map({1, 8, 12, 12}, rng);
  D prob = ops::sigmoid(out_conv(x, p));
  for (int64_t i = 0; i < prob.numel(); ++i) CHECK(prob.data()[i] == doctest::Approx(0.5));
}

TEST_CASE("out_conv is a translated copy for one-hot kernel and delta input") {
  auto rngd = Rng(14);
  auto p = OutConvParams<double>::init_large(1, rngd);
  fill(p.kernel, 0.0);
  // one-hot at offset (dy,dx) = (2, -3) from kernel center
  p.kernel.data()[(5 + 2) * 11 + (5 - 3)] = 1.0;
  D x = D::zeros({1, 1, 25, 25});
  x.data()[12 * 25 + 12] = 1.0;
  D y = out_conv(x, p);
  for (int64_t iy = 0; iy < 25; ++iy)
    for (int64_t ix = 0; ix < 25; ++ix) {
      // cross-correlation: output at (i,j) = input(i + ky - 5, j + kx - 5)
      const double expect = (iy == 12 - 2 && ix == 12 + 3) ? 1.0 : 0.0;
      CHECK(y.data()[iy * 25 + ix] == doctest::Approx(expect));
    }
}

TEST_CASE("out_conv receptive field is exactly Chebyshev radius 5") {
  Rng rng(15);
  auto p = OutConvParams<double>::init_large(2, rng);
  D x = random_map({1, 2, 24, 24}, rng);
  D y0 = out_conv(x, p);
  const int cy = 12, cx = 12;

  D x5 = D::from_data(x.shape(), x.vec());
  x5.data()[(cy + 5) * 24 + cx] += 1.0;  // distance 5: inside
  D y5 = out_conv(x5, p);
  CHECK(std::abs(y5.data()[cy * 24 + cx] - y0.data()[cy * 24 + cx]) > 1e-9);

  D x6 = D::from_data(x.shape(), x.vec());
  x6.data()[(cy + 6) * 24 + cx] += 1.0;  // distance 6: outside
  D y6 = out_conv(x6, p);
  CHECK(y6.data()[cy * 24 + cx] == y0.data()[cy * 24 + cx]);
}

TEST_CASE("out_conv linearity and exact parameter count") {
  Rng rng(16);
  auto p = OutConvParams<double>::init_large(64, rng);
  CHECK_FALSE(p.bias.defined());
  CHECK(p.kernel.numel() == 7744);

  D x = random_map({1, 64, 16, 16}, rng);
  D y = random_map({1, 64, 16, 16}, rng);
  const double a = 0.7, b = -1.3;
  D lhs = out_conv(ops::add(ops::affine(x, a, 0.0), ops::affine(y, b, 0.0)), p);
  D rhs = ops::add(ops::affine(out_conv(x, p), a, 0.0), ops::affine(out_conv(y, p), b, 0.0));
  for (int64_t i = 0; i < lhs.numel(); ++i)
    CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) < 1e-10);
}
