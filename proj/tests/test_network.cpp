#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/gradcheck.hpp"
#include "core/init.hpp"
#include "core/ops.hpp"
#include "loss/loss.hpp"
#include "net/checkpoint.hpp"
#include "net/network.hpp"

using namespace lsen;
using D = Tensor<double>;
using F = Tensor<float>;

namespace {

// Closed-form parameter counting, independent of the model's own tensors.
int64_t cb(int64_t cin, int64_t cout, int64_t k) { return cout * cin * k * k + 3 * cout; }

int64_t symbolic_count(const LsenetConfig& c) {
  const int64_t ch = c.channels, p2 = static_cast<int64_t>(c.patch_size) * c.patch_size;
  int64_t total = 0;
  for (int l = 0; l < c.layers; ++l) {
    if (c.enable_mff) {
      const int64_t c3 = 3 * ch, hidden = std::max<int64_t>(c3 / 16, 1);
      total += cb(c.in_channels, ch, 3) + cb(ch, ch, 1) + cb(ch, ch, 3) + cb(ch, ch, 5);
      total += c3 * hidden + hidden + hidden * c3 + c3;
      total += cb(l > 0 ? 4 * ch : 3 * ch, ch, 1) + cb(ch, ch, 3);
    } else {
      total += cb(l == 0 ? c.in_channels : ch, ch, 3) + cb(ch, ch, 3);
    }
    if (c.enable_pie) {
      total += 2 * (ch * ch * 25 + ch);  // q, k
      total += ch * ch + ch;             // v
      total += p2 * p2;                  // position table
      total += 3 * (ch * ch + ch);       // inter q/k/v
    }
  }
  for (int l = 0; l < c.layers - 1; ++l)
    total += c.enable_crd ? cb(2 * ch, ch, 1) + 2 * cb(ch, ch, 3) : cb(2 * ch, ch, 3) + cb(ch, ch, 3);
  total += c.enable_crd ? ch * 121 : ch + 1;
  return total;
}

}  // namespace

TEST_CASE("config validation") {
  LsenetConfig c;
  c.layers = 1;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = LsenetConfig{};
  c.channels = 12;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = LsenetConfig{};
  c.patch_size = 1;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  CHECK_NOTHROW(LsenetConfig{}.validate());
}

TEST_CASE("default build matches the symbolic parameter count and the reported budget") {
  LsenetConfig cfg;  // L=4, C=64, P=15
  auto model = build<float>(cfg);
  const int64_t total = model.param_count();
  CHECK(total == symbolic_count(cfg));
  CHECK(total == 2152500);
  // within 10% of the published 2.08M total
  CHECK(std::abs(static_cast<double>(total) - 2.08e6) / 2.08e6 < 0.10);
}

TEST_CASE("per-module breakdown matches closed-form sums") {
  LsenetConfig cfg;
  auto model = build<float>(cfg);
  for (const auto& row : param_breakdown(model)) {
    if (row.name == "mff0")
      CHECK(row.params == cb(1, 64, 3) + cb(64, 64, 1) + cb(64, 64, 3) + cb(64, 64, 5) +
                              (192 * 12 + 12) + (12 * 192 + 192) + cb(192, 64, 1) + cb(64, 64, 3));
    if (row.name == "mff1") CHECK(row.params == 203148);
    if (row.name == "pie2") CHECK(row.params == 2 * (64 * 64 * 25 + 64) + (64 * 64 + 64) +
                                                    50625 + 3 * (64 * 64 + 64));
    if (row.name == "crd1") CHECK(row.params == 82496);
    if (row.name == "out") CHECK(row.params == 7744);
  }
}

TEST_CASE("ablated builds match their symbolic counts") {
  for (int mask = 0; mask < 8; ++mask) {
    LsenetConfig cfg;
    cfg.enable_mff = mask & 1;
    cfg.enable_pie = mask & 2;
    cfg.enable_crd = mask & 4;
    auto model = build<float>(cfg);
    CHECK(model.param_count() == symbolic_count(cfg));
  }
  LsenetConfig baseline;
  baseline.enable_mff = baseline.enable_pie = baseline.enable_crd = false;
  CHECK(build<float>(baseline).param_count() == 593153);
}

TEST_CASE("same seed builds bitwise-identical parameters") {
  LsenetConfig cfg;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.patch_size = 2;
  cfg.seed = 1234;
  auto a = build<float>(cfg);
  auto b = build<float>(cfg);
  auto pa = a.parameters();
  auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].tensor.vec() == pb[i].tensor.vec());
  }
}

TEST_CASE("forward shape contract and determinism") {
  LsenetConfig cfg;
  cfg.layers = 3;
  cfg.channels = 8;
  cfg.patch_size = 3;
  cfg.seed = 9;
  auto model = build<float>(cfg);
  Rng rng(5);
  F x = F::zeros({1, 1, 24, 20});
  uniform_fill(x, 0.0, 1.0, rng);
  F y1 = forward(model, x);
  CHECK(y1.shape() == Shape{1, 1, 24, 20});
  F y2 = forward(model, x);
  CHECK(y1.vec() == y2.vec());

  F bad = F::zeros({1, 1, 22, 20});
  CHECK_THROWS_WITH_AS(forward(model, bad), doctest::Contains("divisible by 4"), ArgumentError);

  // padded inference accepts any size and crops back
  F odd = F::zeros({1, 1, 21, 18});
  uniform_fill(odd, 0.0, 1.0, rng);
  CHECK(forward_padded(model, odd).shape() == Shape{1, 1, 21, 18});
}

TEST_CASE("ablation switches change values but not shapes") {
  Rng rng(6);
  F x = F::zeros({1, 1, 16, 16});
  uniform_fill(x, 0.0, 1.0, rng);
  for (int mask = 0; mask < 8; ++mask) {
    LsenetConfig cfg;
    cfg.layers = 2;
    cfg.channels = 8;
    cfg.patch_size = 2;
    cfg.enable_mff = mask & 1;
    cfg.enable_pie = mask & 2;
    cfg.enable_crd = mask & 4;
    auto model = build<float>(cfg);
    CHECK(forward(model, x).shape() == Shape{1, 1, 16, 16});
  }
}

TEST_CASE("loss gradient reaches every parameter") {
  LsenetConfig cfg;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.patch_size = 2;
  cfg.seed = 77;
  auto model = build<double>(cfg);
  Rng rng(7);
  D x = D::zeros({1, 1, 16, 16});
  uniform_fill(x, 0.0, 1.0, rng);
  D y = D::zeros({1, 1, 16, 16});
  for (auto& v : y.vec()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;

  Tape<double> tape;
  D loss = combined_loss(ops::sigmoid(forward(model, x)), y);
  tape.backward(loss);
  for (const auto& p : model.parameters()) {
    double norm = 0;
    REQUIRE(p.tensor.grad() != nullptr);
    for (int64_t i = 0; i < p.tensor.numel(); ++i)
      norm += p.tensor.grad()[i] * p.tensor.grad()[i];
    INFO(p.name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("end-to-end gradient check on the reduced double-precision build") {
  LsenetConfig cfg;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.patch_size = 2;
  cfg.seed = 4242;
  auto model = build<double>(cfg);
  Rng rng(8);
  D x = D::zeros({1, 1, 16, 16});
  uniform_fill(x, 0.0, 1.0, rng);
  D y = D::zeros({1, 1, 16, 16});
  for (auto& v : y.vec()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;

  std::vector<D> tensors;
  for (const auto& p : model.parameters()) tensors.push_back(p.tensor);
  auto f = [&] { return combined_loss(ops::sigmoid(forward(model, x)), y); };
  GradCheckOptions opts;
  opts.max_elems_per_param = 12;
  opts.eps = 1e-7;  // deep graphs: keep the probe interval inside kink-free neighborhoods
  CHECK(grad_check<double>(f, tensors, opts) < 1e-4);
}

TEST_CASE("flop accounting: out_conv share, scaling law, convention") {
  LsenetConfig cfg;
  const FlopCount fc = count_flops(cfg, 224, 224);
  // out_conv alone: 64*121 MACs per pixel
  const int64_t out_macs = 64LL * 121 * 224 * 224;
  CHECK(fc.conv_macs > out_macs);
  const FlopCount fc2 = count_flops(cfg, 448, 448);
  CHECK(fc2.conv_macs == 4 * fc.conv_macs);  // conv-only quadratic scaling
  CHECK(fc.flops() == 2 * (fc.conv_macs + fc.matmul_macs) + fc.elementwise);
  CHECK_THROWS_AS(count_flops(cfg, 225, 224), ArgumentError);
}

TEST_CASE("checkpoint round trip is byte-exact and value-exact") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "lsen_ckpt_test").string();
  fs::create_directories(dir);
  LsenetConfig cfg;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.patch_size = 2;
  cfg.seed = 99;
  auto model = build<float>(cfg);
  const std::string p1 = dir + "/a.ckpt", p2 = dir + "/b.ckpt";
  save_checkpoint(p1, model, {}, {{"note", "x"}});

  auto model2 = build<float>(cfg);
  for (auto& v : model2.parameters()[0].tensor.vec()) v = -7.f;  // poison, then reload
  auto state = load_checkpoint(p1, model2);
  CHECK(state.at("note") == "x");
  auto pa = model.parameters();
  auto pb = model2.parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].tensor.vec() == pb[i].tensor.vec());

  save_checkpoint(p2, model2, {}, state);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);

  // config mismatch names the divergent field
  LsenetConfig other = cfg;
  other.patch_size = 4;
  auto model3 = build<float>(other);
  CHECK_THROWS_WITH_AS(load_checkpoint(p1, model3), doctest::Contains("patch_size"),
                       ArgumentError);
  CHECK(read_checkpoint_config(p1).channels == 8);
  fs::remove_all(dir);
}

TEST_CASE("forward heatmaps come out one per layer at layer resolution") {
  LsenetConfig cfg;
  cfg.layers = 2;
  cfg.channels = 8;
  cfg.patch_size = 2;
  auto model = build<float>(cfg);
  Rng rng(10);
  F x = F::zeros({1, 1, 8, 8});
  uniform_fill(x, 0.0, 1.0, rng);
  std::vector<F> heatmaps;
  forward(model, x, &heatmaps);
  REQUIRE(heatmaps.size() == 2);
  CHECK(heatmaps[0].shape() == Shape{1, 1, 8, 8});
  CHECK(heatmaps[1].shape() == Shape{1, 1, 4, 4});
}
