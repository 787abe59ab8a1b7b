#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "jamfield/mlp.hpp"

using namespace jamfield;

namespace {

MlpParams random_net(std::uint64_t seed, std::vector<std::size_t> layers = {2, 200, 100, 1}) {
  const std::vector<double> lo{0.0, 0.0}, hi{1000.0, 1000.0};
  return init_mlp(std::move(layers), InputScaling::from_box(lo, hi), seed);
}

// Relative error of the reverse-mode gradient against central differences,
// over a random subset of coordinates plus every output-layer entry.
double gradient_error(MlpParams p, const Position& x, std::mt19937_64& rng) {
  const auto g = mlp_gradient(p, x, 1.0);
  std::vector<std::size_t> idx;
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  for (int i = 0; i < 300; ++i) idx.push_back(pick(rng));
  for (std::size_t i = p.weight_offset(p.n_layers() - 1); i < p.size(); ++i) idx.push_back(i);
  const double h = 1e-5;
  double num = 0.0, den = 0.0;
  for (std::size_t i : idx) {
    double& v = p.values()[i];
    const double orig = v;
    v = orig + h;
    const double fp = mlp_forward(p, x);
    v = orig - h;
    const double fm = mlp_forward(p, x);
    v = orig;
    const double fd = (fp - fm) / (2 * h);
    num += (fd - g[i]) * (fd - g[i]);
    den += g[i] * g[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("parameter count") {
  const std::vector<std::size_t> layers{2, 200, 100, 1};
  CHECK(MlpParams::parameter_count(layers) == 2 * 200 + 200 + 200 * 100 + 100 + 100 * 1 + 1);
  CHECK(MlpParams::parameter_count(layers) == 20801);
  CHECK(default_layer_sizes(2) == layers);
  CHECK(random_net(1).size() == 20801);
}

TEST_CASE("zero parameters give zero output") {
  MlpParams p({2, 200, 100, 1}, InputScaling::identity(2));
  for (double x : {-3.0, 0.0, 7.5}) CHECK(mlp_forward(p, {x, -x}) == 0.0);
}

TEST_CASE("output bias alone gives a constant") {
  MlpParams p({2, 8, 4, 1}, InputScaling::identity(2));
  p.values()[p.bias_offset(2)] = 3.25;
  CHECK(mlp_forward(p, {0.0, 0.0}) == 3.25);
  CHECK(mlp_forward(p, {100.0, -50.0}) == 3.25);
}

TEST_CASE("saturated first layer keeps the output bounded") {
  auto p = random_net(2, {2, 16, 8, 1});
  const std::size_t w0 = p.weight_offset(0);
  for (std::size_t i = w0; i < w0 + 2 * 16; ++i) p.values()[i] *= 1e6;
  // With hidden activations in [-1, 1] the output is bounded by the
  // absolute output weights plus the output bias.
  double bound = std::abs(p.values()[p.bias_offset(2)]);
  for (std::size_t j = 0; j < 8; ++j) bound += std::abs(p.values()[p.weight_offset(2) + j]);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int i = 0; i < 100; ++i) {
    const double v = mlp_forward(p, {u(rng), u(rng)});
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) <= bound + 1e-12);
  }
}

TEST_CASE("reverse-mode gradient matches central differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto p = random_net(100 + draw);
    worst = std::max(worst, gradient_error(p, {u(rng), u(rng)}, rng));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("gradient edge cases") {
  const auto p = random_net(4);
  const Position x{250.0, 700.0};
  const auto zero = mlp_gradient(p, x, 0.0);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));
  const auto g = mlp_gradient(p, x, 2.5);
  CHECK(g[p.bias_offset(2)] == 2.5);
  const auto g1 = mlp_gradient(p, x, 1.0);
  for (std::size_t i = 0; i < g.size(); i += 997) CHECK(g[i] == doctest::Approx(2.5 * g1[i]));
}

TEST_CASE("batch evaluation agrees with the per-sample path") {
  const auto p = random_net(5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> inputs(15, std::vector<double>(2));
  for (auto& in : inputs) in = {u(rng), u(rng)};
  MlpBatch batch(p, inputs);
  const auto out = batch.forward(p);
  std::vector<double> upstream(15);
  for (auto& v : upstream) v = u(rng);
  std::vector<double> gb(p.size(), 0.0);
  batch.backward(p, upstream, gb);

  MlpWorkspace ws(p);
  std::vector<double> gs(p.size(), 0.0);
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    CHECK(out[n] == doctest::Approx(ws.forward(p, std::span<const double>(inputs[n]))).epsilon(1e-13));
    ws.backward(p, upstream[n], gs);
  }
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    err += (gb[i] - gs[i]) * (gb[i] - gs[i]);
    ref += gs[i] * gs[i];
  }
  CHECK(std::sqrt(err / ref) < 1e-12);
}

TEST_CASE("Lipschitz bound holds on sampled pairs") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int n = 0; n < 5; ++n) {
    const auto p = random_net(200 + n);
    const double L = mlp_lipschitz_bound(p);
    CHECK(L > 0.0);
    for (int i = 0; i < 200; ++i) {
      const Position a{u(rng), u(rng)};
      const Position b{u(rng), u(rng)};
      CHECK(std::abs(mlp_forward(p, a) - mlp_forward(p, b)) <= L * distance(a, b) * (1 + 1e-12));
    }
  }
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  const auto a = random_net(9);
  const auto b = random_net(9);
  const auto c = random_net(10);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  const auto& layers = a.layer_sizes();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const double lim = 1.0 / std::sqrt(static_cast<double>(layers[l]));
    const std::size_t end = a.bias_offset(l) + layers[l + 1];
    for (std::size_t i = a.weight_offset(l); i < end; ++i) CHECK(std::abs(a.values()[i]) <= lim);
  }
}

TEST_CASE("text serialization round-trips exactly") {
  const auto p = random_net(11);
  std::stringstream ss;
  write_mlp(ss, p);
  const std::string text = ss.str();
  CHECK(text.rfind("jamfield-mlp 1\nlayers 4 2 200 100 1\n", 0) == 0);
  const auto q = read_mlp(ss);
  CHECK(q.layer_sizes() == p.layer_sizes());
  CHECK(q.scaling().center == p.scaling().center);
  CHECK(q.scaling().half_width == p.scaling().half_width);
  CHECK(std::equal(p.values().begin(), p.values().end(), q.values().begin(), q.values().end()));
  CHECK(mlp_forward(q, {123.0, 456.0}) == mlp_forward(p, {123.0, 456.0}));
}

TEST_CASE("malformed serialized networks are rejected") {
  std::istringstream bad_magic("not-an-mlp 1\n");
  CHECK_THROWS(read_mlp(bad_magic));
  std::istringstream bad_version("jamfield-mlp 9\n");
  CHECK_THROWS(read_mlp(bad_version));
  std::istringstream bad_count("jamfield-mlp 1\nlayers 3 2 3 1\nscaling 2 0 0 1 1\nparams 5\n1\n2\n3\n4\n5\n");
  CHECK_THROWS(read_mlp(bad_count));
  std::istringstream truncated("jamfield-mlp 1\nlayers 3 1 1 1\nscaling 1 0 1\nparams 4\n1\n2\n");
  CHECK_THROWS(read_mlp(truncated));
}

TEST_CASE("Adam first step moves each coordinate by lr against the gradient sign") {
  AdamState st(4, 0.4);
  std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> g{5.0, -0.01, 1e3, -7.0};
  adam_step(st, x, g);
  CHECK(x[0] == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(-1.6).epsilon(1e-5));
  CHECK(x[2] == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(x[3] == doctest::Approx(3.4).epsilon(1e-6));
  CHECK(st.step_count == 1);
}

TEST_CASE("Adam matches a hand-rolled reference and leaves zero-gradient params alone") {
  AdamState st(2, 0.1);
  std::vector<double> x{0.3, -0.7};
  double m = 0, v = 0, ref = 0.3;
  for (int t = 1; t <= 25; ++t) {
    const double g0 = 2.0 * x[0] - 1.0;
    adam_step(st, x, std::vector<double>{g0, 0.0});
    m = 0.9 * m + 0.1 * (2.0 * ref - 1.0);
    v = 0.999 * v + 0.001 * (2.0 * ref - 1.0) * (2.0 * ref - 1.0);
    ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(x[0] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(x[1] == -0.7);
  }
  std::vector<double> y(3);
  CHECK_THROWS(adam_step(st, y, std::vector<double>(2)));
}

TEST_CASE("identical Adam runs give identical trajectories") {
  auto run = [] {
    AdamState st(3, 0.05);
    std::vector<double> x{1.0, 2.0, 3.0};
    for (int t = 0; t < 50; ++t) {
      std::vector<double> g{std::sin(x[0]), x[1] * x[2], -x[0]};
      adam_step(st, x, g);
    }
    return x;
  };
  CHECK(run() == run());
}
