#include "doctest.h"

#include <cmath>
#include <random>

#include "polyformer/mlp.hpp"

using namespace polyformer;

namespace {

double mlp_batch_loss(const MlpSpec& spec, const MlpParams& params,
                      const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
  double sq = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double err = mlp_forward(spec, params, xs[i]) - ys[i];
    sq += err * err;
  }
  return sq / static_cast<double>(xs.size());
}

// Pre-activation sign pattern; finite differences and linearity probes must
// stay inside one cell of it.
std::vector<int> activation_pattern(const MlpSpec& spec, const MlpParams& params,
                                    std::span<const double> x) {
  std::vector<int> pattern;
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    const MlpLayer& layer = params.layers[l];
    std::vector<double> next(layer.w.rows());
    for (int r = 0; r < layer.w.rows(); ++r) {
      double acc = layer.b[r];
      for (int c = 0; c < layer.w.cols(); ++c) acc += layer.w(r, c) * act[c];
      pattern.push_back(acc > 0.0 ? 1 : 0);
      next[r] = acc > 0.0 ? acc : 0.0;
    }
    act = std::move(next);
  }
  return pattern;
}

}  // namespace

TEST_CASE("baseline architectures") {
  CHECK(nn_width_spec(BenchmarkTarget::f1).widths == std::vector<int>{2, 10, 1});
  CHECK(nn_width_spec(BenchmarkTarget::f2).widths == std::vector<int>{10, 4368, 1});
  CHECK(nn_depth_spec(BenchmarkTarget::f1).widths == std::vector<int>{2, 4, 4, 4, 1});
  MlpSpec depth2 = nn_depth_spec(BenchmarkTarget::f2);
  CHECK(depth2.widths == std::vector<int>{10, 120, 120, 120, 120, 120, 120, 1});
  CHECK(depth2.widths.size() - 2 == 6);  // six rectified layers
}

TEST_CASE("parameter counts") {
  CHECK(param_count(nn_width_spec(BenchmarkTarget::f1)) == 41);
  CHECK(param_count(nn_depth_spec(BenchmarkTarget::f1)) == 57);
  CHECK(param_count(nn_width_spec(BenchmarkTarget::f2)) == 52417);
  // 10*120+120 + 5*(120*120+120) + 120*1+1
  CHECK(param_count(nn_depth_spec(BenchmarkTarget::f2)) == 1320 + 5 * 14520 + 121);
}

TEST_CASE("forward with zero weights returns the final bias") {
  MlpSpec spec{{2, 4, 1}};
  MlpParams params = init_params(spec, 1);
  for (auto& layer : params.layers)
    for (double& v : layer.w.data()) v = 0.0;
  params.layers.back().b[0] = 3.5;
  std::vector<double> x{11.0, -7.0};
  CHECK(mlp_forward(spec, params, x) == 3.5);
}

TEST_CASE("single linear layer") {
  MlpSpec spec{{2, 1}};
  MlpParams params = init_params(spec, 2);
  params.layers[0].w(0, 0) = 1.0;
  params.layers[0].w(0, 1) = 1.0;
  params.layers[0].b[0] = 0.0;
  std::vector<double> x{3.0, 4.0};
  CHECK(mlp_forward(spec, params, x) == doctest::Approx(7.0));
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const MlpSpec& spec : {MlpSpec{{2, 4, 1}}, nn_width_spec(BenchmarkTarget::f1),
                              nn_depth_spec(BenchmarkTarget::f1)}) {
    MlpParams params = init_params(spec, 7);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> x(spec.widths.front());
      for (double& v : x) v = gauss(rng);
      xs.push_back(x);
      ys.push_back(gauss(rng));
    }
    MlpParams grads;
    mlp_backward(spec, params, xs, ys, grads, 1);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto probe = [&](double* p, double analytic) {
        double saved = *p;
        *p = saved + h;
        double up = mlp_batch_loss(spec, params, xs, ys);
        *p = saved - h;
        double down = mlp_batch_loss(spec, params, xs, ys);
        *p = saved;
        double fd = (up - down) / (2.0 * h);
        max_rel = std::max(max_rel, std::abs(analytic - fd) / (1.0 + std::abs(fd)));
      };
      for (std::size_t k = 0; k < params.layers[l].w.data().size(); ++k)
        probe(&params.layers[l].w.data()[k], grads.layers[l].w.data()[k]);
      for (std::size_t k = 0; k < params.layers[l].b.size(); ++k)
        probe(&params.layers[l].b[k], grads.layers[l].b[k]);
    }
    CHECK(max_rel < 1e-5);
  }
}

TEST_CASE("network output is piecewise linear along segments") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MlpSpec spec = nn_depth_spec(BenchmarkTarget::f1);
  MlpParams params = init_params(spec, 15);
  int verified = 0;
  for (int attempt = 0; attempt < 200 && verified < 20; ++attempt) {
    std::vector<double> x0(2), dir(2);
    for (double& v : x0) v = gauss(rng);
    for (double& v : dir) v = gauss(rng);
    const double h = 0.05;
    std::vector<double> lo{x0[0] - h * dir[0], x0[1] - h * dir[1]};
    std::vector<double> hi{x0[0] + h * dir[0], x0[1] + h * dir[1]};
    auto base_pattern = activation_pattern(spec, params, x0);
    if (activation_pattern(spec, params, lo) != base_pattern ||
        activation_pattern(spec, params, hi) != base_pattern)
      continue;  // straddles a rectifier boundary; resample
    double second_diff = mlp_forward(spec, params, hi) - 2.0 * mlp_forward(spec, params, x0) +
                         mlp_forward(spec, params, lo);
    CHECK(std::abs(second_diff) < 1e-9);
    ++verified;
  }
  CHECK(verified == 20);
}

TEST_CASE("trainable wrapper clips and updates") {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MlpTrainable model(MlpSpec{{2, 4, 1}}, 45);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 32; ++i) {
    std::vector<double> x{gauss(rng), gauss(rng)};
    xs.push_back(x);
    ys.push_back(x[0] + 2.0 * x[1]);
  }
  double before = model.mean_squared_error(xs, ys);
  for (int step = 0; step < 300; ++step) model.sgd_step(xs, ys, 0.01, 1.0);
  CHECK(model.mean_squared_error(xs, ys) < before);
  CHECK(model.parameter_count() == 17);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(param_count(MlpSpec{{2}}), std::invalid_argument);
  CHECK_THROWS_AS(param_count(MlpSpec{{2, 3, 2}}), std::invalid_argument);
  MlpSpec spec{{2, 3, 1}};
  MlpParams params = init_params(spec, 3);
  std::vector<double> bad(3, 0.0);
  CHECK_THROWS_AS(mlp_forward(spec, params, bad), std::invalid_argument);
}
