#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "polyformer/training.hpp"
#include "test_util.hpp"

using namespace polyformer;

namespace {

Dataset tiny_f1_data(int count, std::uint64_t seed) {
  std::vector<double> cov{100.0, 100.0};
  return generate_data(target_f1(), count, cov, seed);
}

GradientSet gradient_with_norm(double norm) {
  GradientSet g;
  g.d_embed = Matrix(2, 2);
  g.d_embed(0, 0) = norm;  // the only non-zero entry
  g.d_readout.assign(3, 0.0);
  g.d_bias = 0.0;
  return g;
}

}  // namespace

TEST_CASE("data generation basics") {
  Dataset ds = tiny_f1_data(10000, 7);
  CHECK(ds.size() == 10000);
  CHECK(ds.dim == 2);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(std::isfinite(ds.noisy_labels[i]));
    CHECK(ds.clean_labels[i] == doctest::Approx(target_f1().eval(ds.inputs[i])));
  }
  // realized noise is the label difference
  double mean_noise = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) mean_noise += ds.noisy_labels[i] - ds.clean_labels[i];
  mean_noise /= static_cast<double>(ds.size());
  CHECK(std::abs(mean_noise) < 0.05);
}

TEST_CASE("data generation rejects non-positive covariance") {
  std::vector<double> zero_cov{0.0, 1.0};
  CHECK_THROWS_AS(generate_data(target_f1(), 10, zero_cov, 1), std::invalid_argument);
  std::vector<double> neg_cov{1.0, -1.0};
  CHECK_THROWS_AS(generate_data(target_f1(), 10, neg_cov, 1), std::invalid_argument);
  std::vector<double> short_cov{1.0};
  CHECK_THROWS_AS(generate_data(target_f1(), 10, short_cov, 1), std::invalid_argument);
}

TEST_CASE("sample mean is near zero at scale") {
  Polynomial line(1, 1);
  line.set_term(MultiIndex({1}), 1.0);
  std::vector<double> cov{1.0};
  Dataset ds = generate_data(line, 100000, cov, 99);
  double mean = 0.0;
  for (const auto& x : ds.inputs) mean += x[0];
  mean /= static_cast<double>(ds.size());
  CHECK(std::abs(mean) < 0.02);  // 3 sigma / sqrt(N) is below this
}

TEST_CASE("split sizes follow the benchmark configs") {
  Dataset ds = tiny_f1_data(10000, 3);
  auto [train, test] = split(ds, 9000, 4);
  CHECK(train.size() == 9000);
  CHECK(test.size() == 1000);

  Dataset big = generate_data(target_f2(), 50000, std::vector<double>(10, 1.0), 5);
  auto [train2, test2] = split(big, 45000, 6);
  CHECK(train2.size() == 45000);
  CHECK(test2.size() == 5000);
}

TEST_CASE("split is disjoint and exhaustive") {
  Dataset ds = tiny_f1_data(500, 11);
  auto [train, test] = split(ds, 350, 12);
  std::multiset<double> combined;
  for (double y : train.noisy_labels) combined.insert(y);
  for (double y : test.noisy_labels) combined.insert(y);
  std::multiset<double> original(ds.noisy_labels.begin(), ds.noisy_labels.end());
  CHECK(combined == original);
  CHECK_THROWS_AS(split(ds, 500, 1), std::invalid_argument);
}

TEST_CASE("one-cycle schedule endpoints") {
  const std::int64_t total = 1200;
  CHECK(one_cycle_lr(0, total, 1e-4, 1e-3, 0.3) == doctest::Approx(1e-4));
  std::int64_t w = warmup_steps(total, 0.3);
  CHECK(one_cycle_lr(w, total, 1e-4, 1e-3, 0.3) == doctest::Approx(1e-3));
  CHECK(one_cycle_lr(total - 1, total, 1e-4, 1e-3, 0.3) == doctest::Approx(1e-4));
  CHECK_THROWS_AS(one_cycle_lr(total, total, 1e-4, 1e-3, 0.3), std::invalid_argument);
}

TEST_CASE("one-cycle schedule stays inside its band") {
  const std::int64_t total = 1200;
  for (std::int64_t step = 0; step < total; ++step) {
    double lr = one_cycle_lr(step, total, 1e-4, 1e-3, 0.3);
    CHECK(lr >= 1e-4 - 1e-15);
    CHECK(lr <= 1e-3 + 1e-15);
  }
  // the f1 configuration: ceil(9000/5000) = 2 steps per epoch, 600 epochs
  CHECK((9000 + 5000 - 1) / 5000 * 600 == 1200);
}

TEST_CASE("gradient clipping") {
  GradientSet big = clip_gradients(gradient_with_norm(10.0), 5.0);
  CHECK(gradient_norm(big) == doctest::Approx(5.0).epsilon(1e-12));
  GradientSet small = clip_gradients(gradient_with_norm(1.0), 5.0);
  CHECK(gradient_norm(small) == doctest::Approx(1.0));
  CHECK(small.d_embed(0, 0) == 1.0);  // untouched below the threshold
  GradientSet zero = clip_gradients(gradient_with_norm(0.0), 5.0);
  CHECK(gradient_norm(zero) == 0.0);
}

TEST_CASE("clipped norms never exceed the threshold") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> gauss(0.0, 4.0);
  std::uniform_real_distribution<double> clip_pick(0.1, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    GradientSet g;
    g.d_embed = Matrix(3, 2);
    for (double& v : g.d_embed.data()) v = gauss(rng);
    g.d_readout.assign(5, 0.0);
    for (double& v : g.d_readout) v = gauss(rng);
    g.d_bias = gauss(rng);
    double clip = clip_pick(rng);
    CHECK(gradient_norm(clip_gradients(std::move(g), clip)) <= clip + 1e-9);
  }
}

TEST_CASE("training runs and records one entry per epoch") {
  Dataset ds = tiny_f1_data(300, 21);
  auto [train_ds, test_ds] = split(ds, 250, 22);
  AttentionTrainable model = AttentionTrainable::initialize(2, 2, 3, 42.4, 23);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 100;
  cfg.clip_norm = 10.0;
  cfg.seed = 24;
  RunHistory history = train(model, train_ds, test_ds, cfg);
  REQUIRE(history.epochs.size() == 5);
  for (int e = 0; e < 5; ++e) {
    CHECK(history.epochs[e].epoch == e + 1);
    CHECK(std::isfinite(history.epochs[e].train_mse_noisy));
    CHECK(std::isfinite(history.epochs[e].test_mse_clean));
    CHECK(history.epochs[e].lr >= cfg.lr_init);
    CHECK(history.epochs[e].lr <= cfg.lr_max);
  }
}

TEST_CASE("identical seeds reproduce the run") {
  Dataset ds = tiny_f1_data(300, 31);
  auto [train_ds, test_ds] = split(ds, 250, 32);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 64;
  cfg.clip_norm = 5.0;
  cfg.seed = 33;

  AttentionTrainable a = AttentionTrainable::initialize(2, 2, 3, 42.4, 34);
  AttentionTrainable b = AttentionTrainable::initialize(2, 2, 3, 42.4, 34);
  RunHistory ha = train(a, train_ds, test_ds, cfg);
  RunHistory hb = train(b, train_ds, test_ds, cfg);
  REQUIRE(ha.epochs.size() == hb.epochs.size());
  for (std::size_t e = 0; e < ha.epochs.size(); ++e) {
    // wall time necessarily differs; every deterministic field must not
    CHECK(ha.epochs[e].epoch == hb.epochs[e].epoch);
    CHECK(ha.epochs[e].train_mse_noisy == hb.epochs[e].train_mse_noisy);
    CHECK(ha.epochs[e].test_mse_clean == hb.epochs[e].test_mse_clean);
    CHECK(ha.epochs[e].lr == hb.epochs[e].lr);
  }
}

TEST_CASE("divergence aborts with a diagnostic") {
  Dataset ds = tiny_f1_data(200, 41);
  auto [train_ds, test_ds] = split(ds, 150, 42);
  AttentionTrainable model = AttentionTrainable::initialize(2, 2, 3, 42.4, 43);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 50;
  cfg.lr_init = 4e4;  // wildly unstable on features of this magnitude
  cfg.lr_max = 5e4;
  cfg.clip_norm = 1e300;  // effectively unclipped
  cfg.seed = 44;
  CHECK_THROWS_AS(train(model, train_ds, test_ds, cfg), std::runtime_error);
}

TEST_CASE("train validates its configuration") {
  Dataset ds = tiny_f1_data(100, 51);
  auto [train_ds, test_ds] = split(ds, 80, 52);
  AttentionTrainable model = AttentionTrainable::initialize(2, 2, 3, 42.4, 53);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 81;  // larger than the training set
  CHECK_THROWS_AS(train(model, train_ds, test_ds, cfg), std::invalid_argument);
  cfg.batch_size = 10;
  cfg.lr_init = 2e-3;  // above lr_max
  CHECK_THROWS_AS(train(model, train_ds, test_ds, cfg), std::invalid_argument);
}

TEST_CASE("convergence epoch uses consecutive train MSE differences") {
  RunHistory h;
  h.epochs = {{1, 10.0, 0, 0, 0}, {2, 5.0, 0, 0, 0}, {3, 4.995, 0, 0, 0}, {4, 4.9, 0, 0, 0}};
  CHECK(convergence_epoch(h) == 3);
  RunHistory never;
  never.epochs = {{1, 10.0, 0, 0, 0}, {2, 5.0, 0, 0, 0}};
  CHECK(convergence_epoch(never) == -1);
}
