#include "polyformer/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "polyformer/compiler.hpp"
#include "polyformer/parallel.hpp"

namespace polyformer {

Dataset generate_data(const Polynomial& target, int count, std::span<const double> covariance_diagonal,
                      std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_data: count must be positive");
  if (static_cast<int>(covariance_diagonal.size()) != target.dim())
    throw std::invalid_argument("generate_data: covariance length must match target dimension");
  std::vector<double> scale(covariance_diagonal.size());
  for (std::size_t j = 0; j < scale.size(); ++j) {
    if (!(covariance_diagonal[j] > 0.0))
      throw std::invalid_argument("generate_data: covariance diagonal must be positive");
    scale[j] = std::sqrt(covariance_diagonal[j]);
  }

  Dataset ds;
  ds.dim = target.dim();
  ds.seed = seed;
  ds.inputs.reserve(count);
  ds.noisy_labels.reserve(count);
  ds.clean_labels.reserve(count);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(ds.dim);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < ds.dim; ++j) x[j] = gauss(rng) * scale[j];
    double clean = target.eval(x);
    double noisy = clean + gauss(rng);
    ds.inputs.push_back(x);
    ds.clean_labels.push_back(clean);
    ds.noisy_labels.push_back(noisy);
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, int train_count, std::uint64_t seed) {
  if (train_count < 1 || static_cast<std::size_t>(train_count) >= ds.size())
    throw std::invalid_argument("split: train_count must be in [1, size)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Dataset train, test;
  train.dim = test.dim = ds.dim;
  train.seed = test.seed = seed;
  for (std::size_t r = 0; r < order.size(); ++r) {
    Dataset& dst = r < static_cast<std::size_t>(train_count) ? train : test;
    std::size_t i = order[r];
    dst.inputs.push_back(ds.inputs[i]);
    dst.noisy_labels.push_back(ds.noisy_labels[i]);
    dst.clean_labels.push_back(ds.clean_labels[i]);
  }
  return {std::move(train), std::move(test)};
}

std::int64_t warmup_steps(std::int64_t total_steps, double warmup_fraction) {
  if (total_steps <= 1) return 0;
  std::int64_t w = static_cast<std::int64_t>(std::llround(warmup_fraction * static_cast<double>(total_steps - 1)));
  return std::clamp<std::int64_t>(w, 1, total_steps - 1);
}

double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double lr_init, double lr_max,
                    double warmup_fraction) {
  if (step < 0 || step >= total_steps) throw std::invalid_argument("one_cycle_lr: step out of range");
  if (total_steps == 1) return lr_init;
  std::int64_t w = warmup_steps(total_steps, warmup_fraction);
  if (step <= w)
    return lr_init + (lr_max - lr_init) * static_cast<double>(step) / static_cast<double>(w);
  std::int64_t tail = total_steps - 1 - w;
  if (tail <= 0) return lr_max;
  return lr_max - (lr_max - lr_init) * static_cast<double>(step - w) / static_cast<double>(tail);
}

double gradient_norm(const GradientSet& g) {
  double sq = 0.0;
  for (double v : g.d_embed.data()) sq += v * v;
  for (double v : g.d_readout) sq += v * v;
  sq += g.d_bias * g.d_bias;
  return std::sqrt(sq);
}

GradientSet clip_gradients(GradientSet g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_gradients: clip_norm must be positive");
  double norm = gradient_norm(g);
  if (norm > clip_norm) {
    double scale = clip_norm / norm;
    for (double& v : g.d_embed.data()) v *= scale;
    for (double& v : g.d_readout) v *= scale;
    g.d_bias *= scale;
  }
  return g;
}

int convergence_epoch(const RunHistory& history, double tol) {
  for (std::size_t i = 1; i < history.epochs.size(); ++i)
    if (std::abs(history.epochs[i].train_mse_noisy - history.epochs[i - 1].train_mse_noisy) < tol)
      return history.epochs[i].epoch;
  return -1;
}

RunHistory train(SgdTrainable& model, const Dataset& train_data, const Dataset& test_data,
                 const TrainConfig& cfg) {
  const std::size_t n = train_data.size();
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be positive");
  if (cfg.batch_size < 1 || static_cast<std::size_t>(cfg.batch_size) > n)
    throw std::invalid_argument("train: batch size must be in [1, train size]");
  if (!(cfg.lr_init > 0.0) || cfg.lr_init > cfg.lr_max)
    throw std::invalid_argument("train: need 0 < lr_init <= lr_max");
  if (!(cfg.warmup_fraction > 0.0 && cfg.warmup_fraction < 1.0))
    throw std::invalid_argument("train: warmup fraction must lie in (0, 1)");
  if (!(cfg.clip_norm > 0.0)) throw std::invalid_argument("train: clip norm must be positive");

  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + cfg.batch_size - 1) / cfg.batch_size);
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::vector<double>> batch_x;
  std::vector<double> batch_y;
  batch_x.reserve(cfg.batch_size);
  batch_y.reserve(cfg.batch_size);

  RunHistory history;
  history.epochs.reserve(cfg.epochs);
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);

    double weighted_mse = 0.0;
    double lr = cfg.lr_init;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::size_t end = std::min(n, start + cfg.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t r = start; r < end; ++r) {
        batch_x.push_back(train_data.inputs[order[r]]);
        batch_y.push_back(train_data.noisy_labels[order[r]]);
      }
      lr = one_cycle_lr(step, total_steps, cfg.lr_init, cfg.lr_max, cfg.warmup_fraction);
      double mse = model.sgd_step(batch_x, batch_y, lr, cfg.clip_norm);
      weighted_mse += mse * static_cast<double>(end - start);
      ++step;
    }
    double train_mse = weighted_mse / static_cast<double>(n);
    if (!std::isfinite(train_mse))
      throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                               " (train mse is not finite); lower the learning rate or clip norm");
    double test_mse = model.mean_squared_error(test_data.inputs, test_data.clean_labels);
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back({epoch, train_mse, test_mse, lr, seconds});
  }
  return history;
}

AttentionTrainable::AttentionTrainable(TransformerModel model) : model_(std::move(model)) {}

AttentionTrainable AttentionTrainable::initialize(int d, int q, int n, double input_bound_est,
                                                  std::uint64_t seed) {
  if (d < 1 || q < 1 || n < 1) throw std::invalid_argument("AttentionTrainable: bad dimensions");
  TransformerModel m;
  m.d = d;
  m.q = q;
  m.n = n;
  m.input_bound = input_bound_est;
  m.embed = Matrix(n, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int j = 0; j < d; ++j) {
        m.embed(i, j) = gauss(rng);
        norm_sq += m.embed(i, j) * m.embed(i, j);
      }
    } while (norm_sq < 1e-24);
    double inv = 1.0 / std::sqrt(norm_sq);
    for (int j = 0; j < d; ++j) m.embed(i, j) *= inv;
  }
  m.blocks.reserve(q);
  for (int s = 1; s <= q; ++s) m.blocks.push_back(build_block(n, q, s, separation_constant(input_bound_est, s)));
  m.readout.entries.reserve(static_cast<std::size_t>(n) * q);
  for (int k = 0; k < n; ++k)
    for (int s = 1; s <= q; ++s) m.readout.entries.push_back({k, n + s + 1, 0.0});
  m.readout.sort_entries();
  m.bias = 0.0;
  return AttentionTrainable(std::move(m));
}

double AttentionTrainable::sgd_step(const std::vector<std::vector<double>>& xs,
                                    std::span<const double> ys, double lr, double clip_norm) {
  double mse = backward(model_, xs, ys, grads_);
  grads_ = clip_gradients(std::move(grads_), clip_norm);
  for (std::size_t k = 0; k < model_.embed.data().size(); ++k)
    model_.embed.data()[k] -= lr * grads_.d_embed.data()[k];
  for (std::size_t e = 0; e < model_.readout.entries.size(); ++e)
    model_.readout.entries[e].weight -= lr * grads_.d_readout[e];
  model_.bias -= lr * grads_.d_bias;
  return mse;
}

double AttentionTrainable::mean_squared_error(const std::vector<std::vector<double>>& xs,
                                              std::span<const double> ys) const {
  if (xs.size() != ys.size()) throw std::invalid_argument("mean_squared_error: size mismatch");
  if (xs.empty()) return 0.0;
  constexpr std::size_t kChunk = 256;
  const std::size_t nchunks = (xs.size() + kChunk - 1) / kChunk;
  std::vector<double> partial(nchunks, 0.0);
  for_each_chunk(xs.size(), kChunk, 0, [&](std::size_t c, std::size_t begin, std::size_t end) {
    double sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double err = forward_fast(model_, xs[i]) - ys[i];
      sq += err * err;
    }
    partial[c] = sq;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total / static_cast<double>(xs.size());
}

double AttentionTrainable::predict(std::span<const double> x) const { return forward_fast(model_, x); }

std::int64_t AttentionTrainable::parameter_count() const { return count_free_params(model_); }

}  // namespace polyformer
