#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "polyformer/network.hpp"
#include "polyformer/polynomial.hpp"

namespace polyformer {

/// Synthetic regression draws: inputs, clean targets f*(x) and noisy labels
/// f*(x) + eps with standard normal eps.
struct Dataset {
  int dim = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<double> noisy_labels;
  std::vector<double> clean_labels;

  std::size_t size() const { return inputs.size(); }
};

Dataset generate_data(const Polynomial& target, int count, std::span<const double> covariance_diagonal,
                      std::uint64_t seed);

// Seeded permutation split into (train, test); disjoint and exhaustive.
std::pair<Dataset, Dataset> split(const Dataset& ds, int train_count, std::uint64_t seed);

struct TrainConfig {
  int epochs = 0;
  int batch_size = 0;
  double lr_init = 1e-4;
  double lr_max = 1e-3;
  double clip_norm = 1.0;
  double warmup_fraction = 0.3;
  std::uint64_t seed = 0;
};

// Number of ramp steps the one-cycle schedule uses.
std::int64_t warmup_steps(std::int64_t total_steps, double warmup_fraction);

// Linear ramp lr_init -> lr_max over the warmup, then linear anneal back to
// lr_init at the final step.
double one_cycle_lr(std::int64_t step, std::int64_t total_steps, double lr_init, double lr_max,
                    double warmup_fraction);

double gradient_norm(const GradientSet& g);

// Scales the whole gradient set down to `clip_norm` when its global L2 norm
// exceeds it; otherwise returns it unchanged.
GradientSet clip_gradients(GradientSet g, double clip_norm);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_mse_noisy = 0.0;
  double test_mse_clean = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
};

// First epoch whose train MSE moved less than `tol` from the previous epoch;
// -1 when the run never settles.
int convergence_epoch(const RunHistory& history, double tol = 0.01);

/// Anything the SGD harness can drive: one clipped SGD step on a batch and
/// evaluation against given labels.
class SgdTrainable {
 public:
  virtual ~SgdTrainable() = default;
  // Performs backward + clip + parameter update; returns the batch MSE
  // measured before the update.
  virtual double sgd_step(const std::vector<std::vector<double>>& xs, std::span<const double> ys,
                          double lr, double clip_norm) = 0;
  virtual double mean_squared_error(const std::vector<std::vector<double>>& xs,
                                    std::span<const double> ys) const = 0;
  virtual double predict(std::span<const double> x) const = 0;
  virtual std::int64_t parameter_count() const = 0;
};

// Epoch loop: seeded shuffle, one-cycle schedule, clipped SGD steps. Records
// the noisy-label train MSE (batch-weighted, measured before each update) and
// the clean-label test MSE per epoch. Aborts with a diagnostic when the train
// MSE stops being finite.
RunHistory train(SgdTrainable& model, const Dataset& train_data, const Dataset& test_data,
                 const TrainConfig& cfg);

/// SGD adapter for the attention model: trains the embedding, readout and
/// bias; the encoder blocks stay fixed.
class AttentionTrainable : public SgdTrainable {
 public:
  explicit AttentionTrainable(TransformerModel model);

  // Fresh trainable model: embedding rows drawn uniformly from the unit
  // sphere, readout support on every (token, power) slot with zero weights,
  // zero bias; block constants sized for `input_bound_est`.
  static AttentionTrainable initialize(int d, int q, int n, double input_bound_est,
                                       std::uint64_t seed);

  double sgd_step(const std::vector<std::vector<double>>& xs, std::span<const double> ys, double lr,
                  double clip_norm) override;
  double mean_squared_error(const std::vector<std::vector<double>>& xs,
                            std::span<const double> ys) const override;
  double predict(std::span<const double> x) const override;
  std::int64_t parameter_count() const override;

  const TransformerModel& model() const { return model_; }

 private:
  TransformerModel model_;
  GradientSet grads_;
};

}  // namespace polyformer
