#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "polyformer/matrix.hpp"
#include "polyformer/training.hpp"

namespace polyformer {

/// Fully-connected rectifier network: consecutive linear layers with ReLU
/// between all but the last.
struct MlpSpec {
  std::vector<int> widths;  // first = input dim, last = 1
};

enum class BenchmarkTarget { f1, f2 };

// Shallow-wide comparison net: one hidden layer with n_q units.
MlpSpec nn_width_spec(BenchmarkTarget target);
// Deep-narrow comparison net matching the block count of the attention model.
MlpSpec nn_depth_spec(BenchmarkTarget target);

std::int64_t param_count(const MlpSpec& spec);

struct MlpLayer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
};

struct MlpParams {
  std::vector<MlpLayer> layers;
};

// Gaussian weights with variance 2 / fan_in, zero biases.
MlpParams init_params(const MlpSpec& spec, std::uint64_t seed);

double mlp_forward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x);

// Batch MSE and its gradients (same shapes as the parameters); per-sample
// contributions reduced in fixed chunk order for determinism.
double mlp_backward(const MlpSpec& spec, const MlpParams& params,
                    const std::vector<std::vector<double>>& xs, std::span<const double> ys,
                    MlpParams& grads, int workers = 0);

double mlp_gradient_norm(const MlpParams& grads);

class MlpTrainable : public SgdTrainable {
 public:
  MlpTrainable(MlpSpec spec, std::uint64_t seed);

  double sgd_step(const std::vector<std::vector<double>>& xs, std::span<const double> ys, double lr,
                  double clip_norm) override;
  double mean_squared_error(const std::vector<std::vector<double>>& xs,
                            std::span<const double> ys) const override;
  double predict(std::span<const double> x) const override;
  std::int64_t parameter_count() const override;

  const MlpSpec& spec() const { return spec_; }
  const MlpParams& params() const { return params_; }

 private:
  MlpSpec spec_;
  MlpParams params_;
  MlpParams grads_;
};

}  // namespace polyformer
