#include "polyformer/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "polyformer/parallel.hpp"

namespace polyformer {

namespace {

void check_spec(const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw std::invalid_argument("MlpSpec: need at least input and output widths");
  for (int w : spec.widths)
    if (w < 1) throw std::invalid_argument("MlpSpec: widths must be positive");
  if (spec.widths.back() != 1) throw std::invalid_argument("MlpSpec: output width must be 1");
}

// Per-sample workspace: pre-activations and activations per layer.
struct MlpScratch {
  std::vector<std::vector<double>> pre;   // z_l
  std::vector<std::vector<double>> act;   // a_l = relu(z_l), identity on the last
  std::vector<std::vector<double>> delta;

  void resize(const MlpSpec& spec) {
    std::size_t layers = spec.widths.size() - 1;
    pre.resize(layers);
    act.resize(layers);
    delta.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      pre[l].assign(spec.widths[l + 1], 0.0);
      act[l].assign(spec.widths[l + 1], 0.0);
      delta[l].assign(spec.widths[l + 1], 0.0);
    }
  }
};

double forward_into(const MlpSpec& spec, const MlpParams& params, std::span<const double> x,
                    MlpScratch& s) {
  const std::size_t layers = params.layers.size();
  std::span<const double> input = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const MlpLayer& layer = params.layers[l];
    for (int r = 0; r < layer.w.rows(); ++r) {
      double acc = layer.b[r];
      for (int c = 0; c < layer.w.cols(); ++c) acc += layer.w(r, c) * input[c];
      s.pre[l][r] = acc;
      s.act[l][r] = (l + 1 == layers) ? acc : (acc > 0.0 ? acc : 0.0);
    }
    input = s.act[l];
  }
  return s.act[layers - 1][0];
}

}  // namespace

MlpSpec nn_width_spec(BenchmarkTarget target) {
  return target == BenchmarkTarget::f1 ? MlpSpec{{2, 10, 1}} : MlpSpec{{10, 4368, 1}};
}

MlpSpec nn_depth_spec(BenchmarkTarget target) {
  return target == BenchmarkTarget::f1 ? MlpSpec{{2, 4, 4, 4, 1}}
                                       : MlpSpec{{10, 120, 120, 120, 120, 120, 120, 1}};
}

std::int64_t param_count(const MlpSpec& spec) {
  check_spec(spec);
  std::int64_t total = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l)
    total += static_cast<std::int64_t>(spec.widths[l]) * spec.widths[l + 1] + spec.widths[l + 1];
  return total;
}

MlpParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MlpParams params;
  params.layers.resize(spec.widths.size() - 1);
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    int fan_in = spec.widths[l];
    int fan_out = spec.widths[l + 1];
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    params.layers[l].w = Matrix(fan_out, fan_in);
    params.layers[l].b.assign(fan_out, 0.0);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) params.layers[l].w(r, c) = gauss(rng) * stddev;
  }
  return params;
}

double mlp_forward(const MlpSpec& spec, const MlpParams& params, std::span<const double> x) {
  check_spec(spec);
  if (static_cast<int>(x.size()) != spec.widths.front())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  MlpScratch s;
  s.resize(spec);
  return forward_into(spec, params, x, s);
}

double mlp_backward(const MlpSpec& spec, const MlpParams& params,
                    const std::vector<std::vector<double>>& xs, std::span<const double> ys,
                    MlpParams& grads, int workers) {
  check_spec(spec);
  if (xs.size() != ys.size()) throw std::invalid_argument("mlp_backward: batch size mismatch");
  if (xs.empty()) throw std::invalid_argument("mlp_backward: empty batch");
  const std::size_t count = xs.size();
  const double inv_count = 1.0 / static_cast<double>(count);
  const std::size_t layers = params.layers.size();

  constexpr std::size_t kChunk = 256;
  const std::size_t nchunks = (count + kChunk - 1) / kChunk;
  std::vector<MlpParams> partial(nchunks);
  std::vector<double> partial_sq(nchunks, 0.0);

  for_each_chunk(count, kChunk, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    MlpParams& g = partial[c];
    g.layers.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      g.layers[l].w = Matrix(params.layers[l].w.rows(), params.layers[l].w.cols());
      g.layers[l].b.assign(params.layers[l].b.size(), 0.0);
    }
    MlpScratch s;
    s.resize(spec);
    double sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& x = xs[i];
      double pred = forward_into(spec, params, x, s);
      double err = pred - ys[i];
      sq += err * err;
      s.delta[layers - 1][0] = 2.0 * err * inv_count;
      for (std::size_t l = layers; l-- > 0;) {
        const MlpLayer& layer = params.layers[l];
        std::span<const double> input = l == 0 ? std::span<const double>(x) : std::span<const double>(s.act[l - 1]);
        for (int r = 0; r < layer.w.rows(); ++r) {
          double dv = s.delta[l][r];
          if (dv == 0.0) continue;
          g.layers[l].b[r] += dv;
          for (int cidx = 0; cidx < layer.w.cols(); ++cidx) g.layers[l].w(r, cidx) += dv * input[cidx];
        }
        if (l > 0) {
          for (int cidx = 0; cidx < layer.w.cols(); ++cidx) {
            double acc = 0.0;
            for (int r = 0; r < layer.w.rows(); ++r) acc += layer.w(r, cidx) * s.delta[l][r];
            s.delta[l - 1][cidx] = s.pre[l - 1][cidx] > 0.0 ? acc : 0.0;
          }
        }
      }
    }
    partial_sq[c] = sq;
  });

  grads.layers.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    grads.layers[l].w = Matrix(params.layers[l].w.rows(), params.layers[l].w.cols());
    grads.layers[l].b.assign(params.layers[l].b.size(), 0.0);
  }
  double total_sq = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) {
    for (std::size_t l = 0; l < layers; ++l) {
      auto& dst_w = grads.layers[l].w.data();
      const auto& src_w = partial[c].layers[l].w.data();
      for (std::size_t k = 0; k < dst_w.size(); ++k) dst_w[k] += src_w[k];
      for (std::size_t k = 0; k < grads.layers[l].b.size(); ++k)
        grads.layers[l].b[k] += partial[c].layers[l].b[k];
    }
    total_sq += partial_sq[c];
  }
  return total_sq * inv_count;
}

double mlp_gradient_norm(const MlpParams& grads) {
  double sq = 0.0;
  for (const auto& layer : grads.layers) {
    for (double v : layer.w.data()) sq += v * v;
    for (double v : layer.b) sq += v * v;
  }
  return std::sqrt(sq);
}

MlpTrainable::MlpTrainable(MlpSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), params_(init_params(spec_, seed)) {}

double MlpTrainable::sgd_step(const std::vector<std::vector<double>>& xs, std::span<const double> ys,
                              double lr, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("MlpTrainable: clip norm must be positive");
  double mse = mlp_backward(spec_, params_, xs, ys, grads_);
  double norm = mlp_gradient_norm(grads_);
  double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    auto& w = params_.layers[l].w.data();
    const auto& gw = grads_.layers[l].w.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * scale * gw[k];
    for (std::size_t k = 0; k < params_.layers[l].b.size(); ++k)
      params_.layers[l].b[k] -= lr * scale * grads_.layers[l].b[k];
  }
  return mse;
}

double MlpTrainable::mean_squared_error(const std::vector<std::vector<double>>& xs,
                                        std::span<const double> ys) const {
  if (xs.size() != ys.size()) throw std::invalid_argument("mean_squared_error: size mismatch");
  if (xs.empty()) return 0.0;
  constexpr std::size_t kChunk = 256;
  const std::size_t nchunks = (xs.size() + kChunk - 1) / kChunk;
  std::vector<double> partial(nchunks, 0.0);
  for_each_chunk(xs.size(), kChunk, 0, [&](std::size_t c, std::size_t begin, std::size_t end) {
    MlpScratch s;
    s.resize(spec_);
    double sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double err = forward_into(spec_, params_, xs[i], s) - ys[i];
      sq += err * err;
    }
    partial[c] = sq;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total / static_cast<double>(xs.size());
}

double MlpTrainable::predict(std::span<const double> x) const {
  MlpScratch s;
  s.resize(spec_);
  return forward_into(spec_, params_, x, s);
}

std::int64_t MlpTrainable::parameter_count() const { return param_count(spec_); }

}  // namespace polyformer
