#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "polyformer/model.hpp"
#include "polyformer/token_matrix.hpp"

namespace polyformer {

// Token stack for input x: column i = [<F_i, x>; e_i; q zeros; 1].
TokenMatrix embed_tokens(const Matrix& f, std::span<const double> x, int q);

// First index attaining the maximum (lowest index wins on ties).
int argmax_first(std::span<const double> v);

// One-hot maximum: keeps the largest value at its first position, zeroes the
// rest.
std::vector<double> hardmax(std::span<const double> v);

// Reference forward pass through the dense materialized blocks.
double forward(const TransformerModel& m, std::span<const double> x);

struct ForwardTrace {
  std::vector<TokenMatrix> states;           // post-embed, then after each block
  std::vector<std::vector<int>> selections;  // per block, per token
  double output = 0.0;
};
ForwardTrace forward_trace(const TransformerModel& m, std::span<const double> x);

// Structure-exploiting forward pass. Never forms the n x n score matrix:
// per block the scores are a_i * b_j + C_s [i == j], so the off-diagonal
// argmax follows from the top-2 max and min of b over j. Selections and
// outputs agree with the reference path.
double forward_fast(const TransformerModel& m, std::span<const double> x);

struct FastForwardResult {
  double output = 0.0;
  std::vector<std::vector<int>> selections;  // per block, per token
  std::vector<double> features;              // t_i = <F_i, x>
  std::vector<double> powers;                // token-major: [token * q + (s-1)]
};
FastForwardResult forward_fast_trace(const TransformerModel& m, std::span<const double> x);

/// Gradients of the trainable parameters; `d_readout` is index-aligned with
/// the model's readout entries.
struct GradientSet {
  Matrix d_embed;
  std::vector<double> d_readout;
  double d_bias = 0.0;
};

// Mean squared error over the batch and its gradients with respect to F, the
// readout and the bias. The hardmax selection is frozen: gradient flows
// through the selected score only. Per-sample contributions are reduced in a
// fixed chunk order, so results are bit-identical for any worker count.
// workers = 0 uses the POLYFORMER_THREADS / hardware default.
double backward(const TransformerModel& m, const std::vector<std::vector<double>>& xs,
                std::span<const double> ys, GradientSet& out, int workers = 0);

}  // namespace polyformer
