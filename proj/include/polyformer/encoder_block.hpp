#pragma once

#include <vector>

#include "polyformer/matrix.hpp"
#include "polyformer/token_matrix.hpp"

namespace polyformer {

/// Structured description of one fixed encoder block. The block multiplies,
/// for every token simultaneously, the value at `a_slot` (query side) by the
/// value at `b_slot` (key side) and writes the negated product into
/// `write_slot`, leaving all other entries unchanged. Slots are 1-based row
/// numbers inside a token vector. `sep_const` is the additive diagonal boost
/// on the attention scores that forces each token to attend to itself as long
/// as it dominates the cross products.
struct EncoderBlockSpec {
  int n = 0;      // token count
  int q = 0;      // power-slot count
  int stage = 0;  // position in the cascade, 1..q
  int a_slot = 0;
  int b_slot = 0;
  int write_slot = 0;
  double sep_const = 0.0;

  int width() const { return n + q + 2; }
};

// Block for stage s of the power cascade: always reads the feature slot 1 as
// the first factor; the second factor is the trailing constant 1 for s = 1
// and the previous stage's output slot n+s for s >= 2. Writes into n+s+1.
EncoderBlockSpec build_block(int n, int q, int stage, double sep_const);

/// Dense materialization of a block spec.
struct DenseBlock {
  Matrix wq;               // (n+1) x (n+q+2)
  Matrix wk;               // (n+1) x (n+q+2)
  Matrix wv;               // (n+q+2) x (n+q+2)
  Matrix w1;               // 2 x (n+q+2)
  Matrix w2;               // (n+q+2) x 2
  std::vector<double> b1;  // 2
  std::vector<double> b2;  // n+q+2

  int nonzero_count() const;
};

DenseBlock materialize(const EncoderBlockSpec& spec);

// Applies the block through the materialized dense matrices: attention with
// the one-hot maximum, residual, then the two-layer rectifier feed-forward
// with residual. Optionally records the selected key index per token.
TokenMatrix block_apply_reference(const EncoderBlockSpec& spec, const TokenMatrix& z,
                                  std::vector<int>* selections = nullptr);

}  // namespace polyformer
