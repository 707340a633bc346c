#pragma once

#include <cstdint>
#include <vector>

#include "polyformer/encoder_block.hpp"
#include "polyformer/matrix.hpp"

namespace polyformer {

/// One trainable readout weight over the concatenated token stack.
/// `slot` is the 1-based row inside the token vector; compiled and trainable
/// models only place weights on the power slots n+2 .. n+q+1.
struct ReadoutEntry {
  int token = 0;
  int slot = 0;
  double weight = 0.0;
};

/// Sparse readout kept sorted by (token, slot) so iteration order is fixed.
struct SparseReadout {
  std::vector<ReadoutEntry> entries;

  void sort_entries();
  double at(int token, int slot) const;  // 0 when absent
};

/// Complete model: trainable embedding F (rows are the directions), the q
/// fixed encoder blocks, the sparse readout and its bias. `input_bound` is
/// the radius the separation constants were sized for.
struct TransformerModel {
  int d = 0;
  int q = 0;
  int n = 0;
  Matrix embed;  // n x d
  std::vector<EncoderBlockSpec> blocks;
  SparseReadout readout;
  double bias = 0.0;
  double input_bound = 0.0;
};

// Trainable parameter count: the n*d embedding entries, the readout support,
// and the bias. Readout support is counted structurally (every installed
// slot), matching what training updates.
std::int64_t count_free_params(const TransformerModel& m);
// Free parameters plus the 2n+8 fixed non-zeros of each block.
std::int64_t count_nonzeros(const TransformerModel& m);

std::int64_t free_param_bound(int d, int q);  // d^{q+1} + q d^q + 1
std::int64_t nonzero_bound(int d, int q);     // d^{q+1} + 3q d^q + 8q + 1

}  // namespace polyformer
