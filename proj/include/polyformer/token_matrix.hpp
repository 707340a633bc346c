#pragma once

#include <vector>

namespace polyformer {

/// Column-major stack of the n token vectors fed through the encoder blocks.
/// Token i occupies column i with rows laid out as
///   [feature t_i | one-hot e_i (n rows) | q power slots | constant 1].
struct TokenMatrix {
  int n = 0;
  int q = 0;
  std::vector<double> data;  // column-major, width() rows per token

  TokenMatrix() = default;
  TokenMatrix(int n_, int q_)
      : n(n_), q(q_), data(static_cast<std::size_t>(n_) * (n_ + q_ + 2), 0.0) {}

  int width() const { return n + q + 2; }

  double& at(int row, int col) { return data[static_cast<std::size_t>(col) * width() + row]; }
  double at(int row, int col) const { return data[static_cast<std::size_t>(col) * width() + row]; }
};

}  // namespace polyformer
