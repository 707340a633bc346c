#pragma once

#include <cstdint>

#include "polyformer/model.hpp"
#include "polyformer/polynomial.hpp"

namespace polyformer {

// Separation constant for cascade stage s under input bound B:
// 2 * max(1, B)^{2s}. Dominates every attention cross product
// |a_i b_j| <= max(1, B)^s inside the ball for any B > 0.
double separation_constant(double input_bound, int stage);

// Builds a model whose output equals p everywhere on the ball ||x|| <= B:
// draws a spanning direction set from `seed`, installs it as the embedding,
// stacks one fixed block per degree, and loads the ridge coefficients into
// the readout. Block s leaves (-1)^s (xi_k . x)^s in slot n+s+1 of token k,
// so readout weights carry the sign (-1)^s. The readout support covers every
// (direction, power) pair; the decomposition decides the values.
TransformerModel compile_exact(const Polynomial& p, double input_bound, std::uint64_t seed);

}  // namespace polyformer
