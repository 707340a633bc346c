#pragma once

#include <cstdint>
#include <vector>

#include "polyformer/matrix.hpp"
#include "polyformer/polynomial.hpp"

namespace polyformer {

/// A spanning set of unit directions for ridge-power expansions: any
/// polynomial of degree <= `degree` on R^dim can be written as
/// constant + sum_{k,s} beta(k,s) (xi_k . x)^s over these directions.
struct RidgeBasis {
  int dim = 0;
  int degree = 0;
  std::uint64_t seed = 0;  // seed the vectors were drawn from (0 for handmade bases)
  std::vector<std::vector<double>> xi;

  int count() const { return static_cast<int>(xi.size()); }
};

/// Coefficients of constant + sum_{k,s} beta(k,s) (xi_k . x)^s with k indexing
/// directions (0-based) and s the literal power, 1..degree.
struct RidgeCoefficients {
  int directions = 0;
  int degree = 0;
  double constant = 0.0;
  std::vector<double> beta;  // laid out power-major: index (s-1)*directions + k

  double beta_at(int k, int s) const;
  double& beta_at(int k, int s);
};

// Wraps caller-supplied directions; validates the count (must be n_q) and that
// every vector has unit Euclidean norm within 1e-12.
RidgeBasis make_basis(int d, int q, std::vector<std::vector<double>> xi);

// Draws n_q = C(d-1+q, q) directions uniformly from the unit sphere and keeps
// the first draw whose expansion matrix passes the spanning rank certificate.
// Retries with incremented seeds a bounded number of times before failing.
RidgeBasis generate_basis(int d, int q, std::uint64_t seed);

// Rows: monomials of degree exactly s in graded-lex order. Columns: the n_q
// directions. Entry (a, k) = multinomial(s, a) * prod_j xi_{k,j}^{a_j}, i.e.
// the coefficient of x^a in (xi_k . x)^s.
Matrix homogeneous_block(const RidgeBasis& basis, int s);

// Full expansion matrix: one row per non-constant monomial of degree <=
// basis.degree (graded-lex order), one column per (k, s) pair, columns grouped
// power-major to match RidgeCoefficients. Entries vanish off the matching
// degree, so the matrix is block diagonal over degrees.
Matrix expansion_matrix(const RidgeBasis& basis);

// Certified rank of the expansion matrix (rank-revealing QR per degree block,
// relative pivot threshold 1e-10).
std::int64_t expansion_rank(const RidgeBasis& basis);
bool spans_polynomial_space(const RidgeBasis& basis);

// Minimum-norm least-squares solve of expansion_matrix * beta = coefficients
// of (p - p(0)). Throws when the reconstruction residual exceeds
// 1e-8 * (1 + max |coefficient of p|), which indicates a bad basis.
RidgeCoefficients ridge_decompose(const Polynomial& p, const RidgeBasis& basis);

// Expands the ridge form back into monomial coefficients.
Polynomial reconstruct(const RidgeCoefficients& c, const RidgeBasis& basis);

}  // namespace polyformer
