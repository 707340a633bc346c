#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace polyformer {

/// Exponent vector of one monomial. Multi-indices are ordered
/// graded-lexicographically: lower total degree first, ties broken by
/// lexicographic comparison of the exponent vectors. This fixed ordering is
/// what gives the ridge expansion matrix a stable row layout.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exponents);

  int degree() const { return degree_; }
  int dims() const { return static_cast<int>(exponents_.size()); }
  const std::vector<int>& exponents() const { return exponents_; }
  int operator[](int j) const { return exponents_[j]; }

 private:
  std::vector<int> exponents_;
  int degree_ = 0;
};

bool operator<(const MultiIndex& a, const MultiIndex& b);
bool operator==(const MultiIndex& a, const MultiIndex& b);

/// Sparse multivariate polynomial over R^d with a declared degree bound.
/// Zero coefficients are never stored. Immutable use after construction is
/// thread-safe.
class Polynomial {
 public:
  Polynomial(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  const std::map<MultiIndex, double>& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }

  // Replaces the coefficient of `mi`; a zero coefficient removes the term.
  void set_term(const MultiIndex& mi, double coef);
  // Adds `coef` to the coefficient of `mi`; exact-zero results are removed.
  void add_term(const MultiIndex& mi, double coef);

  double coefficient(const MultiIndex& mi) const;  // 0 when absent
  double constant_term() const;
  double max_abs_coefficient() const;

  double eval(std::span<const double> x) const;

 private:
  void check_index(const MultiIndex& mi) const;

  int dim_ = 1;
  int degree_ = 0;
  std::map<MultiIndex, double> terms_;
};

// Dimension of the space of polynomials of degree <= q on R^d: C(d+q, q).
std::int64_t dim_poly_space(int d, int q);
// Dimension of the space of homogeneous degree-s polynomials on R^d:
// C(d-1+s, s). Also the token/direction count n_q when s = q.
std::int64_t dim_homogeneous(int d, int s);

// Overflow-checked binomial coefficient; throws std::overflow_error when the
// result would not fit in 64 bits.
std::int64_t binomial(std::int64_t n, std::int64_t k);
// s! / prod_j a_j! for |a| = s.
std::int64_t multinomial(int s, const MultiIndex& a);

// All multi-indices of total degree exactly s (resp. 1..q) in d variables,
// in graded-lex order.
std::vector<MultiIndex> monomials_of_degree(int d, int s);
std::vector<MultiIndex> nonconstant_monomials(int d, int q);

double int_pow(double x, int e);

// The two built-in regression targets used by the experiments and the CLI.
Polynomial target_f1();  // x1^2 + x2^2, d=2, degree 2
Polynomial target_f2();  // x1^5 + 3 x2^4 + 2 x3^3 + 5 x3 x4 + 3 x5^2 + 2 x6 x7 x8 + 2 x9, d=10, degree 5

}  // namespace polyformer
