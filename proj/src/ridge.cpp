#include "polyformer/ridge.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace polyformer {

namespace {

constexpr int kMaxBasisAttempts = 8;
constexpr double kRankThreshold = 1e-10;
constexpr double kResidualTolerance = 1e-8;

std::vector<double> random_unit_vector(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(d);
  for (;;) {
    double norm_sq = 0.0;
    for (double& c : v) {
      c = gauss(rng);
      norm_sq += c * c;
    }
    if (norm_sq > 1e-24) {
      double inv = 1.0 / std::sqrt(norm_sq);
      for (double& c : v) c *= inv;
      return v;
    }
  }
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

// Scales every row to unit norm. A positive diagonal row scaling keeps both
// the rank and the solution set of a consistent system unchanged, but evens
// out the spread the multinomial weights put across monomial rows.
void equilibrate_rows(Eigen::MatrixXd& a, Eigen::VectorXd* rhs) {
  for (int i = 0; i < a.rows(); ++i) {
    double norm = a.row(i).norm();
    if (norm > 0.0) {
      a.row(i) /= norm;
      if (rhs) (*rhs)(i) /= norm;
    }
  }
}

bool block_has_full_row_rank(const RidgeBasis& basis, int s) {
  Eigen::MatrixXd a = to_eigen(homogeneous_block(basis, s));
  equilibrate_rows(a, nullptr);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  qr.setThreshold(kRankThreshold);
  qr.compute(a);
  return qr.rank() == a.rows();
}

}  // namespace

double RidgeCoefficients::beta_at(int k, int s) const {
  return beta.at(static_cast<std::size_t>(s - 1) * directions + k);
}

double& RidgeCoefficients::beta_at(int k, int s) {
  return beta.at(static_cast<std::size_t>(s - 1) * directions + k);
}

RidgeBasis make_basis(int d, int q, std::vector<std::vector<double>> xi) {
  if (d < 1 || q < 1) throw std::invalid_argument("make_basis: need d >= 1, q >= 1");
  std::int64_t expected = dim_homogeneous(d, q);
  if (static_cast<std::int64_t>(xi.size()) != expected)
    throw std::invalid_argument("make_basis: expected " + std::to_string(expected) + " directions");
  for (const auto& v : xi) {
    if (static_cast<int>(v.size()) != d) throw std::invalid_argument("make_basis: direction length mismatch");
    double norm_sq = 0.0;
    for (double c : v) norm_sq += c * c;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-12)
      throw std::invalid_argument("make_basis: directions must have unit norm");
  }
  return RidgeBasis{d, q, 0, std::move(xi)};
}

RidgeBasis generate_basis(int d, int q, std::uint64_t seed) {
  if (d < 1 || q < 1) throw std::invalid_argument("generate_basis: need d >= 1, q >= 1");
  std::int64_t count = dim_homogeneous(d, q);
  for (int attempt = 0; attempt < kMaxBasisAttempts; ++attempt) {
    std::uint64_t attempt_seed = seed + static_cast<std::uint64_t>(attempt);
    std::mt19937_64 rng(attempt_seed);
    RidgeBasis basis;
    basis.dim = d;
    basis.degree = q;
    basis.seed = attempt_seed;
    basis.xi.reserve(count);
    for (std::int64_t k = 0; k < count; ++k) basis.xi.push_back(random_unit_vector(d, rng));
    if (spans_polynomial_space(basis)) return basis;
  }
  throw std::runtime_error("generate_basis: no spanning direction set after " +
                           std::to_string(kMaxBasisAttempts) + " attempts");
}

Matrix homogeneous_block(const RidgeBasis& basis, int s) {
  if (s < 1 || s > basis.degree) throw std::invalid_argument("homogeneous_block: power out of range");
  const int d = basis.dim;
  const int nq = basis.count();
  auto rows = monomials_of_degree(d, s);
  std::vector<double> mult(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    mult[r] = static_cast<double>(multinomial(s, rows[r]));

  Matrix out(static_cast<int>(rows.size()), nq);
  std::vector<double> pow_table(static_cast<std::size_t>(d) * (s + 1));
  for (int k = 0; k < nq; ++k) {
    for (int j = 0; j < d; ++j) {
      pow_table[static_cast<std::size_t>(j) * (s + 1)] = 1.0;
      for (int e = 1; e <= s; ++e)
        pow_table[static_cast<std::size_t>(j) * (s + 1) + e] =
            pow_table[static_cast<std::size_t>(j) * (s + 1) + e - 1] * basis.xi[k][j];
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double entry = mult[r];
      const auto& a = rows[r];
      for (int j = 0; j < d; ++j) {
        int e = a[j];
        if (e != 0) entry *= pow_table[static_cast<std::size_t>(j) * (s + 1) + e];
      }
      out(static_cast<int>(r), k) = entry;
    }
  }
  return out;
}

Matrix expansion_matrix(const RidgeBasis& basis) {
  const int q = basis.degree;
  const int nq = basis.count();
  std::int64_t total_rows = dim_poly_space(basis.dim, q) - 1;
  Matrix out(static_cast<int>(total_rows), nq * q);
  int row_offset = 0;
  for (int s = 1; s <= q; ++s) {
    Matrix block = homogeneous_block(basis, s);
    int col_offset = (s - 1) * nq;
    for (int r = 0; r < block.rows(); ++r)
      for (int k = 0; k < nq; ++k) out(row_offset + r, col_offset + k) = block(r, k);
    row_offset += block.rows();
  }
  return out;
}

std::int64_t expansion_rank(const RidgeBasis& basis) {
  std::int64_t rank = 0;
  for (int s = 1; s <= basis.degree; ++s) {
    Eigen::MatrixXd a = to_eigen(homogeneous_block(basis, s));
    equilibrate_rows(a, nullptr);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    qr.setThreshold(kRankThreshold);
    qr.compute(a);
    rank += qr.rank();
  }
  return rank;
}

bool spans_polynomial_space(const RidgeBasis& basis) {
  for (int s = basis.degree; s >= 1; --s)
    if (!block_has_full_row_rank(basis, s)) return false;
  return true;
}

RidgeCoefficients ridge_decompose(const Polynomial& p, const RidgeBasis& basis) {
  if (p.dim() != basis.dim) throw std::invalid_argument("ridge_decompose: dimension mismatch");
  if (p.degree() > basis.degree) throw std::invalid_argument("ridge_decompose: polynomial degree exceeds basis degree");

  const int q = basis.degree;
  const int nq = basis.count();
  RidgeCoefficients out;
  out.directions = nq;
  out.degree = q;
  out.constant = p.constant_term();
  out.beta.assign(static_cast<std::size_t>(nq) * q, 0.0);

  const double tol = kResidualTolerance * (1.0 + p.max_abs_coefficient());

  for (int s = 1; s <= q; ++s) {
    auto rows = monomials_of_degree(basis.dim, s);
    Eigen::VectorXd rhs(static_cast<int>(rows.size()));
    bool any = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      rhs(static_cast<int>(r)) = p.coefficient(rows[r]);
      any = any || rhs(static_cast<int>(r)) != 0.0;
    }
    if (!any) continue;  // minimum-norm solution of a zero block is zero

    Eigen::MatrixXd a = to_eigen(homogeneous_block(basis, s));
    Eigen::MatrixXd a_eq = a;
    Eigen::VectorXd rhs_eq = rhs;
    equilibrate_rows(a_eq, &rhs_eq);
    Eigen::VectorXd beta_s = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a_eq).solve(rhs_eq);

    double residual = (a * beta_s - rhs).cwiseAbs().maxCoeff();
    if (!(residual < tol))
      throw std::runtime_error("ridge_decompose: residual " + std::to_string(residual) +
                               " exceeds tolerance at power " + std::to_string(s) +
                               "; the direction set does not span");
    for (int k = 0; k < nq; ++k) out.beta_at(k, s) = beta_s(k);
  }
  return out;
}

Polynomial reconstruct(const RidgeCoefficients& c, const RidgeBasis& basis) {
  if (c.directions != basis.count() || c.degree != basis.degree)
    throw std::invalid_argument("reconstruct: shape mismatch with basis");
  Polynomial p(basis.dim, basis.degree);
  if (c.constant != 0.0) p.add_term(MultiIndex(std::vector<int>(basis.dim, 0)), c.constant);
  for (int s = 1; s <= basis.degree; ++s) {
    auto rows = monomials_of_degree(basis.dim, s);
    for (int k = 0; k < c.directions; ++k) {
      double b = c.beta_at(k, s);
      if (b == 0.0) continue;
      for (const auto& a : rows) {
        double coef = b * static_cast<double>(multinomial(s, a));
        for (int j = 0; j < basis.dim; ++j)
          if (a[j] != 0) coef *= int_pow(basis.xi[k][j], a[j]);
        p.add_term(a, coef);
      }
    }
  }
  return p;
}

}  // namespace polyformer
