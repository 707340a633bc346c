#include "polyformer/polynomial.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace polyformer {

MultiIndex::MultiIndex(std::vector<int> exponents) : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    if (e < 0) throw std::invalid_argument("MultiIndex: negative exponent");
    degree_ += e;
  }
}

bool operator<(const MultiIndex& a, const MultiIndex& b) {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  return a.exponents() < b.exponents();
}

bool operator==(const MultiIndex& a, const MultiIndex& b) {
  return a.exponents() == b.exponents();
}

Polynomial::Polynomial(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim < 1) throw std::invalid_argument("Polynomial: dim must be >= 1");
  if (degree < 0) throw std::invalid_argument("Polynomial: degree must be >= 0");
}

void Polynomial::check_index(const MultiIndex& mi) const {
  if (mi.dims() != dim_) throw std::invalid_argument("Polynomial: multi-index dimension mismatch");
  if (mi.degree() > degree_) throw std::invalid_argument("Polynomial: term degree exceeds declared degree");
}

void Polynomial::set_term(const MultiIndex& mi, double coef) {
  check_index(mi);
  if (coef == 0.0) {
    terms_.erase(mi);
  } else {
    terms_[mi] = coef;
  }
}

void Polynomial::add_term(const MultiIndex& mi, double coef) {
  check_index(mi);
  auto it = terms_.find(mi);
  if (it == terms_.end()) {
    if (coef != 0.0) terms_.emplace(mi, coef);
    return;
  }
  it->second += coef;
  if (it->second == 0.0) terms_.erase(it);
}

double Polynomial::coefficient(const MultiIndex& mi) const {
  auto it = terms_.find(mi);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::constant_term() const {
  return coefficient(MultiIndex(std::vector<int>(dim_, 0)));
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [mi, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Polynomial::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw std::invalid_argument("Polynomial::eval: input dimension mismatch");
  double acc = 0.0;
  for (const auto& [mi, c] : terms_) {
    double term = c;
    for (int j = 0; j < dim_; ++j) {
      int e = mi[j];
      if (e != 0) term *= int_pow(x[j], e);
    }
    acc += term;
  }
  return acc;
}

double int_pow(double x, int e) {
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= x;
    x *= x;
    e >>= 1;
  }
  return r;
}

std::int64_t binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::int64_t r = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    std::int64_t factor = n - k + i;
    if (r > std::numeric_limits<std::int64_t>::max() / factor)
      throw std::overflow_error("binomial: result exceeds 64-bit range");
    r = r * factor / i;  // divisible: r*factor is a product of i consecutive integers over (i-1)!
  }
  return r;
}

std::int64_t dim_poly_space(int d, int q) {
  if (d < 1 || q < 0) throw std::invalid_argument("dim_poly_space: need d >= 1, q >= 0");
  return binomial(static_cast<std::int64_t>(d) + q, q);
}

std::int64_t dim_homogeneous(int d, int s) {
  if (d < 1 || s < 0) throw std::invalid_argument("dim_homogeneous: need d >= 1, s >= 0");
  return binomial(static_cast<std::int64_t>(d) - 1 + s, s);
}

std::int64_t multinomial(int s, const MultiIndex& a) {
  if (a.degree() != s) throw std::invalid_argument("multinomial: exponents do not sum to s");
  std::int64_t r = 1;
  int rem = s;
  for (int j = 0; j < a.dims(); ++j) {
    std::int64_t c = binomial(rem, a[j]);
    if (c != 0 && r > std::numeric_limits<std::int64_t>::max() / c)
      throw std::overflow_error("multinomial: result exceeds 64-bit range");
    r *= c;
    rem -= a[j];
  }
  return r;
}

namespace {

void emit_of_degree(int d, int s, std::vector<int>& scratch, int pos, int remaining,
                    std::vector<MultiIndex>& out) {
  if (pos == d - 1) {
    scratch[pos] = remaining;
    out.emplace_back(scratch);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    scratch[pos] = e;
    emit_of_degree(d, s, scratch, pos + 1, remaining - e, out);
  }
}

}  // namespace

std::vector<MultiIndex> monomials_of_degree(int d, int s) {
  if (d < 1 || s < 0) throw std::invalid_argument("monomials_of_degree: need d >= 1, s >= 0");
  std::vector<MultiIndex> out;
  std::vector<int> scratch(d, 0);
  emit_of_degree(d, s, scratch, 0, s, out);
  return out;  // ascending lexicographic within the fixed degree
}

std::vector<MultiIndex> nonconstant_monomials(int d, int q) {
  std::vector<MultiIndex> out;
  for (int s = 1; s <= q; ++s) {
    auto block = monomials_of_degree(d, s);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

Polynomial target_f1() {
  Polynomial p(2, 2);
  p.set_term(MultiIndex({2, 0}), 1.0);
  p.set_term(MultiIndex({0, 2}), 1.0);
  return p;
}

Polynomial target_f2() {
  Polynomial p(10, 5);
  auto mono = [](std::initializer_list<std::pair<int, int>> powers) {
    std::vector<int> e(10, 0);
    for (auto [var, pw] : powers) e[var - 1] = pw;
    return MultiIndex(e);
  };
  p.set_term(mono({{1, 5}}), 1.0);
  p.set_term(mono({{2, 4}}), 3.0);
  p.set_term(mono({{3, 3}}), 2.0);
  p.set_term(mono({{3, 1}, {4, 1}}), 5.0);
  p.set_term(mono({{5, 2}}), 3.0);
  p.set_term(mono({{6, 1}, {7, 1}, {8, 1}}), 2.0);
  p.set_term(mono({{9, 1}}), 2.0);
  return p;
}

}  // namespace polyformer
