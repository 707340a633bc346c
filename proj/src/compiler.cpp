#include "polyformer/compiler.hpp"

#include <algorithm>
#include <stdexcept>

#include "polyformer/ridge.hpp"

namespace polyformer {

double separation_constant(double input_bound, int stage) {
  if (!(input_bound > 0.0)) throw std::invalid_argument("separation_constant: bound must be positive");
  if (stage < 1) throw std::invalid_argument("separation_constant: stage must be >= 1");
  return 2.0 * int_pow(std::max(1.0, input_bound), 2 * stage);
}

TransformerModel compile_exact(const Polynomial& p, double input_bound, std::uint64_t seed) {
  if (p.degree() < 1)
    throw std::invalid_argument(
        "compile_exact: constant polynomials need no encoder blocks (readout = bias only)");
  if (!(input_bound > 0.0)) throw std::invalid_argument("compile_exact: input bound must be positive");

  const int d = p.dim();
  const int q = p.degree();
  RidgeBasis basis = generate_basis(d, q, seed);
  RidgeCoefficients coeffs = ridge_decompose(p, basis);
  const int n = basis.count();

  TransformerModel m;
  m.d = d;
  m.q = q;
  m.n = n;
  m.input_bound = input_bound;
  m.embed = Matrix(n, d);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < d; ++j) m.embed(k, j) = basis.xi[k][j];

  m.blocks.reserve(q);
  for (int s = 1; s <= q; ++s) m.blocks.push_back(build_block(n, q, s, separation_constant(input_bound, s)));

  m.readout.entries.reserve(static_cast<std::size_t>(n) * q);
  for (int k = 0; k < n; ++k)
    for (int s = 1; s <= q; ++s) {
      double sign = (s % 2 == 0) ? 1.0 : -1.0;
      m.readout.entries.push_back({k, n + s + 1, sign * coeffs.beta_at(k, s)});
    }
  m.readout.sort_entries();
  m.bias = coeffs.constant;
  return m;
}

}  // namespace polyformer
