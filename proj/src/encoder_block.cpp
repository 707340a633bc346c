#include "polyformer/encoder_block.hpp"

#include <stdexcept>

#include "polyformer/network.hpp"

namespace polyformer {

EncoderBlockSpec build_block(int n, int q, int stage, double sep_const) {
  if (n < 1) throw std::invalid_argument("build_block: need at least one token");
  if (stage < 1 || stage > q) throw std::invalid_argument("build_block: stage out of range");
  if (!(sep_const > 0.0)) throw std::invalid_argument("build_block: separation constant must be positive");
  EncoderBlockSpec spec;
  spec.n = n;
  spec.q = q;
  spec.stage = stage;
  spec.a_slot = 1;
  spec.b_slot = stage == 1 ? n + q + 2 : n + stage;
  spec.write_slot = n + stage + 1;
  spec.sep_const = sep_const;
  return spec;
}

int DenseBlock::nonzero_count() const {
  int count = 0;
  auto count_matrix = [&count](const Matrix& m) {
    for (double v : m.data())
      if (v != 0.0) ++count;
  };
  count_matrix(wq);
  count_matrix(wk);
  count_matrix(wv);
  count_matrix(w1);
  count_matrix(w2);
  for (double v : b1)
    if (v != 0.0) ++count;
  for (double v : b2)
    if (v != 0.0) ++count;
  return count;
}

DenseBlock materialize(const EncoderBlockSpec& spec) {
  const int n = spec.n;
  const int w = spec.width();
  if (spec.a_slot < 1 || spec.a_slot > w || spec.b_slot < 1 || spec.b_slot > w ||
      spec.write_slot < 1 || spec.write_slot > w)
    throw std::invalid_argument("materialize: slot out of range");

  DenseBlock dense;
  dense.wq = Matrix(n + 1, w);
  dense.wk = Matrix(n + 1, w);
  dense.wv = Matrix(w, w);
  dense.w1 = Matrix(2, w);
  dense.w2 = Matrix(w, 2);
  dense.b1.assign(2, 0.0);
  dense.b2.assign(w, 0.0);

  // Query row 1 reads the first factor, scaled one-hot rows pin the diagonal.
  dense.wq(0, spec.a_slot - 1) = 1.0;
  for (int i = 1; i <= n; ++i) dense.wq(i, i) = spec.sep_const;
  // Key row 1 reads the second factor, plain one-hot rows below.
  dense.wk(0, spec.b_slot - 1) = 1.0;
  for (int i = 1; i <= n; ++i) dense.wk(i, i) = 1.0;
  // Value: routes the trailing constant into the write slot.
  dense.wv(spec.write_slot - 1, w - 1) = 1.0;
  // Rectifier pair turning v into -v plus the bias shift that cancels the
  // separation constant.
  dense.w1(0, spec.write_slot - 1) = 1.0;
  dense.w1(1, spec.write_slot - 1) = -1.0;
  dense.w2(spec.write_slot - 1, 0) = -2.0;
  dense.w2(spec.write_slot - 1, 1) = 2.0;
  dense.b2[spec.write_slot - 1] = spec.sep_const;
  return dense;
}

TokenMatrix block_apply_reference(const EncoderBlockSpec& spec, const TokenMatrix& z,
                                  std::vector<int>* selections) {
  const int n = spec.n;
  const int w = spec.width();
  if (z.n != n || z.q != spec.q)
    throw std::invalid_argument("block_apply_reference: token matrix shape mismatch");

  DenseBlock m = materialize(spec);

  Matrix queries(n + 1, n);
  Matrix keys(n + 1, n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r <= n; ++r) {
      double accq = 0.0, acck = 0.0;
      for (int c = 0; c < w; ++c) {
        accq += m.wq(r, c) * z.at(c, i);
        acck += m.wk(r, c) * z.at(c, i);
      }
      queries(r, i) = accq;
      keys(r, i) = acck;
    }
  }
  Matrix values(w, n);
  for (int j = 0; j < n; ++j)
    for (int r = 0; r < w; ++r) {
      double acc = 0.0;
      for (int c = 0; c < w; ++c) acc += m.wv(r, c) * z.at(c, j);
      values(r, j) = acc;
    }

  if (selections) selections->assign(n, 0);
  TokenMatrix out(n, spec.q);
  std::vector<double> scores(n);
  std::vector<double> zhat(w);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int r = 0; r <= n; ++r) acc += queries(r, i) * keys(r, j);
      scores[j] = acc;
    }
    std::vector<double> picked = hardmax(scores);
    if (selections) (*selections)[i] = argmax_first(scores);

    for (int r = 0; r < w; ++r) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += values(r, j) * picked[j];
      zhat[r] = z.at(r, i) + acc;
    }

    double u0 = 0.0, u1 = 0.0;
    for (int c = 0; c < w; ++c) {
      u0 += m.w1(0, c) * zhat[c];
      u1 += m.w1(1, c) * zhat[c];
    }
    u0 += m.b1[0];
    u1 += m.b1[1];
    double s0 = u0 > 0.0 ? u0 : 0.0;
    double s1 = u1 > 0.0 ? u1 : 0.0;
    for (int r = 0; r < w; ++r) {
      double delta = m.w2(r, 0) * s0 + m.w2(r, 1) * s1;
      out.at(r, i) = (zhat[r] + delta) + m.b2[r];
    }
  }
  return out;
}

}  // namespace polyformer
