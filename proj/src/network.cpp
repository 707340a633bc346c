#include "polyformer/network.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "polyformer/parallel.hpp"

namespace polyformer {

namespace {

double embed_dot(const Matrix& f, int row, std::span<const double> x) {
  double acc = 0.0;
  for (int j = 0; j < f.cols(); ++j) acc += f(row, j) * x[j];
  return acc;
}

void check_input(const TransformerModel& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.d) throw std::invalid_argument("forward: input dimension mismatch");
}

template <typename ValueAt>
double apply_readout(const TransformerModel& m, ValueAt&& value_at) {
  double acc = 0.0;
  for (const auto& e : m.readout.entries) acc += e.weight * value_at(e.token, e.slot);
  return acc + m.bias;
}

struct TwoExtremes {
  double hi1 = -std::numeric_limits<double>::infinity();
  int hi1_idx = -1;
  double hi2 = -std::numeric_limits<double>::infinity();
  int hi2_idx = -1;
  double lo1 = std::numeric_limits<double>::infinity();
  int lo1_idx = -1;
  double lo2 = std::numeric_limits<double>::infinity();
  int lo2_idx = -1;

  void feed(double v, int idx) {
    if (v > hi1) {
      hi2 = hi1;
      hi2_idx = hi1_idx;
      hi1 = v;
      hi1_idx = idx;
    } else if (v > hi2) {
      hi2 = v;
      hi2_idx = idx;
    }
    if (v < lo1) {
      lo2 = lo1;
      lo2_idx = lo1_idx;
      lo1 = v;
      lo1_idx = idx;
    } else if (v < lo2) {
      lo2 = v;
      lo2_idx = idx;
    }
  }
};

// Scratch for the structured pass; reused across samples by one worker.
struct FastScratch {
  std::vector<double> features;  // t_i, length n
  std::vector<double> powers;    // token-major, n * q
  std::vector<int> sel;          // stage-major, q * n
  std::vector<double> mval;      // selected score per token per stage, q * n
  std::vector<double> gp;        // backward: gradient w.r.t. power slots, n * q layout of `powers`
  std::vector<double> gt;        // backward: gradient w.r.t. features

  void resize(int n, int q) {
    features.assign(n, 0.0);
    powers.assign(static_cast<std::size_t>(n) * q, 0.0);
    sel.assign(static_cast<std::size_t>(n) * q, 0);
    mval.assign(static_cast<std::size_t>(n) * q, 0.0);
  }
};

// Structured forward pass. Mirrors the floating-point operations of the
// dense reference path: the dense path only ever adds exact zeros around the
// same products, so both paths produce the same values and selections.
double fast_pass(const TransformerModel& m, std::span<const double> x, FastScratch& s) {
  const int n = m.n;
  const int q = m.q;
  s.resize(n, q);
  for (int i = 0; i < n; ++i) s.features[i] = embed_dot(m.embed, i, x);

  for (int stage = 1; stage <= q; ++stage) {
    const EncoderBlockSpec& block = m.blocks[stage - 1];
    const double sep = block.sep_const;
    auto b_of = [&](int j) -> double {
      return stage == 1 ? 1.0 : s.powers[static_cast<std::size_t>(j) * q + (stage - 2)];
    };
    TwoExtremes ext;
    for (int j = 0; j < n; ++j) ext.feed(b_of(j), j);

    // First index attaining the off-diagonal score maximum, by direct scan.
    // Only needed when rounding may collapse distinct b values into equal
    // products, which the top-2 shortcut cannot order by index.
    auto off_scan = [&](double a, int i) {
      double best = -std::numeric_limits<double>::infinity();
      int idx = -1;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        double p = a * b_of(j);
        if (p > best) {
          best = p;
          idx = j;
        }
      }
      return std::pair<double, int>(best, idx);
    };

    for (int i = 0; i < n; ++i) {
      const double a = s.features[i];
      double diag = a * b_of(i);
      diag += sep;
      int selected = i;
      double score = diag;
      if (a != 0.0) {
        double off = 0.0;
        int joff = -1;
        bool rescan = false;
        if (a > 0.0) {
          if (ext.hi1_idx != i) {
            off = a * ext.hi1;
            joff = ext.hi1_idx;
            rescan = ext.hi2_idx >= 0 && ext.hi2 != ext.hi1 && a * ext.hi2 == off;
          } else if (ext.hi2_idx >= 0) {
            off = a * ext.hi2;
            joff = ext.hi2_idx;
            rescan = n > 2;
          }
        } else {
          if (ext.lo1_idx != i) {
            off = a * ext.lo1;
            joff = ext.lo1_idx;
            rescan = ext.lo2_idx >= 0 && ext.lo2 != ext.lo1 && a * ext.lo2 == off;
          } else if (ext.lo2_idx >= 0) {
            off = a * ext.lo2;
            joff = ext.lo2_idx;
            rescan = n > 2;
          }
        }
        if (rescan) {
          auto [best, idx] = off_scan(a, i);
          off = best;
          joff = idx;
        }
        if (joff >= 0 && (off > diag || (off == diag && joff < i))) {
          selected = joff;
          score = off;
        }
      }
      const std::size_t idx = static_cast<std::size_t>(stage - 1) * n + i;
      s.sel[idx] = selected;
      s.mval[idx] = score;

      double hatw = 0.0 + score * 1.0;  // write slot was zero; constant slot is one
      double s0 = hatw > 0.0 ? hatw : 0.0;
      double neg = -hatw;
      double s1 = neg > 0.0 ? neg : 0.0;
      double delta = (-2.0 * s0) + (2.0 * s1);
      s.powers[static_cast<std::size_t>(i) * q + (stage - 1)] = (hatw + delta) + sep;
    }
  }

  return apply_readout(m, [&](int token, int slot) {
    return s.powers[static_cast<std::size_t>(token) * q + (slot - n - 2)];
  });
}

}  // namespace

TokenMatrix embed_tokens(const Matrix& f, std::span<const double> x, int q) {
  if (static_cast<int>(x.size()) != f.cols())
    throw std::invalid_argument("embed_tokens: input dimension mismatch");
  if (q < 0) throw std::invalid_argument("embed_tokens: negative power-slot count");
  const int n = f.rows();
  TokenMatrix z(n, q);
  for (int i = 0; i < n; ++i) {
    z.at(0, i) = embed_dot(f, i, x);
    z.at(1 + i, i) = 1.0;
    z.at(n + q + 1, i) = 1.0;
  }
  return z;
}

int argmax_first(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax_first: empty input");
  int arg = 0;
  for (int j = 1; j < static_cast<int>(v.size()); ++j)
    if (v[j] > v[arg]) arg = j;
  return arg;
}

std::vector<double> hardmax(std::span<const double> v) {
  int arg = argmax_first(v);
  std::vector<double> out(v.size(), 0.0);
  out[arg] = v[arg];
  return out;
}

double forward(const TransformerModel& m, std::span<const double> x) {
  check_input(m, x);
  TokenMatrix z = embed_tokens(m.embed, x, m.q);
  for (const auto& block : m.blocks) z = block_apply_reference(block, z);
  return apply_readout(m, [&](int token, int slot) { return z.at(slot - 1, token); });
}

ForwardTrace forward_trace(const TransformerModel& m, std::span<const double> x) {
  check_input(m, x);
  ForwardTrace trace;
  trace.states.push_back(embed_tokens(m.embed, x, m.q));
  for (const auto& block : m.blocks) {
    std::vector<int> sel;
    trace.states.push_back(block_apply_reference(block, trace.states.back(), &sel));
    trace.selections.push_back(std::move(sel));
  }
  const TokenMatrix& z = trace.states.back();
  trace.output = apply_readout(m, [&](int token, int slot) { return z.at(slot - 1, token); });
  return trace;
}

double forward_fast(const TransformerModel& m, std::span<const double> x) {
  check_input(m, x);
  FastScratch scratch;
  return fast_pass(m, x, scratch);
}

FastForwardResult forward_fast_trace(const TransformerModel& m, std::span<const double> x) {
  check_input(m, x);
  FastScratch scratch;
  FastForwardResult out;
  out.output = fast_pass(m, x, scratch);
  out.features = scratch.features;
  out.powers = scratch.powers;
  out.selections.resize(m.q);
  for (int stage = 0; stage < m.q; ++stage)
    out.selections[stage].assign(scratch.sel.begin() + static_cast<std::size_t>(stage) * m.n,
                                 scratch.sel.begin() + static_cast<std::size_t>(stage + 1) * m.n);
  return out;
}

double backward(const TransformerModel& m, const std::vector<std::vector<double>>& xs,
                std::span<const double> ys, GradientSet& out, int workers) {
  if (xs.size() != ys.size()) throw std::invalid_argument("backward: batch size mismatch");
  if (xs.empty()) throw std::invalid_argument("backward: empty batch");
  const int n = m.n;
  const int q = m.q;
  const std::size_t count = xs.size();
  const double inv_count = 1.0 / static_cast<double>(count);

  // Power-slot index per readout entry, resolved once.
  std::vector<int> entry_power(m.readout.entries.size());
  for (std::size_t e = 0; e < m.readout.entries.size(); ++e) {
    const auto& entry = m.readout.entries[e];
    int s = entry.slot - n - 1;
    if (s < 1 || s > q) throw std::invalid_argument("backward: readout slot outside power range");
    entry_power[e] = entry.token * q + (s - 1);
  }

  constexpr std::size_t kChunk = 256;
  const std::size_t nchunks = (count + kChunk - 1) / kChunk;
  std::vector<GradientSet> partial(nchunks);
  std::vector<double> partial_sq(nchunks, 0.0);

  for_each_chunk(count, kChunk, workers, [&](std::size_t c, std::size_t begin, std::size_t end) {
    GradientSet& g = partial[c];
    g.d_embed = Matrix(n, m.d);
    g.d_readout.assign(m.readout.entries.size(), 0.0);
    g.d_bias = 0.0;
    FastScratch s;
    s.gp.assign(static_cast<std::size_t>(n) * q, 0.0);
    s.gt.assign(n, 0.0);
    double sq = 0.0;
    for (std::size_t idx = begin; idx < end; ++idx) {
      const auto& x = xs[idx];
      double pred = fast_pass(m, x, s);
      double err = pred - ys[idx];
      sq += err * err;
      double gpred = 2.0 * err * inv_count;

      g.d_bias += gpred;
      std::fill(s.gp.begin(), s.gp.end(), 0.0);
      std::fill(s.gt.begin(), s.gt.end(), 0.0);
      for (std::size_t e = 0; e < entry_power.size(); ++e) {
        g.d_readout[e] += gpred * s.powers[entry_power[e]];
        s.gp[entry_power[e]] += gpred * m.readout.entries[e].weight;
      }

      // Walk the cascade backwards with the selections frozen. Stage s reads
      // the feature slot and (for s >= 2) the previous stage's output of the
      // selected token; the rectifier pair contributes its local derivative.
      for (int stage = q; stage >= 1; --stage) {
        for (int i = 0; i < n; ++i) {
          double gpow = s.gp[static_cast<std::size_t>(i) * q + (stage - 1)];
          if (gpow == 0.0) continue;
          const std::size_t idx_sm = static_cast<std::size_t>(stage - 1) * n + i;
          double u = s.mval[idx_sm];
          double relu_pair = 1.0 - 2.0 * (u > 0.0 ? 1.0 : 0.0) - 2.0 * (u < 0.0 ? 1.0 : 0.0);
          double dscore = gpow * relu_pair;
          int j = s.sel[idx_sm];
          if (stage == 1) {
            s.gt[i] += dscore;  // second factor is the constant one
          } else {
            double b = s.powers[static_cast<std::size_t>(j) * q + (stage - 2)];
            s.gt[i] += dscore * b;
            s.gp[static_cast<std::size_t>(j) * q + (stage - 2)] += dscore * s.features[i];
          }
        }
      }

      for (int i = 0; i < n; ++i) {
        double gi = s.gt[i];
        if (gi == 0.0) continue;
        for (int col = 0; col < m.d; ++col) g.d_embed(i, col) += gi * x[col];
      }
    }
    partial_sq[c] = sq;
  });

  out.d_embed = Matrix(n, m.d);
  out.d_readout.assign(m.readout.entries.size(), 0.0);
  out.d_bias = 0.0;
  double total_sq = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) {
    const GradientSet& g = partial[c];
    for (std::size_t k = 0; k < out.d_embed.data().size(); ++k) out.d_embed.data()[k] += g.d_embed.data()[k];
    for (std::size_t k = 0; k < out.d_readout.size(); ++k) out.d_readout[k] += g.d_readout[k];
    out.d_bias += g.d_bias;
    total_sq += partial_sq[c];
  }
  return total_sq * inv_count;
}

}  // namespace polyformer
