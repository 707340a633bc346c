#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>

#include "polyformer/compiler.hpp"
#include "polyformer/network.hpp"
#include "test_util.hpp"

using namespace polyformer;

TEST_CASE("embedding layout") {
  Matrix f(2, 2);
  f(0, 0) = 1.0;
  f(1, 1) = 1.0;
  std::vector<double> x{3.0, 4.0};
  TokenMatrix z = embed_tokens(f, x, 2);
  CHECK(z.at(0, 0) == 3.0);
  CHECK(z.at(0, 1) == 4.0);
  // one-hot rows
  CHECK(z.at(1, 0) == 1.0);
  CHECK(z.at(2, 0) == 0.0);
  CHECK(z.at(1, 1) == 0.0);
  CHECK(z.at(2, 1) == 1.0);
  // power slots zero, trailing constant one
  for (int i = 0; i < 2; ++i) {
    CHECK(z.at(3, i) == 0.0);
    CHECK(z.at(4, i) == 0.0);
    CHECK(z.at(5, i) == 1.0);
  }
}

TEST_CASE("embedding of the zero input") {
  Matrix f(3, 2);
  for (double& v : f.data()) v = 0.7;
  std::vector<double> x{0.0, 0.0};
  TokenMatrix z = embed_tokens(f, x, 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(z.at(0, i) == 0.0);
    CHECK(z.at(1 + i, i) == 1.0);
    CHECK(z.at(3 + 1 + 1, i) == 1.0);  // trailing constant at row n+q+1
  }
}

TEST_CASE("embedding computes the direction features") {
  Matrix f = Matrix::from_rows({{0.6, 0.8}, {1.0, 0.0}, {0.0, 1.0}});
  std::vector<double> x{1.0, 1.0};
  TokenMatrix z = embed_tokens(f, x, 2);
  CHECK(z.at(0, 0) == doctest::Approx(1.4));
  CHECK(z.at(0, 1) == doctest::Approx(1.0));
  CHECK(z.at(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("hardmax basics") {
  std::vector<double> a{3.0, 1.0, 2.0};
  CHECK(hardmax(a) == std::vector<double>{3.0, 0.0, 0.0});
  std::vector<double> tie{2.0, 2.0};
  CHECK(hardmax(tie) == std::vector<double>{2.0, 0.0});  // lowest index wins
  std::vector<double> negative{-1.0, -3.0};
  CHECK(hardmax(negative) == std::vector<double>{-1.0, 0.0});
}

TEST_CASE("hardmax is idempotent on score-like vectors") {
  // Attention score rows always carry a non-negative maximum (the boosted
  // diagonal); a vector whose entries are all negative loses its retained
  // value to the introduced zeros on re-application.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + rng() % 8);
    for (double& c : v) c = gauss(rng);
    v[rng() % v.size()] = std::abs(gauss(rng));
    std::vector<double> once = hardmax(v);
    CHECK(hardmax(once) == once);
  }
}

TEST_CASE("forward of a zero readout is the bias") {
  std::mt19937_64 rng(8);
  TransformerModel m = testutil::random_model(rng);
  for (auto& e : m.readout.entries) e.weight = 0.0;
  m.bias = -1.25;
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(m.d);
    for (double& v : x) v = gauss(rng);
    CHECK(forward(m, x) == -1.25);
    CHECK(forward_fast(m, x) == -1.25);
  }
}

TEST_CASE("structured and reference paths agree") {
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> gauss(0.0, 2.0);
  int offdiag_hits = 0;
  for (int trial = 0; trial < 300; ++trial) {
    TransformerModel m = testutil::random_model(rng);
    std::vector<double> x(m.d);
    for (double& v : x) v = gauss(rng) * (trial % 3 == 0 ? 10.0 : 1.0);
    ForwardTrace ref = forward_trace(m, x);
    FastForwardResult fast = forward_fast_trace(m, x);
    CHECK(std::abs(ref.output - fast.output) <= 1e-12);
    REQUIRE(ref.selections == fast.selections);
    for (const auto& sel : fast.selections)
      for (int i = 0; i < m.n; ++i)
        if (sel[i] != i) ++offdiag_hits;
  }
  CHECK(offdiag_hits > 0);  // the trials must actually exercise off-diagonal picks
}

TEST_CASE("compiled models select the diagonal on both paths") {
  std::mt19937_64 rng(31);
  Polynomial p = testutil::random_polynomial(2, 3, rng);
  TransformerModel m = compile_exact(p, 2.0, 11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = testutil::random_ball_point(2, 2.0, rng);
    FastForwardResult fast = forward_fast_trace(m, x);
    ForwardTrace ref = forward_trace(m, x);
    CHECK(ref.selections == fast.selections);
    for (const auto& sel : fast.selections)
      for (int i = 0; i < m.n; ++i) CHECK(sel[i] == i);
  }
}

TEST_CASE("far outside the ball both paths pick the same off-diagonal keys") {
  std::mt19937_64 rng(547);
  Polynomial p = testutil::random_polynomial(3, 2, rng);
  TransformerModel m = compile_exact(p, 0.5, 3);  // small separation constants
  int offdiag = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(3);
    std::normal_distribution<double> gauss(0.0, 40.0);
    for (double& v : x) v = gauss(rng);
    ForwardTrace ref = forward_trace(m, x);
    FastForwardResult fast = forward_fast_trace(m, x);
    REQUIRE(ref.selections == fast.selections);
    CHECK(std::abs(ref.output - fast.output) <= 1e-12 * std::max(1.0, std::abs(ref.output)));
    for (const auto& sel : fast.selections)
      for (int i = 0; i < m.n; ++i)
        if (sel[i] != i) ++offdiag;
  }
  CHECK(offdiag > 0);
}

TEST_CASE("readout gradient of a zero-weight model") {
  std::mt19937_64 rng(92);
  TransformerModel m = testutil::random_model(rng, 4, 3, 3);
  for (auto& e : m.readout.entries) e.weight = 0.0;
  m.bias = 0.6;

  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 16; ++i) {
    std::vector<double> x(m.d);
    for (double& v : x) v = gauss(rng);
    xs.push_back(x);
    ys.push_back(gauss(rng));
  }

  GradientSet g;
  backward(m, xs, ys, g, 1);

  // prediction is the constant bias, so d bias = 2 mean(bias - y) and each
  // readout gradient is 2 mean((bias - y) * slot value)
  double mean_err = 0.0;
  for (double y : ys) mean_err += (m.bias - y);
  mean_err /= static_cast<double>(ys.size());
  CHECK(g.d_bias == doctest::Approx(2.0 * mean_err).epsilon(1e-12));

  for (std::size_t e = 0; e < m.readout.entries.size(); ++e) {
    const auto& entry = m.readout.entries[e];
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      FastForwardResult fw = forward_fast_trace(m, xs[i]);
      double slot_value = fw.powers[entry.token * m.q + (entry.slot - m.n - 2)];
      acc += (m.bias - ys[i]) * slot_value;
    }
    acc = 2.0 * acc / static_cast<double>(xs.size());
    CHECK(g.d_readout[e] == doctest::Approx(acc).epsilon(1e-10));
  }

  // embedding receives no gradient through a zero readout
  for (double v : g.d_embed.data()) CHECK(v == 0.0);
}

TEST_CASE("embedding gradient matches central differences") {
  std::mt19937_64 rng(133);
  for (int attempt = 0; attempt < 20; ++attempt) {
    TransformerModel m = testutil::random_model(rng, 4, 2, 2);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
      std::vector<double> x(m.d);
      for (double& v : x) v = gauss(rng);
      xs.push_back(x);
      ys.push_back(gauss(rng));
    }
    testutil::FdCheck fd = testutil::fd_check_attention(m, xs, ys);
    if (!fd.selections_stable) continue;  // resample away from a selection switch
    CHECK(fd.max_rel < 1e-5);
    return;
  }
  FAIL("no selection-stable configuration found");
}

TEST_CASE("gradients match finite differences across random models") {
  std::mt19937_64 rng(1444);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int checked = 0;
  for (int attempt = 0; attempt < 60 && checked < 20; ++attempt) {
    TransformerModel m = testutil::random_model(rng, 5, 4, 4);
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (int i = 0; i < 6; ++i) {
      std::vector<double> x(m.d);
      for (double& v : x) v = gauss(rng);
      xs.push_back(x);
      ys.push_back(gauss(rng));
    }
    testutil::FdCheck fd = testutil::fd_check_attention(m, xs, ys);
    if (!fd.selections_stable) continue;
    CHECK(fd.max_rel < 1e-5);
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("token structure survives arbitrary embeddings") {
  std::mt19937_64 rng(11111);
  std::normal_distribution<double> gauss(0.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    TransformerModel m = testutil::random_model(rng);
    std::vector<double> x(m.d);
    for (double& v : x) v = gauss(rng);
    ForwardTrace trace = forward_trace(m, x);
    const TokenMatrix& first = trace.states.front();
    const TokenMatrix& last = trace.states.back();
    for (int i = 0; i < m.n; ++i) {
      for (int r = 1; r <= m.n; ++r) CHECK(last.at(r, i) == first.at(r, i));
      CHECK(last.at(m.n + m.q + 1, i) == first.at(m.n + m.q + 1, i));
      CHECK(last.at(0, i) == first.at(0, i));  // feature row is read-only
    }
  }
}

TEST_CASE("batch gradients are bit-identical across worker counts") {
  std::mt19937_64 rng(727);
  TransformerModel m = testutil::random_model(rng, 6, 3, 3);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  std::normal_distribution<double> gauss(0.0, 1.5);
  for (int i = 0; i < 700; ++i) {  // several chunks
    std::vector<double> x(m.d);
    for (double& v : x) v = gauss(rng);
    xs.push_back(x);
    ys.push_back(gauss(rng));
  }
  GradientSet g1, g2, g4;
  double l1 = backward(m, xs, ys, g1, 1);
  double l2 = backward(m, xs, ys, g2, 2);
  double l4 = backward(m, xs, ys, g4, 4);
  CHECK(l1 == l2);
  CHECK(l1 == l4);
  CHECK(std::memcmp(g1.d_embed.data().data(), g2.d_embed.data().data(),
                    g1.d_embed.data().size() * sizeof(double)) == 0);
  CHECK(std::memcmp(g1.d_embed.data().data(), g4.d_embed.data().data(),
                    g1.d_embed.data().size() * sizeof(double)) == 0);
  CHECK(g1.d_readout == g2.d_readout);
  CHECK(g1.d_readout == g4.d_readout);
  CHECK(g1.d_bias == g2.d_bias);
  CHECK(g1.d_bias == g4.d_bias);
}

TEST_CASE("forward validates the input length") {
  std::mt19937_64 rng(3);
  TransformerModel m = testutil::random_model(rng);
  std::vector<double> x(m.d + 1, 0.0);
  CHECK_THROWS_AS(forward(m, x), std::invalid_argument);
  CHECK_THROWS_AS(forward_fast(m, x), std::invalid_argument);
}
