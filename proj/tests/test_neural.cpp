#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace argctx;
using namespace argctx::nn;

namespace {

RowMatrix random_tokens(Rng& rng, Eigen::Index n, Eigen::Index dim) {
  RowMatrix t(n, dim);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

void randomize(ParameterSet& p, Rng& rng, double scale = 0.5) {
  for (std::size_t b = 0; b < p.size(); ++b)
    for (Eigen::Index i = 0; i < p[b].size(); ++i) p[b].data()[i] = scale * rng.normal();
}

/// Direct loops over positions, filters and window entries.
Vector conv_oracle(const RowMatrix& tokens, const ParameterSet& p, const ConvConfig& cfg, std::size_t in_dim) {
  const std::size_t rows = std::max<std::size_t>(static_cast<std::size_t>(tokens.rows()), cfg.max_width());
  std::vector<std::vector<double>> x(rows, std::vector<double>(in_dim, 0.0));
  for (Eigen::Index r = 0; r < tokens.rows(); ++r)
    for (std::size_t c = 0; c < in_dim; ++c) x[r][c] = tokens(r, static_cast<Eigen::Index>(c));
  Vector out(static_cast<Eigen::Index>(cfg.output_dim()));
  std::size_t o = 0;
  for (std::size_t w : cfg.widths) {
    const Matrix& W = p[p.index("c.w" + std::to_string(w))];
    const Matrix& b = p[p.index("c.b" + std::to_string(w))];
    for (std::size_t k = 0; k < cfg.filters_per_width; ++k) {
      double best = -1e300;
      for (std::size_t pos = 0; pos + w <= rows; ++pos) {
        double z = b(static_cast<Eigen::Index>(k), 0);
        for (std::size_t j = 0; j < w; ++j)
          for (std::size_t c = 0; c < in_dim; ++c)
            z += W(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j * in_dim + c)) * x[pos + j][c];
        best = std::max(best, z);
      }
      out[static_cast<Eigen::Index>(o++)] = std::max(best, 0.0);
    }
  }
  return out;
}

}  // namespace

TEST(Conv, HandCase) {
  ParameterSet p;
  ConvEncoder enc(p, "c", {{2}, 1}, 1);
  p[p.index("c.w2")] << 1.0, 1.0;
  RowMatrix t(3, 1);
  t << 1, 2, 3;
  EXPECT_EQ(enc.forward(t, p), Vector::Constant(1, 5.0));
}

TEST(Conv, ZeroParametersGiveZeroOutput) {
  ParameterSet p;
  ConvEncoder enc(p, "c", {{2, 3, 4, 5}, 600}, 100);
  Rng rng(1);
  const Vector out = enc.forward(random_tokens(rng, 9, 100), p);
  EXPECT_EQ(out.size(), 2400);
  EXPECT_TRUE(out.isZero(0.0));
}

TEST(Conv, MatchesLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ParameterSet p;
    const ConvConfig cfg{{2, 3, 5}, 4};
    ConvEncoder enc(p, "c", cfg, 6);
    randomize(p, rng);
    const auto tokens = random_tokens(rng, 1 + static_cast<Eigen::Index>(rng.below(9)), 6);
    const Vector got = enc.forward(tokens, p);
    const Vector want = conv_oracle(tokens, p, cfg, 6);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Conv, PaddingIsIdempotent) {
  Rng rng(4);
  ParameterSet p;
  ConvEncoder enc(p, "c", {{2, 3, 4, 5}, 8}, 5);
  randomize(p, rng);
  const auto short_seq = random_tokens(rng, 2, 5);
  EXPECT_EQ(enc.forward(short_seq, p), enc.forward(pad_tokens(short_seq, 5), p));
  EXPECT_EQ(pad_tokens(pad_tokens(short_seq, 5), 5), pad_tokens(short_seq, 5));
}

TEST(Conv, RejectsEmptyAndWrongDimension) {
  ParameterSet p;
  ConvEncoder enc(p, "c", {{2}, 2}, 4);
  EXPECT_THROW(enc.forward(RowMatrix(0, 4), p), DataError);
  EXPECT_THROW(enc.forward(RowMatrix::Zero(3, 5), p), DataError);
}

TEST(Lstm, ZeroParametersGiveZeroState) {
  ParameterSet p;
  Lstm lstm(p, "l", 7, 100);
  Rng rng(1);
  std::vector<Vector> seq(4, Vector::Zero(7));
  for (auto& v : seq)
    for (auto& x : v) x = rng.normal();
  const Vector h = lstm.forward(seq, p);
  EXPECT_EQ(h.size(), 100);
  EXPECT_TRUE(h.isZero(0.0));
}

TEST(Lstm, EmptySequenceReturnsLearnedVector) {
  ParameterSet p;
  Lstm lstm(p, "l", 3, 4);
  p[p.index("l.empty")] << 1, 2, 3, 4;
  EXPECT_EQ(lstm.forward({}, p), Eigen::Vector4d(1, 2, 3, 4));
}

TEST(Lstm, SingleStepMatchesScalarFormula) {
  Rng rng(8);
  const std::size_t in = 3, H = 2;
  ParameterSet p;
  Lstm lstm(p, "l", in, H);
  randomize(p, rng, 1.0);
  Vector x(3);
  x << 0.3, -1.2, 0.7;
  const Matrix& wx = p[p.index("l.wx")];
  const Matrix& b = p[p.index("l.b")];
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  Vector want(2);
  for (std::size_t j = 0; j < H; ++j) {
    auto pre = [&](std::size_t gate) {
      const auto r = static_cast<Eigen::Index>(gate * H + j);
      double z = b(r, 0);
      for (std::size_t k = 0; k < in; ++k) z += wx(r, static_cast<Eigen::Index>(k)) * x[static_cast<Eigen::Index>(k)];
      return z;  // h_prev = 0, so wh does not contribute
    };
    const double i = sig(pre(0)), o = sig(pre(2)), g = std::tanh(pre(3));
    const double c = i * g;
    want[static_cast<Eigen::Index>(j)] = o * std::tanh(c);
  }
  EXPECT_LE((lstm.forward({x}, p) - want).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Attention, EqualScoresGiveCentroid) {
  Rng rng(2);
  const Matrix W = Matrix::Zero(4, 3);
  std::vector<Vector> keys;
  for (int i = 0; i < 5; ++i) keys.push_back(Vector::Random(3));
  AttentionCache cache;
  const Vector out = attention_aggregate(Vector::Random(4), keys, std::vector<bool>(5, true), W, &cache);
  Vector centroid = Vector::Zero(3);
  for (const auto& k : keys) centroid += k / 5.0;
  EXPECT_LE((out - centroid).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, SingleKeyIsReturned) {
  const Vector k = Eigen::Vector3d(1, -2, 5);
  const Vector out = attention_aggregate(Eigen::Vector2d(3, 1), {k}, {true}, Matrix::Random(2, 3));
  EXPECT_LE((out - k).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Attention, HandComputedScores) {
  // W = I, q = (1, 0): scores are the first key coordinates 0, ln 3.
  const Matrix W = Matrix::Identity(2, 2);
  const std::vector<Vector> keys = {Eigen::Vector2d(0, 1), Eigen::Vector2d(std::log(3.0), 0)};
  AttentionCache c;
  const Vector out = attention_aggregate(Eigen::Vector2d(1, 0), keys, {true, true}, W, &c);
  EXPECT_NEAR(c.weights[0], 0.25, 1e-12);
  EXPECT_NEAR(c.weights[1], 0.75, 1e-12);
  EXPECT_LE((out - (0.25 * keys[0] + 0.75 * keys[1])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, MaskedSlotsGetExactlyZeroWeight) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix W = Matrix::Random(3, 3) * 3.0;
    std::vector<Vector> keys;
    std::vector<bool> mask;
    for (int i = 0; i < 6; ++i) {
      keys.push_back(Vector::Random(3) * 4.0);
      mask.push_back(rng.uniform() < 0.6);
    }
    mask[static_cast<std::size_t>(rng.below(6))] = true;
    AttentionCache c;
    attention_aggregate(Vector::Random(3), keys, mask, W, &c);
    for (std::size_t i = 0; i < 6; ++i) {
      if (!mask[i]) EXPECT_EQ(c.weights[static_cast<Eigen::Index>(i)], 0.0);
      EXPECT_GE(c.weights[static_cast<Eigen::Index>(i)], 0.0);
    }
    EXPECT_NEAR(c.weights.sum(), 1.0, 1e-9);
  }
}

TEST(Attention, AllMaskedIsAnError) {
  EXPECT_THROW(attention_aggregate(Vector::Ones(2), {Vector::Ones(2)}, {false}, Matrix::Identity(2, 2)), DataError);
}

TEST(Classifier, ZeroWeightsAreUniform) {
  const Vector p = classify(Vector::Random(5), Matrix::Zero(5, 3), Matrix::Zero(3, 1));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p[i], 1.0 / 3.0);
}

TEST(Classifier, LogTwoBias) {
  Matrix b(3, 1);
  b << std::log(2.0), 0, 0;
  const Vector p = classify(Vector::Zero(2), Matrix::Zero(2, 3), b);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  EXPECT_NEAR(p[2], 0.25, 1e-15);
}

TEST(Classifier, ShiftInvariantAndStable) {
  Matrix b(3, 1);
  b << 1.0, -2.0, 0.5;
  const Vector p = classify(Vector::Zero(1), Matrix::Zero(1, 3), b);
  const Vector q = classify(Vector::Zero(1), Matrix::Zero(1, 3), (b.array() + 1000.0).matrix());
  EXPECT_LE((p - q).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(q.allFinite());
  EXPECT_THROW(classify(Vector::Zero(2), Matrix::Zero(1, 3), b), DataError);
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  ParameterSet p;
  p.add("w", 2, 2);
  p[0] << 1, 2, 3, 4;
  const ParameterSet before = p;
  auto state = AdamState::for_params(p);
  optimizer_step(p, p.zeros_like(), state, {});
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet p;
  p.add("w", 3, 1);
  ParameterSet g = p.zeros_like();
  g[0] << 0.5, -2.0, 1e-3;
  auto state = AdamState::for_params(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  optimizer_step(p, g, state, cfg);
  // Bias-corrected m/sqrt(v) is sign(g) * |g| / (|g| + eps).
  for (int i = 0; i < 3; ++i) {
    const double gi = g[0](i, 0);
    EXPECT_NEAR(p[0](i, 0), -cfg.learning_rate * gi / (std::abs(gi) + cfg.epsilon), 1e-15);
  }
}

TEST(Adam, FrozenBlocksAreSkipped) {
  ParameterSet p;
  p.add("frozen", 2, 1, false);
  ParameterSet g = p.zeros_like();
  g[0].setOnes();
  auto state = AdamState::for_params(p);
  optimizer_step(p, g, state, {});
  EXPECT_TRUE(p[0].isZero(0.0));
}

TEST(Adam, ResumingFromSavedStateIsExact) {
  Rng rng(6);
  ParameterSet p;
  p.add("a", 4, 3);
  p.add("b", 5, 1);
  randomize(p, rng);
  std::vector<ParameterSet> gs;
  for (int s = 0; s < 6; ++s) {
    ParameterSet g = p.zeros_like();
    randomize(g, rng);
    gs.push_back(g);
  }
  ParameterSet straight = p;
  auto st = AdamState::for_params(p);
  for (const auto& g : gs) optimizer_step(straight, g, st, {});

  ParameterSet resumed = p;
  auto st2 = AdamState::for_params(p);
  for (int s = 0; s < 3; ++s) optimizer_step(resumed, gs[static_cast<std::size_t>(s)], st2, {});
  const ParameterSet saved_p = resumed;
  const AdamState saved_state = st2;
  ParameterSet restored = saved_p;
  AdamState st3 = saved_state;
  for (int s = 3; s < 6; ++s) optimizer_step(restored, gs[static_cast<std::size_t>(s)], st3, {});
  EXPECT_EQ(restored, straight);
  EXPECT_EQ(st3, st);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(7);
  ParameterSet p;
  p.add("x", 3, 4);
  p.add("frozen", 2, 1, false);
  randomize(p, rng);
  p[0](0, 0) = -0.0;
  p[0](1, 1) = 5e-324;
  std::stringstream buf;
  save_checkpoint(buf, "{\"k\":1}", p);
  const auto ck = load_checkpoint(buf);
  EXPECT_EQ(ck.header, "{\"k\":1}");
  EXPECT_EQ(ck.params, p);
  EXPECT_TRUE(std::signbit(ck.params[0](0, 0)));
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  std::stringstream bad("NOTMAGIC....");
  EXPECT_THROW(load_checkpoint(bad), DataError);
  ParameterSet p;
  p.add("x", 2, 2);
  std::stringstream buf;
  save_checkpoint(buf, "{}", p);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  EXPECT_THROW(load_checkpoint(truncated), DataError);
}
