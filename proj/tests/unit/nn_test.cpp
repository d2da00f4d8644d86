#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dqsa/checkpoint.hpp"
#include "dqsa/nn.hpp"
#include "dqsa/random.hpp"
#include "test_oracles.hpp"

namespace dqsa::nn {
namespace {

NetworkShape small_shape(int k = 2, int h = 8) { return {k, 6, h, 5}; }

TEST(LstmStep, ZeroParamsAndZeroCellGiveZeroState) {
  NetworkParams p(small_shape());
  const auto next = lstm_step(p, Matrix::Random(6, 1), LstmState::zeros(8));
  EXPECT_TRUE(next.h.isZero(0.0));
  EXPECT_TRUE(next.c.isZero(0.0));
}

TEST(LstmStep, ZeroParamsHalveTheCell) {
  NetworkParams p(small_shape());
  auto s = LstmState::zeros(8);
  s.c.setConstant(2.0);
  const auto next = lstm_step(p, Matrix::Zero(6, 1), s);
  for (int i = 0; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(next.c(i, 0), 1.0);
    EXPECT_NEAR(next.h(i, 0), 0.5 * std::tanh(1.0), 1e-15);
    EXPECT_NEAR(next.h(i, 0), 0.3808, 1e-4);
  }
}

TEST(LstmStep, MatchesReferenceImplementation) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = init_params(small_shape(3, 7), rng);
    for (double& v : p.values()) v += 0.3 * (uniform01(rng) - 0.5);
    Matrix x(6, 1);
    LstmState s = LstmState::zeros(7);
    for (int i = 0; i < 6; ++i) x(i, 0) = 2.0 * uniform01(rng) - 1.0;
    for (int i = 0; i < 7; ++i) {
      s.h(i, 0) = 2.0 * uniform01(rng) - 1.0;
      s.c(i, 0) = 2.0 * uniform01(rng) - 1.0;
    }
    const auto got = lstm_step(p, x, s);
    const auto ref = oracle::reference_lstm_step(p, x.col(0), s.h.col(0), s.c.col(0));
    for (int i = 0; i < 7; ++i) {
      EXPECT_NEAR(got.h(i, 0), ref.first[i], 1e-12);
      EXPECT_NEAR(got.c(i, 0), ref.second[i], 1e-12);
    }
  }
}

TEST(LstmStep, RejectsShapeMismatchAndNonFiniteInput) {
  NetworkParams p(small_shape());
  EXPECT_THROW(lstm_step(p, Matrix::Zero(5, 1), LstmState::zeros(8)), ShapeError);
  Matrix bad = Matrix::Zero(6, 1);
  bad(2, 0) = std::nan("");
  EXPECT_THROW(lstm_step(p, bad, LstmState::zeros(8)), NumericError);
}

TEST(LstmStep, HiddenStateStaysBoundedOverLongRuns) {
  Rng rng(5);
  auto p = init_params(small_shape(), rng);
  for (double& v : p.values()) v *= 3.0;
  auto s = LstmState::zeros(8);
  for (int t = 0; t < 10000; ++t) {
    Matrix x(6, 1);
    for (int i = 0; i < 6; ++i) x(i, 0) = 2.0 * uniform01(rng) - 1.0;
    s = lstm_step(p, x, s);
  }
  EXPECT_TRUE(s.c.allFinite());
  EXPECT_LE(s.h.cwiseAbs().maxCoeff(), 1.0);
}

TEST(DuelingCombine, AddsValueToEveryAdvantage) {
  Vector a(3);
  a << 0, 1, -1;
  const Vector q = dueling_combine(2.0, a);
  EXPECT_EQ(q, (Vector(3) << 2, 3, 1).finished());
  EXPECT_EQ(dueling_combine(0.0, a), a);
  EXPECT_EQ(dueling_combine(5.0, Vector::Zero(3)), Vector::Constant(3, 5.0));
}

TEST(DuelingCombine, PreservesArgmax) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a(4, 1), v(1, 1);
    for (int i = 0; i < 4; ++i) a(i, 0) = uniform01(rng);
    v(0, 0) = 10.0 * (uniform01(rng) - 0.5);
    Eigen::Index ia = 0, iq = 0;
    a.col(0).maxCoeff(&ia);
    dueling_combine(v, a).col(0).maxCoeff(&iq);
    EXPECT_EQ(ia, iq);
  }
}

TEST(Forward, ZeroParamsGiveZeroQ) {
  NetworkParams p(small_shape());
  const auto r = forward(p, Matrix::Ones(6, 1), LstmState::zeros(8));
  EXPECT_TRUE(r.q.isZero(0.0));
  EXPECT_EQ(r.q.rows(), 3);
}

TEST(Forward, IsDeterministic) {
  Rng rng(9);
  const auto p = init_params(small_shape(), rng);
  const Matrix x = Matrix::Random(6, 1);
  const auto a = forward(p, x, LstmState::zeros(8));
  const auto b = forward(p, x, LstmState::zeros(8));
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.state.h, b.state.h);
}

TEST(Forward, RejectsWrongInputLength) {
  NetworkParams p(small_shape());
  EXPECT_THROW(forward(p, Matrix::Zero(5, 1), LstmState::zeros(8)), ShapeError);
}

TEST(Forward, BatchColumnsAreIndependent) {
  Rng rng(4);
  const auto p = init_params(small_shape(), rng);
  const Matrix x = Matrix::Random(6, 3);
  const auto batched = forward(p, x, LstmState::zeros(8, 3));
  for (int b = 0; b < 3; ++b) {
    const auto single = forward(p, x.col(b), LstmState::zeros(8));
    EXPECT_TRUE(batched.q.col(b).isApprox(single.q.col(0), 1e-14));
  }
}

TEST(Forward, RecurrentStateCarriesInformation) {
  Rng rng(21);
  int differing = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = init_params(small_shape(), rng);
    Matrix x1(6, 1), x2(6, 1);
    for (int i = 0; i < 6; ++i) {
      x1(i, 0) = uniform01(rng);
      x2(i, 0) = uniform01(rng);
    }
    const auto after_x1 = forward(p, x1, LstmState::zeros(8));
    const auto seq = forward(p, x2, after_x1.state);
    const auto alone = forward(p, x2, LstmState::zeros(8));
    if ((seq.q - alone.q).cwiseAbs().maxCoeff() > 1e-9) ++differing;
  }
  EXPECT_GE(differing, 4);
}

TEST(Bptt, ZeroLossGivesZeroGradient) {
  Rng rng(2);
  const auto p = init_params(small_shape(), rng);
  std::vector<Matrix> xs(4, Matrix::Random(6, 2));
  const auto q = forward_sequence(p, xs);
  std::vector<Matrix> masks(4, Matrix::Ones(3, 2));
  const auto r = backward_bptt(p, xs, q, masks);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grads.values()) EXPECT_EQ(g, 0.0);
}

TEST(Bptt, OutputBiasGradientMatchesChainRule) {
  // With every weight zero Q(a) = b_v + b_a(a), so dL/db_a(a) = 2 (q(a) - y(a)) on the masked entry.
  NetworkParams p(small_shape());
  p.vec(Param::AdvB2) << 0.5, -1.0, 2.0;
  p.vec(Param::ValueB2)(0) = 0.25;
  std::vector<Matrix> xs{Matrix::Ones(6, 1)};
  Matrix y = Matrix::Zero(3, 1);
  y(1, 0) = 3.0;
  Matrix mask = Matrix::Zero(3, 1);
  mask(1, 0) = 1.0;
  const auto r = backward_bptt(p, xs, std::vector<Matrix>{y}, std::vector<Matrix>{mask});
  const double q1 = 0.25 - 1.0;
  EXPECT_DOUBLE_EQ(r.loss, (q1 - 3.0) * (q1 - 3.0));
  EXPECT_DOUBLE_EQ(r.grads.vec(Param::AdvB2)(1), 2.0 * (q1 - 3.0));
  EXPECT_DOUBLE_EQ(r.grads.vec(Param::AdvB2)(0), 0.0);
  EXPECT_DOUBLE_EQ(r.grads.vec(Param::ValueB2)(0), 2.0 * (q1 - 3.0));
}

TEST(Bptt, MatchesFiniteDifferencesOnEveryParameter) {
  Rng rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    const auto inst = oracle::random_gradient_instance(rng, 2, 8, 4, 2);
    const auto r = backward_bptt(inst.params, inst.inputs, inst.targets, inst.masks);
    const auto fd = oracle::finite_difference_gradient(inst, 1e-5);
    const auto worst = oracle::worst_relative_error(r.grads.values(), fd);
    EXPECT_LE(worst, 1e-4) << "trial " << trial;
  }
}

TEST(Bptt, NonFiniteTargetNamesTheStep) {
  Rng rng(1);
  const auto p = init_params(small_shape(), rng);
  std::vector<Matrix> xs(3, Matrix::Ones(6, 1));
  std::vector<Matrix> ys(3, Matrix::Zero(3, 1));
  ys[1](0, 0) = std::numeric_limits<double>::infinity();
  std::vector<Matrix> masks(3, Matrix::Ones(3, 1));
  try {
    backward_bptt(p, xs, ys, masks);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST(Optimizer, ZeroGradientLeavesParamsUnchanged) {
  Rng rng(8);
  auto p = init_params(small_shape(), rng);
  const auto before = p;
  OptimizerState opt(p, AdamConfig{});
  optimizer_step(p, Gradients(p.shape()), opt);
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step, 1);
}

TEST(Optimizer, ConstantGradientMovesAgainstItsSign) {
  NetworkParams p(small_shape());
  OptimizerState opt(p, AdamConfig{});
  Gradients g(p.shape());
  g.values()[0] = 0.7;
  g.values()[1] = -0.2;
  for (int i = 0; i < 50; ++i) optimizer_step(p, g, opt);
  EXPECT_LT(p.values()[0], 0.0);
  EXPECT_GT(p.values()[1], 0.0);
  EXPECT_EQ(p.values()[2], 0.0);
}

TEST(Optimizer, BiasCorrectedFirstStepHasLearningRateMagnitude) {
  // m1 = (1-b1) g, v1 = (1-b2) g^2; after bias correction the step is lr * g / (|g| + eps).
  for (double gv : {1e-3, 0.5, -40.0}) {
    NetworkParams p(small_shape());
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    OptimizerState opt(p, cfg);
    Gradients g(p.shape());
    g.values()[3] = gv;
    optimizer_step(p, g, opt);
    const double expected = -cfg.learning_rate * gv / (std::abs(gv) + cfg.epsilon);
    EXPECT_NEAR(p.values()[3], expected, 1e-12);
    EXPECT_NEAR(std::abs(p.values()[3]), cfg.learning_rate, 1e-7);
  }
}

TEST(Optimizer, RejectsMismatchedShapes) {
  NetworkParams p(small_shape());
  OptimizerState opt(p, AdamConfig{});
  EXPECT_THROW(optimizer_step(p, Gradients(small_shape(3)), opt), ShapeError);
}

TEST(ClipGlobalNorm, RescalesOnlyAboveThreshold) {
  Gradients g(small_shape());
  g.values()[0] = 3.0;
  g.values()[1] = 4.0;
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_DOUBLE_EQ(g.values()[0], 3.0);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
}

TEST(CloneParams, CopiesAreIndependent) {
  Rng rng(6);
  auto src = init_params(small_shape(), rng);
  auto dst = clone_params(src);
  EXPECT_EQ(dst, src);
  src.values()[0] += 1.0;
  EXPECT_NE(dst, src);
  copy_into(dst, src);
  EXPECT_EQ(dst, src);
  EXPECT_EQ(clone_params(clone_params(dst)), dst);
}

TEST(InitParams, ForgetBiasIsOneAndWeightsBounded) {
  Rng rng(12);
  const auto p = init_params(small_shape(), rng);
  const auto b = p.vec(Param::GateB);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(b(i), 0.0);
    EXPECT_EQ(b(8 + i), 1.0);
  }
  const double bound = 1.0 / std::sqrt(6.0 + 8.0);
  EXPECT_LE(p.mat(Param::GateW).cwiseAbs().maxCoeff(), bound);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(13);
  auto p = init_params(small_shape(2, 8), rng);
  p.values()[0] = -0.0;
  p.values()[1] = 1e-310;  // subnormal
  std::stringstream ss;
  write_checkpoint(ss, p, 0xfeedbeefULL);
  const auto ck = read_checkpoint(ss);
  EXPECT_EQ(ck.config_hash, 0xfeedbeefULL);
  ASSERT_EQ(ck.params.shape(), p.shape());
  ASSERT_EQ(ck.params.size(), p.size());
  EXPECT_EQ(std::memcmp(ck.params.values().data(), p.values().data(), p.size() * sizeof(double)), 0);
}

TEST(Checkpoint, HeaderIsLittleEndian) {
  NetworkParams p(small_shape(2, 8));
  std::stringstream ss;
  write_checkpoint(ss, p, 1);
  const auto bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 8), "DQSACKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);   // version
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);  // K
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 8);  // LSTM width
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(read_checkpoint(bad), IoError);
  NetworkParams p(small_shape());
  std::stringstream ss;
  write_checkpoint(ss, p, 1);
  std::stringstream truncated(ss.str().substr(0, 60));
  EXPECT_THROW(read_checkpoint(truncated), IoError);
}

}  // namespace
}  // namespace dqsa::nn
