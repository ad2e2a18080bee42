#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "eapo/errors.hpp"
#include "eapo/networks.hpp"
#include "oracles.hpp"

namespace eapo {
namespace {

Matrix random_inputs(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(rows, cols);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = normal(rng);
  }
  return x;
}

Vector random_params(Eigen::Index n, Rng& rng, double scale = 0.7) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = normal(rng);
  return p;
}

TEST(MlpLayout, ParameterCount) {
  const MlpLayout layout({4, 256, 256, 1});
  EXPECT_EQ(layout.num_params(), 4 * 256 + 256 + 256 * 256 + 256 + 256 + 1);
  EXPECT_EQ(layout.weight_offset(0), 0);
  EXPECT_EQ(layout.bias_offset(0), 4 * 256);
  EXPECT_EQ(layout.weight_offset(1), 4 * 256 + 256);
  EXPECT_THROW(MlpLayout({4}), ContractViolation);
  EXPECT_THROW(MlpLayout({4, 0, 1}), ContractViolation);
}

TEST(MlpForward, RejectsWrongInputWidth) {
  const MlpLayout layout({4, 3, 1});
  const Vector p = Vector::Zero(layout.num_params());
  EXPECT_THROW(mlp_forward(layout, p, Matrix::Zero(3, 2)), ContractViolation);
  EXPECT_THROW(mlp_forward(layout, Vector::Zero(2), Matrix::Zero(4, 2)),
               ContractViolation);
}

TEST(MlpForward, MatchesHandComputation) {
  const MlpLayout layout({2, 2, 1});
  Vector p(layout.num_params());
  // W0 (column-major 2x2), b0, W1 (1x2), b1
  p << 1.0, -1.0, 2.0, 0.5, 0.1, -0.2, 3.0, -4.0, 0.25;
  Matrix x(2, 1);
  x << 1.0, 2.0;
  // h = relu([1*1 + 2*2 + 0.1, -1*1 + 0.5*2 - 0.2]) = [5.1, 0]
  const Matrix y = mlp_forward(layout, p, x);
  EXPECT_DOUBLE_EQ(y(0, 0), 3.0 * 5.1 + 0.25);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
  Rng rng(11);
  for (const auto& widths : {std::vector<int>{4, 4, 1}, std::vector<int>{4, 4, 4, 2},
                             std::vector<int>{4, 6, 5, 2}}) {
    const MlpLayout layout(widths);
    const Vector params = random_params(layout.num_params(), rng);
    const Matrix x = random_inputs(4, 5, rng);
    const Matrix upstream = random_inputs(layout.output_size(), 5, rng);

    MlpCache cache;
    mlp_forward(layout, params, x, &cache);
    Vector grad = Vector::Zero(layout.num_params());
    mlp_backward(layout, params, cache, upstream, grad);

    const auto loss = [&](const Vector& p) {
      return (mlp_forward(layout, p, x).array() * upstream.array()).sum();
    };
    const Vector fd = oracle::central_difference(loss, params, 1e-4);
    EXPECT_LT(oracle::max_relative_error(grad, fd), 1e-4);
  }
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradient) {
  Rng rng(3);
  const MlpLayout layout({4, 4, 2});
  const Vector params = random_params(layout.num_params(), rng);
  MlpCache cache;
  mlp_forward(layout, params, random_inputs(4, 3, rng), &cache);
  Vector grad = Vector::Zero(layout.num_params());
  mlp_backward(layout, params, cache, Matrix::Zero(2, 3), grad);
  EXPECT_EQ(grad.squaredNorm(), 0.0);
}

TEST(MlpBackward, BatchGradientIsSumOfSampleGradients) {
  Rng rng(5);
  const MlpLayout layout({4, 5, 2});
  const Vector params = random_params(layout.num_params(), rng);
  const Matrix x = random_inputs(4, 6, rng);
  const Matrix up = random_inputs(2, 6, rng);

  MlpCache cache;
  mlp_forward(layout, params, x, &cache);
  Vector batch = Vector::Zero(layout.num_params());
  mlp_backward(layout, params, cache, up, batch);

  Vector summed = Vector::Zero(layout.num_params());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    MlpCache c;
    mlp_forward(layout, params, x.col(j), &c);
    mlp_backward(layout, params, c, up.col(j), summed);
  }
  EXPECT_LT((batch - summed).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(MlpBackward, ShapeMismatchThrows) {
  const MlpLayout layout({4, 3, 1});
  const Vector params = Vector::Zero(layout.num_params());
  MlpCache cache;
  mlp_forward(layout, params, Matrix::Zero(4, 2), &cache);
  Vector grad = Vector::Zero(layout.num_params());
  EXPECT_THROW(mlp_backward(layout, params, cache, Matrix::Zero(2, 2), grad),
               ContractViolation);
  EXPECT_THROW(mlp_backward(layout, params, cache, Matrix::Zero(1, 3), grad),
               ContractViolation);
  EXPECT_THROW(mlp_backward(layout, params, MlpCache{}, Matrix::Zero(1, 2), grad),
               ContractViolation);
}

TEST(OrthogonalInit, ColumnsOrthonormalTimesGain) {
  Rng rng(1);
  const MlpLayout layout({4, 16, 16, 1});
  Vector params = Vector::Zero(layout.num_params());
  orthogonal_init(layout, params, 0.01, rng);
  Eigen::Map<const Matrix> w0(params.data() + layout.weight_offset(0), 16, 4);
  EXPECT_LT((w0.transpose() * w0 - 2.0 * Matrix::Identity(4, 4)).norm(), 1e-12);
  Eigen::Map<const Matrix> w1(params.data() + layout.weight_offset(1), 16, 16);
  EXPECT_LT((w1.transpose() * w1 - 2.0 * Matrix::Identity(16, 16)).norm(), 1e-12);
  Eigen::Map<const Matrix> w2(params.data() + layout.weight_offset(2), 1, 16);
  EXPECT_NEAR(w2.norm(), 0.01, 1e-14);
  EXPECT_EQ(Eigen::Map<const Vector>(params.data() + layout.bias_offset(0), 16)
                .squaredNorm(),
            0.0);
}

TEST(PolicyForward, ZeroWeightsGiveZeroMeanAndInitStd) {
  Rng rng(0);
  PolicyNet net = PolicyNet::create({8, 8}, 0.5, rng);
  net.params.head(net.layout.num_params()).setZero();
  const GaussianParams g = policy_forward(net, {0.3, -2.0, 0.1, 0.4});
  EXPECT_EQ(g.mean, 0.0);
  EXPECT_NEAR(g.std, 1.6487, 1e-4);
  EXPECT_DOUBLE_EQ(g.std, std::exp(0.5));
}

TEST(PolicyForward, DeterministicAndFiniteAtWrapBoundary) {
  Rng rng(9);
  const PolicyNet net = PolicyNet::create({256, 256}, 0.5, rng);
  const Observation edge{std::numbers::pi, -std::numbers::pi, 1.0, -1.0};
  const GaussianParams a = policy_forward(net, edge);
  const GaussianParams b = policy_forward(net, edge);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_TRUE(std::isfinite(a.mean));
}

TEST(PolicyNet, LogStdClamped) {
  Rng rng(0);
  PolicyNet net = PolicyNet::create({4}, 0.5, rng);
  net.params[net.params.size() - 1] = 10.0;
  EXPECT_DOUBLE_EQ(net.std(), std::exp(kLogStdMax));
  EXPECT_FALSE(net.log_std_active());
  net.params[net.params.size() - 1] = -10.0;
  EXPECT_DOUBLE_EQ(net.std(), std::exp(kLogStdMin));
}

TEST(CriticForward, ZeroWeightsGiveZeroHeads) {
  Rng rng(0);
  CriticNet net = CriticNet::create({8, 8}, rng);
  net.params.setZero();
  const CriticHeads h = critic_forward(net, {1, 2, 3, 4});
  EXPECT_EQ(h.v_r, 0.0);
  EXPECT_EQ(h.v_e, 0.0);
}

TEST(CriticForward, FiniteOnRandomObservations) {
  Rng rng(21);
  const CriticNet net = CriticNet::create({512, 512}, rng);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> vel(-3.0, 3.0);
  std::vector<Observation> obs(10000);
  for (auto& o : obs) o = {angle(rng), angle(rng), vel(rng), vel(rng)};
  const Matrix v = critic_forward_batch(net, observation_matrix(obs));
  EXPECT_TRUE(v.allFinite());
  EXPECT_NEAR(critic_forward(net, obs[17]).v_e, v(1, 17), 1e-12);
}

TEST(SampleAction, StandardNormalAtOrigin) {
  EXPECT_NEAR(log_prob(0.0, 1.0, 0.0), -0.5 * std::log(2.0 * std::numbers::pi),
              1e-15);
  EXPECT_NEAR(log_prob(0.0, 1.0, 0.0), -0.91894, 1e-5);
}

TEST(SampleAction, DegenerateSpreadGivesTanhMean) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(sample_action(0.7, 1e-8, rng).action, std::tanh(0.7), 1e-7);
  }
}

TEST(SampleAction, LogProbRoundTrips) {
  Rng rng(4);
  std::uniform_real_distribution<double> mean(-3.0, 3.0);
  std::uniform_real_distribution<double> log_std(-5.0, 2.0);
  for (int i = 0; i < 20000; ++i) {
    const double m = mean(rng);
    const double s = std::exp(log_std(rng));
    const ActionSample a = sample_action(m, s, rng);
    ASSERT_GT(a.action, -1.0);
    ASSERT_LT(a.action, 1.0);
    ASSERT_TRUE(std::isfinite(a.log_prob));
    ASSERT_NEAR(log_prob(m, s, a.action), a.log_prob,
                1e-9 * std::max(1.0, std::abs(a.log_prob)));
  }
}

TEST(LogProb, EvenInActionForZeroMean) {
  for (double s : {0.1, 1.0, 3.0}) {
    for (double a : {0.0, 0.3, 0.9, 0.999999}) {
      EXPECT_EQ(log_prob(0.0, s, a), log_prob(0.0, s, -a));
    }
  }
}

TEST(LogProb, ClampsAtBoundary) {
  EXPECT_TRUE(std::isfinite(log_prob(0.0, 1.0, 1.0)));
  EXPECT_EQ(log_prob(0.0, 1.0, 1.0), log_prob(0.0, 1.0, kActionBound));
  EXPECT_EQ(log_prob(0.2, 1.0, -1.5), log_prob(0.2, 1.0, -kActionBound));
}

TEST(LogProb, DensityIntegratesToOne) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (auto [m, s] : {std::pair{0.0, 1.0}, std::pair{0.5, 0.3},
                      std::pair{-1.2, 0.8}, std::pair{0.0, std::exp(0.5)},
                      std::pair{2.0, 0.05}}) {
    const auto density = [&](double a) { return std::exp(log_prob(m, s, a)); };
    const double total = integrator.integrate(density, -1.0, 1.0);
    EXPECT_NEAR(total, 1.0, 1e-6) << "mean " << m << " std " << s;
  }
}

TEST(LogProbGrad, MatchesFiniteDifferences) {
  Rng rng(6);
  std::uniform_real_distribution<double> mean(-2.0, 2.0);
  std::uniform_real_distribution<double> action(-0.99, 0.99);
  std::uniform_real_distribution<double> log_std(-1.5, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double m = mean(rng);
    const double ls = log_std(rng);
    const double a = action(rng);
    const LogProbGrad g = log_prob_grad(m, std::exp(ls), a);
    const double h = 1e-5;
    const double fd_mean =
        (log_prob(m + h, std::exp(ls), a) - log_prob(m - h, std::exp(ls), a)) / (2 * h);
    const double fd_ls =
        (log_prob(m, std::exp(ls + h), a) - log_prob(m, std::exp(ls - h), a)) / (2 * h);
    EXPECT_LE(std::abs(g.d_mean - fd_mean), 1e-5 * std::max(1.0, std::abs(fd_mean)));
    EXPECT_LE(std::abs(g.d_log_std - fd_ls), 1e-5 * std::max(1.0, std::abs(fd_ls)));
  }
}

TEST(PolicyBackward, LogLikelihoodGradientMatchesFiniteDifferences) {
  Rng rng(8);
  PolicyNet net = PolicyNet::create({4, 4}, 0.5, rng);
  net.params.head(net.layout.num_params()) =
      random_params(net.layout.num_params(), rng, 0.5);
  const Matrix x = random_inputs(4, 8, rng);
  std::uniform_real_distribution<double> act(-0.9, 0.9);
  std::vector<double> actions(8);
  for (double& a : actions) a = act(rng);

  const auto objective = [&](const Vector& p) {
    PolicyNet probe = net;
    probe.params = p;
    const RowVector mu = policy_mean_batch(probe, x);
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) sum += log_prob(mu[i], probe.std(), actions[i]);
    return sum;
  };

  MlpCache cache;
  const RowVector mu = policy_mean_batch(net, x, &cache);
  RowVector d_mean(8);
  double d_ls = 0.0;
  for (int i = 0; i < 8; ++i) {
    const LogProbGrad g = log_prob_grad(mu[i], net.std(), actions[i]);
    d_mean[i] = g.d_mean;
    d_ls += g.d_log_std;
  }
  const Vector grad = policy_backward(net, cache, d_mean, d_ls);
  const Vector fd = oracle::central_difference(objective, net.params, 1e-5);
  EXPECT_LT(oracle::max_relative_error(grad, fd), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Vector p = Vector::Constant(3, 0.4);
  AdamState s = AdamState::zeros(3);
  adam_update(p, Vector::Zero(3), s, 1e-3);
  EXPECT_EQ(p, Vector::Constant(3, 0.4));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p = Vector::Zero(1);
  AdamState s = AdamState::zeros(1);
  adam_update(p, Vector::Ones(1), s, 5e-4);
  // m_hat = 1, v_hat = 1, delta = -lr / (1 + eps)
  EXPECT_NEAR(p[0], -5e-4, 1e-11);
  EXPECT_DOUBLE_EQ(p[0], -5e-4 / (1.0 + 1e-8));
}

TEST(Adam, DeterministicAndShapeChecked) {
  Vector a = Vector::LinSpaced(4, -1, 1);
  Vector b = a;
  AdamState sa = AdamState::zeros(4);
  AdamState sb = AdamState::zeros(4);
  const Vector g = Vector::LinSpaced(4, 3, -2);
  for (int i = 0; i < 5; ++i) {
    adam_update(a, g, sa, 1e-2);
    adam_update(b, g, sb, 1e-2);
  }
  EXPECT_EQ(a, b);
  EXPECT_THROW(adam_update(a, Vector::Zero(3), sa, 1e-2), ContractViolation);
}

TEST(ClipGradNorm, BelowAndAboveLimit) {
  Vector a(2);
  a << 3.0, 4.0;  // norm 5
  Vector* small[] = {&a};
  EXPECT_DOUBLE_EQ(clip_grad_norm(small, 10.0), 5.0);
  EXPECT_EQ(a, (Vector(2) << 3.0, 4.0).finished());

  Vector b(2);
  Vector c(2);
  b << 12.0, 0.0;
  c << 0.0, 16.0;  // joint norm 20
  Vector* pair[] = {&b, &c};
  EXPECT_DOUBLE_EQ(clip_grad_norm(pair, 10.0), 20.0);
  EXPECT_EQ(b, (Vector(2) << 6.0, 0.0).finished());
  EXPECT_EQ(c, (Vector(2) << 0.0, 8.0).finished());
}

TEST(ClipGradNorm, ResultNeverExceedsLimit) {
  Rng rng(12);
  std::uniform_real_distribution<double> scale(0.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    Vector a = random_params(7, rng, scale(rng));
    Vector b = random_params(3, rng, scale(rng));
    Vector* g[] = {&a, &b};
    clip_grad_norm(g, 10.0);
    EXPECT_LE(std::sqrt(a.squaredNorm() + b.squaredNorm()), 10.0 + 1e-9);
  }
}

}  // namespace
}  // namespace eapo
