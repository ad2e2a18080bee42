#include "eapo/networks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "eapo/errors.hpp"

namespace eapo {

namespace {

using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// log(1 - tanh(z)^2), stable for large |z|.
double log_one_minus_tanh_sq(double z) {
  const double a = std::abs(z);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

double squashed_log_density(double z, double mean, double std) {
  const double u = (z - mean) / std;
  return -0.5 * u * u - std::log(std) - kHalfLog2Pi - log_one_minus_tanh_sq(z);
}

double clamp_action(double action) {
  return std::clamp(action, -kActionBound, kActionBound);
}

}  // namespace

MlpLayout::MlpLayout(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) {
    throw ContractViolation("MlpLayout needs at least input and output widths");
  }
  for (int w : widths_) {
    if (w <= 0) throw ContractViolation("MlpLayout widths must be positive");
  }
  offsets_.reserve(widths_.size() - 1);
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(num_params_);
    num_params_ += static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1] +
                   widths_[l + 1];
  }
}

Matrix mlp_forward(const MlpLayout& layout, Eigen::Ref<const Vector> params,
                   const Matrix& x, MlpCache* cache) {
  if (params.size() < layout.num_params()) {
    throw ContractViolation("mlp_forward: parameter vector too short");
  }
  if (x.rows() != layout.input_size()) {
    throw ContractViolation("mlp_forward: input has " +
                            std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(layout.input_size()));
  }
  if (cache) {
    cache->pre.resize(layout.num_layers());
    cache->post.resize(layout.num_layers());
    cache->post[0] = x;
  }
  Matrix a = x;
  for (int l = 0; l < layout.num_layers(); ++l) {
    const int in = layout.widths()[l];
    const int out = layout.widths()[l + 1];
    ConstMatrixMap w(params.data() + layout.weight_offset(l), out, in);
    Eigen::Map<const Vector> b(params.data() + layout.bias_offset(l), out);
    Matrix z(out, a.cols());
    z.noalias() = w * a;
    z.colwise() += b;
    const bool hidden = l + 1 < layout.num_layers();
    if (cache) cache->pre[l] = z;
    if (hidden) {
      a = z.cwiseMax(0.0);
      if (cache) cache->post[l + 1] = a;
    } else {
      a = std::move(z);
    }
  }
  return a;
}

void mlp_backward(const MlpLayout& layout, Eigen::Ref<const Vector> params,
                  const MlpCache& cache, const Matrix& upstream,
                  Eigen::Ref<Vector> grad) {
  const int layers = layout.num_layers();
  if (static_cast<int>(cache.pre.size()) != layers ||
      static_cast<int>(cache.post.size()) != layers) {
    throw ContractViolation("mlp_backward: cache does not match layout");
  }
  if (upstream.rows() != layout.output_size() ||
      upstream.cols() != cache.post[0].cols()) {
    throw ContractViolation("mlp_backward: upstream gradient shape mismatch");
  }
  if (grad.size() < layout.num_params() ||
      params.size() < layout.num_params()) {
    throw ContractViolation("mlp_backward: parameter/gradient size mismatch");
  }
  Matrix delta = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = layout.widths()[l];
    const int out = layout.widths()[l + 1];
    MatrixMap gw(grad.data() + layout.weight_offset(l), out, in);
    Eigen::Map<Vector> gb(grad.data() + layout.bias_offset(l), out);
    gw.noalias() += delta * cache.post[l].transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      ConstMatrixMap w(params.data() + layout.weight_offset(l), out, in);
      Matrix back(in, delta.cols());
      back.noalias() = w.transpose() * delta;
      delta = (cache.pre[l - 1].array() > 0.0).select(back, 0.0);
    }
  }
}

void orthogonal_init(const MlpLayout& layout, Eigen::Ref<Vector> params,
                     double output_gain, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < layout.num_layers(); ++l) {
    const int in = layout.widths()[l];
    const int out = layout.widths()[l + 1];
    const int rows = std::max(in, out);
    const int cols = std::min(in, out);
    Matrix g(rows, cols);
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    // Sign fix makes the result uniformly distributed over orthogonal
    // matrices.
    const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (int j = 0; j < cols; ++j) {
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    const bool hidden = l + 1 < layout.num_layers();
    const double gain = hidden ? std::sqrt(2.0) : output_gain;
    MatrixMap w(params.data() + layout.weight_offset(l), out, in);
    if (out >= in) {
      w = gain * q;
    } else {
      w = gain * q.transpose();
    }
    Eigen::Map<Vector>(params.data() + layout.bias_offset(l), out).setZero();
  }
}

PolicyNet PolicyNet::create(const std::vector<int>& hidden,
                            double log_std_init, Rng& rng) {
  std::vector<int> widths{kObservationSize};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  PolicyNet net{MlpLayout(widths), Vector()};
  net.params = Vector::Zero(net.layout.num_params() + 1);
  orthogonal_init(net.layout, net.params, 0.01, rng);
  net.params[net.params.size() - 1] = log_std_init;
  return net;
}

double PolicyNet::log_std() const {
  return std::clamp(raw_log_std(), kLogStdMin, kLogStdMax);
}

double PolicyNet::std() const { return std::exp(log_std()); }

bool PolicyNet::log_std_active() const {
  const double ls = raw_log_std();
  return ls >= kLogStdMin && ls <= kLogStdMax;
}

CriticNet CriticNet::create(const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> widths{kObservationSize};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2);
  CriticNet net{MlpLayout(widths), Vector()};
  net.params = Vector::Zero(net.layout.num_params());
  orthogonal_init(net.layout, net.params, 1.0, rng);
  return net;
}

Matrix observation_matrix(std::span<const Observation> observations) {
  Matrix x(kObservationSize, static_cast<Eigen::Index>(observations.size()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Observation& o = observations[static_cast<std::size_t>(i)];
    x(0, i) = o.q1;
    x(1, i) = o.q2;
    x(2, i) = o.qd1;
    x(3, i) = o.qd2;
  }
  return x;
}

GaussianParams policy_forward(const PolicyNet& net, const Observation& obs) {
  const Matrix x = observation_matrix(std::span(&obs, 1));
  const Matrix mean = mlp_forward(net.layout, net.params, x);
  return {mean(0, 0), net.std()};
}

RowVector policy_mean_batch(const PolicyNet& net, const Matrix& obs,
                            MlpCache* cache) {
  return mlp_forward(net.layout, net.params, obs, cache).row(0);
}

CriticHeads critic_forward(const CriticNet& net, const Observation& obs) {
  const Matrix x = observation_matrix(std::span(&obs, 1));
  const Matrix v = mlp_forward(net.layout, net.params, x);
  return {v(0, 0), v(1, 0)};
}

Matrix critic_forward_batch(const CriticNet& net, const Matrix& obs,
                            MlpCache* cache) {
  return mlp_forward(net.layout, net.params, obs, cache);
}

Vector policy_backward(const PolicyNet& net, const MlpCache& cache,
                       const RowVector& d_mean, double d_log_std) {
  Vector grad = Vector::Zero(net.params.size());
  mlp_backward(net.layout, net.params, cache, d_mean, grad);
  grad[grad.size() - 1] = net.log_std_active() ? d_log_std : 0.0;
  return grad;
}

Vector critic_backward(const CriticNet& net, const MlpCache& cache,
                       const Matrix& d_heads) {
  Vector grad = Vector::Zero(net.params.size());
  mlp_backward(net.layout, net.params, cache, d_heads, grad);
  return grad;
}

ActionSample sample_action(double mean, double std, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double z = mean + std * normal(rng);
  double action = std::tanh(z);
  if (std::abs(action) > kActionBound) {
    action = clamp_action(action);
    z = std::atanh(action);
  }
  return {action, squashed_log_density(z, mean, std)};
}

double log_prob(double mean, double std, double action) {
  const double a = clamp_action(action);
  return squashed_log_density(std::atanh(a), mean, std);
}

LogProbGrad log_prob_grad(double mean, double std, double action) {
  const double z = std::atanh(clamp_action(action));
  const double u = (z - mean) / std;
  return {u / std, u * u - 1.0};
}

AdamState AdamState::zeros(Eigen::Index n) {
  AdamState s;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  return s;
}

void adam_update(Vector& params, const Vector& grads, AdamState& state,
                 double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractViolation("adam_update: shape mismatch");
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v +
            (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + state.eps);
}

double clip_grad_norm(std::span<Vector* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Vector* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Vector* g : grads) *g *= scale;
  }
  return norm;
}

}  // namespace eapo
