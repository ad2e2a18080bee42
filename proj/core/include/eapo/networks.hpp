#ifndef EAPO_NETWORKS_HPP_
#define EAPO_NETWORKS_HPP_

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "eapo/environment.hpp"
#include "eapo/rng.hpp"

namespace eapo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Fully connected network shape: widths = {input, hidden..., output}. ReLU on
// hidden layers, identity on the output. Parameters live in one flat vector,
// layer by layer, each layer as a column-major (out x in) weight block
// followed by its bias.
class MlpLayout {
 public:
  MlpLayout() = default;
  explicit MlpLayout(std::vector<int> widths);

  const std::vector<int>& widths() const { return widths_; }
  int num_layers() const { return static_cast<int>(widths_.size()) - 1; }
  int input_size() const { return widths_.front(); }
  int output_size() const { return widths_.back(); }
  Eigen::Index num_params() const { return num_params_; }
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] +
           static_cast<Eigen::Index>(widths_[layer]) * widths_[layer + 1];
  }

  friend bool operator==(const MlpLayout& a, const MlpLayout& b) {
    return a.widths_ == b.widths_;
  }

 private:
  std::vector<int> widths_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index num_params_ = 0;
};

// Activations kept for the backward pass. post[0] is the input batch.
struct MlpCache {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

// x is (input x batch). Returns (output x batch). Only the first
// layout.num_params() entries of params are read.
Matrix mlp_forward(const MlpLayout& layout,
                   Eigen::Ref<const Vector> params, const Matrix& x,
                   MlpCache* cache = nullptr);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(output). The ReLU
// subgradient at 0 is 0. Throws ContractViolation on shape mismatch.
void mlp_backward(const MlpLayout& layout, Eigen::Ref<const Vector> params,
                  const MlpCache& cache, const Matrix& upstream,
                  Eigen::Ref<Vector> grad);

enum class InitGain { Hidden, PolicyOutput, ValueOutput };

// Orthogonal initialization: hidden layers gain sqrt(2), policy mean output
// 0.01, value outputs 1.0, zero biases.
void orthogonal_init(const MlpLayout& layout, Eigen::Ref<Vector> params,
                     double output_gain, Rng& rng);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kActionBound = 1.0 - 1e-7;

// Squashed Gaussian policy: mean from an MLP, state-independent log-std
// stored as the last entry of params.
struct PolicyNet {
  MlpLayout layout;
  Vector params;

  static PolicyNet create(const std::vector<int>& hidden, double log_std_init,
                          Rng& rng);
  double raw_log_std() const { return params[params.size() - 1]; }
  double log_std() const;
  double std() const;
  // True when the log-std sits inside the clamp range (gradient flows).
  bool log_std_active() const;
};

// Bias-value critic with two heads: row 0 is v_r, row 1 is v_e.
struct CriticNet {
  MlpLayout layout;
  Vector params;

  static CriticNet create(const std::vector<int>& hidden, Rng& rng);
};

struct GaussianParams {
  double mean = 0.0;
  double std = 1.0;
};

struct CriticHeads {
  double v_r = 0.0;
  double v_e = 0.0;
};

// Packs observations column-wise into a (4 x n) matrix.
Matrix observation_matrix(std::span<const Observation> observations);

GaussianParams policy_forward(const PolicyNet& net, const Observation& obs);
RowVector policy_mean_batch(const PolicyNet& net, const Matrix& obs,
                            MlpCache* cache = nullptr);

CriticHeads critic_forward(const CriticNet& net, const Observation& obs);
Matrix critic_forward_batch(const CriticNet& net, const Matrix& obs,
                            MlpCache* cache = nullptr);

// Gradient of a loss w.r.t. all policy parameters (log-std included) given
// d(loss)/d(mean) per sample and d(loss)/d(log_std) summed over the batch.
Vector policy_backward(const PolicyNet& net, const MlpCache& cache,
                       const RowVector& d_mean, double d_log_std);
// d_heads is (2 x batch).
Vector critic_backward(const CriticNet& net, const MlpCache& cache,
                       const Matrix& d_heads);

struct ActionSample {
  double action = 0.0;    // in (-1, 1)
  double log_prob = 0.0;  // squashed-Gaussian log density of action
};

// z ~ N(mean, std), action = tanh(z), with the change-of-variables term.
// Actions are kept strictly inside +-kActionBound.
ActionSample sample_action(double mean, double std, Rng& rng);

// Log density of the squashed Gaussian at action (clamped inward to
// +-kActionBound).
double log_prob(double mean, double std, double action);

struct LogProbGrad {
  double d_mean = 0.0;
  double d_log_std = 0.0;
};
// Partial derivatives of log_prob with respect to mean and log-std.
LogProbGrad log_prob_grad(double mean, double std, double action);

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n);
};

void adam_update(Vector& params, const Vector& grads, AdamState& state,
                 double lr);

// Scales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
double clip_grad_norm(std::span<Vector* const> grads, double max_norm);

}  // namespace eapo

#endif  // EAPO_NETWORKS_HPP_
