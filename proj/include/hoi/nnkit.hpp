#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "hoi/common.hpp"

namespace hoi::nnkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { kTanh, kRelu };
enum class OutputHead { kLinear, kGaussian, kTanhGaussian };

std::string to_string(Activation a);
std::string to_string(OutputHead h);
Activation activation_from_string(const std::string& s);
OutputHead head_from_string(const std::string& s);

// Raw log-std outputs of gaussian heads are clamped to this range.
constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;

// Feed-forward network description. `output_dim` is the semantic output
// size (action or value dimension); gaussian heads emit 2*output_dim rows
// (means followed by clamped log-stds).
struct NetSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::kTanh;
  OutputHead head = OutputHead::kLinear;

  int output_rows() const;
  int layer_count() const;  // hidden layers + output layer
  // Width of layer l's input/output in the chain input -> hidden -> out rows.
  int layer_in(int l) const;
  int layer_out(int l) const;
  std::int64_t param_count() const;
  void validate() const;  // throws ConfigError on bad dims
  bool operator==(const NetSpec& other) const;
};

struct LayerLayout {
  std::int64_t w_offset = 0;  // row-major (out x in) weight block
  std::int64_t b_offset = 0;
  int in = 0;
  int out = 0;
};

// Flat parameter vector plus the matching gradient buffer. `revision` is
// bumped on every in-place update so forward caches can detect staleness.
struct ParamSet {
  std::vector<double> values;
  std::vector<double> grads;
  std::vector<LayerLayout> layout;
  std::uint64_t revision = 0;

  void zero_grads();
  void check_finite(const std::string& what) const;
};

ParamSet make_params(const NetSpec& spec);                 // zero-initialized
ParamSet make_params(const NetSpec& spec, Rng& rng);       // Xavier-uniform
// Sets the output-layer bias of every log-std row (gaussian heads).
void set_log_std_bias(const NetSpec& spec, ParamSet& params, double value);

// Activations cached during a forward pass, consumed by net_backward.
struct ForwardCache {
  MatrixXd input;                  // input_dim x batch
  std::vector<MatrixXd> pre;       // per layer, pre-activation
  std::vector<MatrixXd> act;       // per hidden layer, post-activation
  MatrixXd raw_out;                // output rows before head clamping
  MatrixXd out;
  std::uint64_t revision = 0;
  bool valid = false;
};

// Batched forward pass; columns are independent samples.
const MatrixXd& net_forward(const NetSpec& spec, const ParamSet& params,
                            const MatrixXd& input, ForwardCache& cache);
VectorXd net_forward(const NetSpec& spec, const ParamSet& params,
                     const VectorXd& input);

// Exact reverse-mode gradients of sum_b out(:,b) . out_grad(:,b) with
// respect to all parameters (written into params.grads) and the input
// (returned). Throws ContractError if the cache does not match params.
MatrixXd net_backward(const NetSpec& spec, ParamSet& params,
                      const ForwardCache& cache, const MatrixXd& out_grad);

// ---------------------------------------------------------------- optimizer

// Adam state: first/second moment accumulators with bias correction.
struct OptState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

OptState make_opt(const ParamSet& params, double lr);
// Applies one Adam step of `grads` to `params`. Non-finite gradients abort
// with NumericalFault (never silently clamped).
void opt_step(ParamSet& params, const std::vector<double>& grads, OptState& opt);

// ---------------------------------------------------------------- grad check

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::int64_t worst_index = -1;
  bool pass = false;
};

// Central finite differences (h) on every parameter of the scalar function
// sum(net_forward(input)) against net_backward. Relative error uses
// |a-b| / max(1e-4, |a|+|b|), an absolute floor that keeps finite-difference
// noise on near-zero gradients from dominating.
GradCheckReport grad_check(const NetSpec& spec, const ParamSet& params,
                           const VectorXd& input, double tol,
                           double h = 1e-5);
// Same comparison against caller-supplied analytic gradients (used by the
// fault-injection tests).
GradCheckReport grad_check_against(const NetSpec& spec, const ParamSet& params,
                                   const VectorXd& input,
                                   const std::vector<double>& analytic,
                                   double tol, double h = 1e-5);

// ---------------------------------------------------------------- gaussian heads

// Splits gaussian-head output rows into mean / log-std views.
struct HeadView {
  VectorXd mean;
  VectorXd log_std;
};
HeadView split_head(const NetSpec& spec, const VectorXd& out);

struct GaussianSample {
  VectorXd action;    // tanh-squashed for kTanhGaussian
  VectorXd pre_tanh;  // raw gaussian draw z (equals action for kGaussian)
  double log_prob = 0.0;
};

GaussianSample sample_head(OutputHead head, const VectorXd& mean,
                           const VectorXd& log_std, Rng& rng);
// Density of the sample identified by its pre-squash value z.
double log_prob_head(OutputHead head, const VectorXd& mean,
                     const VectorXd& log_std, const VectorXd& pre_tanh);
// Deterministic action for evaluation (tanh(mean) for squashed heads).
VectorXd mean_action(OutputHead head, const VectorXd& mean);

// log(1 - tanh(z)^2) evaluated without catastrophic cancellation.
double log_one_minus_tanh_sq(double z);

// ---------------------------------------------------------------- checkpoints

// Binary parameter checkpoint, magic "IRNK". Byte layout documented in
// docs/checkpoint_format.md.
void save_net(const std::string& path, const NetSpec& spec,
              const ParamSet& params);
void load_net(const std::string& path, NetSpec& spec, ParamSet& params);

}  // namespace hoi::nnkit
