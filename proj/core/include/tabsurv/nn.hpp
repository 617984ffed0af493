#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tabsurv/matrix.hpp"

namespace tabsurv {

struct Param {
  Matrix value;
  Matrix grad;
};

/// Named parameter arrays with matching gradient buffers. Map order gives a
/// deterministic iteration order for the optimizer and serialization.
class ParameterStore {
 public:
  Matrix& create(const std::string& name, std::size_t rows, std::size_t cols);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  void zero_grads();
  std::size_t total_size() const;

  std::map<std::string, Param>& entries() { return entries_; }
  const std::map<std::string, Param>& entries() const { return entries_; }

 private:
  std::map<std::string, Param> entries_;
};

enum class Activation { ReLU, SiLU, SELU };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);

// -- elementwise ops ---------------------------------------------------------

Matrix activation_forward(Activation kind, const Matrix& x);
/// grad wrt x given the forward input x.
Matrix activation_backward(Activation kind, const Matrix& x, const Matrix& grad_out);

double softplus(double x);
double softplus_derivative(double x);  // sigmoid
double softplus_inverse(double y);

/// Row-wise stable softmax.
Matrix softmax(const Matrix& logits);
/// grad wrt logits given probabilities p and grad wrt p.
Matrix softmax_backward(const Matrix& p, const Matrix& grad_p);

// -- layers ------------------------------------------------------------------

Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& bias);
void linear_backward(const Matrix& grad_out, const Matrix& x, const Matrix& w, Matrix* grad_x,
                     Matrix* grad_w, Matrix* grad_bias);

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};
Matrix layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& shift,
                          LayerNormCache& cache);
void layer_norm_backward(const Matrix& grad_out, const Matrix& gain, const LayerNormCache& cache,
                         Matrix* grad_x, Matrix* grad_gain, Matrix* grad_shift);

/// Inverted-scaling dropout; identity in eval mode. Mask entries are 0 or
/// 1/(1-rate).
Matrix dropout_forward(const Matrix& x, double rate, bool training, std::mt19937_64& rng,
                       Matrix& mask);
Matrix dropout_backward(const Matrix& grad_out, const Matrix& mask);

// -- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}
  /// Applies one Adam update to every parameter, then zeroes gradients.
  /// Throws naming the parameter if any gradient is non-finite.
  void step(ParameterStore& params);
  long step_count() const { return step_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

// -- MLP backbone ------------------------------------------------------------

struct MlpConfig {
  std::size_t in_dim = 0;
  std::size_t hidden = 128;
  std::size_t out_dim = 1;
  int n_blocks = 2;
  Activation act = Activation::ReLU;
  bool layer_norm = false;
  double dropout = 0.0;
};

struct MlpCache {
  std::vector<Matrix> lin_in;
  std::vector<LayerNormCache> ln;
  std::vector<Matrix> act_in;
  std::vector<Matrix> drop_mask;
};

/// Stacked blocks (linear -> [layer_norm] -> activation -> [dropout]) followed
/// by a final linear projection. Parameters live in an external
/// ParameterStore under this MLP's name prefix.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, MlpConfig cfg);

  void init_params(ParameterStore& ps, std::mt19937_64& rng) const;
  void register_params(ParameterStore& ps) const;  // zero-initialized (for loading)

  Matrix forward(const Matrix& x, const ParameterStore& ps, bool training, std::mt19937_64& rng,
                 MlpCache& cache) const;
  /// Accumulates parameter gradients; returns grad wrt the input.
  Matrix backward(const Matrix& grad_out, ParameterStore& ps, const MlpCache& cache) const;

  const std::string& prefix() const { return prefix_; }
  const MlpConfig& config() const { return cfg_; }

 private:
  std::string prefix_;
  MlpConfig cfg_;
};

// -- gradient checking -------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t n_checked = 0;
  bool pass = false;
};

/// Central finite differences on a random subsample of <= max_coords
/// coordinates. `loss_fn` must recompute the loss from the current parameter
/// values; analytic gradients must already be stored in `params`.
GradCheckReport gradient_check(const std::function<double()>& loss_fn, ParameterStore& params,
                               double h, double tol, std::size_t max_coords = 200,
                               std::uint64_t seed = 0);

}  // namespace tabsurv
