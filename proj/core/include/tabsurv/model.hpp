#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tabsurv/nn.hpp"
#include "tabsurv/timegrid.hpp"

namespace tabsurv {

enum class HeadKind { LS, LAS, WSA, WAS };

HeadKind head_from_string(const std::string& s);
std::string head_to_string(HeadKind h);
bool is_weibull_head(HeadKind h);

struct WeibullParams {
  double lambda = 1.0;  // scale
  double k = 1.0;       // shape
};

/// Weibull CDF F(t) = 1 - exp(-(t/lambda)^k).
double weibull_cdf(double t, const WeibullParams& p);

/// Discretizes a Weibull distribution onto the grid. The mass F(tau_1) below
/// the first grid point is folded into bin 1, so p sums to 1 and
/// S_i = 1 - F(tau_{i+1}) for i < m, S_m = 0.
DiscreteSurvival weibull_discretize(const WeibullParams& params, const TimeGrid& grid);

/// Same discretization plus d p_i / d lambda and d p_i / d k.
void weibull_probs_grad(const WeibullParams& params, const TimeGrid& grid,
                        std::vector<double>* p, std::vector<double>* dp_dlambda,
                        std::vector<double>* dp_dk);

struct ModelConfig {
  HeadKind head = HeadKind::LS;
  int blocks = 2;
  int hidden = 128;
  int ensemble = 1;  // member count; LS forces 1
  Activation act = Activation::ReLU;
  bool layer_norm = false;
  double dropout = 0.0;
  int emb_bins = 32;
  int emb_dim = 8;
  bool emb_activation = false;
};

struct EmbeddingCache {
  std::vector<Matrix> encodings;  // per numeric feature: n x bins_f
  std::vector<Matrix> pre_act;    // per numeric feature: n x emb_dim (when activated)
};

/// Piecewise-linear encoding of numeric features on quantile bin edges,
/// projected per feature to a learned embedding. One-hot columns bypass the
/// embedding and are concatenated unchanged.
class PiecewiseLinearEmbedding {
 public:
  void fit(const Matrix& features, const std::vector<std::size_t>& numeric_cols, int bins,
           int emb_dim, bool use_activation);
  bool fitted() const { return !edges_.empty() || emb_dim_ > 0; }

  void init_params(ParameterStore& ps, std::mt19937_64& rng) const;
  void register_params(ParameterStore& ps) const;

  /// Encoding of a single value for feature `f` (exposed for tests).
  std::vector<double> encode(std::size_t f, double x) const;

  /// features -> [embedded numerics | passthrough one-hots].
  Matrix forward(const Matrix& features, const ParameterStore& ps, EmbeddingCache& cache) const;
  /// Accumulates parameter gradients from the gradient wrt this layer's
  /// output. Inputs are data, so no input gradient is produced.
  void backward(const Matrix& grad_out, ParameterStore& ps, const EmbeddingCache& cache) const;

  std::size_t out_dim() const;
  std::size_t n_numeric() const { return numeric_cols_.size(); }
  const std::vector<std::size_t>& numeric_cols() const { return numeric_cols_; }
  const std::vector<std::vector<double>>& edges() const { return edges_; }
  int emb_dim() const { return emb_dim_; }
  bool use_activation() const { return use_activation_; }
  std::size_t n_passthrough() const { return n_passthrough_; }

  /// Reconstruction from serialized state.
  static PiecewiseLinearEmbedding from_parts(std::vector<std::vector<double>> edges,
                                             std::vector<std::size_t> numeric_cols,
                                             std::size_t n_features, int emb_dim,
                                             bool use_activation);

 private:
  std::vector<std::vector<double>> edges_;  // per numeric feature, bins_f + 1 edges
  std::vector<std::size_t> numeric_cols_;
  std::vector<std::size_t> passthrough_cols_;
  std::size_t n_passthrough_ = 0;
  int emb_dim_ = 0;
  bool use_activation_ = false;
};

/// Shared-embedding parallel ensemble with one of the four survival heads.
/// Member backbones own disjoint parameter sets; the embedding is shared and
/// receives the summed gradient of all member losses.
class EnsembleModel {
 public:
  struct Cache {
    EmbeddingCache emb;
    Matrix embedded;
    std::vector<MlpCache> members;
  };

  EnsembleModel() = default;

  static EnsembleModel create(const ModelConfig& cfg, const Matrix& train_features,
                              const std::vector<std::size_t>& numeric_cols, std::size_t m_bins,
                              double median_event_time, std::uint64_t seed);

  /// For deserialization: wires up structure with zero-initialized params.
  static EnsembleModel from_structure(const ModelConfig& cfg, PiecewiseLinearEmbedding embedding,
                                      std::size_t m_bins);

  std::vector<Matrix> forward_members(const Matrix& features, bool training,
                                      std::mt19937_64& rng, Cache& cache) const;
  void backward_members(const std::vector<Matrix>& grad_raw, Cache& cache);

  /// Head-specific prediction (eval mode). Each checks the configured head.
  std::vector<DiscreteSurvival> predict_ls(const Matrix& features, const TimeGrid& grid) const;
  std::vector<DiscreteSurvival> predict_las(const Matrix& features, const TimeGrid& grid) const;
  std::vector<DiscreteSurvival> predict_wsa(const Matrix& features, const TimeGrid& grid) const;
  std::vector<DiscreteSurvival> predict_was(const Matrix& features, const TimeGrid& grid) const;
  /// Dispatches on the configured head.
  std::vector<DiscreteSurvival> predict(const Matrix& features, const TimeGrid& grid) const;

  /// Per-row positive Weibull parameters from a member's raw outputs.
  static WeibullParams positive_weibull(double raw_lambda, double raw_k);

  const ModelConfig& config() const { return cfg_; }
  std::size_t member_count() const { return members_.size(); }
  std::size_t output_bins() const { return m_bins_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const PiecewiseLinearEmbedding& embedding() const { return embedding_; }
  const std::vector<Mlp>& members() const { return members_; }

 private:
  std::vector<Matrix> raw_outputs(const Matrix& features, const TimeGrid& grid) const;

  ModelConfig cfg_;
  PiecewiseLinearEmbedding embedding_;
  std::vector<Mlp> members_;
  ParameterStore params_;
  std::size_t m_bins_ = 0;
};

constexpr double kWeibullFloor = 1e-6;

}  // namespace tabsurv
