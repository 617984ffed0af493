#include "tabsurv/model.hpp"

#include <algorithm>
#include <cmath>

namespace tabsurv {

HeadKind head_from_string(const std::string& s) {
  if (s == "ls") return HeadKind::LS;
  if (s == "las") return HeadKind::LAS;
  if (s == "wsa") return HeadKind::WSA;
  if (s == "was") return HeadKind::WAS;
  throw ValidationError("unknown head kind '" + s + "'");
}

std::string head_to_string(HeadKind h) {
  switch (h) {
    case HeadKind::LS: return "ls";
    case HeadKind::LAS: return "las";
    case HeadKind::WSA: return "wsa";
    case HeadKind::WAS: return "was";
  }
  throw ValidationError("bad head enum");
}

bool is_weibull_head(HeadKind h) { return h == HeadKind::WSA || h == HeadKind::WAS; }

double weibull_cdf(double t, const WeibullParams& p) {
  if (t <= 0.0) return 0.0;
  double a = p.k * std::log(t / p.lambda);
  a = std::min(a, 700.0);
  double z = std::exp(a);
  return -std::expm1(-z);
}

void weibull_probs_grad(const WeibullParams& params, const TimeGrid& grid,
                        std::vector<double>* p, std::vector<double>* dp_dlambda,
                        std::vector<double>* dp_dk) {
  const std::size_t m = grid.m();
  if (!(params.lambda > 0.0) || !(params.k > 0.0) || !std::isfinite(params.lambda) ||
      !std::isfinite(params.k))
    throw ValidationError("weibull_discretize: parameters must be positive and finite");

  // G_i = F(tau_{i+1}) for i < m, G_m = 1. With the pre-tau_1 mass folded into
  // bin 1, p_i is the difference of consecutive G values.
  std::vector<double> g(m, 1.0), dgl(m, 0.0), dgk(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    double t = grid.taus[i + 1];
    double lg = std::log(t / params.lambda);
    double a = std::min(params.k * lg, 700.0);
    double z = std::exp(a);
    double f = -std::expm1(-z);
    if (!std::isfinite(f)) throw ValidationError("weibull_discretize: non-finite CDF value");
    g[i] = f;
    double ez_z = std::exp(a - z);  // exp(-z) * z, stable for large z
    dgl[i] = -ez_z * params.k / params.lambda;
    dgk[i] = ez_z * lg;
  }
  if (p) {
    p->assign(m, 0.0);
    double prev = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      (*p)[i] = std::max(0.0, g[i] - prev);
      prev = g[i];
    }
  }
  if (dp_dlambda) {
    dp_dlambda->assign(m, 0.0);
    double prev = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      (*dp_dlambda)[i] = dgl[i] - prev;
      prev = dgl[i];
    }
  }
  if (dp_dk) {
    dp_dk->assign(m, 0.0);
    double prev = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      (*dp_dk)[i] = dgk[i] - prev;
      prev = dgk[i];
    }
  }
}

DiscreteSurvival weibull_discretize(const WeibullParams& params, const TimeGrid& grid) {
  std::vector<double> p;
  weibull_probs_grad(params, grid, &p, nullptr, nullptr);
  DiscreteSurvival out = probs_to_survival(p);
  // Overwrite the survival values with the closed form S_i = exp(-(tau_{i+1}/lambda)^k):
  // differencing the CDF and re-summing costs an ulp of 1.0 per bin, which
  // dominates when the tail survival itself is tiny.
  for (std::size_t i = 0; i + 1 < grid.m(); ++i) {
    double a = std::min(params.k * std::log(grid.taus[i + 1] / params.lambda), 700.0);
    out.survival[i] = std::exp(-std::exp(a));
  }
  return out;
}

// -- PiecewiseLinearEmbedding ------------------------------------------------

void PiecewiseLinearEmbedding::fit(const Matrix& features,
                                   const std::vector<std::size_t>& numeric_cols, int bins,
                                   int emb_dim, bool use_activation) {
  if (bins < 1) throw ValidationError("embedding: bin count must be >= 1");
  if (emb_dim < 1) throw ValidationError("embedding: embedding dim must be >= 1");
  numeric_cols_ = numeric_cols;
  emb_dim_ = emb_dim;
  use_activation_ = use_activation;
  edges_.clear();
  for (std::size_t col : numeric_cols) {
    std::vector<double> vals(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) vals[r] = features(r, col);
    std::sort(vals.begin(), vals.end());
    std::vector<double> edges;
    for (int j = 0; j <= bins; ++j) {
      double q = static_cast<double>(j) / static_cast<double>(bins);
      std::size_t idx = static_cast<std::size_t>(
          std::llround(q * static_cast<double>(vals.size() - 1)));
      edges.push_back(vals[idx]);
    }
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (edges.size() < 2) {
      double v = edges.empty() ? 0.0 : edges[0];
      edges = {v - 0.5, v + 0.5};
    }
    edges_.push_back(std::move(edges));
  }
  passthrough_cols_.clear();
  for (std::size_t c = 0; c < features.cols(); ++c)
    if (std::find(numeric_cols.begin(), numeric_cols.end(), c) == numeric_cols.end())
      passthrough_cols_.push_back(c);
  n_passthrough_ = passthrough_cols_.size();
}

PiecewiseLinearEmbedding PiecewiseLinearEmbedding::from_parts(
    std::vector<std::vector<double>> edges, std::vector<std::size_t> numeric_cols,
    std::size_t n_features, int emb_dim, bool use_activation) {
  PiecewiseLinearEmbedding emb;
  emb.edges_ = std::move(edges);
  emb.numeric_cols_ = std::move(numeric_cols);
  emb.emb_dim_ = emb_dim;
  emb.use_activation_ = use_activation;
  for (std::size_t c = 0; c < n_features; ++c)
    if (std::find(emb.numeric_cols_.begin(), emb.numeric_cols_.end(), c) ==
        emb.numeric_cols_.end())
      emb.passthrough_cols_.push_back(c);
  emb.n_passthrough_ = emb.passthrough_cols_.size();
  return emb;
}

std::size_t PiecewiseLinearEmbedding::out_dim() const {
  return numeric_cols_.size() * static_cast<std::size_t>(emb_dim_) + n_passthrough_;
}

std::vector<double> PiecewiseLinearEmbedding::encode(std::size_t f, double x) const {
  const std::vector<double>& e = edges_.at(f);
  std::vector<double> c(e.size() - 1);
  for (std::size_t b = 0; b + 1 < e.size(); ++b) {
    if (x >= e[b + 1])
      c[b] = 1.0;
    else if (x <= e[b])
      c[b] = 0.0;
    else
      c[b] = (x - e[b]) / (e[b + 1] - e[b]);
  }
  return c;
}

void PiecewiseLinearEmbedding::register_params(ParameterStore& ps) const {
  for (std::size_t f = 0; f < numeric_cols_.size(); ++f) {
    std::size_t bins = edges_[f].size() - 1;
    ps.create("emb.f" + std::to_string(f) + ".W", bins, static_cast<std::size_t>(emb_dim_));
    ps.create("emb.f" + std::to_string(f) + ".b", 1, static_cast<std::size_t>(emb_dim_));
  }
}

void PiecewiseLinearEmbedding::init_params(ParameterStore& ps, std::mt19937_64& rng) const {
  register_params(ps);
  for (std::size_t f = 0; f < numeric_cols_.size(); ++f) {
    Matrix& w = ps.at("emb.f" + std::to_string(f) + ".W").value;
    double s = std::sqrt(6.0 / static_cast<double>(w.rows()));
    std::uniform_real_distribution<double> unif(-s, s);
    for (double& v : w.data()) v = unif(rng);
  }
}

Matrix PiecewiseLinearEmbedding::forward(const Matrix& features, const ParameterStore& ps,
                                         EmbeddingCache& cache) const {
  if (emb_dim_ == 0 && edges_.empty() && numeric_cols_.empty() && n_passthrough_ == 0)
    throw ValidationError("embedding: not fitted");
  const std::size_t n = features.rows();
  Matrix out(n, out_dim());
  cache.encodings.clear();
  cache.pre_act.clear();
  std::size_t pos = 0;
  for (std::size_t f = 0; f < numeric_cols_.size(); ++f) {
    const std::size_t bins = edges_[f].size() - 1;
    Matrix enc(n, bins);
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> c = encode(f, features(r, numeric_cols_[f]));
      std::copy(c.begin(), c.end(), enc.row_ptr(r));
    }
    const Matrix& w = ps.at("emb.f" + std::to_string(f) + ".W").value;
    const Matrix& b = ps.at("emb.f" + std::to_string(f) + ".b").value;
    Matrix block = linear_forward(enc, w, b);
    cache.encodings.push_back(std::move(enc));
    if (use_activation_) {
      cache.pre_act.push_back(block);
      block = activation_forward(Activation::ReLU, block);
    }
    for (std::size_t r = 0; r < n; ++r)
      std::copy(block.row_ptr(r), block.row_ptr(r) + block.cols(), out.row_ptr(r) + pos);
    pos += block.cols();
  }
  for (std::size_t j = 0; j < passthrough_cols_.size(); ++j) {
    for (std::size_t r = 0; r < n; ++r) out(r, pos + j) = features(r, passthrough_cols_[j]);
  }
  return out;
}

void PiecewiseLinearEmbedding::backward(const Matrix& grad_out, ParameterStore& ps,
                                        const EmbeddingCache& cache) const {
  const std::size_t n = grad_out.rows();
  std::size_t pos = 0;
  for (std::size_t f = 0; f < numeric_cols_.size(); ++f) {
    const std::size_t e = static_cast<std::size_t>(emb_dim_);
    Matrix g(n, e);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(grad_out.row_ptr(r) + pos, grad_out.row_ptr(r) + pos + e, g.row_ptr(r));
    if (use_activation_) g = activation_backward(Activation::ReLU, cache.pre_act[f], g);
    Param& w = ps.at("emb.f" + std::to_string(f) + ".W");
    Param& b = ps.at("emb.f" + std::to_string(f) + ".b");
    linear_backward(g, cache.encodings[f], w.value, nullptr, &w.grad, &b.grad);
    pos += e;
  }
  // passthrough columns carry no parameters
}

// -- EnsembleModel -----------------------------------------------------------

WeibullParams EnsembleModel::positive_weibull(double raw_lambda, double raw_k) {
  return {softplus(raw_lambda) + kWeibullFloor, softplus(raw_k) + kWeibullFloor};
}

EnsembleModel EnsembleModel::create(const ModelConfig& cfg, const Matrix& train_features,
                                    const std::vector<std::size_t>& numeric_cols,
                                    std::size_t m_bins, double median_event_time,
                                    std::uint64_t seed) {
  if (cfg.head == HeadKind::LS && cfg.ensemble != 1)
    throw ValidationError("LS head requires ensemble size 1");
  EnsembleModel model;
  model.cfg_ = cfg;
  model.m_bins_ = m_bins;
  model.embedding_.fit(train_features, numeric_cols, cfg.emb_bins, cfg.emb_dim,
                       cfg.emb_activation);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  model.embedding_.init_params(model.params_, rng);

  const std::size_t out_dim = is_weibull_head(cfg.head) ? 2 : m_bins;
  MlpConfig mcfg;
  mcfg.in_dim = model.embedding_.out_dim();
  mcfg.hidden = static_cast<std::size_t>(cfg.hidden);
  mcfg.out_dim = out_dim;
  mcfg.n_blocks = cfg.blocks;
  mcfg.act = cfg.act;
  mcfg.layer_norm = cfg.layer_norm;
  mcfg.dropout = cfg.dropout;
  for (int i = 0; i < cfg.ensemble; ++i) {
    Mlp member("member" + std::to_string(i) + ".", mcfg);
    member.init_params(model.params_, rng);
    if (is_weibull_head(cfg.head)) {
      // Start lambda near the median event time so early CDF values are not
      // saturated at 0 or 1.
      Matrix& bias = model.params_.at(member.prefix() + "out.b").value;
      bias(0, 0) = softplus_inverse(std::max(median_event_time, 1e-3));
      bias(0, 1) = softplus_inverse(1.0);
    }
    model.members_.push_back(std::move(member));
  }
  return model;
}

EnsembleModel EnsembleModel::from_structure(const ModelConfig& cfg,
                                            PiecewiseLinearEmbedding embedding,
                                            std::size_t m_bins) {
  EnsembleModel model;
  model.cfg_ = cfg;
  model.m_bins_ = m_bins;
  model.embedding_ = std::move(embedding);
  model.embedding_.register_params(model.params_);
  const std::size_t out_dim = is_weibull_head(cfg.head) ? 2 : m_bins;
  MlpConfig mcfg;
  mcfg.in_dim = model.embedding_.out_dim();
  mcfg.hidden = static_cast<std::size_t>(cfg.hidden);
  mcfg.out_dim = out_dim;
  mcfg.n_blocks = cfg.blocks;
  mcfg.act = cfg.act;
  mcfg.layer_norm = cfg.layer_norm;
  mcfg.dropout = cfg.dropout;
  for (int i = 0; i < cfg.ensemble; ++i) {
    Mlp member("member" + std::to_string(i) + ".", mcfg);
    member.register_params(model.params_);
    model.members_.push_back(std::move(member));
  }
  return model;
}

std::vector<Matrix> EnsembleModel::forward_members(const Matrix& features, bool training,
                                                   std::mt19937_64& rng, Cache& cache) const {
  cache.embedded = embedding_.forward(features, params_, cache.emb);
  cache.members.assign(members_.size(), MlpCache{});
  std::vector<Matrix> out;
  out.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i)
    out.push_back(members_[i].forward(cache.embedded, params_, training, rng, cache.members[i]));
  return out;
}

void EnsembleModel::backward_members(const std::vector<Matrix>& grad_raw, Cache& cache) {
  if (grad_raw.size() != members_.size())
    throw ValidationError("backward_members: gradient count mismatch");
  Matrix emb_grad(cache.embedded.rows(), cache.embedded.cols());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    Matrix g = members_[i].backward(grad_raw[i], params_, cache.members[i]);
    for (std::size_t j = 0; j < emb_grad.size(); ++j) emb_grad.data()[j] += g.data()[j];
  }
  embedding_.backward(emb_grad, params_, cache.emb);
}

std::vector<Matrix> EnsembleModel::raw_outputs(const Matrix& features,
                                               const TimeGrid& grid) const {
  if (!is_weibull_head(cfg_.head) && grid.m() != m_bins_)
    throw ValidationError("predict: grid has " + std::to_string(grid.m()) +
                          " bins, model outputs " + std::to_string(m_bins_));
  std::mt19937_64 rng(0);  // eval mode: dropout inactive, rng unused
  Cache cache;
  return forward_members(features, false, rng, cache);
}

std::vector<DiscreteSurvival> EnsembleModel::predict_ls(const Matrix& features,
                                                        const TimeGrid& grid) const {
  if (cfg_.head != HeadKind::LS) throw ValidationError("predict_ls: head is not LS");
  std::vector<Matrix> raw = raw_outputs(features, grid);
  Matrix p = softmax(raw[0]);
  std::vector<DiscreteSurvival> out;
  out.reserve(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r)
    out.push_back(probs_to_survival(std::vector<double>(p.row_ptr(r), p.row_ptr(r) + p.cols())));
  return out;
}

std::vector<DiscreteSurvival> EnsembleModel::predict_las(const Matrix& features,
                                                         const TimeGrid& grid) const {
  if (cfg_.head != HeadKind::LAS) throw ValidationError("predict_las: head is not LAS");
  std::vector<Matrix> raw = raw_outputs(features, grid);
  Matrix mean = raw[0];
  for (std::size_t i = 1; i < raw.size(); ++i)
    for (std::size_t j = 0; j < mean.size(); ++j) mean.data()[j] += raw[i].data()[j];
  for (double& v : mean.data()) v /= static_cast<double>(raw.size());
  Matrix p = softmax(mean);
  std::vector<DiscreteSurvival> out;
  out.reserve(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r)
    out.push_back(probs_to_survival(std::vector<double>(p.row_ptr(r), p.row_ptr(r) + p.cols())));
  return out;
}

std::vector<DiscreteSurvival> EnsembleModel::predict_wsa(const Matrix& features,
                                                         const TimeGrid& grid) const {
  if (cfg_.head != HeadKind::WSA) throw ValidationError("predict_wsa: head is not WSA");
  std::vector<Matrix> raw = raw_outputs(features, grid);
  const std::size_t n = features.rows();
  std::vector<DiscreteSurvival> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> mean_p(grid.m(), 0.0);
    for (const Matrix& member : raw) {
      WeibullParams wp = positive_weibull(member(r, 0), member(r, 1));
      std::vector<double> p;
      weibull_probs_grad(wp, grid, &p, nullptr, nullptr);
      for (std::size_t j = 0; j < p.size(); ++j) mean_p[j] += p[j];
    }
    for (double& v : mean_p) v /= static_cast<double>(raw.size());
    out.push_back(probs_to_survival(mean_p));
  }
  return out;
}

std::vector<DiscreteSurvival> EnsembleModel::predict_was(const Matrix& features,
                                                         const TimeGrid& grid) const {
  if (cfg_.head != HeadKind::WAS) throw ValidationError("predict_was: head is not WAS");
  std::vector<Matrix> raw = raw_outputs(features, grid);
  const std::size_t n = features.rows();
  std::vector<DiscreteSurvival> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    double lambda = 0.0, k = 0.0;
    for (const Matrix& member : raw) {
      WeibullParams wp = positive_weibull(member(r, 0), member(r, 1));
      lambda += wp.lambda;
      k += wp.k;
    }
    lambda /= static_cast<double>(raw.size());
    k /= static_cast<double>(raw.size());
    out.push_back(weibull_discretize({lambda, k}, grid));
  }
  return out;
}

std::vector<DiscreteSurvival> EnsembleModel::predict(const Matrix& features,
                                                     const TimeGrid& grid) const {
  switch (cfg_.head) {
    case HeadKind::LS: return predict_ls(features, grid);
    case HeadKind::LAS: return predict_las(features, grid);
    case HeadKind::WSA: return predict_wsa(features, grid);
    case HeadKind::WAS: return predict_was(features, grid);
  }
  throw ValidationError("predict: bad head");
}

}  // namespace tabsurv
