#include "tabsurv/nn.hpp"

#include <algorithm>
#include <cmath>

namespace tabsurv {

namespace {
constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Matrix& ParameterStore::create(const std::string& name, std::size_t rows, std::size_t cols) {
  auto [it, inserted] = entries_.try_emplace(name);
  if (!inserted) throw ValidationError("ParameterStore: duplicate parameter '" + name + "'");
  it->second.value = Matrix(rows, cols);
  it->second.grad = Matrix(rows, cols);
  return it->second.value;
}

Param& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("ParameterStore: unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("ParameterStore: unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grads() {
  for (auto& [name, p] : entries_) p.grad.fill(0.0);
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value.size();
  return n;
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "silu") return Activation::SiLU;
  if (s == "selu") return Activation::SELU;
  throw ValidationError("unknown activation '" + s + "'");
}

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::SiLU: return "silu";
    case Activation::SELU: return "selu";
  }
  throw ValidationError("bad activation enum");
}

Matrix activation_forward(Activation kind, const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) {
    switch (kind) {
      case Activation::ReLU:
        v = v > 0.0 ? v : 0.0;
        break;
      case Activation::SiLU:
        v = v * sigmoid(v);
        break;
      case Activation::SELU:
        v = v > 0.0 ? kSeluLambda * v : kSeluLambda * kSeluAlpha * std::expm1(v);
        break;
    }
  }
  return y;
}

Matrix activation_backward(Activation kind, const Matrix& x, const Matrix& grad_out) {
  if (x.rows() != grad_out.rows() || x.cols() != grad_out.cols())
    throw ValidationError("activation_backward: shape mismatch");
  Matrix gx = grad_out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x.data()[i];
    double d = 0.0;
    switch (kind) {
      case Activation::ReLU:
        d = v > 0.0 ? 1.0 : 0.0;  // subgradient at 0 is 0
        break;
      case Activation::SiLU: {
        double s = sigmoid(v);
        d = s * (1.0 + v * (1.0 - s));
        break;
      }
      case Activation::SELU:
        d = v > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(v);
        break;
    }
    gx.data()[i] *= d;
  }
  return gx;
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double softplus_derivative(double x) { return sigmoid(x); }

double softplus_inverse(double y) {
  if (y > 30.0) return y;
  if (y <= 0.0) throw ValidationError("softplus_inverse: argument must be positive");
  return std::log(std::expm1(y));
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* in = logits.row_ptr(r);
    double* out = p.row_ptr(r);
    double mx = in[0];
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out[c] /= sum;
  }
  return p;
}

Matrix softmax_backward(const Matrix& p, const Matrix& grad_p) {
  if (p.rows() != grad_p.rows() || p.cols() != grad_p.cols())
    throw ValidationError("softmax_backward: shape mismatch");
  Matrix gl(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double* pr = p.row_ptr(r);
    const double* gr = grad_p.row_ptr(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) dot += pr[c] * gr[c];
    double* out = gl.row_ptr(r);
    for (std::size_t c = 0; c < p.cols(); ++c) out[c] = pr[c] * (gr[c] - dot);
  }
  return gl;
}

Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != w.cols())
    throw ValidationError("linear_forward: bias shape mismatch");
  Matrix y = matmul(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double* row = y.row_ptr(r);
    const double* b = bias.row_ptr(0);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += b[c];
  }
  return y;
}

void linear_backward(const Matrix& grad_out, const Matrix& x, const Matrix& w, Matrix* grad_x,
                     Matrix* grad_w, Matrix* grad_bias) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != w.cols())
    throw ValidationError("linear_backward: shape mismatch");
  if (grad_x) *grad_x = matmul_bt(grad_out, w);
  if (grad_w) {
    if (grad_w->empty()) *grad_w = Matrix(w.rows(), w.cols());
    add_at_b(x, grad_out, *grad_w);
  }
  if (grad_bias) {
    if (grad_bias->empty()) *grad_bias = Matrix(1, grad_out.cols());
    for (std::size_t r = 0; r < grad_out.rows(); ++r) {
      const double* row = grad_out.row_ptr(r);
      double* b = grad_bias->row_ptr(0);
      for (std::size_t c = 0; c < grad_out.cols(); ++c) b[c] += row[c];
    }
  }
}

Matrix layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& shift,
                          LayerNormCache& cache) {
  constexpr double kEps = 1e-5;
  const std::size_t d = x.cols();
  cache.xhat = Matrix(x.rows(), d);
  cache.inv_std.assign(x.rows(), 0.0);
  Matrix y(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* in = x.row_ptr(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kEps);
    cache.inv_std[r] = inv;
    double* xh = cache.xhat.row_ptr(r);
    double* out = y.row_ptr(r);
    for (std::size_t c = 0; c < d; ++c) {
      xh[c] = (in[c] - mean) * inv;
      out[c] = gain(0, c) * xh[c] + shift(0, c);
    }
  }
  return y;
}

void layer_norm_backward(const Matrix& grad_out, const Matrix& gain, const LayerNormCache& cache,
                         Matrix* grad_x, Matrix* grad_gain, Matrix* grad_shift) {
  const std::size_t d = grad_out.cols();
  const double dn = static_cast<double>(d);
  if (grad_x) *grad_x = Matrix(grad_out.rows(), d);
  if (grad_gain && grad_gain->empty()) *grad_gain = Matrix(1, d);
  if (grad_shift && grad_shift->empty()) *grad_shift = Matrix(1, d);
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    const double* g = grad_out.row_ptr(r);
    const double* xh = cache.xhat.row_ptr(r);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double gh = g[c] * gain(0, c);
      sum_g += gh;
      sum_gx += gh * xh[c];
      if (grad_gain) (*grad_gain)(0, c) += g[c] * xh[c];
      if (grad_shift) (*grad_shift)(0, c) += g[c];
    }
    if (grad_x) {
      double* out = grad_x->row_ptr(r);
      for (std::size_t c = 0; c < d; ++c) {
        double gh = g[c] * gain(0, c);
        out[c] = cache.inv_std[r] * (gh - sum_g / dn - xh[c] * sum_gx / dn);
      }
    }
  }
}

Matrix dropout_forward(const Matrix& x, double rate, bool training, std::mt19937_64& rng,
                       Matrix& mask) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) {
    mask = Matrix();
    return x;
  }
  mask = Matrix(x.rows(), x.cols());
  Matrix y = x;
  const double scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double keep = unif(rng) >= rate ? scale : 0.0;
    mask.data()[i] = keep;
    y.data()[i] *= keep;
  }
  return y;
}

Matrix dropout_backward(const Matrix& grad_out, const Matrix& mask) {
  if (mask.empty()) return grad_out;
  Matrix g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= mask.data()[i];
  return g;
}

void AdamState::step(ParameterStore& params) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params.entries()) {
    auto [it, inserted] = moments_.try_emplace(name);
    if (inserted) {
      it->second.first = Matrix(p.value.rows(), p.value.cols());
      it->second.second = Matrix(p.value.rows(), p.value.cols());
    }
    Matrix& m = it->second.first;
    Matrix& v = it->second.second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad.data()[i];
      if (!std::isfinite(g))
        throw ValidationError("adam_step: non-finite gradient in parameter '" + name + "'");
      m.data()[i] = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * g;
      v.data()[i] = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = m.data()[i] / bc1;
      double vhat = v.data()[i] / bc2;
      p.value.data()[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.grad.fill(0.0);
  }
}

Mlp::Mlp(std::string prefix, MlpConfig cfg) : prefix_(std::move(prefix)), cfg_(cfg) {
  if (cfg_.n_blocks < 0) throw ValidationError("Mlp: negative block count");
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0)
    throw ValidationError("Mlp: dropout rate must be in [0,1)");
}

void Mlp::register_params(ParameterStore& ps) const {
  std::size_t in = cfg_.in_dim;
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    std::string base = prefix_ + "block" + std::to_string(b) + ".";
    ps.create(base + "W", in, cfg_.hidden);
    ps.create(base + "b", 1, cfg_.hidden);
    if (cfg_.layer_norm) {
      ps.create(base + "ln_gain", 1, cfg_.hidden);
      ps.create(base + "ln_shift", 1, cfg_.hidden);
    }
    in = cfg_.hidden;
  }
  ps.create(prefix_ + "out.W", in, cfg_.out_dim);
  ps.create(prefix_ + "out.b", 1, cfg_.out_dim);
}

void Mlp::init_params(ParameterStore& ps, std::mt19937_64& rng) const {
  register_params(ps);
  std::size_t in = cfg_.in_dim;
  auto kaiming = [&](Matrix& w, std::size_t fan_in) {
    double s = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> unif(-s, s);
    for (double& v : w.data()) v = unif(rng);
  };
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    std::string base = prefix_ + "block" + std::to_string(b) + ".";
    kaiming(ps.at(base + "W").value, in);
    if (cfg_.layer_norm) ps.at(base + "ln_gain").value.fill(1.0);
    in = cfg_.hidden;
  }
  kaiming(ps.at(prefix_ + "out.W").value, in);
}

Matrix Mlp::forward(const Matrix& x, const ParameterStore& ps, bool training,
                    std::mt19937_64& rng, MlpCache& cache) const {
  if (x.cols() != cfg_.in_dim)
    throw ValidationError("Mlp::forward: input has " + std::to_string(x.cols()) +
                          " features, expected " + std::to_string(cfg_.in_dim));
  cache.lin_in.clear();
  cache.ln.clear();
  cache.act_in.clear();
  cache.drop_mask.clear();
  Matrix h = x;
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    std::string base = prefix_ + "block" + std::to_string(b) + ".";
    cache.lin_in.push_back(h);
    h = linear_forward(h, ps.at(base + "W").value, ps.at(base + "b").value);
    if (cfg_.layer_norm) {
      LayerNormCache lnc;
      h = layer_norm_forward(h, ps.at(base + "ln_gain").value, ps.at(base + "ln_shift").value,
                             lnc);
      cache.ln.push_back(std::move(lnc));
    }
    cache.act_in.push_back(h);
    h = activation_forward(cfg_.act, h);
    Matrix mask;
    h = dropout_forward(h, cfg_.dropout, training, rng, mask);
    cache.drop_mask.push_back(std::move(mask));
  }
  cache.lin_in.push_back(h);
  return linear_forward(h, ps.at(prefix_ + "out.W").value, ps.at(prefix_ + "out.b").value);
}

Matrix Mlp::backward(const Matrix& grad_out, ParameterStore& ps, const MlpCache& cache) const {
  Matrix g;
  {
    Param& w = ps.at(prefix_ + "out.W");
    Param& b = ps.at(prefix_ + "out.b");
    linear_backward(grad_out, cache.lin_in.back(), w.value, &g, &w.grad, &b.grad);
  }
  for (int b = cfg_.n_blocks - 1; b >= 0; --b) {
    std::string base = prefix_ + "block" + std::to_string(b) + ".";
    g = dropout_backward(g, cache.drop_mask[static_cast<std::size_t>(b)]);
    g = activation_backward(cfg_.act, cache.act_in[static_cast<std::size_t>(b)], g);
    if (cfg_.layer_norm) {
      Param& gain = ps.at(base + "ln_gain");
      Param& shift = ps.at(base + "ln_shift");
      Matrix gx;
      layer_norm_backward(g, gain.value, cache.ln[static_cast<std::size_t>(b)], &gx, &gain.grad,
                          &shift.grad);
      g = std::move(gx);
    }
    Param& w = ps.at(base + "W");
    Param& bias = ps.at(base + "b");
    Matrix gx;
    linear_backward(g, cache.lin_in[static_cast<std::size_t>(b)], w.value, &gx, &w.grad,
                    &bias.grad);
    g = std::move(gx);
  }
  return g;
}

GradCheckReport gradient_check(const std::function<double()>& loss_fn, ParameterStore& params,
                               double h, double tol, std::size_t max_coords, std::uint64_t seed) {
  // Snapshot analytic gradients; loss_fn evaluations must not rely on them.
  struct Coord {
    std::string name;
    std::size_t idx;
    double analytic;
  };
  std::vector<Coord> coords;
  for (const auto& [name, p] : params.entries())
    for (std::size_t i = 0; i < p.value.size(); ++i) coords.push_back({name, i, p.grad.data()[i]});

  std::mt19937_64 rng(seed);
  if (coords.size() > max_coords) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  GradCheckReport report;
  for (const Coord& c : coords) {
    double& v = params.at(c.name).value.data()[c.idx];
    const double orig = v;
    v = orig + h;
    double lp = loss_fn();
    v = orig - h;
    double lm = loss_fn();
    v = orig;
    double fd = (lp - lm) / (2.0 * h);
    double denom = std::max(std::fabs(fd) + std::fabs(c.analytic), 1e-4);
    double rel = std::fabs(fd - c.analytic) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = c.name + "[" + std::to_string(c.idx) + "]";
    }
  }
  report.n_checked = coords.size();
  report.pass = report.max_rel_error < tol;
  return report;
}

}  // namespace tabsurv
