#include "qg2rom/lstm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/io.hpp"

namespace qg2rom {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

constexpr char kWeightsMagic[8] = {'Q', 'G', 'L', 'S', 'T', 'M', '0', '1'};

}  // namespace

void LstmConfig::validate() const {
  if (layers < 1) throw ConfigError("lstm: layers must be >= 1");
  if (cells < 1) throw ConfigError("lstm: cells must be >= 1");
  if (batch_size < 1) throw ConfigError("lstm: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("lstm: epochs must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("lstm: validation_fraction must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("lstm: learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("lstm: dropout must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("lstm: weight_decay must be non-negative");
  if (lookback < 1) throw ConfigError("lstm: lookback must be >= 1");
}

LstmConfig LstmConfig::q_defaults() { return LstmConfig{}; }

LstmConfig LstmConfig::psi_defaults() {
  LstmConfig c;
  c.layers = 3;
  c.cells = 50;
  c.batch_size = 16;
  c.dropout = 0.1;
  return c;
}

CellWeights::CellWeights(int hidden_, int input_dim_)
    : hidden(hidden_),
      input_dim(input_dim_),
      w(static_cast<std::size_t>(4 * hidden_) * (hidden_ + input_dim_), 0.0),
      b(static_cast<std::size_t>(4 * hidden_), 0.0) {}

CellTrace cell_forward(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const CellWeights& w) {
  const int H = w.hidden;
  if (static_cast<int>(x.size()) != w.input_dim || static_cast<int>(h_prev.size()) != H ||
      static_cast<int>(c_prev.size()) != H) {
    throw DomainError("cell_forward: input shapes do not match the cell weights");
  }
  const int cols = w.cols();
  CellTrace t;
  t.i.resize(H);
  t.f.resize(H);
  t.o.resize(H);
  t.g.resize(H);
  t.c.resize(H);
  t.h.resize(H);
  for (int gate = 0; gate < 4; ++gate) {
    for (int k = 0; k < H; ++k) {
      const int r = gate * H + k;
      const double* row = w.w.data() + static_cast<std::size_t>(r) * cols;
      double z = w.b[r];
      for (int m = 0; m < H; ++m) z += row[m] * h_prev[m];
      for (int m = 0; m < w.input_dim; ++m) z += row[H + m] * x[m];
      switch (gate) {
        case 0: t.i[k] = sigmoid(z); break;
        case 1: t.f[k] = sigmoid(z); break;
        case 2: t.o[k] = sigmoid(z); break;
        default: t.g[k] = std::tanh(z); break;
      }
    }
  }
  for (int k = 0; k < H; ++k) {
    t.c[k] = t.f[k] * c_prev[k] + t.i[k] * t.g[k];
    t.h[k] = t.o[k] * std::tanh(t.c[k]);
  }
  return t;
}

double Scaler::apply(std::size_t feature, double v) const {
  const double range = max[feature] - min[feature];
  if (range == 0.0) return 0.0;
  return 2.0 * (v - min[feature]) / range - 1.0;
}

double Scaler::invert(std::size_t feature, double v) const {
  const double range = max[feature] - min[feature];
  return min[feature] + (v + 1.0) * 0.5 * range;
}

WindowDataset build_windows(const CoefficientSeries& coeffs, int lookback) {
  if (lookback < 1) throw DomainError("build_windows: lookback must be >= 1");
  WindowDataset ds;
  ds.lookback = lookback;
  ds.n_coeffs = coeffs.n_r();
  ds.param_dim = coeffs.n_d() > 1 ? coeffs.params.front().size() : 0;
  ds.features = ds.param_dim + 1 + ds.n_coeffs;
  const std::size_t n_t = coeffs.n_t();
  const auto T = static_cast<std::size_t>(lookback);
  for (std::size_t d = 0; d < coeffs.n_d(); ++d) {
    if (n_t <= T) {
      throw DomainError("build_windows: parameter block " + std::to_string(d) + " has " +
                        std::to_string(n_t) + " steps, lookback needs more than " +
                        std::to_string(T));
    }
    for (std::size_t p = T - 1; p + 1 < n_t; ++p) {
      std::vector<double> in;
      in.reserve(T * ds.features);
      for (std::size_t r = 0; r < T; ++r) {
        const std::size_t pos = p - r;
        if (ds.param_dim) in.insert(in.end(), coeffs.params[d].begin(), coeffs.params[d].end());
        in.push_back(coeffs.times[pos]);
        auto col = coeffs.coeffs.col(d * n_t + pos);
        in.insert(in.end(), col.begin(), col.end());
      }
      auto next = coeffs.coeffs.col(d * n_t + p + 1);
      ds.inputs.push_back(std::move(in));
      ds.targets.emplace_back(next.begin(), next.end());
      ds.block.push_back(d);
      ds.position.push_back(p);
    }
  }
  return ds;
}

Scaler fit_scaler(const WindowDataset& data, std::span<const std::size_t> pairs) {
  if (pairs.empty()) throw DomainError("fit_scaler: empty dataset");
  Scaler s;
  s.min.assign(data.features, std::numeric_limits<double>::infinity());
  s.max.assign(data.features, -std::numeric_limits<double>::infinity());
  for (std::size_t idx : pairs) {
    const auto& in = data.inputs[idx];
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t f = k % data.features;
      s.min[f] = std::min(s.min[f], in[k]);
      s.max[f] = std::max(s.max[f], in[k]);
    }
  }
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double weight_decay, long long t) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g;
    state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    params[k] -= lr * weight_decay * params[k];
  }
}

LstmModel::LstmModel(const LstmConfig& config, std::size_t features, std::size_t n_coeffs,
                     std::size_t param_dim)
    : config_(config), features_(features), n_coeffs_(n_coeffs), param_dim_(param_dim) {
  config_.validate();
  if (features != param_dim + 1 + n_coeffs || n_coeffs == 0) {
    throw DomainError("lstm: inconsistent feature layout");
  }
  std::mt19937_64 rng(config_.seed);
  const int H = config_.cells;
  for (int l = 0; l < config_.layers; ++l) {
    CellWeights cw(H, l == 0 ? static_cast<int>(features) : H);
    const double a = 1.0 / std::sqrt(static_cast<double>(cw.cols()));
    for (double& v : cw.w) v = a * (2.0 * uniform01(rng) - 1.0);
    for (int k = 0; k < H; ++k) cw.b[H + k] = 1.0;
    layers_.push_back(std::move(cw));
  }
  head_w_.resize(n_coeffs * H);
  head_b_.assign(n_coeffs, 0.0);
  const double a = 1.0 / std::sqrt(static_cast<double>(H));
  for (double& v : head_w_) v = a * (2.0 * uniform01(rng) - 1.0);
}

std::vector<std::span<double>> LstmModel::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.w);
    out.emplace_back(l.b);
  }
  out.emplace_back(head_w_);
  out.emplace_back(head_b_);
  return out;
}

std::vector<std::span<const double>> LstmModel::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.emplace_back(l.w);
    out.emplace_back(l.b);
  }
  out.emplace_back(head_w_);
  out.emplace_back(head_b_);
  return out;
}

double LstmModel::forward_backward(std::span<const double> window, std::span<const double> target,
                                   std::vector<std::vector<double>>* grads,
                                   std::mt19937_64* dropout_rng,
                                   std::vector<double>* output) const {
  const int T = config_.lookback;
  const int H = config_.cells;
  const int L = static_cast<int>(layers_.size());
  const std::size_t F = features_;
  if (window.size() != static_cast<std::size_t>(T) * F) {
    throw DomainError("lstm: window has " + std::to_string(window.size()) + " values, expected " +
                      std::to_string(T * F));
  }
  const std::size_t TH = static_cast<std::size_t>(T) * H;

  // Per layer, per step: gate activations, cell state and output.
  struct LayerTrace {
    std::vector<double> i, f, o, g, c, h, x;
    int in_dim = 0;
  };
  std::vector<LayerTrace> tr(L);
  std::vector<std::vector<double>> mask(L > 1 ? L - 1 : 0);

  for (int l = 0; l < L; ++l) {
    const CellWeights& w = layers_[l];
    LayerTrace& t = tr[l];
    t.in_dim = w.input_dim;
    t.i.resize(TH);
    t.f.resize(TH);
    t.o.resize(TH);
    t.g.resize(TH);
    t.c.resize(TH);
    t.h.resize(TH);
    t.x.resize(static_cast<std::size_t>(T) * w.input_dim);
    if (l == 0) {
      // Oldest row first.
      for (int n = 0; n < T; ++n) {
        const std::size_t row = static_cast<std::size_t>(T - 1 - n);
        std::copy_n(window.begin() + row * F, F, t.x.begin() + n * F);
      }
    } else {
      const LayerTrace& below = tr[l - 1];
      t.x = below.h;
      if (dropout_rng && config_.dropout > 0.0) {
        auto& m = mask[l - 1];
        m.resize(TH);
        const double keep = 1.0 / (1.0 - config_.dropout);
        for (double& v : m) v = uniform01(*dropout_rng) < config_.dropout ? 0.0 : keep;
        for (std::size_t k = 0; k < TH; ++k) t.x[k] *= m[k];
      }
    }
    const int cols = w.cols();
    std::vector<double> z(4 * H);
    for (int n = 0; n < T; ++n) {
      const double* hp = n > 0 ? &t.h[(n - 1) * H] : nullptr;
      const double* xn = &t.x[static_cast<std::size_t>(n) * w.input_dim];
      for (int r = 0; r < 4 * H; ++r) {
        const double* row = w.w.data() + static_cast<std::size_t>(r) * cols;
        double acc = w.b[r];
        if (hp) {
          for (int m = 0; m < H; ++m) acc += row[m] * hp[m];
        }
        for (int m = 0; m < w.input_dim; ++m) acc += row[H + m] * xn[m];
        z[r] = acc;
      }
      for (int k = 0; k < H; ++k) {
        const std::size_t s = static_cast<std::size_t>(n) * H + k;
        t.i[s] = sigmoid(z[k]);
        t.f[s] = sigmoid(z[H + k]);
        t.o[s] = sigmoid(z[2 * H + k]);
        t.g[s] = std::tanh(z[3 * H + k]);
        const double cp = n > 0 ? t.c[s - H] : 0.0;
        t.c[s] = t.f[s] * cp + t.i[s] * t.g[s];
        t.h[s] = t.o[s] * std::tanh(t.c[s]);
      }
    }
  }

  const double* h_last = &tr[L - 1].h[static_cast<std::size_t>(T - 1) * H];
  std::vector<double> y(n_coeffs_);
  for (std::size_t r = 0; r < n_coeffs_; ++r) {
    double acc = head_b_[r];
    const double* row = head_w_.data() + r * H;
    for (int k = 0; k < H; ++k) acc += row[k] * h_last[k];
    y[r] = acc;
  }
  if (output) *output = y;
  if (target.empty()) return 0.0;

  double loss = 0.0;
  std::vector<double> dy(n_coeffs_);
  const double inv_n = 1.0 / static_cast<double>(n_coeffs_);
  for (std::size_t r = 0; r < n_coeffs_; ++r) {
    const double e = y[r] - target[r];
    loss += e * e;
    dy[r] = 2.0 * e * inv_n;
  }
  loss *= inv_n;
  if (!grads) return loss;

  auto& g = *grads;
  auto& g_head_w = g[2 * L];
  auto& g_head_b = g[2 * L + 1];
  std::vector<double> dh_in(TH, 0.0);
  for (std::size_t r = 0; r < n_coeffs_; ++r) {
    g_head_b[r] += dy[r];
    const double* row = head_w_.data() + r * H;
    double* grow = g_head_w.data() + r * H;
    for (int k = 0; k < H; ++k) {
      grow[k] += dy[r] * h_last[k];
      dh_in[static_cast<std::size_t>(T - 1) * H + k] += dy[r] * row[k];
    }
  }

  std::vector<double> dh_next(H), dc_next(H), dz(4 * H);
  for (int l = L - 1; l >= 0; --l) {
    const CellWeights& w = layers_[l];
    const LayerTrace& t = tr[l];
    auto& gw = g[2 * l];
    auto& gb = g[2 * l + 1];
    const int cols = w.cols();
    std::vector<double> dx(l > 0 ? TH : 0, 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);
    for (int n = T - 1; n >= 0; --n) {
      for (int k = 0; k < H; ++k) {
        const std::size_t s = static_cast<std::size_t>(n) * H + k;
        const double dh = dh_in[s] + dh_next[k];
        const double tc = std::tanh(t.c[s]);
        const double d_o = dh * tc;
        const double dc = dc_next[k] + dh * t.o[s] * (1.0 - tc * tc);
        const double cp = n > 0 ? t.c[s - H] : 0.0;
        const double di = dc * t.g[s];
        const double dg = dc * t.i[s];
        const double df = dc * cp;
        dc_next[k] = dc * t.f[s];
        dz[k] = di * t.i[s] * (1.0 - t.i[s]);
        dz[H + k] = df * t.f[s] * (1.0 - t.f[s]);
        dz[2 * H + k] = d_o * t.o[s] * (1.0 - t.o[s]);
        dz[3 * H + k] = dg * (1.0 - t.g[s] * t.g[s]);
      }
      const double* hp = n > 0 ? &t.h[static_cast<std::size_t>(n - 1) * H] : nullptr;
      const double* xn = &t.x[static_cast<std::size_t>(n) * w.input_dim];
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      double* dxn = l > 0 ? &dx[static_cast<std::size_t>(n) * H] : nullptr;
      for (int r = 0; r < 4 * H; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        gb[r] += d;
        const double* row = w.w.data() + static_cast<std::size_t>(r) * cols;
        double* grow = gw.data() + static_cast<std::size_t>(r) * cols;
        if (hp) {
          for (int m = 0; m < H; ++m) {
            grow[m] += d * hp[m];
            dh_next[m] += d * row[m];
          }
        }
        for (int m = 0; m < w.input_dim; ++m) grow[H + m] += d * xn[m];
        if (dxn) {
          for (int m = 0; m < H; ++m) dxn[m] += d * row[H + m];
        }
      }
    }
    if (l > 0) {
      if (!mask[l - 1].empty()) {
        for (std::size_t k = 0; k < TH; ++k) dx[k] *= mask[l - 1][k];
      }
      dh_in = std::move(dx);
    }
  }
  return loss;
}

std::vector<double> LstmModel::forward_scaled(std::span<const double> window) const {
  std::vector<double> y;
  forward_backward(window, {}, nullptr, nullptr, &y);
  return y;
}

std::vector<double> LstmModel::predict(std::span<const double> window) const {
  if (!scaler_.fitted()) throw UsageError("lstm: model has no fitted input scaler");
  std::vector<double> scaled(window.size());
  for (std::size_t k = 0; k < window.size(); ++k) scaled[k] = scaler_.apply(k % features_, window[k]);
  std::vector<double> y = forward_scaled(scaled);
  for (std::size_t r = 0; r < y.size(); ++r) y[r] = scaler_.invert(param_dim_ + 1 + r, y[r]);
  return y;
}

double LstmModel::loss_and_gradient(std::span<const double> window, std::span<const double> target,
                                    std::vector<std::vector<double>>& grads) const {
  const auto params = parameters();
  grads.resize(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) grads[p].assign(params[p].size(), 0.0);
  return forward_backward(window, target, &grads, nullptr, nullptr);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_pairs(
    const WindowDataset& data, double validation_fraction) {
  std::vector<std::size_t> train_idx, val_idx;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = start;
    while (end < data.size() && data.block[end] == data.block[start]) ++end;
    const std::size_t m = end - start;
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(m) * validation_fraction));
    for (std::size_t k = start; k < end; ++k) (k < end - n_val ? train_idx : val_idx).push_back(k);
    start = end;
  }
  return {train_idx, val_idx};
}

LstmModel train(const WindowDataset& data, const LstmConfig& config) {
  config.validate();
  if (data.lookback != config.lookback) {
    throw DomainError("train: dataset lookback " + std::to_string(data.lookback) +
                      " differs from config lookback " + std::to_string(config.lookback));
  }
  const auto [train_idx, val_idx] = split_pairs(data, config.validation_fraction);
  if (train_idx.empty()) throw DomainError("train: no training pairs");

  LstmModel model(config, data.features, data.n_coeffs, data.param_dim);
  model.scaler_ = fit_scaler(data, train_idx);

  std::vector<std::vector<double>> x(data.size()), y(data.size());
  for (std::size_t p = 0; p < data.size(); ++p) {
    x[p].resize(data.inputs[p].size());
    for (std::size_t k = 0; k < x[p].size(); ++k) {
      x[p][k] = model.scaler_.apply(k % data.features, data.inputs[p][k]);
    }
    y[p].resize(data.n_coeffs);
    for (std::size_t r = 0; r < data.n_coeffs; ++r) {
      y[p][r] = model.scaler_.apply(data.param_dim + 1 + r, data.targets[p][r]);
    }
  }

  auto mse = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t p : idx) s += model.forward_backward(x[p], y[p], nullptr, nullptr, nullptr);
    return s / static_cast<double>(idx.size());
  };

  std::mt19937_64 rng(config.seed + 1);
  auto params = model.parameters();
  std::vector<AdamState> adam(params.size());
  std::vector<std::vector<double>> grads(params.size());
  std::vector<std::size_t> order = train_idx;
  long long step = 0;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng() % (i + 1)]);
    }
    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      const std::size_t b1 = std::min(order.size(), b0 + bs);
      for (std::size_t p = 0; p < params.size(); ++p) grads[p].assign(params[p].size(), 0.0);
      for (std::size_t k = b0; k < b1; ++k) {
        model.forward_backward(x[order[k]], y[order[k]], &grads, &rng, nullptr);
      }
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      ++step;
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (double& g : grads[p]) g *= inv;
        adam_step(params[p], grads[p], adam[p], config.learning_rate, config.weight_decay, step);
      }
    }
    EpochLog rec{epoch, mse(train_idx), mse(val_idx)};
    if (!std::isfinite(rec.train_mse)) throw TrainingError("train: loss became non-finite", epoch);
    model.log_.push_back(rec);
  }
  return model;
}

namespace {

// Inference-mode loss in long double with parameter (tensor, index) shifted
// by `delta`. Double rounding in the loss would otherwise swamp central
// differences of small gradients.
long double extended_loss(const LstmModel& model, std::span<const double> window,
                          std::span<const double> target, std::size_t tensor, std::size_t index,
                          long double delta) {
  using ld = long double;
  const auto params = model.parameters();
  auto param = [&](std::size_t t, std::size_t k) -> ld {
    const ld v = params[t][k];
    return t == tensor && k == index ? v + delta : v;
  };
  auto sig = [](ld z) { return 1.0L / (1.0L + std::exp(-z)); };
  const int T = model.lookback();
  const auto F = model.features();
  std::vector<ld> seq(window.size());
  for (int n = 0; n < T; ++n) {
    const std::size_t row = static_cast<std::size_t>(T - 1 - n);
    for (std::size_t j = 0; j < F; ++j) seq[n * F + j] = window[row * F + j];
  }
  std::size_t in_dim = F;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto H = static_cast<std::size_t>(model.layers()[l].hidden);
    const std::size_t cols = H + in_dim;
    std::vector<ld> out(static_cast<std::size_t>(T) * H), h(H, 0.0L), c(H, 0.0L), z(4 * H);
    for (int n = 0; n < T; ++n) {
      for (std::size_t r = 0; r < 4 * H; ++r) {
        ld acc = param(2 * l + 1, r);
        for (std::size_t m = 0; m < H; ++m) acc += param(2 * l, r * cols + m) * h[m];
        for (std::size_t m = 0; m < in_dim; ++m) acc += param(2 * l, r * cols + H + m) * seq[n * in_dim + m];
        z[r] = acc;
      }
      for (std::size_t k = 0; k < H; ++k) {
        c[k] = sig(z[H + k]) * c[k] + sig(z[k]) * std::tanh(z[3 * H + k]);
        h[k] = sig(z[2 * H + k]) * std::tanh(c[k]);
        out[n * H + k] = h[k];
      }
    }
    seq = std::move(out);
    in_dim = H;
  }
  const std::size_t head = 2 * model.layers().size();
  const std::size_t H = in_dim;
  ld loss = 0.0L;
  for (std::size_t r = 0; r < model.n_coeffs(); ++r) {
    ld y = param(head + 1, r);
    for (std::size_t k = 0; k < H; ++k) y += param(head, r * H + k) * seq[(T - 1) * H + k];
    const ld e = y - target[r];
    loss += e * e;
  }
  return loss / static_cast<ld>(model.n_coeffs());
}

}  // namespace

double gradient_check(const LstmModel& model, std::span<const double> window,
                      std::span<const double> target, double step, double floor) {
  std::vector<std::vector<double>> analytic;
  model.loss_and_gradient(window, target, analytic);
  const auto params = model.parameters();
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t k = 0; k < params[p].size(); ++k) {
      const long double lp = extended_loss(model, window, target, p, k, step);
      const long double lm = extended_loss(model, window, target, p, k, -step);
      const auto fd = static_cast<double>((lp - lm) / (2.0L * step));
      const double a = analytic[p][k];
      const double denom = std::max({std::abs(a), std::abs(fd), floor});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

std::vector<double> seed_window(const CoefficientSeries& coeffs, std::size_t block, std::size_t end,
                                int lookback, std::size_t param_dim, std::span<const double> mu) {
  const auto T = static_cast<std::size_t>(lookback);
  if (block >= coeffs.n_d() || end >= coeffs.n_t() || end + 1 < T) {
    throw DomainError("seed_window: not enough history for the lookback window");
  }
  std::vector<double> label;
  if (param_dim) {
    if (!mu.empty()) {
      label.assign(mu.begin(), mu.end());
    } else if (!coeffs.params.empty()) {
      label = coeffs.params[block];
    }
    if (label.size() != param_dim) throw DomainError("seed_window: parameter dimension mismatch");
  }
  std::vector<double> w;
  for (std::size_t r = 0; r < T; ++r) {
    const std::size_t pos = end - r;
    w.insert(w.end(), label.begin(), label.end());
    w.push_back(coeffs.times[pos]);
    auto col = coeffs.coeffs.col(block * coeffs.n_t() + pos);
    w.insert(w.end(), col.begin(), col.end());
  }
  return w;
}

PredictedSeries predict_recursive(const CoefficientPredictor& model, std::span<const double> seed,
                                  std::size_t features, std::size_t param_dim, long long n_steps,
                                  double increment) {
  if (n_steps <= 0) throw DomainError("predict_recursive: n_steps must be positive");
  const auto T = static_cast<std::size_t>(model.lookback());
  if (seed.size() != T * features || features < param_dim + 2) {
    throw DomainError("predict_recursive: seed window has the wrong shape");
  }
  const std::size_t n = features - param_dim - 1;
  std::vector<double> window(seed.begin(), seed.end());
  const double t_last = window[param_dim];
  PredictedSeries out;
  out.coeffs = Matrix(n, static_cast<std::size_t>(n_steps));
  for (long long s = 1; s <= n_steps; ++s) {
    const std::vector<double> next = model.predict(window);
    if (next.size() != n) throw DomainError("predict_recursive: predictor returned wrong length");
    const double t = t_last + static_cast<double>(s) * increment;
    std::copy_backward(window.begin(), window.end() - static_cast<std::ptrdiff_t>(features),
                       window.end());
    // Row 0 still holds the previous newest row, so mu carries over.
    window[param_dim] = t;
    std::copy(next.begin(), next.end(), window.begin() + static_cast<std::ptrdiff_t>(param_dim + 1));
    out.times.push_back(t);
    std::copy(next.begin(), next.end(), out.coeffs.col(static_cast<std::size_t>(s - 1)).begin());
  }
  return out;
}

void write_loss_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  CsvTable t{{"epoch", "train_mse", "val_mse"}, {}};
  for (const auto& e : log) t.rows.push_back({static_cast<double>(e.epoch), e.train_mse, e.val_mse});
  write_csv(path, t);
}

namespace {

std::filesystem::path weights_path(const std::filesystem::path& json_path) {
  auto p = json_path;
  p.replace_extension(".weights.bin");
  return p;
}

}  // namespace

void LstmModel::save(const std::filesystem::path& json_path) const {
  std::vector<unsigned char> bytes;
  for (char c : kWeightsMagic) bytes.push_back(static_cast<unsigned char>(c));
  for (auto t : parameters()) {
    for (double v : t) {
      const auto u = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(u >> (8 * b)));
    }
  }
  const auto wpath = weights_path(json_path);
  write_file_bytes(wpath, bytes);

  nlohmann::json j;
  j["config"] = {{"layers", config_.layers},
                 {"cells", config_.cells},
                 {"batch_size", config_.batch_size},
                 {"epochs", config_.epochs},
                 {"validation_fraction", config_.validation_fraction},
                 {"learning_rate", config_.learning_rate},
                 {"dropout", config_.dropout},
                 {"weight_decay", config_.weight_decay},
                 {"lookback", config_.lookback},
                 {"seed", config_.seed}};
  j["features"] = features_;
  j["n_coeffs"] = n_coeffs_;
  j["param_dim"] = param_dim_;
  j["scaler"] = {{"min", scaler_.min}, {"max", scaler_.max}};
  j["weights_file"] = wpath.filename().string();
  j["weights_digest"] = hex_digest(fnv1a64(bytes));
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

LstmModel LstmModel::load(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open model " + json_path.string());
  LstmModel m;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& c = j.at("config");
    LstmConfig cfg;
    cfg.layers = c.at("layers").get<int>();
    cfg.cells = c.at("cells").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.validation_fraction = c.at("validation_fraction").get<double>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.weight_decay = c.at("weight_decay").get<double>();
    cfg.lookback = c.at("lookback").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    m = LstmModel(cfg, j.at("features").get<std::size_t>(), j.at("n_coeffs").get<std::size_t>(),
                  j.at("param_dim").get<std::size_t>());
    m.scaler_.min = j.at("scaler").at("min").get<std::vector<double>>();
    m.scaler_.max = j.at("scaler").at("max").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model header: ") + e.what(), 0);
  }
  const auto bytes = read_file_bytes(weights_path(json_path));
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kWeightsMagic, 8) != 0) {
    throw FormatError("model weights: bad magic", 0);
  }
  std::size_t off = 8;
  for (auto t : m.parameters()) {
    if (bytes.size() - off < 8 * t.size()) throw FormatError("model weights: truncated payload", bytes.size());
    for (double& v : t) {
      std::uint64_t u = 0;
      for (int b = 0; b < 8; ++b) u |= std::uint64_t{bytes[off + b]} << (8 * b);
      v = std::bit_cast<double>(u);
      off += 8;
    }
  }
  if (off != bytes.size()) throw FormatError("model weights: trailing bytes", off);
  return m;
}

}  // namespace qg2rom
