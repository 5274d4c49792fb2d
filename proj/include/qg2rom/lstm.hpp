#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "qg2rom/matrix.hpp"
#include "qg2rom/pod.hpp"

namespace qg2rom {

struct LstmConfig {
  int layers = 1;
  int cells = 100;
  int batch_size = 8;
  int epochs = 500;
  double validation_fraction = 0.2;
  double learning_rate = 1e-2;
  double dropout = 0.0;
  double weight_decay = 1e-5;
  int lookback = 10;
  std::uint64_t seed = 0;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
  // Table defaults for the vorticity and stream-function models.
  static LstmConfig q_defaults();
  static LstmConfig psi_defaults();
};

// Gate parameters of one layer, gate blocks stacked in the order
// input, forget, output, candidate. w is row-major (4H) x (H + input_dim),
// acting on [h_prev, x].
struct CellWeights {
  int hidden = 0;
  int input_dim = 0;
  std::vector<double> w;
  std::vector<double> b;

  CellWeights() = default;
  CellWeights(int hidden, int input_dim);
  int cols() const { return hidden + input_dim; }
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

// Gate activations of one forward call, kept for inspection and BPTT.
struct CellTrace {
  std::vector<double> i, f, o, g;  // g is the candidate state
  std::vector<double> c;
  std::vector<double> h;
};

// One LSTM cell update. Throws DomainError on a shape mismatch.
CellTrace cell_forward(std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, const CellWeights& w);

// Per-feature affine map of the training range onto [-1, 1]; constant
// features map to 0.
struct Scaler {
  std::vector<double> min;
  std::vector<double> max;

  bool fitted() const { return !min.empty(); }
  double apply(std::size_t feature, double v) const;
  double invert(std::size_t feature, double v) const;
};

// One row of the lookback window: [mu..., t, alpha_1..alpha_N].
// Windows are stored newest row first, as sigma_L x features row-major.
struct WindowDataset {
  std::size_t features = 0;
  std::size_t n_coeffs = 0;
  std::size_t param_dim = 0;
  int lookback = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  // Parameter block and position p of the newest row for every pair.
  std::vector<std::size_t> block;
  std::vector<std::size_t> position;

  std::size_t size() const { return inputs.size(); }
};

// Pairs (rows p, p-1, ..., p-sigma_L+1) -> alpha(t_{p+1}) for every p from
// sigma_L - 1 to N^t - 2 of each block, i.e. N^t - sigma_L pairs per block.
// The parameter columns are included only when the series has more than one
// block, so a single-block parametric series yields the time-only dataset.
// Throws DomainError when a block has N^t <= sigma_L.
WindowDataset build_windows(const CoefficientSeries& coeffs, int lookback);

// Fits on the rows of the listed pairs (inputs only). Throws DomainError when
// `pairs` is empty.
Scaler fit_scaler(const WindowDataset& data, std::span<const std::size_t> pairs);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8) followed by
// decoupled decay p -= lr * wd * p. `t` is the 1-based step count.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double weight_decay, long long t);

struct EpochLog {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;  // NaN without a validation split
};

// Maps a raw window (newest row first) to the next coefficient vector.
class CoefficientPredictor {
 public:
  virtual ~CoefficientPredictor() = default;
  virtual int lookback() const = 0;
  virtual std::vector<double> predict(std::span<const double> window) const = 0;
};

class LstmModel : public CoefficientPredictor {
 public:
  LstmModel() = default;
  // Random initial weights: uniform in +-1/sqrt(fan_in), forget bias 1.
  LstmModel(const LstmConfig& config, std::size_t features, std::size_t n_coeffs,
            std::size_t param_dim);

  const LstmConfig& config() const { return config_; }
  std::size_t features() const { return features_; }
  std::size_t n_coeffs() const { return n_coeffs_; }
  std::size_t param_dim() const { return param_dim_; }
  int lookback() const override { return config_.lookback; }

  std::vector<CellWeights>& layers() { return layers_; }
  const std::vector<CellWeights>& layers() const { return layers_; }
  // Output head, row-major n_coeffs x cells.
  std::vector<double>& head_w() { return head_w_; }
  std::vector<double>& head_b() { return head_b_; }
  const std::vector<double>& head_w() const { return head_w_; }
  const std::vector<double>& head_b() const { return head_b_; }

  Scaler& scaler() { return scaler_; }
  const Scaler& scaler() const { return scaler_; }
  const std::vector<EpochLog>& log() const { return log_; }
  std::vector<EpochLog>& log() { return log_; }

  // Forward pass on an already-scaled window (newest row first), inference
  // mode. Returns the scaled prediction.
  std::vector<double> forward_scaled(std::span<const double> window) const;
  // Scales the raw window, runs the network and unscales the result. Throws
  // UsageError when no scaler has been fitted.
  std::vector<double> predict(std::span<const double> window) const override;

  // Squared-error loss mean((y - target)^2) on a scaled window and its
  // gradient with respect to every parameter, in parameter order.
  double loss_and_gradient(std::span<const double> window, std::span<const double> target,
                           std::vector<std::vector<double>>& grads) const;

  // Every parameter tensor in a fixed order: per layer (w, b), then head
  // (w, b).
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

  void save(const std::filesystem::path& json_path) const;
  static LstmModel load(const std::filesystem::path& json_path);

 private:
  friend LstmModel train(const WindowDataset&, const LstmConfig&);

  double forward_backward(std::span<const double> window, std::span<const double> target,
                          std::vector<std::vector<double>>* grads, std::mt19937_64* dropout_rng,
                          std::vector<double>* output) const;

  LstmConfig config_;
  std::size_t features_ = 0;
  std::size_t n_coeffs_ = 0;
  std::size_t param_dim_ = 0;
  std::vector<CellWeights> layers_;
  std::vector<double> head_w_;
  std::vector<double> head_b_;
  Scaler scaler_;
  std::vector<EpochLog> log_;
};

// Chronological split: the last validation_fraction of each block's pairs is
// held out. Returns (train, validation) pair indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_pairs(
    const WindowDataset& data, double validation_fraction);

// Mini-batch BPTT with Adam. Deterministic for a given seed. Throws
// DomainError for an empty training split and TrainingError when the loss
// turns non-finite.
LstmModel train(const WindowDataset& data, const LstmConfig& config);

// Max over all parameters of |analytic - fd| / max(|analytic|, |fd|, floor)
// with central differences of step `step` on a scaled window. The
// differenced losses are evaluated in long double.
double gradient_check(const LstmModel& model, std::span<const double> window,
                      std::span<const double> target, double step = 1e-6, double floor = 1e-6);

// The last sigma_L rows of block `block` ending at position `end`
// (inclusive), newest first, in raw units. `param_dim` selects whether the
// parameter columns are emitted; `mu` replaces the block's own label.
std::vector<double> seed_window(const CoefficientSeries& coeffs, std::size_t block, std::size_t end,
                                int lookback, std::size_t param_dim,
                                std::span<const double> mu = {});

struct PredictedSeries {
  std::vector<double> times;
  Matrix coeffs;  // N x n_steps
};

// Feeds each prediction back into the window with time advanced by
// `increment`; parameter columns are held at the values of the newest seed
// row. Throws DomainError for n_steps <= 0 or a window of the wrong length.
PredictedSeries predict_recursive(const CoefficientPredictor& model, std::span<const double> seed,
                                  std::size_t features, std::size_t param_dim, long long n_steps,
                                  double increment);

void write_loss_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace qg2rom
