#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qg2rom/lstm.hpp"
#include "qg2rom/pod.hpp"
#include "qg2rom/snapshots.hpp"

namespace qg2rom {

// Index of the sample closest to mu in the Euclidean norm. Distances equal to
// within 1e-12 relative count as ties and go to the lexicographically smaller
// sample. Throws DomainError for an empty sampling or a dimension mismatch.
std::size_t nearest_sample(std::span<const double> mu, const std::vector<std::vector<double>>& samples);

// True when mu lies outside the per-coordinate range of the samples.
bool outside_sampling_hull(std::span<const double> mu, const std::vector<std::vector<double>>& samples);

// Basis, training coefficients and forecaster of one field.
struct FieldModel {
  PodBasis basis;
  CoefficientSeries coeffs;
  std::shared_ptr<const CoefficientPredictor> predictor;
  // Parameter columns in the predictor's window; 0 for time-only windows.
  std::size_t param_dim = 0;

  std::size_t features() const { return param_dim + 1 + basis.retained; }
};

struct RomArtifacts {
  std::array<std::optional<FieldModel>, 4> fields;
  // Training parameter samples; empty in the time-only case.
  std::vector<std::vector<double>> samples;

  const FieldModel& at(FieldId id) const;
};

// Predictor returning stored coefficients: the next column after the one
// whose time matches the newest window row. Used to inject exact
// coefficients in place of a trained network.
class SeriesLookupPredictor : public CoefficientPredictor {
 public:
  SeriesLookupPredictor(CoefficientSeries series, std::size_t block, int lookback,
                        std::size_t param_dim);
  int lookback() const override { return lookback_; }
  std::vector<double> predict(std::span<const double> window) const override;

 private:
  CoefficientSeries series_;
  std::size_t block_;
  int lookback_;
  std::size_t param_dim_;
};

// Predictor that always returns the same vector.
class ConstantPredictor : public CoefficientPredictor {
 public:
  ConstantPredictor(std::vector<double> value, int lookback)
      : value_(std::move(value)), lookback_(lookback) {}
  int lookback() const override { return lookback_; }
  std::vector<double> predict(std::span<const double>) const override { return value_; }

 private:
  std::vector<double> value_;
  int lookback_;
};

struct OnlineRequest {
  std::vector<double> mu;  // empty in the time-only case
  double t_start = 0.0;
  double t_end = 0.0;
  double increment = 0.0;
  bool keep_fields = false;
};

struct FieldPrediction {
  FieldId field = FieldId::q1;
  std::vector<double> times;
  Matrix coeffs;       // N_r x steps
  Field mean{Grid(GridSpec{})};          // the mu_c mean used for reconstruction
  Field time_average{Grid(GridSpec{})};  // over the prediction times
  // Enstrophy for q fields, kinetic energy for psi fields, per time.
  std::vector<double> energy;
  std::vector<Field> fields;  // only with keep_fields
};

struct OnlineResult {
  std::vector<double> mu_c;
  std::size_t block = 0;
  bool outside_hull = false;
  std::array<std::optional<FieldPrediction>, 4> fields;
};

// Seeds every available field model with the last sigma_L coefficient rows of
// the nearest training block (its label replaced by mu), predicts recursively
// from the last training time and keeps the (t_end - t_start) / increment
// predictions after t_start. Throws UsageError when a requested field has no
// model or t_start precedes the last training time.
OnlineResult online(const RomArtifacts& artifacts, const OnlineRequest& request,
                    std::span<const FieldId> fields = kAllFields);

// Enstrophy of a q field or kinetic energy of a psi field.
double field_energy(FieldId id, const Field& f);

// One-step predictions from true windows over a training block: the
// reconstruction the model achieves on the data it was trained on. Times are
// the block's times from index sigma_L on.
FieldPrediction teacher_forced(const FieldModel& model, std::size_t block, bool keep_fields = false);

// Stream function from the vorticity coefficients: psi_mean + sum alpha_i xi_i.
// Throws UsageError when `xi` is empty and DomainError when its column count
// differs from the coefficient count.
FieldPrediction remark1_stream(const FieldPrediction& q_prediction, const Matrix& xi,
                               const Field& psi_mean, FieldId psi_field, bool keep_fields = false);

}  // namespace qg2rom
