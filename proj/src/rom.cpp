#include "qg2rom/rom.hpp"

#include <algorithm>
#include <cmath>

#include "qg2rom/errors.hpp"
#include "qg2rom/metrics.hpp"

namespace qg2rom {

std::size_t nearest_sample(std::span<const double> mu, const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw DomainError("nearest_sample: no samples");
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].size() != mu.size()) {
      throw DomainError("nearest_sample: sample " + std::to_string(k) + " has dimension " +
                        std::to_string(samples[k].size()) + ", query has " + std::to_string(mu.size()));
    }
    double d = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double e = samples[k][i] - mu[i];
      d += e * e;
    }
    if (best_d < 0.0) {
      best = k;
      best_d = d;
      continue;
    }
    const bool tie = std::abs(d - best_d) <= 1e-12 * std::max(d, best_d);
    if (tie ? samples[k] < samples[best] : d < best_d) {
      best = k;
      best_d = std::min(d, best_d);
    }
  }
  return best;
}

bool outside_sampling_hull(std::span<const double> mu, const std::vector<std::vector<double>>& samples) {
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double lo = samples.front()[i];
    double hi = lo;
    for (const auto& s : samples) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
    if (mu[i] < lo || mu[i] > hi) return true;
  }
  return false;
}

const FieldModel& RomArtifacts::at(FieldId id) const {
  const auto& f = fields[static_cast<int>(id)];
  if (!f) throw UsageError("rom: no artifacts for field " + std::string(to_string(id)));
  return *f;
}

SeriesLookupPredictor::SeriesLookupPredictor(CoefficientSeries series, std::size_t block, int lookback,
                                             std::size_t param_dim)
    : series_(std::move(series)), block_(block), lookback_(lookback), param_dim_(param_dim) {}

std::vector<double> SeriesLookupPredictor::predict(std::span<const double> window) const {
  const double t = window[param_dim_];
  std::size_t p = 0;
  for (std::size_t k = 1; k < series_.n_t(); ++k) {
    if (std::abs(series_.times[k] - t) < std::abs(series_.times[p] - t)) p = k;
  }
  if (p + 1 >= series_.n_t()) throw DomainError("lookup predictor: no stored step after t");
  auto col = series_.coeffs.col(block_ * series_.n_t() + p + 1);
  return {col.begin(), col.end()};
}

double field_energy(FieldId id, const Field& f) {
  return id == FieldId::q1 || id == FieldId::q2 ? enstrophy(f) : kinetic_energy(f);
}

namespace {

// Fills time_average, energy and optionally fields from coeffs and the mean.
void finish_prediction(FieldPrediction& out, const Matrix& modes, bool keep_fields) {
  const std::size_t n = out.coeffs.cols();
  std::vector<double> avg(out.coeffs.rows(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    auto c = out.coeffs.col(s);
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += c[i];
    Field f = reconstruct(out.mean, modes, c);
    out.energy.push_back(field_energy(out.field, f));
    if (keep_fields) out.fields.push_back(std::move(f));
  }
  if (n > 0) {
    for (double& a : avg) a /= static_cast<double>(n);
  }
  out.time_average = reconstruct(out.mean, modes, avg);
}

}  // namespace

OnlineResult online(const RomArtifacts& artifacts, const OnlineRequest& request,
                    std::span<const FieldId> fields) {
  if (!(request.increment > 0.0)) throw DomainError("online: increment must be positive");
  OnlineResult res;
  if (!artifacts.samples.empty()) {
    res.block = nearest_sample(request.mu, artifacts.samples);
    res.mu_c = artifacts.samples[res.block];
    res.outside_hull = outside_sampling_hull(request.mu, artifacts.samples);
  } else if (!request.mu.empty()) {
    throw DomainError("online: parameter given for a time-only model");
  }

  for (FieldId id : fields) {
    const FieldModel& fm = artifacts.at(id);
    if (!fm.predictor) throw UsageError("online: field " + std::string(to_string(id)) + " has no predictor");
    const CoefficientSeries& cs = fm.coeffs;
    const double t_last = cs.times.back();
    const long long skip = std::llround((request.t_start - t_last) / request.increment);
    const long long keep = std::llround((request.t_end - request.t_start) / request.increment);
    if (request.t_start < t_last - 1e-9 * request.increment || skip < 0) {
      throw UsageError("online: t_start precedes the last training time");
    }
    if (keep <= 0) throw DomainError("online: empty prediction interval");

    const auto seed = seed_window(cs, res.block, cs.n_t() - 1, fm.predictor->lookback(),
                                  fm.param_dim, request.mu);
    const PredictedSeries pred =
        predict_recursive(*fm.predictor, seed, fm.features(), fm.param_dim, skip + keep, request.increment);

    FieldPrediction out;
    out.field = id;
    out.times.assign(pred.times.begin() + skip, pred.times.end());
    out.coeffs = pred.coeffs.cols_range(static_cast<std::size_t>(skip), static_cast<std::size_t>(keep));
    out.mean = fm.basis.means.at(res.block).value;
    finish_prediction(out, fm.basis.modes, request.keep_fields);
    res.fields[static_cast<int>(id)] = std::move(out);
  }
  return res;
}

FieldPrediction teacher_forced(const FieldModel& model, std::size_t block, bool keep_fields) {
  if (!model.predictor) throw UsageError("teacher_forced: no predictor");
  const CoefficientSeries& cs = model.coeffs;
  const int T = model.predictor->lookback();
  if (cs.n_t() <= static_cast<std::size_t>(T)) throw DomainError("teacher_forced: block shorter than lookback");
  FieldPrediction out;
  out.field = model.basis.field;
  out.mean = model.basis.means.at(block).value;
  out.coeffs = Matrix(cs.n_r(), cs.n_t() - T);
  for (std::size_t p = T; p < cs.n_t(); ++p) {
    const auto w = seed_window(cs, block, p - 1, T, model.param_dim);
    const auto y = model.predictor->predict(w);
    std::copy(y.begin(), y.end(), out.coeffs.col(p - T).begin());
    out.times.push_back(cs.times[p]);
  }
  finish_prediction(out, model.basis.modes, keep_fields);
  return out;
}

FieldPrediction remark1_stream(const FieldPrediction& q, const Matrix& xi, const Field& psi_mean,
                               FieldId psi_field, bool keep_fields) {
  if (xi.empty()) throw UsageError("remark1_stream: Poisson modes missing");
  if (xi.cols() != q.coeffs.rows()) {
    throw DomainError("remark1_stream: " + std::to_string(xi.cols()) + " Poisson modes for " +
                      std::to_string(q.coeffs.rows()) + " coefficients");
  }
  FieldPrediction out;
  out.field = psi_field;
  out.times = q.times;
  out.coeffs = q.coeffs;
  out.mean = psi_mean;
  finish_prediction(out, xi, keep_fields);
  return out;
}

}  // namespace qg2rom
