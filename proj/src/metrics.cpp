#include "qg2rom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "qg2rom/errors.hpp"
#include "qg2rom/io.hpp"

namespace qg2rom {

namespace {

void require_same_grid(const Field& a, const Field& b, const char* op) {
  const auto& sa = a.grid().spec();
  const auto& sb = b.grid().spec();
  if (sa.nx != sb.nx || sa.ny != sb.ny || sa.x0 != sb.x0 || sa.xf != sb.xf ||
      sa.y_lo != sb.y_lo || sa.y_hi != sb.y_hi) {
    throw DomainError(std::string(op) + ": fields live on different grids");
  }
}

}  // namespace

double rmse(const Field& a, const Field& b) {
  require_same_grid(a, b, "rmse");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

double rel_l2(const Field& reference, const Field& approx) {
  require_same_grid(reference, approx, "rel_l2");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const double d = reference[k] - approx[k];
    num += d * d;
    den += reference[k] * reference[k];
  }
  if (!(den > 0.0)) throw DomainError("rel_l2: reference field has zero norm");
  // The common cell area cancels.
  return std::sqrt(num / den);
}

double enstrophy(const Field& q) {
  double s = 0.0;
  for (double v : q.values()) s += v * v;
  return 0.5 * s * q.grid().cell_volume();
}

double kinetic_energy(const Field& psi, const BoundaryRule& bc) {
  const Grid& g = psi.grid();
  const FaceGradients grad = face_gradients(psi, bc);
  const double w = g.cell_volume();
  double s = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i <= g.nx(); ++i) {
      const double d = grad.x[g.xface(i, j)];
      s += (i == 0 || i == g.nx() ? 0.5 : 1.0) * d * d;
    }
  }
  for (int j = 0; j <= g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const double d = grad.y[g.yface(i, j)];
      s += (j == 0 || j == g.ny() ? 0.5 : 1.0) * d * d;
    }
  }
  return 0.5 * s * w;
}

double series_rel_l2(std::span<const double> reference, std::span<const double> approx) {
  if (reference.size() != approx.size()) {
    throw DomainError("series_rel_l2: series lengths differ");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const double d = reference[k] - approx[k];
    num += d * d;
    den += reference[k] * reference[k];
  }
  if (!(den > 0.0)) throw DomainError("series_rel_l2: reference series is zero");
  return std::sqrt(num / den);
}

Pmf pmf(std::span<const double> values, int n_bins) {
  if (values.empty()) throw DomainError("pmf: no values");
  if (n_bins < 1) throw DomainError("pmf: need at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Pmf out;
  if (lo == hi) {
    out.edges = {lo, hi};
    out.masses = {1.0};
    return out;
  }
  out.edges.resize(n_bins + 1);
  for (int b = 0; b <= n_bins; ++b) out.edges[b] = lo + (hi - lo) * b / n_bins;
  out.edges.back() = hi;
  std::vector<std::size_t> counts(n_bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * n_bins);
    counts[std::clamp(b, 0, n_bins - 1)]++;
  }
  out.masses.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    out.masses[b] = static_cast<double>(counts[b]) / static_cast<double>(values.size());
  }
  return out;
}

FieldErrorReport field_errors(const std::string& name, const Field& reference, const Field& approx) {
  return {name, rmse(reference, approx), rel_l2(reference, approx)};
}

Field absolute_difference(const Field& a, const Field& b) {
  require_same_grid(a, b, "absolute_difference");
  Field out(a.grid());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = std::abs(a[k] - b[k]);
  return out;
}

void write_error_report_csv(const std::vector<FieldErrorReport>& rows,
                            const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "field,rmse,rel_l2\n";
  for (const auto& r : rows) {
    out << r.field << ',' << format_number(r.rmse) << ',' << format_number(r.rel_l2) << '\n';
  }
}

void write_series_csv(std::span<const double> times, const std::vector<std::string>& names,
                      const std::vector<std::vector<double>>& columns,
                      const std::filesystem::path& path) {
  if (names.size() != columns.size()) throw DomainError("write_series_csv: names and columns differ");
  CsvTable t;
  t.header.push_back("t");
  t.header.insert(t.header.end(), names.begin(), names.end());
  for (std::size_t p = 0; p < times.size(); ++p) {
    std::vector<double> row{times[p]};
    for (const auto& c : columns) {
      if (c.size() != times.size()) throw DomainError("write_series_csv: column length mismatch");
      row.push_back(c[p]);
    }
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_pmf_csv(const Pmf& p, const std::filesystem::path& path) {
  CsvTable t{{"bin_lo", "bin_hi", "mass"}, {}};
  for (std::size_t b = 0; b < p.masses.size(); ++b) {
    t.rows.push_back({p.edges[b], p.edges[b + 1], p.masses[b]});
  }
  write_csv(path, t);
}

}  // namespace qg2rom
