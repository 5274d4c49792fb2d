#include "qg2rom/pod.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/fom.hpp"
#include "qg2rom/io.hpp"
#include "qg2rom/sparse.hpp"

namespace qg2rom {

SymmetricEigen jacobi_eigen(Matrix a, double tol, int max_sweeps) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DomainError("jacobi_eigen: matrix is not square");
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  const double scale = frobenius_norm(a);
  SymmetricEigen out;
  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    double off = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t p = 0; p < q; ++p) off += 2.0 * a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= tol * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (!std::isfinite(theta * theta)) t = 0.5 / std::abs(theta);
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        auto cp = a.col(p);
        auto cq = a.col(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = cp[k];
          const double akq = cq[k];
          cp[k] = c * akp - s * akq;
          cq[k] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        auto vp = v.col(p);
        auto vq = v.col(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vp[k];
          const double vkq = vq[k];
          vp[k] = c * vkp - s * vkq;
          vq[k] = s * vkp + c * vkq;
        }
      }
    }
  }
  if (out.sweeps == max_sweeps) {
    throw SolverError("jacobi_eigen: no convergence in " + std::to_string(max_sweeps) + " sweeps",
                      0.0);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    auto src = v.col(order[i]);
    std::copy(src.begin(), src.end(), out.vectors.col(i).begin());
  }
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Svd compute_pod(const Matrix& s) {
  const std::size_t n_s = s.cols();
  const SymmetricEigen eig = jacobi_eigen(multiply_at_b(s, s));

  Svd out;
  out.singular_values.resize(n_s);
  for (std::size_t i = 0; i < n_s; ++i) out.singular_values[i] = std::sqrt(std::max(eig.values[i], 0.0));
  const double cutoff = n_s ? 1e-12 * out.singular_values[0] : 0.0;
  while (out.rank < n_s && out.singular_values[out.rank] > cutoff) ++out.rank;

  out.u = Matrix(s.rows(), out.rank);
  out.v = Matrix(n_s, out.rank);
  for (std::size_t i = 0; i < out.rank; ++i) {
    auto vi = eig.vectors.col(i);
    std::copy(vi.begin(), vi.end(), out.v.col(i).begin());
    auto ui = out.u.col(i);
    for (std::size_t c = 0; c < n_s; ++c) {
      const double w = vi[c];
      if (w == 0.0) continue;
      auto sc = s.col(c);
      for (std::size_t k = 0; k < ui.size(); ++k) ui[k] += w * sc[k];
    }
    const double inv = 1.0 / out.singular_values[i];
    for (double& x : ui) x *= inv;

    // Small singular values come from a squared spectrum; two Gram-Schmidt
    // passes restore orthogonality lost to that.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        auto uj = out.u.col(j);
        const double r = dot(uj, ui);
        for (std::size_t k = 0; k < ui.size(); ++k) ui[k] -= r * uj[k];
      }
      const double nrm = std::sqrt(dot(ui, ui));
      for (double& x : ui) x /= nrm;
    }

    std::size_t arg = 0;
    for (std::size_t k = 1; k < ui.size(); ++k) {
      if (std::abs(ui[k]) > std::abs(ui[arg])) arg = k;
    }
    if (!ui.empty() && ui[arg] < 0.0) {
      for (double& x : ui) x = -x;
      for (double& x : out.v.col(i)) x = -x;
    }
  }
  return out;
}

std::size_t select_modes(std::span<const double> sv, double threshold, double exponent) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw DomainError("select_modes: threshold must lie in (0, 1]");
  }
  double total = 0.0;
  for (double s : sv) total += std::pow(s, exponent);
  if (!(total > 0.0)) throw DomainError("select_modes: all singular values are zero");
  double cum = 0.0;
  for (std::size_t r = 0; r < sv.size(); ++r) {
    cum += std::pow(sv[r], exponent);
    if (cum / total >= threshold) return r + 1;
  }
  return sv.size();
}

double energy_fraction(std::span<const double> sv, std::size_t retained, double exponent) {
  double total = 0.0;
  double cum = 0.0;
  for (std::size_t r = 0; r < sv.size(); ++r) {
    const double e = std::pow(sv[r], exponent);
    total += e;
    if (r < retained) cum += e;
  }
  return total > 0.0 ? cum / total : 0.0;
}

PodBasis build_basis(const SnapshotSet& set, const PodRequest& request) {
  PodBasis basis;
  basis.field = set.field;
  basis.grid = set.grid;
  basis.exponent = request.exponent;
  basis.means = time_averages(set);
  const Svd svd = compute_pod(fluctuations(set, basis.means));
  basis.singular_values = svd.singular_values;

  std::size_t n_r = 0;
  if (request.rank) {
    n_r = *request.rank;
    if (n_r == 0 || n_r > set.n_s()) {
      throw DomainError("build_basis: requested rank " + std::to_string(n_r) +
                        " outside [1, N_s = " + std::to_string(set.n_s()) + "]");
    }
    if (n_r > svd.rank) {
      throw DomainError("build_basis: requested rank " + std::to_string(n_r) +
                        " exceeds the numerical rank " + std::to_string(svd.rank));
    }
  } else {
    n_r = std::min(select_modes(svd.singular_values, request.threshold, request.exponent), svd.rank);
  }
  basis.retained = n_r;
  basis.energy_fraction = energy_fraction(svd.singular_values, n_r, request.exponent);
  basis.modes = svd.u.cols_range(0, n_r);
  return basis;
}

Matrix project(const Matrix& modes, const Matrix& fluct) {
  if (modes.rows() != fluct.rows()) {
    throw DomainError("project: basis has " + std::to_string(modes.rows()) + " rows, data has " +
                      std::to_string(fluct.rows()));
  }
  return multiply_at_b(modes, fluct);
}

CoefficientSeries modal_coefficients(const PodBasis& basis, const SnapshotSet& set) {
  CoefficientSeries c;
  c.field = set.field;
  c.times = set.times;
  c.params = set.params;
  c.coeffs = project(basis.modes, fluctuations(set, basis.means));
  return c;
}

Field reconstruct(const Field& mean, const Matrix& modes, std::span<const double> coeffs) {
  if (coeffs.size() != modes.cols()) {
    throw DomainError("reconstruct: " + std::to_string(coeffs.size()) + " coefficients for " +
                      std::to_string(modes.cols()) + " modes");
  }
  if (mean.size() != modes.rows()) throw DomainError("reconstruct: mean and modes differ in size");
  Field out = mean;
  auto v = out.values();
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double a = coeffs[i];
    auto m = modes.col(i);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += a * m[k];
  }
  return out;
}

Matrix poisson_modes(const Matrix& vorticity_modes, const Grid& grid, double tol) {
  if (vorticity_modes.rows() != grid.size()) {
    throw DomainError("poisson_modes: modes do not match the grid");
  }
  // Ro = 1 and Fr = 0 reduce the Helmholtz operator to the Dirichlet
  // Laplacian; negated it is SPD.
  PhysParams unit;
  unit.Ro = 1.0;
  unit.Fr = 0.0;
  SparseSystem sys{assemble_helmholtz(grid, Layer::top, unit), {}, true};
  sys.matrix.scale(-1.0);

  Matrix out(vorticity_modes.rows(), vorticity_modes.cols());
  const int max_iter = 10 * static_cast<int>(grid.size());
  for (std::size_t i = 0; i < vorticity_modes.cols(); ++i) {
    auto phi = vorticity_modes.col(i);
    sys.rhs.assign(phi.begin(), phi.end());
    try {
      const auto res = solve_linear(sys, tol, max_iter);
      std::copy(res.x.begin(), res.x.end(), out.col(i).begin());
    } catch (const SolverError& e) {
      throw SolverError("poisson_modes: mode " + std::to_string(i + 1) + ": " + e.what(),
                        e.residual());
    }
  }
  return out;
}

void save_basis(const PodBasis& basis, const std::filesystem::path& modes_path,
                const std::filesystem::path& means_path) {
  SnapshotSet modes;
  modes.field = basis.field;
  modes.grid = basis.grid;
  for (std::size_t i = 0; i < basis.retained; ++i) modes.times.push_back(static_cast<double>(i + 1));
  modes.data = basis.modes;
  nlohmann::json extra = {{"kind", "pod_basis"},
                          {"singular_values", basis.singular_values},
                          {"retained", basis.retained},
                          {"energy_fraction", basis.energy_fraction},
                          {"energy_exponent", basis.exponent}};
  save(modes, modes_path, extra.dump());

  SnapshotSet means;
  means.field = basis.field;
  means.grid = basis.grid;
  means.times = {0.0};
  for (const auto& m : basis.means) {
    if (!m.param.empty()) means.params.push_back(m.param);
    means.data.append_col(m.value.values());
  }
  save(means, means_path, nlohmann::json{{"kind", "time_average"}}.dump());
}

PodBasis load_basis(const std::filesystem::path& modes_path,
                    const std::filesystem::path& means_path) {
  const SnapshotSet modes = load(modes_path);
  PodBasis basis;
  basis.field = modes.field;
  basis.grid = modes.grid;
  basis.modes = modes.data;
  basis.retained = modes.n_s();
  std::ifstream in(sidecar_path(modes_path));
  try {
    const auto meta = nlohmann::json::parse(in);
    basis.singular_values = meta.at("singular_values").get<std::vector<double>>();
    basis.energy_fraction = meta.at("energy_fraction").get<double>();
    basis.exponent = meta.at("energy_exponent").get<double>();
    if (meta.at("retained").get<std::size_t>() != basis.retained) {
      throw FormatError("basis sidecar: retained count disagrees with the container", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("basis sidecar: ") + e.what(), 0);
  }

  const SnapshotSet means = load(means_path);
  if (means.field != basis.field || means.n_h() != modes.n_h()) {
    throw FormatError("mean container does not belong to basis " + modes_path.string(), 0);
  }
  const Grid g(means.grid);
  for (std::size_t d = 0; d < means.n_s(); ++d) {
    auto col = means.data.col(d);
    basis.means.push_back(TimeAverage{means.field,
                                      means.params.empty() ? std::vector<double>{} : means.params[d],
                                      Field(g, std::vector<double>(col.begin(), col.end()))});
  }
  return basis;
}

void write_coefficients_csv(const CoefficientSeries& c, const std::filesystem::path& path) {
  CsvTable t;
  t.header.push_back("t");
  const std::size_t dim = c.params.empty() ? 0 : c.params.front().size();
  for (std::size_t k = 0; k < dim; ++k) t.header.push_back("mu_" + std::to_string(k + 1));
  for (std::size_t i = 0; i < c.n_r(); ++i) t.header.push_back("alpha_" + std::to_string(i + 1));
  for (std::size_t s = 0; s < c.coeffs.cols(); ++s) {
    std::vector<double> row{c.times[s % c.n_t()]};
    if (dim) {
      const auto& mu = c.params[s / c.n_t()];
      row.insert(row.end(), mu.begin(), mu.end());
    }
    auto col = c.coeffs.col(s);
    row.insert(row.end(), col.begin(), col.end());
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

CoefficientSeries read_coefficients_csv(const std::filesystem::path& path, FieldId field) {
  const CsvTable t = read_csv(path);
  if (t.header.empty() || t.header.front() != "t") {
    throw IoError("coefficients csv: first column must be 't' in " + path.string());
  }
  std::size_t dim = 0;
  while (1 + dim < t.header.size() && t.header[1 + dim].rfind("mu_", 0) == 0) ++dim;
  const std::size_t n_r = t.header.size() - 1 - dim;
  CoefficientSeries c;
  c.field = field;
  c.coeffs = Matrix(n_r, t.rows.size());
  for (std::size_t s = 0; s < t.rows.size(); ++s) {
    const auto& row = t.rows[s];
    std::vector<double> mu(row.begin() + 1, row.begin() + 1 + static_cast<std::ptrdiff_t>(dim));
    if (dim && (c.params.empty() || c.params.back() != mu)) c.params.push_back(mu);
    if (c.params.size() <= 1) c.times.push_back(row[0]);
    for (std::size_t i = 0; i < n_r; ++i) c.coeffs(i, s) = row[1 + dim + i];
  }
  if (c.n_t() * c.n_d() != t.rows.size()) {
    throw IoError("coefficients csv: parameter blocks of unequal length in " + path.string());
  }
  return c;
}

}  // namespace qg2rom
