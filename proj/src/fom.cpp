#include "qg2rom/fom.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "qg2rom/errors.hpp"

namespace qg2rom {

void PhysParams::validate() const {
  if (!(Ro > 0.0)) throw ConfigError("physics: Ro must be positive");
  if (!(Re > 0.0)) throw ConfigError("physics: Re must be positive");
  if (!(Fr >= 0.0)) throw ConfigError("physics: Fr must be non-negative");
  if (!(sigma >= 0.0)) throw ConfigError("physics: sigma must be non-negative");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("physics: delta must lie in (0, 1)");
}

double depth_fraction(Layer layer, const PhysParams& p) {
  return layer == Layer::top ? p.delta : 1.0 - p.delta;
}

void TimeConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("time: dt must be positive");
  if (!(t_end >= t0)) throw ConfigError("time: t_end must not precede t0");
  if (snapshot_stride < 1) throw ConfigError("time: snapshot stride must be at least 1");
}

long long TimeConfig::steps() const { return std::llround((t_end - t0) / dt); }

int TimeConfig::stride_for_interval(double interval, double dt) {
  const long long k = std::llround(interval / dt);
  if (k < 1) throw ConfigError("time: snapshot interval shorter than dt");
  return static_cast<int>(k);
}

std::vector<long long> snapshot_steps(const TimeConfig& time) {
  time.validate();
  std::vector<long long> out;
  const long long n = time.steps();
  if (n == 0) return out;
  const long long first = std::max(0LL, std::llround((time.snapshot_start - time.t0) / time.dt));
  for (long long s = first; s <= n; s += time.snapshot_stride) out.push_back(s);
  return out;
}

State State::rest(const Grid& grid, double t0) {
  Field y = Field::from_function(grid, [](double, double yy) { return yy; });
  return State{y, y, Field(grid), Field(grid), t0};
}

Field forcing_field(const Grid& grid) {
  return Field::from_function(grid, [](double, double y) { return std::sin(std::numbers::pi * y); });
}

double munk_scale(const PhysParams& params, double L) {
  if (!(params.Ro > 0.0) || !(params.Re > 0.0) || !(L > 0.0)) {
    throw DomainError("munk_scale: Ro, Re and L must be positive");
  }
  return L * std::cbrt(params.Ro / params.Re);
}

bool resolves_munk_layer(const Grid& grid, const PhysParams& params) {
  return grid.h() < munk_scale(params, 1.0);
}

FaceFluxes face_flux(const Field& psi, const BoundaryRule& bc) {
  const Grid& g = psi.grid();
  const int nx = g.nx();
  const int ny = g.ny();
  const auto& s = g.spec();

  // Corner values, (nx+1) x (ny+1).
  std::vector<double> corner(static_cast<std::size_t>(nx + 1) * (ny + 1));
  auto cidx = [nx](int ci, int cj) { return static_cast<std::size_t>(cj) * (nx + 1) + ci; };
  for (int cj = 0; cj <= ny; ++cj) {
    for (int ci = 0; ci <= nx; ++ci) {
      if (ci == 0 || ci == nx || cj == 0 || cj == ny) {
        corner[cidx(ci, cj)] = bc.at(s.x0 + ci * g.hx(), s.y_lo + cj * g.hy());
      } else {
        corner[cidx(ci, cj)] = 0.25 * (psi.at(ci - 1, cj - 1) + psi.at(ci, cj - 1) +
                                       psi.at(ci - 1, cj) + psi.at(ci, cj));
      }
    }
  }

  FaceFluxes out(g);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // u = dpsi/dy integrated over the face.
      out.x[g.xface(i, j)] = corner[cidx(i, j + 1)] - corner[cidx(i, j)];
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      // v = -dpsi/dx integrated over the face.
      out.y[g.yface(i, j)] = -(corner[cidx(i + 1, j)] - corner[cidx(i, j)]);
    }
  }
  return out;
}

CsrMatrix assemble_transport(const FaceFluxes& flux, const PhysParams& params, double dt) {
  if (!(dt > 0.0)) throw ConfigError("assemble_transport: dt must be positive");
  const Grid& g = flux.grid;
  const int nx = g.nx();
  const int ny = g.ny();
  const double inv_vol = 1.0 / g.cell_volume();
  const double dx2 = 1.0 / (params.Re * g.hx() * g.hx());
  const double dy2 = 1.0 / (params.Re * g.hy() * g.hy());

  CsrBuilder b(g.size(), 5 * g.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = g.index(i, j);
      double diag = 1.0 / dt;
      // Outward fluxes; the interior face value of q is the two-cell average.
      const double out_e = flux.east(i, j);
      const double out_w = -flux.west(i, j);
      const double out_n = flux.north(i, j);
      const double out_s = -flux.south(i, j);

      if (j > 0) {
        diag += 0.5 * out_s * inv_vol + dy2;
        b.add(g.index(i, j - 1), 0.5 * out_s * inv_vol - dy2);
      } else {
        diag += 2.0 * dy2;
      }
      if (i > 0) {
        diag += 0.5 * out_w * inv_vol + dx2;
        b.add(g.index(i - 1, j), 0.5 * out_w * inv_vol - dx2);
      } else {
        diag += 2.0 * dx2;
      }
      b.add(k, diag);
      if (i < nx - 1) {
        b.add(k, 0.5 * out_e * inv_vol + dx2);
        b.add(g.index(i + 1, j), 0.5 * out_e * inv_vol - dx2);
      } else {
        b.add(k, 2.0 * dx2);
      }
      if (j < ny - 1) {
        b.add(k, 0.5 * out_n * inv_vol + dy2);
        b.add(g.index(i, j + 1), 0.5 * out_n * inv_vol - dy2);
      } else {
        b.add(k, 2.0 * dy2);
      }
      b.finish_row();
    }
  }
  return std::move(b).build();
}

namespace {

// Boundary-face contributions of q = y: diffusive half-cell gradient plus the
// convective flux carrying the boundary value.
void add_transport_boundary(const FaceFluxes& flux, const PhysParams& params,
                            std::vector<double>& rhs) {
  const Grid& g = flux.grid;
  const auto& s = g.spec();
  const int nx = g.nx();
  const int ny = g.ny();
  const double inv_vol = 1.0 / g.cell_volume();
  const double dx2 = 2.0 / (params.Re * g.hx() * g.hx());
  const double dy2 = 2.0 / (params.Re * g.hy() * g.hy());
  for (int j = 0; j < ny; ++j) {
    const double y = g.yc(j);
    rhs[g.index(0, j)] += dx2 * y + flux.west(0, j) * y * inv_vol;
    rhs[g.index(nx - 1, j)] += dx2 * y - flux.east(nx - 1, j) * y * inv_vol;
  }
  for (int i = 0; i < nx; ++i) {
    rhs[g.index(i, 0)] += dy2 * s.y_lo + flux.south(i, 0) * s.y_lo * inv_vol;
    rhs[g.index(i, ny - 1)] += dy2 * s.y_hi - flux.north(i, ny - 1) * s.y_hi * inv_vol;
  }
}

}  // namespace

std::vector<double> transport_rhs(Layer layer, const State& prev, const Field* psi1_fresh,
                                  const PhysParams& params, double dt, const Field& forcing,
                                  const FaceFluxes& flux) {
  if (!(dt > 0.0)) throw ConfigError("transport_rhs: dt must be positive");
  const Grid& g = prev.grid();
  const std::size_t n = g.size();
  const BoundaryRule zero = BoundaryRule::homogeneous();
  std::vector<double> rhs(n);

  if (layer == Layer::top) {
    const double c = params.Fr / (params.Re * params.delta);
    Field diff(g);
    for (std::size_t k = 0; k < n; ++k) diff[k] = prev.psi2[k] - prev.psi1[k];
    const Field lap = laplacian(diff, zero);
    for (std::size_t k = 0; k < n; ++k) {
      rhs[k] = forcing[k] + prev.q1[k] / dt - c * lap[k];
    }
  } else {
    if (psi1_fresh == nullptr) {
      throw UsageError("transport_rhs: bottom layer needs psi1 of the current step");
    }
    const double c = params.Fr / (params.Re * (1.0 - params.delta));
    Field diff(g);
    for (std::size_t k = 0; k < n; ++k) diff[k] = (*psi1_fresh)[k] - prev.psi2[k];
    const Field lap_diff = laplacian(diff, zero);
    const Field lap_psi2 = laplacian(prev.psi2, zero);
    for (std::size_t k = 0; k < n; ++k) {
      rhs[k] = prev.q2[k] / dt - params.sigma * lap_psi2[k] - c * lap_diff[k];
    }
  }
  add_transport_boundary(flux, params, rhs);
  return rhs;
}

CsrMatrix assemble_helmholtz(const Grid& g, Layer layer, const PhysParams& params) {
  const int nx = g.nx();
  const int ny = g.ny();
  const double ax = params.Ro / (g.hx() * g.hx());
  const double ay = params.Ro / (g.hy() * g.hy());
  const double shift = params.Fr / depth_fraction(layer, params);

  CsrBuilder b(g.size(), 5 * g.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double diag = -shift;
      if (j > 0) {
        b.add(g.index(i, j - 1), ay);
        diag -= ay;
      } else {
        diag -= 2.0 * ay;
      }
      if (i > 0) {
        b.add(g.index(i - 1, j), ax);
        diag -= ax;
      } else {
        diag -= 2.0 * ax;
      }
      if (i < nx - 1) {
        diag -= ax;
      } else {
        diag -= 2.0 * ax;
      }
      if (j < ny - 1) {
        diag -= ay;
      } else {
        diag -= 2.0 * ay;
      }
      b.add(g.index(i, j), diag);
      if (i < nx - 1) b.add(g.index(i + 1, j), ax);
      if (j < ny - 1) b.add(g.index(i, j + 1), ay);
      b.finish_row();
    }
  }
  return std::move(b).build();
}

std::vector<double> helmholtz_rhs(Layer layer, const Field& q_fresh, const Field& psi_other,
                                  const PhysParams& params) {
  const Grid& g = q_fresh.grid();
  const double c = params.Fr / depth_fraction(layer, params);
  std::vector<double> rhs(g.size());
  for (int j = 0; j < g.ny(); ++j) {
    const double y = g.yc(j);
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      rhs[k] = q_fresh[k] - y - c * psi_other[k];
    }
  }
  return rhs;
}

SegregatedStepper::SegregatedStepper(const Grid& grid, const PhysParams& params, double dt,
                                     Field forcing, SolverSettings settings)
    : grid_(grid), params_(params), dt_(dt), forcing_(std::move(forcing)), settings_(settings) {
  if (!(dt > 0.0)) throw ConfigError("stepper: dt must be positive");
  if (!(forcing_.grid() == grid_)) throw DomainError("stepper: forcing on a different grid");
  helmholtz_top_.matrix = assemble_helmholtz(grid_, Layer::top, params_);
  helmholtz_top_.matrix.scale(-1.0);
  helmholtz_top_.symmetric = true;
  helmholtz_bottom_.matrix = assemble_helmholtz(grid_, Layer::bottom, params_);
  helmholtz_bottom_.matrix.scale(-1.0);
  helmholtz_bottom_.symmetric = true;
}

State SegregatedStepper::advance(const State& s) {
  if (!(s.grid() == grid_)) throw DomainError("stepper: state on a different grid");
  const int max_iter = settings_.max_iter_factor * static_cast<int>(grid_.size());
  auto solve = [&](const SparseSystem& sys, double tol, const Field& guess, const char* stage,
                   double& residual) {
    try {
      SolveResult r = solve_linear(sys, tol, max_iter, guess.values());
      residual = r.relative_residual;
      return Field(grid_, std::move(r.x));
    } catch (const SolverError& e) {
      throw SolverError(std::string(stage) + ": " + e.what(), e.residual());
    }
  };
  auto solve_psi = [&](SparseSystem& sys, std::vector<double> rhs, const Field& guess,
                       const char* stage, double& residual) {
    for (double& v : rhs) v = -v;
    sys.rhs = std::move(rhs);
    return solve(sys, settings_.helmholtz_tol, guess, stage, residual);
  };

  State next{s.q1, s.q2, s.psi1, s.psi2, s.t + dt_};
  State guess = s;
  if (previous_ && std::abs(s.t - last_output_t_) < 0.5 * dt_) {
    auto extrapolate = [](Field& g, const Field& now, const Field& before) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * now[k] - before[k];
    };
    extrapolate(guess.q1, s.q1, previous_->q1);
    extrapolate(guess.q2, s.q2, previous_->q2);
    extrapolate(guess.psi1, s.psi1, previous_->psi1);
    extrapolate(guess.psi2, s.psi2, previous_->psi2);
  }

  // Step 1: top-layer vorticity, convected by the lagged psi1.
  const FaceFluxes flux1 = face_flux(s.psi1);
  SparseSystem t1{assemble_transport(flux1, params_, dt_),
                  transport_rhs(Layer::top, s, nullptr, params_, dt_, forcing_, flux1), false};
  next.q1 = solve(t1, settings_.transport_tol, guess.q1, "step 1 (q1)", residuals_.q1);

  // Step 2: top-layer stream function with the lagged psi2.
  next.psi1 = solve_psi(helmholtz_top_, helmholtz_rhs(Layer::top, next.q1, s.psi2, params_),
                        guess.psi1, "step 2 (psi1)", residuals_.psi1);

  // Step 3: bottom-layer vorticity with the fresh psi1.
  const FaceFluxes flux2 = face_flux(s.psi2);
  SparseSystem t2{assemble_transport(flux2, params_, dt_),
                  transport_rhs(Layer::bottom, s, &next.psi1, params_, dt_, forcing_, flux2),
                  false};
  next.q2 = solve(t2, settings_.transport_tol, guess.q2, "step 3 (q2)", residuals_.q2);

  // Step 4: bottom-layer stream function from the fresh q2 and psi1.
  next.psi2 =
      solve_psi(helmholtz_bottom_, helmholtz_rhs(Layer::bottom, next.q2, next.psi1, params_),
                guess.psi2, "step 4 (psi2)", residuals_.psi2);
  previous_ = s;
  last_output_t_ = next.t;
  return next;
}

State step(const State& state, const PhysParams& params, double dt, const Field& forcing,
           const SolverSettings& settings) {
  SegregatedStepper stepper(state.grid(), params, dt, forcing, settings);
  return stepper.advance(state);
}

RunSummary run_fom(const Grid& grid, const PhysParams& params, const TimeConfig& time,
                   const SnapshotSink& sink, std::optional<State> initial,
                   const SolverSettings& settings) {
  params.validate();
  time.validate();
  const auto wall_start = std::chrono::steady_clock::now();
  RunSummary summary;
  const long long n = time.steps();
  if (n == 0) return summary;

  if (!resolves_munk_layer(grid, params)) {
    std::cerr << "warning: mesh size " << grid.h() << " does not resolve the Munk scale "
              << munk_scale(params, 1.0) << "; the central scheme may be unstable\n";
  }

  const std::vector<long long> emit = snapshot_steps(time);
  std::size_t next_emit = 0;
  State state = initial ? std::move(*initial) : State::rest(grid, time.t0);
  state.t = time.t0;
  SegregatedStepper stepper(grid, params, time.dt, forcing_field(grid), settings);

  auto maybe_emit = [&](long long s) {
    if (next_emit < emit.size() && emit[next_emit] == s) {
      if (sink) sink(state);
      ++summary.snapshots;
      ++next_emit;
    }
  };
  maybe_emit(0);
  for (long long s = 1; s <= n; ++s) {
    try {
      state = stepper.advance(state);
    } catch (const SolverError& e) {
      throw SolverError("run_fom: step " + std::to_string(s) + " (t = " +
                            std::to_string(time.t0 + s * time.dt) + "): " + e.what(),
                        e.residual());
    }
    // Times are recomputed from the step index to avoid accumulating dt.
    state.t = time.t0 + static_cast<double>(s) * time.dt;
    ++summary.steps;
    maybe_emit(s);
  }
  summary.final_residuals = stepper.last_residuals();
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return summary;
}

}  // namespace qg2rom
