#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qg2rom/grid.hpp"
#include "qg2rom/sparse.hpp"

namespace qg2rom {

// Non-dimensional groups of the two-layer model. Defaults are the
// double-gyre benchmark values.
struct PhysParams {
  double Ro = 0.001;
  double Re = 450.0;
  double Fr = 0.1;
  double sigma = 0.005;
  double delta = 0.5;

  // Throws ConfigError unless Ro, Re > 0, Fr, sigma >= 0 and 0 < delta < 1.
  void validate() const;

  bool operator==(const PhysParams&) const = default;
};

enum class Layer { top = 1, bottom = 2 };

// Layer depth fraction: delta for the top layer, 1 - delta for the bottom.
double depth_fraction(Layer layer, const PhysParams& p);

struct TimeConfig {
  double dt = 1e-3;
  double t0 = 0.0;
  double t_end = 1.0;
  // First time at which snapshots are emitted.
  double snapshot_start = 0.0;
  // Emit every `snapshot_stride` steps from snapshot_start on.
  int snapshot_stride = 1;

  // Throws ConfigError for dt <= 0, t_end < t0 or stride < 1.
  void validate() const;
  long long steps() const;
  // Stride that realises a fixed snapshot time increment.
  static int stride_for_interval(double interval, double dt);
};

// Step indices (counted from t0) at which run_fom emits a snapshot.
std::vector<long long> snapshot_steps(const TimeConfig& time);

struct State {
  Field q1;
  Field q2;
  Field psi1;
  Field psi2;
  double t = 0.0;

  // q_l = y, psi_l = 0: the rest state the benchmark starts from.
  static State rest(const Grid& grid, double t0 = 0.0);
  const Grid& grid() const { return q1.grid(); }
};

struct SolverSettings {
  double transport_tol = 1e-9;
  double helmholtz_tol = 1e-10;
  // Iteration cap as a multiple of the cell count.
  int max_iter_factor = 10;
};

// Wind forcing F = sin(pi y) at cell centroids.
Field forcing_field(const Grid& grid);

// L (Ro/Re)^(1/3). Throws DomainError for non-positive inputs.
double munk_scale(const PhysParams& params, double L);

// Volume flux through every face from the curl of (0,0,psi), oriented along
// +x / +y. Corner values of psi come from the four-cell average in the
// interior and from the boundary rule on the boundary, so each face flux is
// a difference of two corner values and every cell is exactly
// divergence-free.
FaceFluxes face_flux(const Field& psi, const BoundaryRule& bc = BoundaryRule::homogeneous());

// (1/dt) I + C(flux) - (1/Re) Lap_h with Dirichlet q = y on the boundary;
// boundary data enters through transport_rhs. Rows are divided by the cell
// volume. Throws ConfigError for dt <= 0.
CsrMatrix assemble_transport(const FaceFluxes& flux, const PhysParams& params, double dt);

// Right-hand side of the transport solve for `layer`:
//   top:    F + q1^n/dt - Fr/(Re delta) Lap(psi2^n - psi1^n)
//   bottom: q2^n/dt - sigma Lap(psi2^n) - Fr/(Re (1-delta)) Lap(psi1^{n+1} - psi2^n)
// plus the Dirichlet contributions of q = y. `flux` must be the face flux of
// the layer's lagged stream function. The bottom layer requires the fresh
// top-layer stream function and throws UsageError without it.
std::vector<double> transport_rhs(Layer layer, const State& prev, const Field* psi1_fresh,
                                  const PhysParams& params, double dt, const Field& forcing,
                                  const FaceFluxes& flux);

// Ro Lap_h - (Fr/c_l) I with homogeneous Dirichlet psi = 0. Negated, it is
// symmetric positive definite.
CsrMatrix assemble_helmholtz(const Grid& grid, Layer layer, const PhysParams& params);

// q - y - (Fr/c_l) psi_other.
std::vector<double> helmholtz_rhs(Layer layer, const Field& q_fresh, const Field& psi_other,
                                  const PhysParams& params);

struct StepResiduals {
  double q1 = 0.0;
  double psi1 = 0.0;
  double q2 = 0.0;
  double psi2 = 0.0;
};

// Segregated BDF1 stepper. Holds the constant Helmholtz operators so a long
// run assembles them once.
class SegregatedStepper {
 public:
  SegregatedStepper(const Grid& grid, const PhysParams& params, double dt, Field forcing,
                    SolverSettings settings = {});

  // Steps 1-4 in order: q1, psi1 (lagged psi2), q2 (fresh psi1), psi2 (fresh
  // q2 and psi1). Throws SolverError naming the failing stage.
  //
  // When `state` is the previous output, Krylov solves start from a linear
  // extrapolation in time; otherwise from the current values.
  State advance(const State& state);

  const StepResiduals& last_residuals() const { return residuals_; }

 private:
  Grid grid_;
  PhysParams params_;
  double dt_;
  Field forcing_;
  SolverSettings settings_;
  SparseSystem helmholtz_top_;
  SparseSystem helmholtz_bottom_;
  StepResiduals residuals_;
  std::optional<State> previous_;
  double last_output_t_ = 0.0;
};

State step(const State& state, const PhysParams& params, double dt, const Field& forcing,
           const SolverSettings& settings = {});

// True when h < L (Ro/Re)^(1/3) with L = 1.
bool resolves_munk_layer(const Grid& grid, const PhysParams& params);

struct RunSummary {
  long long steps = 0;
  long long snapshots = 0;
  double wall_seconds = 0.0;
  StepResiduals final_residuals;
};

using SnapshotSink = std::function<void(const State&)>;

// Advances from time.t0 (rest state unless `initial` is given) to time.t_end
// and hands the state to `sink` at every scheduled snapshot step. A solver
// failure is rethrown with the step index and time. Warns on stderr when the
// mesh does not resolve the Munk layer.
RunSummary run_fom(const Grid& grid, const PhysParams& params, const TimeConfig& time,
                   const SnapshotSink& sink, std::optional<State> initial = std::nullopt,
                   const SolverSettings& settings = {});

}  // namespace qg2rom
