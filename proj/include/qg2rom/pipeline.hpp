#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "qg2rom/config.hpp"
#include "qg2rom/rom.hpp"

namespace qg2rom {

struct PipelineOptions {
  int jobs = 1;
  std::ostream* log = nullptr;
};

// Runs fn(0..n-1) on up to `jobs` threads. The first exception thrown by any
// task is rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Artifact directory layout.
struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path snapshot_dir(const std::string& tag) const { return root / "snapshots" / tag; }
  std::filesystem::path training_snapshots(const std::string& tag, FieldId id) const;
  std::filesystem::path heldout_snapshots(const std::string& tag, FieldId id) const;
  std::filesystem::path basis(FieldId id) const;
  std::filesystem::path mean(FieldId id) const;
  std::filesystem::path coefficients(FieldId id) const;
  std::filesystem::path singular_values(FieldId id) const;
  std::filesystem::path poisson_modes(FieldId id) const;
  std::filesystem::path model(FieldId id) const;
  std::filesystem::path loss(FieldId id) const;
  std::filesystem::path prediction_dir(const std::string& tag) const { return root / "predictions" / tag; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

// Effective artifact root: QG2ROM_OUTPUT when set, else config.output_dir.
ArtifactPaths artifact_paths(const RunConfig& config);

// "time_only" or "<parameter>_<value>".
std::string sample_tag(const RunConfig& config, std::size_t k);
std::string value_tag(const RunConfig& config, double value);

struct FomStageSummary {
  std::size_t runs = 0;
  std::size_t cached = 0;
  double wall_seconds = 0.0;
};

// One FOM per parameter sample. Snapshots up to snapshots.train_end are
// stored as training data, later ones as held-out reference. A sample whose
// files exist with a matching configuration digest is not recomputed.
FomStageSummary run_fom_stage(const RunConfig& config, const PipelineOptions& opt = {});

// POD bases, means, coefficient series and singular-value tables for the
// four fields, plus Poisson modes of the vorticity bases when enabled.
void run_pod_stage(const RunConfig& config, const PipelineOptions& opt = {});

// Trains the four models from the coefficient files. Throws IoError when a
// coefficient file is missing.
void run_lstm_stage(const RunConfig& config, const PipelineOptions& opt = {});

RomArtifacts load_artifacts(const RunConfig& config);

// Forecasts from the last training snapshot to time.t_end for every
// prediction target and writes coefficients, time-averaged fields, energy
// series, PMFs and, when FOM reference data exists, errors and
// absolute-difference fields.
void run_predict_stage(const RunConfig& config, const PipelineOptions& opt = {});

// Collects predictions/*/metrics.csv into report.csv and report.txt. Returns
// the number of rows. Throws IoError when there is nothing to report.
std::size_t run_report(const std::filesystem::path& root, std::ostream* out = nullptr);

void run_pipeline(const RunConfig& config, const PipelineOptions& opt = {});

}  // namespace qg2rom
