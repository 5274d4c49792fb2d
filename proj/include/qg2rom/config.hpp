#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qg2rom/fom.hpp"
#include "qg2rom/grid.hpp"
#include "qg2rom/lstm.hpp"
#include "qg2rom/pod.hpp"

namespace qg2rom {

struct SnapshotPlan {
  double start = 0.0;
  // Time between snapshots; 0 keeps every step.
  double interval = 0.0;
  // Snapshots after this time are held out as reference data. Defaults to
  // the end of the run.
  std::optional<double> train_end;
};

struct ParametricPlan {
  // Physics field that varies: one of Ro, Re, Fr, sigma, delta.
  std::string parameter = "delta";
  std::vector<double> samples;
  // Values to predict at; defaults to the samples.
  std::vector<double> predict;

  bool active() const { return !samples.empty(); }
};

struct RunConfig {
  GridSpec grid{64, 128};
  PhysParams physics;
  TimeConfig time;
  SnapshotPlan snapshots;
  PodRequest pod;
  LstmConfig lstm_q = LstmConfig::q_defaults();
  LstmConfig lstm_psi = LstmConfig::psi_defaults();
  ParametricPlan parametric;
  std::filesystem::path output_dir = "qg2rom_out";
  std::uint64_t seed = 0;
  bool remark1 = true;

  // Parses and validates a JSON document. Unknown keys, wrong types and
  // invalid values throw ConfigError naming the offending key.
  static RunConfig parse(const std::string& json_text);
  static RunConfig load(const std::filesystem::path& path);

  // Canonical JSON of the effective configuration, used for digests.
  std::string canonical_json() const;

  // Physics of parameter sample k (the base physics when time-only).
  PhysParams physics_for(std::size_t k) const;
  PhysParams physics_at(double value) const;
  std::size_t n_samples() const { return parametric.active() ? parametric.samples.size() : 1; }
  // Snapshot stride in steps.
  int snapshot_stride() const;
  double train_end() const { return snapshots.train_end.value_or(time.t_end); }
  TimeConfig fom_time() const;
  LstmConfig lstm_for(FieldId id) const;

  void validate() const;
};

}  // namespace qg2rom
