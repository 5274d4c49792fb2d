#include "qg2rom/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/snapshots.hpp"

namespace qg2rom {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("config: unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
  }
}

void read_lstm(const json& obj, const std::string& where, LstmConfig& c) {
  check_keys(obj, where,
             {"layers", "cells", "batch_size", "epochs", "validation_fraction", "learning_rate",
              "dropout", "weight_decay", "lookback", "seed"});
  read(obj, where, "layers", c.layers);
  read(obj, where, "cells", c.cells);
  read(obj, where, "batch_size", c.batch_size);
  read(obj, where, "epochs", c.epochs);
  read(obj, where, "validation_fraction", c.validation_fraction);
  read(obj, where, "learning_rate", c.learning_rate);
  read(obj, where, "dropout", c.dropout);
  read(obj, where, "weight_decay", c.weight_decay);
  read(obj, where, "lookback", c.lookback);
  read(obj, where, "seed", c.seed);
}

json lstm_json(const LstmConfig& c) {
  return {{"layers", c.layers},
          {"cells", c.cells},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"validation_fraction", c.validation_fraction},
          {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"weight_decay", c.weight_decay},
          {"lookback", c.lookback},
          {"seed", c.seed}};
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(doc, "",
             {"grid", "physics", "time", "snapshots", "pod", "lstm_q", "lstm_psi", "parametric",
              "output_dir", "seed"});
  RunConfig c;
  bool lstm_q_seed = false;
  bool lstm_psi_seed = false;
  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    check_keys(g, "grid", {"nx", "ny", "x0", "xf", "y_lo", "y_hi"});
    read(g, "grid", "nx", c.grid.nx);
    read(g, "grid", "ny", c.grid.ny);
    read(g, "grid", "x0", c.grid.x0);
    read(g, "grid", "xf", c.grid.xf);
    read(g, "grid", "y_lo", c.grid.y_lo);
    read(g, "grid", "y_hi", c.grid.y_hi);
  }
  if (doc.contains("physics")) {
    const auto& p = doc["physics"];
    check_keys(p, "physics", {"Ro", "Re", "Fr", "sigma", "delta"});
    read(p, "physics", "Ro", c.physics.Ro);
    read(p, "physics", "Re", c.physics.Re);
    read(p, "physics", "Fr", c.physics.Fr);
    read(p, "physics", "sigma", c.physics.sigma);
    read(p, "physics", "delta", c.physics.delta);
  }
  if (doc.contains("time")) {
    const auto& t = doc["time"];
    check_keys(t, "time", {"dt", "t0", "t_end"});
    read(t, "time", "dt", c.time.dt);
    read(t, "time", "t0", c.time.t0);
    read(t, "time", "t_end", c.time.t_end);
  }
  if (doc.contains("snapshots")) {
    const auto& s = doc["snapshots"];
    check_keys(s, "snapshots", {"start", "interval", "train_end"});
    read(s, "snapshots", "start", c.snapshots.start);
    read(s, "snapshots", "interval", c.snapshots.interval);
    if (s.contains("train_end") && !s["train_end"].is_null()) {
      double v = 0.0;
      read(s, "snapshots", "train_end", v);
      c.snapshots.train_end = v;
    }
  } else {
    c.snapshots.start = c.time.t0;
  }
  if (doc.contains("pod")) {
    const auto& p = doc["pod"];
    check_keys(p, "pod", {"rank", "threshold", "energy_exponent", "remark1"});
    if (p.contains("rank") && !p["rank"].is_null()) {
      long long r = 0;
      read(p, "pod", "rank", r);
      if (r < 1) throw ConfigError("config: 'pod.rank' must be >= 1");
      c.pod.rank = static_cast<std::size_t>(r);
    }
    read(p, "pod", "threshold", c.pod.threshold);
    read(p, "pod", "energy_exponent", c.pod.exponent);
    read(p, "pod", "remark1", c.remark1);
  }
  read(doc, "", "seed", c.seed);
  if (doc.contains("lstm_q")) {
    read_lstm(doc["lstm_q"], "lstm_q", c.lstm_q);
    lstm_q_seed = doc["lstm_q"].contains("seed");
  }
  if (doc.contains("lstm_psi")) {
    read_lstm(doc["lstm_psi"], "lstm_psi", c.lstm_psi);
    lstm_psi_seed = doc["lstm_psi"].contains("seed");
  }
  if (!lstm_q_seed) c.lstm_q.seed = c.seed;
  if (!lstm_psi_seed) c.lstm_psi.seed = c.seed;
  if (doc.contains("parametric")) {
    const auto& p = doc["parametric"];
    check_keys(p, "parametric", {"parameter", "samples", "predict"});
    read(p, "parametric", "parameter", c.parametric.parameter);
    read(p, "parametric", "samples", c.parametric.samples);
    read(p, "parametric", "predict", c.parametric.predict);
  }
  if (doc.contains("output_dir")) {
    std::string dir;
    read(doc, "", "output_dir", dir);
    c.output_dir = dir;
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::validate() const {
  Grid g(grid);
  physics.validate();
  time.validate();
  if (!(snapshots.interval >= 0.0)) throw ConfigError("config: 'snapshots.interval' must be >= 0");
  if (snapshots.start < time.t0 || snapshots.start > time.t_end) {
    throw ConfigError("config: 'snapshots.start' must lie in [t0, t_end]");
  }
  if (snapshots.train_end && (*snapshots.train_end < snapshots.start || *snapshots.train_end > time.t_end)) {
    throw ConfigError("config: 'snapshots.train_end' must lie in [snapshots.start, t_end]");
  }
  if (snapshots.interval > 0.0) {
    const double ratio = snapshots.interval / time.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio) {
      throw ConfigError("config: 'snapshots.interval' must be a multiple of 'time.dt'");
    }
  }
  if (!(pod.threshold > 0.0 && pod.threshold <= 1.0)) throw ConfigError("config: 'pod.threshold' must lie in (0, 1]");
  if (!(pod.exponent > 0.0)) throw ConfigError("config: 'pod.energy_exponent' must be positive");
  lstm_q.validate();
  lstm_psi.validate();
  static const std::set<std::string> names{"Ro", "Re", "Fr", "sigma", "delta"};
  if (!names.count(parametric.parameter)) {
    throw ConfigError("config: 'parametric.parameter' must be one of Ro, Re, Fr, sigma, delta");
  }
  std::set<double> seen;
  for (double v : parametric.samples) {
    if (!seen.insert(v).second) throw ConfigError("config: 'parametric.samples' must be distinct");
    physics_at(v).validate();
  }
  if (!parametric.active() && !parametric.predict.empty()) {
    throw ConfigError("config: 'parametric.predict' needs 'parametric.samples'");
  }
  for (double v : parametric.predict) physics_at(v).validate();
}

PhysParams RunConfig::physics_at(double v) const {
  PhysParams p = physics;
  const auto& n = parametric.parameter;
  if (n == "Ro") p.Ro = v;
  else if (n == "Re") p.Re = v;
  else if (n == "Fr") p.Fr = v;
  else if (n == "sigma") p.sigma = v;
  else p.delta = v;
  return p;
}

PhysParams RunConfig::physics_for(std::size_t k) const {
  return parametric.active() ? physics_at(parametric.samples.at(k)) : physics;
}

int RunConfig::snapshot_stride() const {
  return snapshots.interval > 0.0 ? TimeConfig::stride_for_interval(snapshots.interval, time.dt) : 1;
}

TimeConfig RunConfig::fom_time() const {
  TimeConfig t = time;
  t.snapshot_start = snapshots.start;
  t.snapshot_stride = snapshot_stride();
  return t;
}

LstmConfig RunConfig::lstm_for(FieldId id) const {
  LstmConfig c = id == FieldId::q1 || id == FieldId::q2 ? lstm_q : lstm_psi;
  c.seed += static_cast<std::uint64_t>(id);
  return c;
}

std::string RunConfig::canonical_json() const {
  json j;
  j["grid"] = {{"nx", grid.nx}, {"ny", grid.ny}, {"x0", grid.x0},
               {"xf", grid.xf}, {"y_lo", grid.y_lo}, {"y_hi", grid.y_hi}};
  j["physics"] = {{"Ro", physics.Ro}, {"Re", physics.Re}, {"Fr", physics.Fr},
                  {"sigma", physics.sigma}, {"delta", physics.delta}};
  j["time"] = {{"dt", time.dt}, {"t0", time.t0}, {"t_end", time.t_end}};
  j["snapshots"] = {{"start", snapshots.start}, {"interval", snapshots.interval}, {"train_end", train_end()}};
  j["pod"] = {{"rank", pod.rank ? json(*pod.rank) : json(nullptr)},
              {"threshold", pod.threshold},
              {"energy_exponent", pod.exponent},
              {"remark1", remark1}};
  j["lstm_q"] = lstm_json(lstm_q);
  j["lstm_psi"] = lstm_json(lstm_psi);
  j["parametric"] = {{"parameter", parametric.parameter},
                     {"samples", parametric.samples},
                     {"predict", parametric.predict}};
  j["seed"] = seed;
  return j.dump();
}

}  // namespace qg2rom
