#include "qg2rom/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/io.hpp"
#include "qg2rom/metrics.hpp"

namespace qg2rom {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard lock(mu);
          if (first) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

namespace {

std::string name(FieldId id) { return std::string(to_string(id)); }

bool is_vorticity(FieldId id) { return id == FieldId::q1 || id == FieldId::q2; }

void note(const PipelineOptions& opt, const std::string& msg) {
  static std::mutex mu;
  if (!opt.log) return;
  std::lock_guard lock(mu);
  *opt.log << msg << '\n';
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what(), 0);
  }
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

// Merges `section` into manifest.json under `key`.
void update_manifest(const RunConfig& cfg, const std::string& key, const json& section) {
  const ArtifactPaths paths = artifact_paths(cfg);
  json m = fs::exists(paths.manifest()) ? read_json(paths.manifest()) : json::object();
  m["config"] = json::parse(cfg.canonical_json());
  m["config_digest"] = digest_string(cfg.canonical_json());
  m[key] = section;
  write_json(paths.manifest(), m);
}

std::string fom_key(const RunConfig& cfg, std::size_t k) {
  const PhysParams p = cfg.physics_for(k);
  json j = json::parse(cfg.canonical_json());
  json key = {{"grid", j["grid"]},
              {"time", j["time"]},
              {"snapshots", j["snapshots"]},
              {"physics", {{"Ro", p.Ro}, {"Re", p.Re}, {"Fr", p.Fr}, {"sigma", p.sigma}, {"delta", p.delta}}}};
  return digest_string(key.dump());
}

bool fom_cached(const RunConfig& cfg, std::size_t k, const std::string& key) {
  const ArtifactPaths paths = artifact_paths(cfg);
  const std::string tag = sample_tag(cfg, k);
  auto matches = [&](const fs::path& p) {
    if (!fs::exists(p) || !fs::exists(sidecar_path(p))) return json();
    try {
      json j = read_json(sidecar_path(p));
      return j.value("config_digest", "") == key ? j : json();
    } catch (const std::exception&) {
      return json();
    }
  };
  for (FieldId id : kAllFields) {
    const json train = matches(paths.training_snapshots(tag, id));
    if (train.is_null()) return false;
    if (train.value("heldout", 0) > 0 && matches(paths.heldout_snapshots(tag, id)).is_null()) return false;
  }
  return true;
}

SnapshotSet select_columns(const SnapshotSet& s, std::size_t first, std::size_t count) {
  SnapshotSet out;
  out.field = s.field;
  out.grid = s.grid;
  out.params = s.params;
  out.physics = s.physics;
  out.times.assign(s.times.begin() + static_cast<std::ptrdiff_t>(first),
                   s.times.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.data = s.data.cols_range(first, count);
  if (count == 0) out.data = Matrix(s.n_h(), 0);
  return out;
}

std::vector<std::vector<double>> sample_vectors(const RunConfig& cfg) {
  std::vector<std::vector<double>> out;
  for (double v : cfg.parametric.samples) out.push_back({v});
  return out;
}

SnapshotSet load_training(const RunConfig& cfg, FieldId id) {
  const ArtifactPaths paths = artifact_paths(cfg);
  std::vector<SnapshotSet> blocks;
  for (std::size_t k = 0; k < cfg.n_samples(); ++k) {
    blocks.push_back(load(paths.training_snapshots(sample_tag(cfg, k), id)));
  }
  return concatenate_blocks(blocks);
}

void write_singular_values(const PodBasis& b, const fs::path& path) {
  CsvTable t{{"index", "sigma", "energy_fraction"}, {}};
  for (std::size_t i = 0; i < b.singular_values.size(); ++i) {
    t.rows.push_back({static_cast<double>(i + 1), b.singular_values[i],
                      energy_fraction(b.singular_values, i + 1, b.exponent)});
  }
  write_csv(path, t);
}

}  // namespace

fs::path ArtifactPaths::training_snapshots(const std::string& tag, FieldId id) const {
  return snapshot_dir(tag) / (name(id) + ".qgs");
}
fs::path ArtifactPaths::heldout_snapshots(const std::string& tag, FieldId id) const {
  return snapshot_dir(tag) / (name(id) + "_heldout.qgs");
}
fs::path ArtifactPaths::basis(FieldId id) const { return root / "bases" / (name(id) + ".qgs"); }
fs::path ArtifactPaths::mean(FieldId id) const { return root / "means" / (name(id) + ".qgs"); }
fs::path ArtifactPaths::coefficients(FieldId id) const {
  return root / "bases" / (name(id) + "_coefficients.csv");
}
fs::path ArtifactPaths::singular_values(FieldId id) const {
  return root / "bases" / (name(id) + "_singular_values.csv");
}
fs::path ArtifactPaths::poisson_modes(FieldId id) const {
  return root / "bases" / (name(id) + "_poisson.qgs");
}
fs::path ArtifactPaths::model(FieldId id) const { return root / "models" / (name(id) + ".json"); }
fs::path ArtifactPaths::loss(FieldId id) const { return root / "models" / (name(id) + "_loss.csv"); }

ArtifactPaths artifact_paths(const RunConfig& config) {
  if (const char* env = std::getenv("QG2ROM_OUTPUT"); env && *env) return {fs::path(env)};
  return {config.output_dir};
}

std::string value_tag(const RunConfig& config, double value) {
  return config.parametric.parameter + "_" + format_short(value);
}

std::string sample_tag(const RunConfig& config, std::size_t k) {
  return config.parametric.active() ? value_tag(config, config.parametric.samples.at(k)) : "time_only";
}

FomStageSummary run_fom_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  const ArtifactPaths paths = artifact_paths(cfg);
  const Grid grid(cfg.grid);
  FomStageSummary summary;
  std::mutex mu;
  std::vector<std::string> keys(cfg.n_samples());
  std::vector<double> seconds(cfg.n_samples(), -1.0);
  const json previous = fs::exists(paths.manifest()) ? read_json(paths.manifest()).value("snapshots", json::object())
                                                      : json::object();
  const auto t0 = std::chrono::steady_clock::now();

  parallel_for(cfg.n_samples(), opt.jobs, [&](std::size_t k) {
    const std::string tag = sample_tag(cfg, k);
    keys[k] = fom_key(cfg, k);
    if (fom_cached(cfg, k, keys[k])) {
      note(opt, "fom-run: " + tag + ": cached");
      std::lock_guard lock(mu);
      ++summary.cached;
      return;
    }
    const PhysParams physics = cfg.physics_for(k);
    std::vector<double> label;
    if (cfg.parametric.active()) label = {cfg.parametric.samples[k]};
    SnapshotCollector collector(cfg.grid, physics, label);
    RunSummary rs;
    try {
      rs = run_fom(grid, physics, cfg.fom_time(), [&](const State& s) { collector(s); });
    } catch (const std::exception& e) {
      throw SolverError("fom-run: sample " + tag + ": " + e.what(), 0.0);
    }
    const double train_end = cfg.train_end();
    for (FieldId id : kAllFields) {
      const SnapshotSet& all = collector.set(id);
      std::size_t n_train = 0;
      while (n_train < all.n_t() && all.times[n_train] <= train_end + 1e-9 * cfg.time.dt) ++n_train;
      const std::size_t n_held = all.n_t() - n_train;
      json extra = {{"config_digest", keys[k]}, {"fom_steps", rs.steps}, {"heldout", n_held}};
      extra["role"] = "training";
      save(select_columns(all, 0, n_train), paths.training_snapshots(tag, id), extra.dump());
      const fs::path held = paths.heldout_snapshots(tag, id);
      if (n_held > 0) {
        extra["role"] = "heldout";
        save(select_columns(all, n_train, n_held), held, extra.dump());
      } else {
        fs::remove(held);
        fs::remove(sidecar_path(held));
      }
    }
    std::ostringstream msg;
    msg << "fom-run: " << tag << ": " << rs.steps << " steps, " << rs.snapshots << " snapshots, "
        << std::fixed << std::setprecision(1) << rs.wall_seconds << " s";
    note(opt, msg.str());
    seconds[k] = rs.wall_seconds;
    std::lock_guard lock(mu);
    ++summary.runs;
  });
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json section = json::object();
  for (std::size_t k = 0; k < cfg.n_samples(); ++k) {
    const std::string tag = sample_tag(cfg, k);
    json files = json::object();
    for (FieldId id : kAllFields) {
      for (const auto& p : {paths.training_snapshots(tag, id), paths.heldout_snapshots(tag, id)}) {
        if (fs::exists(p)) files[fs::relative(p, paths.root).generic_string()] = digest_file(p);
      }
    }
    section[tag] = {{"config_digest", keys[k]}, {"files", files}};
    // Wall time of the run that produced the files, kept across cache hits.
    if (seconds[k] >= 0.0) {
      section[tag]["fom_seconds"] = seconds[k];
    } else if (previous.contains(tag) && previous[tag].value("config_digest", "") == keys[k] &&
               previous[tag].contains("fom_seconds")) {
      section[tag]["fom_seconds"] = previous[tag]["fom_seconds"];
    }
  }
  update_manifest(cfg, "snapshots", section);
  return summary;
}

void run_pod_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  const ArtifactPaths paths = artifact_paths(cfg);
  std::array<json, 4> sections;
  parallel_for(4, opt.jobs, [&](std::size_t f) {
    const FieldId id = kAllFields[f];
    const SnapshotSet set = load_training(cfg, id);
    const PodBasis basis = build_basis(set, cfg.pod);
    save_basis(basis, paths.basis(id), paths.mean(id));
    write_coefficients_csv(modal_coefficients(basis, set), paths.coefficients(id));
    write_singular_values(basis, paths.singular_values(id));
    json s = {{"retained", basis.retained},
              {"energy_fraction", basis.energy_fraction},
              {"basis", digest_file(paths.basis(id))},
              {"mean", digest_file(paths.mean(id))},
              {"coefficients", digest_file(paths.coefficients(id))}};
    if (cfg.remark1 && is_vorticity(id)) {
      SnapshotSet xi;
      xi.field = id;
      xi.grid = basis.grid;
      for (std::size_t i = 0; i < basis.retained; ++i) xi.times.push_back(static_cast<double>(i + 1));
      xi.data = poisson_modes(basis.modes, Grid(basis.grid));
      save(xi, paths.poisson_modes(id), json{{"kind", "poisson_modes"}}.dump());
      s["poisson_modes"] = digest_file(paths.poisson_modes(id));
    }
    sections[f] = s;
    note(opt, "pod-build: " + name(id) + ": N_s = " + std::to_string(set.n_s()) + ", N_r = " +
                  std::to_string(basis.retained) + ", energy " + format_short(basis.energy_fraction));
  });
  json section = json::object();
  for (std::size_t f = 0; f < 4; ++f) section[name(kAllFields[f])] = sections[f];
  update_manifest(cfg, "bases", section);
}

void run_lstm_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  const ArtifactPaths paths = artifact_paths(cfg);
  json previous = json::object();
  if (fs::exists(paths.manifest())) {
    const json m = read_json(paths.manifest());
    if (m.contains("models")) previous = m["models"];
  }
  std::array<json, 4> sections;
  parallel_for(4, opt.jobs, [&](std::size_t f) {
    const FieldId id = kAllFields[f];
    const fs::path coeff_path = paths.coefficients(id);
    if (!fs::exists(coeff_path)) throw IoError("lstm-train: missing coefficient file " + coeff_path.string());
    const LstmConfig lc = cfg.lstm_for(id);
    const std::string input_digest =
        digest_string(digest_file(coeff_path) + cfg.canonical_json() + std::to_string(lc.seed));
    const fs::path model_path = paths.model(id);
    if (previous.contains(name(id)) && previous[name(id)].value("input_digest", "") == input_digest &&
        fs::exists(model_path) && fs::exists(paths.loss(id))) {
      sections[f] = previous[name(id)];
      note(opt, "lstm-train: " + name(id) + ": cached");
      return;
    }
    const CoefficientSeries cs = read_coefficients_csv(coeff_path, id);
    const WindowDataset ds = build_windows(cs, lc.lookback);
    const auto t0 = std::chrono::steady_clock::now();
    LstmModel model;
    try {
      model = train(ds, lc);
    } catch (const TrainingError& e) {
      throw TrainingError("lstm-train: " + name(id) + ": " + e.what(), e.epoch());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fs::create_directories(model_path.parent_path());
    model.save(model_path);
    write_loss_csv(model.log(), paths.loss(id));
    auto weights = model_path;
    weights.replace_extension(".weights.bin");
    sections[f] = {{"input_digest", input_digest},
                   {"model", digest_file(model_path)},
                   {"weights", digest_file(weights)},
                   {"final_train_mse", model.log().empty() ? 0.0 : model.log().back().train_mse},
                   {"train_seconds", secs}};
    std::ostringstream msg;
    msg << "lstm-train: " << name(id) << ": " << ds.size() << " windows, " << lc.epochs << " epochs, "
        << std::fixed << std::setprecision(1) << secs << " s";
    if (!model.log().empty()) msg << ", train mse " << format_short(model.log().back().train_mse);
    note(opt, msg.str());
  });
  json section = json::object();
  for (std::size_t f = 0; f < 4; ++f) section[name(kAllFields[f])] = sections[f];
  update_manifest(cfg, "models", section);
}

RomArtifacts load_artifacts(const RunConfig& cfg) {
  const ArtifactPaths paths = artifact_paths(cfg);
  RomArtifacts art;
  art.samples = sample_vectors(cfg);
  for (FieldId id : kAllFields) {
    FieldModel fm;
    fm.basis = load_basis(paths.basis(id), paths.mean(id));
    fm.coeffs = read_coefficients_csv(paths.coefficients(id), id);
    auto model = std::make_shared<LstmModel>(LstmModel::load(paths.model(id)));
    fm.param_dim = model->param_dim();
    fm.predictor = std::move(model);
    art.fields[static_cast<int>(id)] = std::move(fm);
  }
  return art;
}

namespace {

struct MetricRow {
  std::string field;
  std::size_t n_r = 0;
  int lookback = 0;
  double rmse = 0.0;
  double rel_l2 = 0.0;
  double energy_rel_l2 = 0.0;
};

void write_metrics(const std::vector<MetricRow>& rows, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "field,n_r,lookback,rmse,rel_l2,energy_rel_l2\n";
  for (const auto& r : rows) {
    out << r.field << ',' << r.n_r << ',' << r.lookback << ',' << format_number(r.rmse) << ','
        << format_number(r.rel_l2) << ',' << format_number(r.energy_rel_l2) << '\n';
  }
}

Field mean_of(const SnapshotSet& s) { return time_average(s, 0).value; }

std::vector<double> energies(const SnapshotSet& s) {
  std::vector<double> e;
  for (std::size_t c = 0; c < s.n_s(); ++c) e.push_back(field_energy(s.field, s.column_field(c)));
  return e;
}

}  // namespace

void run_predict_stage(const RunConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  const ArtifactPaths paths = artifact_paths(cfg);
  const RomArtifacts art = load_artifacts(cfg);
  const double inc = cfg.snapshots.interval > 0.0 ? cfg.snapshots.interval : cfg.time.dt;
  const double t_last = art.at(FieldId::q1).coeffs.times.back();

  std::vector<std::vector<double>> targets;
  if (!cfg.parametric.active()) {
    targets.push_back({});
  } else {
    const auto& vals = cfg.parametric.predict.empty() ? cfg.parametric.samples : cfg.parametric.predict;
    for (double v : vals) targets.push_back({v});
  }

  json section = json::object();
  for (const auto& mu : targets) {
    const std::string tag = mu.empty() ? "time_only" : value_tag(cfg, mu[0]);
    const fs::path dir = paths.prediction_dir(tag);
    fs::create_directories(dir);
    const long long steps = std::llround((cfg.time.t_end - t_last) / inc);
    if (steps <= 0) {
      note(opt, "rom-predict: " + tag + ": no time left after the training interval, nothing to forecast");
      continue;
    }
    OnlineRequest req{mu, t_last, t_last + static_cast<double>(steps) * inc, inc, false};
    const OnlineResult res = online(art, req);
    if (res.outside_hull) {
      std::cerr << "warning: " << tag << " lies outside the sampled parameter range; using nearest sample "
                << format_short(res.mu_c.at(0)) << '\n';
    }

    // FOM reference data exists only at training samples.
    std::string ref_tag;
    if (mu.empty()) {
      ref_tag = "time_only";
    } else if (std::find(cfg.parametric.samples.begin(), cfg.parametric.samples.end(), mu[0]) !=
               cfg.parametric.samples.end()) {
      ref_tag = tag;
    }

    std::vector<MetricRow> rows;
    std::vector<std::string> series_names;
    std::vector<std::vector<double>> series;
    const std::vector<double>& times = res.fields[0]->times;
    bool have_ref = false;

    auto add_prediction = [&](const FieldPrediction& p, const std::string& label, std::size_t n_r,
                              int lookback, FieldId ref_field) {
      write_field_csv(dir / ("mean_pred_" + label + ".csv"), p.time_average);
      series_names.push_back(label + "_rom");
      series.push_back(p.energy);
      if (ref_tag.empty()) return;
      const fs::path ref_path = paths.heldout_snapshots(ref_tag, ref_field);
      if (!fs::exists(ref_path)) return;
      const SnapshotSet ref = load(ref_path);
      if (ref.n_t() != p.times.size()) {
        note(opt, "rom-predict: " + tag + ": held-out data for " + label +
                      " does not cover the forecast, skipping errors");
        return;
      }
      have_ref = true;
      const Field fom_mean = mean_of(ref);
      write_field_csv(dir / ("mean_fom_" + label + ".csv"), fom_mean);
      write_field_csv(dir / ("absdiff_" + label + ".csv"), absolute_difference(fom_mean, p.time_average));
      const auto fom_energy = energies(ref);
      series_names.push_back(label + "_fom");
      series.push_back(fom_energy);
      rows.push_back({label, n_r, lookback, rmse(fom_mean, p.time_average),
                      rel_l2(fom_mean, p.time_average), series_rel_l2(fom_energy, p.energy)});
    };

    json coeff_digests = json::object();
    for (FieldId id : kAllFields) {
      const FieldPrediction& p = *res.fields[static_cast<int>(id)];
      const FieldModel& fm = art.at(id);
      CoefficientSeries cs;
      cs.field = id;
      cs.times = p.times;
      if (!mu.empty()) cs.params = {mu};
      cs.coeffs = p.coeffs;
      write_coefficients_csv(cs, dir / ("coefficients_" + name(id) + ".csv"));
      for (std::size_t i = 0; i < p.coeffs.rows(); ++i) {
        std::vector<double> vals;
        for (std::size_t s = 0; s < p.coeffs.cols(); ++s) vals.push_back(p.coeffs(i, s));
        write_pmf_csv(pmf(vals), dir / ("pmf_" + name(id) + "_" + std::to_string(i + 1) + ".csv"));
      }
      add_prediction(p, name(id), fm.basis.retained, fm.predictor->lookback(), id);
    }

    if (cfg.remark1) {
      for (auto [q, psi] : {std::pair{FieldId::q1, FieldId::psi1}, std::pair{FieldId::q2, FieldId::psi2}}) {
        const fs::path xi_path = paths.poisson_modes(q);
        if (!fs::exists(xi_path)) throw UsageError("rom-predict: Poisson modes missing: " + xi_path.string());
        const SnapshotSet xi = load(xi_path);
        const FieldPrediction r = remark1_stream(*res.fields[static_cast<int>(q)], xi.data,
                                                 art.at(psi).basis.means.at(res.block).value, psi);
        add_prediction(r, name(psi) + "_remark1", art.at(q).basis.retained,
                       art.at(q).predictor->lookback(), psi);
      }
    }

    write_series_csv(times, series_names, series, dir / "energy.csv");
    if (have_ref) write_metrics(rows, dir / "metrics.csv");
    json info = {{"mu", mu}, {"mu_c", res.mu_c}, {"outside_hull", res.outside_hull},
                 {"t_start", req.t_start}, {"t_end", req.t_end}, {"steps", times.size()}};
    write_json(dir / "prediction.json", info);
    section[tag] = info;
    note(opt, "rom-predict: " + tag + ": " + std::to_string(times.size()) + " steps from t = " +
                  format_short(t_last) + (have_ref ? ", errors written" : ""));
  }
  update_manifest(cfg, "predictions", section);
}

std::size_t run_report(const fs::path& root, std::ostream* out) {
  const fs::path pred = root / "predictions";
  std::vector<fs::path> files;
  if (fs::exists(pred)) {
    for (const auto& e : fs::directory_iterator(pred)) {
      if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) files.push_back(e.path() / "metrics.csv");
    }
  }
  if (files.empty()) throw IoError("report: no prediction metrics under " + root.string());
  std::sort(files.begin(), files.end());

  std::vector<std::vector<std::string>> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells{f.parent_path().filename().string()};
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() != 7) throw IoError("report: malformed row in " + f.string());
      rows.push_back(std::move(cells));
    }
  }

  const std::vector<std::string> header{"prediction", "field", "n_r", "lookback", "rmse", "rel_l2",
                                        "energy_rel_l2"};
  {
    std::ofstream csv(root / "report.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write report.csv");
    for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
    csv << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) csv << (i ? "," : "") << r[i];
      csv << '\n';
    }
  }
  std::ostringstream txt;
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  std::vector<std::vector<std::string>> shown;
  for (const auto& r : rows) {
    std::vector<std::string> s = r;
    for (std::size_t i = 4; i < s.size(); ++i) {
      std::ostringstream v;
      v << std::scientific << std::setprecision(3) << std::stod(s[i]);
      s[i] = v.str();
    }
    for (std::size_t i = 0; i < s.size(); ++i) width[i] = std::max(width[i], s[i].size());
    shown.push_back(std::move(s));
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) txt << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << r[i];
    txt << '\n';
  };
  line(header);
  for (const auto& r : shown) line(r);
  {
    std::ofstream t(root / "report.txt", std::ios::trunc);
    if (!t) throw IoError("cannot write report.txt");
    t << txt.str();
  }
  if (out) *out << txt.str();
  return rows.size();
}

void run_pipeline(const RunConfig& cfg, const PipelineOptions& opt) {
  run_fom_stage(cfg, opt);
  run_pod_stage(cfg, opt);
  run_lstm_stage(cfg, opt);
  run_predict_stage(cfg, opt);
  run_report(artifact_paths(cfg).root, opt.log);
}

}  // namespace qg2rom
