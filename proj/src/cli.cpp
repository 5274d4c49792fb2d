#include "qg2rom/cli.hpp"

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/io.hpp"
#include "qg2rom/pipeline.hpp"

namespace qg2rom {

namespace {

struct Common {
  std::string config;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->required();
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Overrides every seed in the configuration");
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = RunConfig::load(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.lstm_q.seed = *c.seed;
    cfg.lstm_psi.seed = *c.seed;
  }
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-layer quasi-geostrophic POD-LSTM reduced-order model", "qg2rom"};
  app.require_subcommand(1);
  Common common;
  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"fom-run", "Run the full-order model and store snapshots"},
      {"pod-build", "Build POD bases and modal coefficients"},
      {"lstm-train", "Train the coefficient models"},
      {"rom-predict", "Forecast with the reduced-order model"},
      {"report", "Collect prediction metrics into one table"},
      {"pipeline", "Run every stage in order"},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help), common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "qg2rom: " << e.what() << '\n';
    return 2;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  PipelineOptions opt{common.jobs, &out};
  try {
    const RunConfig cfg = load_config(common);
    if (stage == "fom-run") {
      const FomStageSummary s = run_fom_stage(cfg, opt);
      out << "fom-run: " << s.runs << " run, " << s.cached << " cached, " << format_short(s.wall_seconds)
          << " s\n";
    } else if (stage == "pod-build") {
      run_pod_stage(cfg, opt);
    } else if (stage == "lstm-train") {
      run_lstm_stage(cfg, opt);
    } else if (stage == "rom-predict") {
      run_predict_stage(cfg, opt);
    } else if (stage == "report") {
      run_report(artifact_paths(cfg).root, &out);
    } else {
      run_pipeline(cfg, opt);
    }
  } catch (const ConfigError& e) {
    err << "qg2rom " << stage << ": configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "qg2rom " << stage << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace qg2rom
