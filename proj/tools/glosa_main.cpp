#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glosa/scenario.hpp"
#include "glosa/sim.hpp"
#include "glosa/trace_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitScenario = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string scenario_path;
  std::vector<std::string> drivers;
  std::string out_dir = ".";
  double initial_speed_kmh = -1.0;
  std::string mpc_weights;
  bool emit_plot_data = false;
  unsigned seed = 0;
  int verbose = 0;
};

void add_common_flags(CLI::App* cmd, Options* o) {
  cmd->add_option("--scenario", o->scenario_path, "Scenario file path")->required();
  cmd->add_option("--driver", o->drivers,
                  "Driver kinds: baseline, advised_nonoptimal, advised_optimal")
      ->delimiter(',');
  cmd->add_option("--out", o->out_dir, "Output directory (created if missing)");
  cmd->add_option("--initial-speed-kmh", o->initial_speed_kmh,
                  "Override the scenario initial speed");
  cmd->add_option("--mpc-weights", o->mpc_weights, "Override MPC weights as wv,wa,wj");
  cmd->add_flag("--emit-plot-data", o->emit_plot_data,
                "Write per-figure CSVs (abscissa, velocity, acceleration, AEC)");
  cmd->add_option("--seed", o->seed, "Run seed recorded in the outputs");
  cmd->add_flag("-v,--verbose", o->verbose, "Increase verbosity (repeatable)");
}

int log_level(const Options& o) {
  int level = o.verbose;
  if (const char* env = std::getenv("GLOSA_LOG")) {
    const std::string v = env;
    if (v == "debug") level = std::max(level, 2);
    else if (v == "info") level = std::max(level, 1);
  }
  return level;
}

std::vector<glosa::DriverKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<glosa::DriverKind> kinds;
  for (const auto& n : names) {
    const auto k = glosa::driver_kind_from(n);
    if (!k) throw CLI::ValidationError("--driver", "unknown driver kind: " + n);
    kinds.push_back(*k);
  }
  return kinds;
}

glosa::Scenario load_with_overrides(const Options& o) {
  glosa::Scenario sc = glosa::load_scenario(o.scenario_path);
  if (o.initial_speed_kmh >= 0.0) {
    sc.initial_speed_mps = o.initial_speed_kmh * glosa::kKmhToMps;
  }
  if (!o.mpc_weights.empty()) {
    std::istringstream in(o.mpc_weights);
    char c1 = 0, c2 = 0;
    if (!(in >> sc.mpc.w_v >> c1 >> sc.mpc.w_a >> c2 >> sc.mpc.w_j) || c1 != ',' ||
        c2 != ',') {
      throw CLI::ValidationError("--mpc-weights", "expected wv,wa,wj");
    }
  }
  sc.validate();  // overrides must respect the field invariants
  return sc;
}

std::vector<glosa::SimTrace> run_all(const glosa::Scenario& sc,
                                     const std::vector<glosa::DriverKind>& kinds,
                                     const Options& o) {
  glosa::SimOptions sim_opts;
  sim_opts.seed = o.seed;
  if (log_level(o) >= 2) {
    sim_opts.mpc_log = [](const std::string& line) { std::cerr << line << "\n"; };
  }
  std::vector<glosa::SimTrace> traces;
  for (const auto kind : kinds) {
    if (log_level(o) >= 1) std::cerr << "running " << to_string(kind) << "...\n";
    traces.push_back(glosa::run(sc, kind, sim_opts));
    const std::string csv = o.out_dir + "/trace_" + to_string(kind) + ".csv";
    glosa::write_trace_csv(traces.back(), csv);
    if (log_level(o) >= 1) std::cerr << "wrote " << csv << "\n";
  }
  if (o.emit_plot_data) glosa::write_plot_data(traces, o.out_dir);
  return traces;
}

int cmd_run(const Options& o) {
  const auto kinds = parse_kinds(o.drivers.empty()
                                     ? std::vector<std::string>{"baseline"}
                                     : o.drivers);
  const glosa::Scenario sc = load_with_overrides(o);
  std::filesystem::create_directories(o.out_dir);
  const auto traces = run_all(sc, kinds, o);
  std::ostringstream report;
  for (const auto& t : traces) report << glosa::format_summary(t.summary) << "\n";
  if (traces.size() >= 2) {
    report << glosa::format_compare_report(glosa::compare(traces));
  }
  glosa::write_text_file(o.out_dir + "/report.txt", report.str());
  std::cout << report.str();
  return kExitOk;
}

int cmd_compare(const Options& o) {
  if (o.drivers.size() < 2) {
    throw CLI::ValidationError("--driver", "compare needs at least two driver kinds");
  }
  const auto kinds = parse_kinds(o.drivers);
  const glosa::Scenario sc = load_with_overrides(o);
  std::filesystem::create_directories(o.out_dir);
  const auto traces = run_all(sc, kinds, o);
  const std::string report = glosa::format_compare_report(glosa::compare(traces));
  glosa::write_text_file(o.out_dir + "/report.txt", report);
  std::cout << report;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic-light speed advisory: corridor simulation and comparison"};
  app.require_subcommand(1);
  Options options;

  CLI::App* run_cmd = app.add_subcommand(
      "run", "Simulate one or more driver kinds and write traces");
  add_common_flags(run_cmd, &options);
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Run several driver kinds and report stops/time/energy");
  add_common_flags(compare_cmd, &options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(options);
    if (compare_cmd->parsed()) return cmd_compare(options);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const glosa::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
