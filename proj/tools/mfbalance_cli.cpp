#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mfbalance/config.hpp"
#include "mfbalance/csv.hpp"
#include "mfbalance/fractal.hpp"
#include "mfbalance/sim.hpp"

namespace fs = std::filesystem;
using namespace mfbalance;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string policy;
  int verbose = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_policy) {
  cmd->add_option("--config", c.config, "INI configuration file");
  cmd->add_option("--seed", c.seed, "top-level seed (overrides [run] seed)");
  cmd->add_option("--out", c.out, "output directory (overrides [run] out)");
  if (with_policy)
    cmd->add_option("--policy", c.policy, "round_robin, least_loaded or min_imbalance");
  cmd->add_flag("-v,--verbose", c.verbose, "progress on stderr");
}

RunConfig resolve(const Common& c) {
  RunConfig config = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) config.scenario.seed = *c.seed;
  if (!c.out.empty()) config.out_dir = c.out;
  if (!c.policy.empty()) config.scenario.policy.kind = parse_policy(c.policy);
  config.verbosity = std::max(config.verbosity, c.verbose);
  config.validate();
  return config;
}

fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void log(const RunConfig& c, const std::string& msg) {
  if (c.verbosity > 0) std::cerr << msg << '\n';
}

void write_generated(const fs::path& dir, const TrafficTrace& trace, bool calibrated) {
  auto trace_out = open_out(dir / "trace.csv");
  write_trace_csv(trace_out, trace);
  auto curve_out = open_out(dir / "curve.csv");
  write_curve_csv(curve_out, trace.achieved);
  curve_out << "calibrated," << (calibrated ? 1 : 0) << ",,\n";
}

int cmd_generate(const Common& common) {
  if (common.config.empty()) throw ConfigError("generate needs --config with a [traffic] section");
  RunConfig c = resolve(common);
  if (!c.has_section("traffic")) throw ConfigError("config has no [traffic] section");
  const fs::path dir = prepare_dir(c.out_dir);
  MultifractalSpec spec = c.scenario.traffic;
  spec.seed = derive_seed(c.scenario.seed, "traffic");
  try {
    const TrafficTrace trace = generate_traffic(spec);
    write_generated(dir, trace, true);
    log(c, "h(2) = " + format_number(trace.achieved.h2()) +
               ", delta_h = " + format_number(trace.achieved.delta_h));
  } catch (const CalibrationError& e) {
    write_generated(dir, e.best(), false);
    throw;
  }
  return 0;
}

int cmd_analyze(const std::string& input, const std::string& out, double slot,
                std::vector<double> qs, bool dyadic) {
  std::ifstream in(input);
  if (!in) throw IoError("cannot open " + input);
  const TrafficTrace trace = read_trace_csv(in, input, slot);
  const QGrid q = qs.empty() ? QGrid::standard() : QGrid(std::move(qs));
  const ScaleGrid scales = dyadic ? ScaleGrid::dyadic(trace.slots.size())
                                  : ScaleGrid::log_spaced(trace.slots.size());
  const HurstCurve curve = estimate_hurst_curve(trace.slots, q, scales);
  if (out.empty()) {
    write_curve_csv(std::cout, curve);
  } else {
    auto f = open_out(out);
    write_curve_csv(f, curve);
  }
  return 0;
}

void write_run(const fs::path& dir, const std::string& stem, const RunResult& r) {
  auto reports = open_out(dir / (stem + ".csv"));
  write_reports_csv(reports, r.reports);
  auto summary = open_out(dir / (stem + "_summary.txt"));
  write_summary(summary, r.summary);
}

RunResult run_logged(const RunConfig& c, const Scenario& s) {
  try {
    return run(s);
  } catch (const CalibrationError& e) {
    log(c, std::string("warning: ") + e.what());
    throw;
  }
}

int cmd_simulate(const Common& common) {
  const RunConfig c = resolve(common);
  const fs::path dir = prepare_dir(c.out_dir);
  const RunResult r = run_logged(c, c.scenario);
  write_run(dir, "reports", r);
  write_summary(std::cout, r.summary);
  return 0;
}

int cmd_sweep(const Common& common, bool table1, std::optional<std::size_t> seeds) {
  RunConfig c = resolve(common);
  if (table1) c.grid = table1_grid();
  if (seeds) c.seeds = *seeds;
  c.validate();
  const fs::path dir = prepare_dir(c.out_dir);
  log(c, "sweeping " + std::to_string(c.grid.size()) + " cells x " + std::to_string(c.seeds) +
             " seeds");
  const auto rows = sweep(c.grid, c.scenario, {c.seeds, 0});
  auto out = open_out(dir / "sweep.csv");
  write_sweep_csv(out, rows);
  write_sweep_csv(std::cout, rows);
  std::size_t misses = 0;
  for (const auto& r : rows) misses += r.calibration_misses;
  if (misses) log(c, std::to_string(misses) + " replicates ran on best-effort traces");
  return 0;
}

// One row per run: equilibrium, final imbalance and load figures.
void write_comparison_header(std::ostream& out) {
  out << "name,equilibrium_time,censored,imb_tot_final,processing_period_system,efficiency\n";
}

// Report CSVs carry no server loads, so rows built from them leave the load
// figures empty.
void write_comparison_row(std::ostream& out, const std::string& name, const RunSummary& s,
                          bool with_load) {
  out << name << ',' << (s.equilibrium_time ? format_number(*s.equilibrium_time) : "") << ','
      << (s.equilibrium_time ? 0 : 1) << ',' << format_number(s.imb_tot_final) << ',';
  if (with_load)
    out << format_number(s.processing_period_system) << ',' << format_number(s.efficiency);
  else
    out << ',';
  out << '\n';
}

int cmd_report(const Common& common, const std::vector<std::string>& inputs) {
  RunConfig c = resolve(common);
  std::ostringstream table;
  write_comparison_header(table);
  if (!inputs.empty()) {
    // Summaries of existing report files.
    SummaryOptions opts;
    opts.weights = c.scenario.weights();
    opts.equilibrium = c.scenario.equilibrium;
    opts.final_window = c.scenario.final_window;
    for (const auto& path : inputs) {
      std::ifstream in(path);
      if (!in) throw IoError("cannot open " + path);
      const auto reports = read_reports_csv(in, path);
      write_comparison_row(table, path, run_summary(reports, {}, opts), false);
    }
    std::cout << table.str();
    if (!common.out.empty()) {
      auto out = open_out(prepare_dir(c.out_dir) / "report.csv");
      out << table.str();
    }
    return 0;
  }
  // Every policy on the same scenario and seed.
  const fs::path dir = prepare_dir(c.out_dir);
  for (auto kind : {PolicyKind::kRoundRobin, PolicyKind::kLeastLoaded, PolicyKind::kMinImbalance}) {
    Scenario s = c.scenario;
    s.policy.kind = kind;
    const RunResult r = run_logged(c, s);
    write_run(dir, "reports_" + policy_name(kind), r);
    write_comparison_row(table, policy_name(kind), r.summary, true);
  }
  auto out = open_out(dir / "report.csv");
  out << table.str();
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load imbalance under multifractal traffic"};
  app.require_subcommand(1);

  Common gen_opts, sim_opts, sweep_opts, report_opts;
  auto* gen = app.add_subcommand("generate", "calibrated traffic trace and its h(q) curve");
  add_common(gen, gen_opts, false);

  auto* ana = app.add_subcommand("analyze", "h(q) curve of a trace CSV");
  std::string ana_in, ana_out;
  double ana_slot = 1.0;
  std::vector<double> ana_q;
  bool ana_dyadic = false;
  ana->add_option("trace", ana_in, "trace CSV with columns slot,intensity")->required();
  ana->add_option("--out", ana_out, "curve CSV path (default stdout)");
  ana->add_option("--slot", ana_slot, "slot duration in seconds");
  ana->add_option("--q", ana_q, "moment orders, e.g. --q -5 -3 -1 1 2 3 5")->allow_extra_args();
  ana->add_flag("--dyadic", ana_dyadic, "powers-of-two scales instead of log-spaced");

  auto* sim = app.add_subcommand("simulate", "one run: report CSV and summary");
  add_common(sim, sim_opts, true);

  auto* swp = app.add_subcommand("sweep", "grid of (H, delta_h) cells over several seeds");
  add_common(swp, sweep_opts, true);
  bool table1 = false;
  std::optional<std::size_t> seeds;
  swp->add_flag("--table1", table1, "the 4 x 4 grid H 0.6..0.9 by delta_h 1.5, 2, 4, 6");
  swp->add_option("--seeds", seeds, "replicates per cell")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "compare policies, or summarize report CSVs");
  add_common(rep, report_opts, false);
  std::vector<std::string> rep_in;
  rep->add_option("reports", rep_in, "report CSVs to summarize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (*gen) return cmd_generate(gen_opts);
    if (*ana) return cmd_analyze(ana_in, ana_out, ana_slot, ana_q, ana_dyadic);
    if (*sim) return cmd_simulate(sim_opts);
    if (*swp) return cmd_sweep(sweep_opts, table1, seeds);
    if (*rep) return cmd_report(report_opts, rep_in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kValidation);
  }
  return 0;
}
