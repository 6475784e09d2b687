#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mfbalance/balancer.hpp"
#include "mfbalance/metrics.hpp"
#include "mfbalance/traffic.hpp"

namespace mfbalance {

enum class MonitoringKind { kPerRequest, kFixedInterval, kAdaptive };

MonitoringKind parse_monitoring(const std::string& name);
std::string monitoring_name(MonitoringKind kind);

struct MonitoringMode {
  MonitoringKind kind = MonitoringKind::kFixedInterval;
  double interval = 10.0;      // fixed interval, and the adaptive starting interval
  double min_interval = 1.0;   // adaptive bounds
  double max_interval = 30.0;
  double cv_threshold = 1.0;   // adaptive: shrink when arrival CV exceeds this
  double cv_window = 60.0;     // trailing window for the arrival CV

  void validate() const;
};

// Arrival times seen so far, used by adaptive and per-request monitoring.
struct ArrivalHistory {
  std::vector<double> times;        // sorted arrival times already seen
  std::optional<double> next_arrival;  // first arrival after `now`, if known
  double bin = 1.0;                 // bin width for the arrival-count CV
};

// Coefficient of variation of per-bin arrival counts over (now - window, now].
double arrival_cv(const ArrivalHistory& history, double now, double window);

// Time of the monitoring event after `now`. For adaptive mode `current`
// holds the interval in force and is updated (halved when the arrival CV
// exceeds the threshold, doubled otherwise, clamped to the bounds).
double next_monitoring_time(const MonitoringMode& mode, const ArrivalHistory& history, double now,
                            double& current);

// What the balancer sees when placing a request. `monitored` is the cluster
// state at the last monitoring event plus the demand the balancer itself
// placed since then; departures stay invisible until the next event.
// `instantaneous` is the live state.
enum class DispatchView { kMonitored, kInstantaneous };

DispatchView parse_dispatch_view(const std::string& name);
std::string dispatch_view_name(DispatchView view);

struct Scenario {
  std::vector<ServerSpec> cluster = default_cluster();
  std::vector<FlowClass> classes = default_classes();
  MultifractalSpec traffic;
  Policy policy;
  MonitoringMode monitoring;
  double run_length = 500.0;  // seconds
  double tick = 1.0;
  double os_overhead = 1.05;
  bool reject_when_saturated = false;
  DispatchView view = DispatchView::kMonitored;
  EquilibriumRule equilibrium;
  double final_window = 60.0;
  bool record_breakdowns = false;
  std::uint64_t seed = 1;

  const Weights& weights() const { return policy.weights; }
  void validate() const;
};

// Defaults for one (H, delta_h) cell: the trace spans the run exactly.
Scenario default_scenario(double target_h, double target_delta_h, std::uint64_t seed = 1);

struct RunResult {
  std::vector<ImbalanceReport> reports;
  RunSummary summary;
  TrafficTrace trace;
  std::vector<double> utilization_level;  // mean weighted load per tick, for diagnostics
};

// Discrete-time simulation of the scenario. Propagates CalibrationError.
RunResult run(const Scenario& scenario);

// Same, on an already generated trace (the scenario's traffic targets are ignored).
RunResult run_on_trace(const Scenario& scenario, TrafficTrace trace);

struct SweepCell {
  double target_h = 0.0;
  double target_delta_h = 0.0;
};

// The 4 x 4 grid H in {0.6, 0.7, 0.8, 0.9} by delta_h in {1.5, 2, 4, 6}.
std::vector<SweepCell> table1_grid();

struct SweepRow {
  SweepCell cell;
  double t_eq = 0.0;              // mean, censored replicates counted at run length
  double t_eq_censored = 0.0;     // fraction of replicates without equilibrium
  double imb_tot_final = 0.0;     // mean over replicates
  std::size_t seeds = 0;
  std::size_t calibration_misses = 0;  // replicates run on a best-effort trace
  std::vector<std::optional<double>> replicate_t_eq;
  std::vector<double> replicate_imb_tot_final;
};

// Seed of replicate `replicate` in cell `cell_index`.
std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t cell_index, std::size_t replicate);

struct SweepOptions {
  std::size_t seeds_per_cell = 10;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Runs every cell/replicate of the grid on `base` with the cell's traffic
// targets. Rows come back in grid order regardless of thread scheduling.
std::vector<SweepRow> sweep(std::span<const SweepCell> grid, const Scenario& base,
                            const SweepOptions& options = {});

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace mfbalance
