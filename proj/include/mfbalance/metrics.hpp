#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mfbalance/cluster.hpp"

namespace mfbalance {

// Processor, memory and bandwidth weighting coefficients; a + b + c = 1.
struct Weights {
  double a = 1.0 / 3.0;
  double b = 1.0 / 3.0;
  double c = 1.0 / 3.0;

  void validate(double tolerance = 1e-12) const;
  double combine(const Resources& r) const { return a * r.cpu + b * r.ram + c * r.net; }
};

// What the metrics need to know about one server at one instant.
struct ServerSnapshot {
  int id = 0;
  Resources capacity;
  Resources demand;  // raw active demand, may exceed capacity
  Resources util;    // normalized utilization in [0, 1]
};

ServerSnapshot snapshot_of(const ServerState& state);

struct SystemAverages {
  double cpu_all = 0.0;
  double ram_all = 0.0;
  double net_all = 0.0;

  Resources as_resources() const { return {cpu_all, ram_all, net_all}; }
};

struct ResourceImbalance {
  double cpu = 0.0;
  double ram = 0.0;
  double net = 0.0;
};

struct ImbalanceReport {
  double t = 0.0;
  double imb_cpu = 0.0;
  double imb_ram = 0.0;
  double imb_net = 0.0;
  std::map<int, double> per_server;  // server id -> IMB_i
  double imb_tot = 0.0;
  SystemAverages averages;
  std::map<int, Resources> utilization;          // utilization the report was computed from
  std::map<int, ClassLoadBreakdown> breakdowns;  // per-class loads, when recorded
};

struct RunSummary {
  std::optional<double> equilibrium_time;
  double imb_tot_final = 0.0;
  std::optional<double> avg_duration;
  std::map<int, double> processing_period_per_server;  // max weighted load seen per server
  double processing_period_system = 0.0;              // mean capacity-weighted system load
  double efficiency = 0.0;                            // mean weighted load over servers and time
  double run_length = 0.0;
  std::size_t materialized = 0;
  std::size_t admitted = 0;
  std::size_t dropped = 0;
  std::size_t completed = 0;
};

// Capacity-weighted mean utilization per resource.
SystemAverages system_averages(std::span<const ServerSnapshot> servers);

// Sum over servers of squared deviation from the system average, per resource.
ResourceImbalance resource_imbalance(std::span<const ServerSnapshot> servers,
                                     const SystemAverages& averages);

// a (cpu - cpu_all)^2 + b (ram - ram_all)^2 + c (net - net_all)^2
double server_imbalance(const ServerSnapshot& server, const SystemAverages& averages,
                        const Weights& w);

double total_imbalance(const std::map<int, double>& per_server);

// Everything above for one instant.
ImbalanceReport imbalance_report(double t, std::span<const ServerSnapshot> servers,
                                 const Weights& w);

struct EquilibriumRule {
  double window = 60.0;
  double epsilon = 0.005;
};

// Earliest sample time t0 after which every full window [t, t + window]
// (t >= t0) has max - min of imb_tot below epsilon. At least one full window
// must follow t0; otherwise there is no equilibrium within the run.
std::optional<double> detect_equilibrium(std::span<const std::pair<double, double>> series,
                                         const EquilibriumRule& rule = {});

struct SummaryOptions {
  Weights weights;
  EquilibriumRule equilibrium;
  // imb_tot_final is the mean imb_tot over reports in the last `final_window` seconds.
  double final_window = 60.0;
};

// Summary statistics; `sojourn_times` holds completion minus arrival for
// every completed request.
RunSummary run_summary(std::span<const ImbalanceReport> reports,
                       std::span<const double> sojourn_times, const SummaryOptions& options = {});

// Header `t,imb_cpu,imb_ram,imb_net,imb_tot,imb_s<id>...` in server id order.
void write_reports_csv(std::ostream& out, std::span<const ImbalanceReport> reports);
std::vector<ImbalanceReport> read_reports_csv(std::istream& in, const std::string& source);

// Flat `key = value` block.
void write_summary(std::ostream& out, const RunSummary& summary);

}  // namespace mfbalance
