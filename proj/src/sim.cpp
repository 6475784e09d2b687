#include "mfbalance/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "mfbalance/csv.hpp"
#include "mfbalance/error.hpp"

namespace mfbalance {

MonitoringKind parse_monitoring(const std::string& name) {
  if (name == "per_request") return MonitoringKind::kPerRequest;
  if (name == "fixed_interval" || name == "fixed") return MonitoringKind::kFixedInterval;
  if (name == "adaptive") return MonitoringKind::kAdaptive;
  throw ConfigError("unknown monitoring mode '" + name +
                    "' (expected per_request, fixed_interval or adaptive)");
}

std::string monitoring_name(MonitoringKind kind) {
  switch (kind) {
    case MonitoringKind::kPerRequest:
      return "per_request";
    case MonitoringKind::kFixedInterval:
      return "fixed_interval";
    case MonitoringKind::kAdaptive:
      return "adaptive";
  }
  return "unknown";
}

DispatchView parse_dispatch_view(const std::string& name) {
  if (name == "monitored") return DispatchView::kMonitored;
  if (name == "instantaneous") return DispatchView::kInstantaneous;
  throw ConfigError("unknown dispatch view '" + name + "' (expected monitored or instantaneous)");
}

std::string dispatch_view_name(DispatchView view) {
  return view == DispatchView::kMonitored ? "monitored" : "instantaneous";
}

void MonitoringMode::validate() const {
  if (kind == MonitoringKind::kPerRequest) return;
  if (!(interval > 0)) throw ConfigError("monitoring interval must be positive");
  if (kind == MonitoringKind::kAdaptive) {
    if (!(min_interval > 0 && min_interval <= interval && interval <= max_interval))
      throw ConfigError("adaptive monitoring needs 0 < min <= interval <= max");
    if (!(cv_threshold > 0)) throw ConfigError("adaptive CV threshold must be positive");
    if (!(cv_window > 0)) throw ConfigError("adaptive CV window must be positive");
  }
}

double arrival_cv(const ArrivalHistory& history, double now, double window) {
  const double bin = history.bin > 0 ? history.bin : 1.0;
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::round(window / bin)));
  const double start = now - static_cast<double>(bins) * bin;
  std::vector<double> counts(bins, 0.0);
  auto it = std::upper_bound(history.times.begin(), history.times.end(), start);
  for (; it != history.times.end() && *it <= now; ++it) {
    auto idx = static_cast<std::size_t>((*it - start) / bin);
    if (idx >= bins) idx = bins - 1;
    counts[idx] += 1.0;
  }
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / bins;
  if (mean <= 0) return 0.0;
  double var = 0;
  for (double c : counts) var += (c - mean) * (c - mean);
  var /= static_cast<double>(bins);
  return std::sqrt(var) / mean;
}

double next_monitoring_time(const MonitoringMode& mode, const ArrivalHistory& history, double now,
                            double& current) {
  switch (mode.kind) {
    case MonitoringKind::kPerRequest:
      return history.next_arrival ? *history.next_arrival
                                  : std::numeric_limits<double>::infinity();
    case MonitoringKind::kFixedInterval:
      current = mode.interval;
      return now + mode.interval;
    case MonitoringKind::kAdaptive: {
      const double cv = arrival_cv(history, now, mode.cv_window);
      current = cv > mode.cv_threshold ? std::max(mode.min_interval, current / 2)
                                       : std::min(mode.max_interval, current * 2);
      return now + current;
    }
  }
  return now + mode.interval;
}

void Scenario::validate() const {
  validate_cluster(cluster);
  validate_classes(classes);
  traffic.validate();
  policy.weights.validate(1e-9);
  monitoring.validate();
  if (!(tick > 0)) throw ConfigError("tick must be positive");
  if (!(run_length > 0)) throw ConfigError("run length must be positive");
  if (monitoring.kind != MonitoringKind::kPerRequest && run_length < monitoring.interval)
    throw ConfigError("run length is shorter than the monitoring window");
  if (!(os_overhead > 0)) throw ConfigError("OS overhead factor must be positive");
  if (!(equilibrium.window > 0 && equilibrium.epsilon > 0))
    throw ConfigError("equilibrium window and epsilon must be positive");
}

Scenario default_scenario(double target_h, double target_delta_h, std::uint64_t seed) {
  Scenario s;
  s.traffic.target_h = target_h;
  s.traffic.target_delta_h = target_delta_h;
  s.traffic.length = 4096;
  s.traffic.slot_duration = s.run_length / static_cast<double>(s.traffic.length);
  s.seed = seed;
  return s;
}

namespace {

std::vector<ServerSnapshot> live_snapshots(const std::vector<ServerState>& states) {
  std::vector<ServerSnapshot> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(snapshot_of(s));
  return out;
}

bool saturated(const ServerSnapshot& s) {
  return s.demand.cpu >= s.capacity.cpu || s.demand.ram >= s.capacity.ram ||
         s.demand.net >= s.capacity.net;
}

}  // namespace

RunResult run(const Scenario& scenario) {
  scenario.validate();
  MultifractalSpec spec = scenario.traffic;
  spec.seed = derive_seed(scenario.seed, "traffic");
  return run_on_trace(scenario, generate_traffic(spec));
}

RunResult run_on_trace(const Scenario& scenario, TrafficTrace trace) {
  scenario.validate();
  RunResult result;

  std::vector<Request> requests =
      materialize_requests(trace, scenario.classes, derive_seed(scenario.seed, "requests"),
                           {scenario.traffic.mean_rate});
  std::erase_if(requests, [&](const Request& r) { return r.arrival_time >= scenario.run_length; });
  result.summary.materialized = requests.size();

  std::vector<ServerSpec> specs = scenario.cluster;
  std::sort(specs.begin(), specs.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::vector<ServerState> states;
  for (const auto& s : specs) states.emplace_back(s, scenario.os_overhead);

  Policy policy = scenario.policy;
  policy.tie_seed = derive_seed(scenario.seed, "ties");
  Balancer balancer(policy);

  const auto& mode = scenario.monitoring;
  // Per-request monitoring refreshes the view before every placement.
  const bool live_view = scenario.view == DispatchView::kInstantaneous ||
                         mode.kind == MonitoringKind::kPerRequest;
  std::vector<ServerSnapshot> view = live_snapshots(states);
  double current_interval = mode.interval;
  ArrivalHistory history;
  history.bin = scenario.tick;
  double next_monitor = mode.kind == MonitoringKind::kPerRequest
                            ? (requests.empty() ? std::numeric_limits<double>::infinity()
                                                : requests.front().arrival_time)
                            : mode.interval;
  double last_report = 0.0;

  const auto ticks = static_cast<std::size_t>(std::llround(scenario.run_length / scenario.tick));
  const double eps = 1e-9 * scenario.tick;
  std::size_t next_req = 0;
  std::vector<Request> admitted;
  admitted.reserve(requests.size());

  for (std::size_t k = 0; k < ticks; ++k) {
    const double t0 = static_cast<double>(k) * scenario.tick;
    const double t1 = static_cast<double>(k + 1) * scenario.tick;

    for (auto& s : states) s.release_expired(t0);

    while (next_req < requests.size() && requests[next_req].arrival_time < t1) {
      const Request& r = requests[next_req++];
      if (live_view) view = live_snapshots(states);
      const DispatchDecision d = balancer.dispatch(view, r);
      history.times.push_back(r.arrival_time);
      if (scenario.reject_when_saturated && saturated(view[d.server_index])) {
        ++result.summary.dropped;
        continue;
      }
      states[d.server_index].admit(r);
      ServerSnapshot& seen = view[d.server_index];
      seen.demand += demand_of(r);
      seen.util = {std::min(1.0, seen.demand.cpu / seen.capacity.cpu),
                   std::min(1.0, seen.demand.ram / seen.capacity.ram),
                   std::min(1.0, seen.demand.net / seen.capacity.net)};
      admitted.push_back(r);
      ++result.summary.admitted;
    }

    double level = 0;
    for (auto& s : states) {
      s.record_sample(t1, scenario.tick);
      level += scenario.weights().combine(s.util());
    }
    result.utilization_level.push_back(level / static_cast<double>(states.size()));

    const bool last_tick = k + 1 == ticks;
    if (t1 + eps >= next_monitor || last_tick) {
      const double window = std::max(t1 - last_report, scenario.tick);
      std::vector<ServerSnapshot> snaps;
      std::vector<WindowedUtilization> windows;
      for (const auto& s : states) {
        const auto w = sample_window(s, window, scenario.tick);
        ServerSnapshot snap = snapshot_of(s);
        snap.util = w.averages();
        snaps.push_back(snap);
        windows.push_back(w);
      }
      ImbalanceReport report = imbalance_report(t1, snaps, scenario.weights());
      // Between reports the balancer knows the state seen at the last report
      // plus its own placements; departures stay invisible until the next one.
      if (!live_view) view = live_snapshots(states);
      if (scenario.record_breakdowns) {
        for (std::size_t i = 0; i < states.size(); ++i)
          if (!states[i].measured_by_class().empty())
            report.breakdowns[states[i].spec().id] =
                class_breakdown(windows[i], states[i].measured_by_class());
      }
      for (auto& s : states) s.reset_measurements();
      result.reports.push_back(std::move(report));
      last_report = t1;

      history.next_arrival = next_req < requests.size()
                                 ? std::optional<double>(requests[next_req].arrival_time)
                                 : std::nullopt;
      next_monitor = next_monitoring_time(mode, history, t1, current_interval);
    }
  }

  std::vector<double> sojourns;
  for (const auto& r : admitted)
    if (r.departure_time() <= scenario.run_length) sojourns.push_back(r.duration);

  SummaryOptions opts;
  opts.weights = scenario.weights();
  opts.equilibrium = scenario.equilibrium;
  opts.final_window = scenario.final_window;
  RunSummary summary = run_summary(result.reports, sojourns, opts);
  summary.materialized = result.summary.materialized;
  summary.admitted = result.summary.admitted;
  summary.dropped = result.summary.dropped;
  result.summary = summary;
  result.trace = std::move(trace);
  return result;
}

std::vector<SweepCell> table1_grid() {
  std::vector<SweepCell> grid;
  for (double h : {0.6, 0.7, 0.8, 0.9})
    for (double dh : {1.5, 2.0, 4.0, 6.0}) grid.push_back({h, dh});
  return grid;
}

std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t cell_index, std::size_t replicate) {
  return derive_seed(base_seed, "sweep", cell_index, replicate);
}

namespace {

struct ReplicateOutcome {
  std::optional<double> t_eq;
  double imb_tot_final = 0.0;
  bool calibration_miss = false;
};

ReplicateOutcome run_replicate(const Scenario& base, const SweepCell& cell, std::size_t cell_index,
                               std::size_t replicate) {
  Scenario sc = base;
  sc.traffic.target_h = cell.target_h;
  sc.traffic.target_delta_h = cell.target_delta_h;
  sc.seed = sweep_seed(base.seed, cell_index, replicate);
  ReplicateOutcome out;
  RunResult res;
  try {
    res = run(sc);
  } catch (const CalibrationError& e) {
    out.calibration_miss = true;
    res = run_on_trace(sc, e.best());
  }
  out.t_eq = res.summary.equilibrium_time;
  out.imb_tot_final = res.summary.imb_tot_final;
  return out;
}

}  // namespace

std::vector<SweepRow> sweep(std::span<const SweepCell> grid, const Scenario& base,
                            const SweepOptions& options) {
  base.validate();
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (options.seeds_per_cell == 0) throw ConfigError("sweep needs at least one seed per cell");
  for (const auto& c : grid) {
    MultifractalSpec probe = base.traffic;
    probe.target_h = c.target_h;
    probe.target_delta_h = c.target_delta_h;
    probe.validate();
  }

  const std::size_t reps = options.seeds_per_cell;
  const std::size_t jobs = grid.size() * reps;
  std::vector<ReplicateOutcome> outcomes(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        outcomes[j] = run_replicate(base, grid[j / reps], j / reps, j % reps);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    SweepRow row;
    row.cell = grid[c];
    row.seeds = reps;
    double t_sum = 0, imb_sum = 0;
    std::size_t censored = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& o = outcomes[c * reps + r];
      row.replicate_t_eq.push_back(o.t_eq);
      row.replicate_imb_tot_final.push_back(o.imb_tot_final);
      if (o.t_eq) {
        t_sum += *o.t_eq;
      } else {
        t_sum += base.run_length;
        ++censored;
      }
      imb_sum += o.imb_tot_final;
      row.calibration_misses += o.calibration_miss ? 1 : 0;
    }
    row.t_eq = t_sum / static_cast<double>(reps);
    row.t_eq_censored = static_cast<double>(censored) / static_cast<double>(reps);
    row.imb_tot_final = imb_sum / static_cast<double>(reps);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "H,delta_h,t_eq,t_eq_censored,imb_tot_final,seeds\n";
  for (const auto& r : rows) {
    out << format_number(r.cell.target_h) << ',' << format_number(r.cell.target_delta_h) << ','
        << format_number(r.t_eq) << ',' << format_number(r.t_eq_censored) << ','
        << format_number(r.imb_tot_final) << ',' << r.seeds << '\n';
  }
}

}  // namespace mfbalance
