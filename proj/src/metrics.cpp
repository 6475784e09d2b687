#include "mfbalance/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "mfbalance/csv.hpp"
#include "mfbalance/error.hpp"

namespace mfbalance {

void Weights::validate(double tolerance) const {
  if (!(a >= 0 && b >= 0 && c >= 0)) throw ConfigError("weights must be nonnegative");
  if (std::abs(a + b + c - 1.0) > tolerance) throw ConfigError("weights must sum to 1");
}

ServerSnapshot snapshot_of(const ServerState& state) {
  return {state.spec().id, state.spec().capacity, state.demand(), state.util()};
}

SystemAverages system_averages(std::span<const ServerSnapshot> servers) {
  if (servers.empty()) throw ConfigError("system averages need at least one server");
  Resources weighted, capacity;
  Resources lo = servers.front().util, hi = lo;
  for (const auto& s : servers) {
    weighted.cpu += s.util.cpu * s.capacity.cpu;
    weighted.ram += s.util.ram * s.capacity.ram;
    weighted.net += s.util.net * s.capacity.net;
    capacity += s.capacity;
    lo = {std::min(lo.cpu, s.util.cpu), std::min(lo.ram, s.util.ram), std::min(lo.net, s.util.net)};
    hi = {std::max(hi.cpu, s.util.cpu), std::max(hi.ram, s.util.ram), std::max(hi.net, s.util.net)};
  }
  // Rounding can push a weighted mean just outside the range of its inputs;
  // clamping keeps identical loads at exactly zero deviation.
  return {std::clamp(weighted.cpu / capacity.cpu, lo.cpu, hi.cpu),
          std::clamp(weighted.ram / capacity.ram, lo.ram, hi.ram),
          std::clamp(weighted.net / capacity.net, lo.net, hi.net)};
}

ResourceImbalance resource_imbalance(std::span<const ServerSnapshot> servers,
                                     const SystemAverages& averages) {
  ResourceImbalance out;
  for (const auto& s : servers) {
    const double dc = s.util.cpu - averages.cpu_all;
    const double dr = s.util.ram - averages.ram_all;
    const double dn = s.util.net - averages.net_all;
    out.cpu += dc * dc;
    out.ram += dr * dr;
    out.net += dn * dn;
  }
  return out;
}

double server_imbalance(const ServerSnapshot& server, const SystemAverages& averages,
                        const Weights& w) {
  w.validate();
  const double dc = server.util.cpu - averages.cpu_all;
  const double dr = server.util.ram - averages.ram_all;
  const double dn = server.util.net - averages.net_all;
  return w.a * dc * dc + w.b * dr * dr + w.c * dn * dn;
}

double total_imbalance(const std::map<int, double>& per_server) {
  if (per_server.empty()) throw ConfigError("total imbalance needs at least one server");
  double sum = 0;
  for (const auto& [id, v] : per_server) sum += v;
  return sum / static_cast<double>(per_server.size());
}

ImbalanceReport imbalance_report(double t, std::span<const ServerSnapshot> servers,
                                 const Weights& w) {
  ImbalanceReport r;
  r.t = t;
  r.averages = system_averages(servers);
  const auto imb = resource_imbalance(servers, r.averages);
  r.imb_cpu = imb.cpu;
  r.imb_ram = imb.ram;
  r.imb_net = imb.net;
  for (const auto& s : servers) {
    r.per_server[s.id] = server_imbalance(s, r.averages, w);
    r.utilization[s.id] = s.util;
  }
  r.imb_tot = total_imbalance(r.per_server);
  return r;
}

std::optional<double> detect_equilibrium(std::span<const std::pair<double, double>> series,
                                         const EquilibriumRule& rule) {
  if (series.empty()) throw InsufficientDataError("equilibrium detection needs samples");
  if (!(rule.window > 0) || !(rule.epsilon > 0))
    throw ConfigError("equilibrium window and epsilon must be positive");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (series[i].first < series[i - 1].first)
      throw ConfigError("equilibrium series must be sorted by time");

  const double t_last = series.back().first;
  const double slack = 1e-9 * std::max(1.0, rule.window);
  auto range_from = [&](std::size_t i) {
    double lo = series[i].second, hi = series[i].second;
    for (std::size_t j = i; j < series.size() && series[j].first <= series[i].first + rule.window + slack; ++j) {
      lo = std::min(lo, series[j].second);
      hi = std::max(hi, series[j].second);
    }
    return hi - lo;
  };

  if (series.front().first + rule.window > t_last + slack) {
    // Shorter than one window: judge the whole run as a single window.
    if (range_from(0) < rule.epsilon) return series.front().first;
    return std::nullopt;
  }

  std::optional<std::size_t> last_bad;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].first + rule.window > t_last + slack) break;  // only full windows
    if (range_from(i) >= rule.epsilon) last_bad = i;
  }
  if (!last_bad) return series.front().first;
  const std::size_t next = *last_bad + 1;
  if (next >= series.size() || series[next].first + rule.window > t_last + slack)
    return std::nullopt;
  return series[next].first;
}

RunSummary run_summary(std::span<const ImbalanceReport> reports,
                       std::span<const double> sojourn_times, const SummaryOptions& options) {
  if (reports.empty()) throw InsufficientDataError("run summary needs at least one report");
  options.weights.validate();
  RunSummary s;

  std::vector<std::pair<double, double>> series;
  series.reserve(reports.size());
  for (const auto& r : reports) series.emplace_back(r.t, r.imb_tot);
  s.equilibrium_time = detect_equilibrium(series, options.equilibrium);

  const double t_last = reports.back().t;
  double tail_sum = 0;
  std::size_t tail_n = 0;
  for (const auto& r : reports) {
    if (r.t > t_last - options.final_window || &r == &reports.back()) {
      tail_sum += r.imb_tot;
      ++tail_n;
    }
  }
  s.imb_tot_final = tail_sum / static_cast<double>(tail_n);

  if (!sojourn_times.empty())
    s.avg_duration = std::accumulate(sojourn_times.begin(), sojourn_times.end(), 0.0) /
                     static_cast<double>(sojourn_times.size());

  double system_sum = 0, server_sum = 0;
  std::size_t server_n = 0;
  for (const auto& r : reports) {
    system_sum += options.weights.combine(r.averages.as_resources());
    for (const auto& [id, util] : r.utilization) {
      const double load = options.weights.combine(util);
      auto [it, inserted] = s.processing_period_per_server.try_emplace(id, load);
      if (!inserted) it->second = std::max(it->second, load);
      server_sum += load;
      ++server_n;
    }
  }
  s.processing_period_system = system_sum / static_cast<double>(reports.size());
  s.efficiency = server_n ? server_sum / static_cast<double>(server_n) : 0.0;
  s.run_length = t_last;
  s.completed = sojourn_times.size();
  return s;
}

void write_reports_csv(std::ostream& out, std::span<const ImbalanceReport> reports) {
  out << "t,imb_cpu,imb_ram,imb_net,imb_tot";
  if (!reports.empty())
    for (const auto& [id, v] : reports.front().per_server) out << ",imb_s" << id;
  out << '\n';
  for (const auto& r : reports) {
    out << format_number(r.t) << ',' << format_number(r.imb_cpu) << ','
        << format_number(r.imb_ram) << ',' << format_number(r.imb_net) << ','
        << format_number(r.imb_tot);
    for (const auto& [id, v] : r.per_server) out << ',' << format_number(v);
    out << '\n';
  }
}

std::vector<ImbalanceReport> read_reports_csv(std::istream& in, const std::string& source) {
  const CsvTable table = read_csv(in, source);
  const std::size_t ct = table.column("t"), cc = table.column("imb_cpu"),
                    cr = table.column("imb_ram"), cn = table.column("imb_net"),
                    ctot = table.column("imb_tot");
  std::vector<std::pair<int, std::size_t>> server_cols;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const std::string& h = table.header[i];
    if (h.rfind("imb_s", 0) == 0) {
      try {
        server_cols.emplace_back(std::stoi(h.substr(5)), i);
      } catch (const std::exception&) {
        throw ParseError(source, 1, "bad server column '" + h + "'");
      }
    }
  }
  std::vector<ImbalanceReport> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    ImbalanceReport rep;
    rep.t = table.number(r, ct);
    rep.imb_cpu = table.number(r, cc);
    rep.imb_ram = table.number(r, cr);
    rep.imb_net = table.number(r, cn);
    rep.imb_tot = table.number(r, ctot);
    for (const auto& [id, col] : server_cols) rep.per_server[id] = table.number(r, col);
    if (!out.empty() && rep.t <= out.back().t)
      throw ParseError(source, table.line_numbers[r], "report times must strictly increase");
    out.push_back(std::move(rep));
  }
  return out;
}

void write_summary(std::ostream& out, const RunSummary& s) {
  out << "equilibrium_time = "
      << (s.equilibrium_time ? format_number(*s.equilibrium_time)
                             : ">" + format_number(s.run_length))
      << '\n';
  out << "equilibrium_censored = " << (s.equilibrium_time ? 0 : 1) << '\n';
  out << "imb_tot_final = " << format_number(s.imb_tot_final) << '\n';
  out << "avg_duration = " << (s.avg_duration ? format_number(*s.avg_duration) : "none") << '\n';
  out << "processing_period_system = " << format_number(s.processing_period_system) << '\n';
  out << "efficiency = " << format_number(s.efficiency) << '\n';
  for (const auto& [id, v] : s.processing_period_per_server)
    out << "processing_period_s" << id << " = " << format_number(v) << '\n';
  out << "run_length = " << format_number(s.run_length) << '\n';
  out << "materialized = " << s.materialized << '\n';
  out << "admitted = " << s.admitted << '\n';
  out << "dropped = " << s.dropped << '\n';
  out << "completed = " << s.completed << '\n';
}

}  // namespace mfbalance
