#include "mfbalance/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mfbalance/error.hpp"

namespace mfbalance {

void ServerSpec::validate() const {
  if (!(capacity.cpu > 0 && capacity.ram > 0 && capacity.net > 0))
    throw ConfigError("server " + std::to_string(id) + " must have positive capacities");
}

std::vector<ServerSpec> default_cluster() {
  std::vector<ServerSpec> out;
  for (int cluster = 1; cluster <= 2; ++cluster) {
    for (int n = 1; n <= 6; ++n) {
      Resources cap;
      if (n % 2 == 1) {
        cap = {400, 450, 300};
      } else if (n < 6) {
        cap = {300, 350, 250};
      } else {
        cap = cluster == 1 ? Resources{500, 550, 350} : Resources{600, 650, 400};
      }
      out.push_back({10 * cluster + n, cluster, cap});
    }
  }
  return out;
}

void validate_cluster(std::span<const ServerSpec> servers) {
  if (servers.empty()) throw ConfigError("cluster has no servers");
  std::set<int> ids;
  for (const auto& s : servers) {
    s.validate();
    if (!ids.insert(s.id).second) throw ConfigError("duplicate server id " + std::to_string(s.id));
  }
}

ServerState::ServerState(ServerSpec spec, double os_overhead, std::size_t max_samples)
    : spec_(spec), os_overhead_(os_overhead), max_samples_(std::max<std::size_t>(max_samples, 1)) {
  spec_.validate();
  if (!(os_overhead_ > 0)) throw ConfigError("OS overhead factor must be positive");
}

Resources ServerState::overload() const {
  auto excess = [](double d, double c) { return std::max(0.0, d / c - 1.0); };
  return {excess(demand_.cpu, spec_.capacity.cpu), excess(demand_.ram, spec_.capacity.ram),
          excess(demand_.net, spec_.capacity.net)};
}

bool ServerState::is_active(std::uint64_t request_id) const {
  return std::any_of(active_.begin(), active_.end(),
                     [&](const Request& r) { return r.id == request_id; });
}

void ServerState::recompute() {
  // Summed from scratch in admission order so that admit followed by release
  // restores the previous value bit for bit.
  Resources d;
  for (const auto& r : active_) d += demand_of(r);
  demand_ = d;
  util_ = {std::min(1.0, d.cpu / spec_.capacity.cpu), std::min(1.0, d.ram / spec_.capacity.ram),
           std::min(1.0, d.net / spec_.capacity.net)};
}

void ServerState::admit(const Request& r) {
  if (is_active(r.id))
    throw ConfigError("request " + std::to_string(r.id) + " is already active on server " +
                      std::to_string(spec_.id));
  active_.push_back(r);
  recompute();
  measured_by_class_[r.class_id] += demand_of(r) * os_overhead_;
}

std::size_t ServerState::release_expired(double now) {
  const auto before = active_.size();
  std::erase_if(active_, [now](const Request& r) { return r.departure_time() <= now; });
  const std::size_t released = before - active_.size();
  if (released > 0) recompute();
  return released;
}

void ServerState::record_sample(double t, double dt) {
  samples_.push_back({t, util_});
  if (samples_.size() > max_samples_) samples_.pop_front();
  overload_debt_ += overload() * dt;
}

void ServerState::reset_measurements() {
  measured_by_class_.clear();
  for (const auto& r : active_) measured_by_class_[r.class_id] += demand_of(r) * os_overhead_;
}

WindowedUtilization sample_window(const ServerState& state, double window, double period) {
  if (!(period > 0) || !(window >= period))
    throw ConfigError("observation window must be >= sample period > 0");
  const auto& samples = state.window_samples();
  if (samples.empty()) throw InsufficientDataError("no utilization samples recorded");
  const double end = samples.back().t;
  // Small slack so that a window of k * period holds exactly k samples.
  const double start = end - window + 1e-9 * std::max(1.0, window);
  WindowedUtilization out;
  out.window = window;
  out.sample_period = period;
  Resources sum;
  for (auto it = samples.rbegin(); it != samples.rend() && it->t > start; ++it) {
    sum += it->util;
    ++out.samples;
  }
  if (out.samples == 0) throw InsufficientDataError("no utilization samples in window");
  const double n = static_cast<double>(out.samples);
  out.cpu_avg = sum.cpu / n;
  out.ram_avg = sum.ram / n;
  out.net_avg = sum.net / n;
  return out;
}

ClassLoadBreakdown class_breakdown(const WindowedUtilization& util,
                                   const std::map<std::string, Resources>& measured_by_class) {
  if (measured_by_class.empty())
    throw InsufficientDataError("class breakdown needs at least one class reading");
  ClassLoadBreakdown out;
  Resources total;
  for (const auto& [id, reading] : measured_by_class) total += reading;
  const double uniform = 1.0 / static_cast<double>(measured_by_class.size());
  out.uniform_cpu = total.cpu <= 0;
  out.uniform_ram = total.ram <= 0;
  out.uniform_net = total.net <= 0;
  for (const auto& [id, reading] : measured_by_class) {
    ClassShare cs;
    cs.share.cpu = out.uniform_cpu ? uniform : reading.cpu / total.cpu;
    cs.share.ram = out.uniform_ram ? uniform : reading.ram / total.ram;
    cs.share.net = out.uniform_net ? uniform : reading.net / total.net;
    cs.load = {util.cpu_avg * cs.share.cpu, util.ram_avg * cs.share.ram,
               util.net_avg * cs.share.net};
    out.classes.emplace(id, cs);
  }
  return out;
}

}  // namespace mfbalance
