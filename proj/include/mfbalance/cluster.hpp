#pragma once

#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfbalance/traffic.hpp"

namespace mfbalance {

// One value per resource kind: processor, memory, network bandwidth.
struct Resources {
  double cpu = 0.0;
  double ram = 0.0;
  double net = 0.0;

  Resources& operator+=(const Resources& o) {
    cpu += o.cpu;
    ram += o.ram;
    net += o.net;
    return *this;
  }
  friend Resources operator+(Resources a, const Resources& b) { return a += b; }
  friend Resources operator*(Resources a, double s) { return {a.cpu * s, a.ram * s, a.net * s}; }
  friend bool operator==(const Resources&, const Resources&) = default;
};

inline Resources demand_of(const Request& r) { return {r.cpu, r.ram, r.net}; }

struct ServerSpec {
  int id = 0;
  int cluster = 0;
  Resources capacity;  // capacity.cpu doubles as the capacity weight n_i

  void validate() const;
};

// Two clusters of six servers: 400/450/300 for positions 1, 3, 5; 300/350/250
// for 2, 4; 500/550/350 (cluster 1) and 600/650/400 (cluster 2) for position 6.
// Server ids are 10 * cluster + position.
std::vector<ServerSpec> default_cluster();

// Throws ConfigError on an empty list, duplicate ids or nonpositive capacities.
void validate_cluster(std::span<const ServerSpec> servers);

struct UtilSample {
  double t = 0.0;
  Resources util;
};

// Per-resource means of recorded utilization samples over an observation window.
struct WindowedUtilization {
  double cpu_avg = 0.0;
  double ram_avg = 0.0;
  double net_avg = 0.0;
  double window = 0.0;
  double sample_period = 0.0;
  std::size_t samples = 0;

  Resources averages() const { return {cpu_avg, ram_avg, net_avg}; }
};

// Per-class shares f^{qs} and attributed loads for one server.
struct ClassShare {
  Resources share;
  Resources load;
};

struct ClassLoadBreakdown {
  std::map<std::string, ClassShare> classes;
  // Set per resource when every class reading was zero and shares fell back to uniform.
  bool uniform_cpu = false;
  bool uniform_ram = false;
  bool uniform_net = false;
};

class ServerState {
 public:
  explicit ServerState(ServerSpec spec, double os_overhead = 1.05, std::size_t max_samples = 4096);

  const ServerSpec& spec() const noexcept { return spec_; }
  const std::vector<Request>& active() const noexcept { return active_; }
  const Resources& demand() const noexcept { return demand_; }
  const Resources& util() const noexcept { return util_; }
  // Current demand above capacity, as a fraction of capacity.
  Resources overload() const;
  // Time integral of overload() accumulated by record_sample.
  const Resources& overload_debt() const noexcept { return overload_debt_; }
  const std::map<std::string, Resources>& measured_by_class() const noexcept {
    return measured_by_class_;
  }
  const std::deque<UtilSample>& window_samples() const noexcept { return samples_; }
  double os_overhead() const noexcept { return os_overhead_; }

  bool is_active(std::uint64_t request_id) const;

  // Adds `r` (throws ConfigError if already active), recomputes utilization and
  // books the request's demand, scaled by the OS overhead, under its class.
  void admit(const Request& r);
  // Drops every request with arrival_time + duration <= now. Returns how many.
  std::size_t release_expired(double now);
  // Appends the current utilization as a sample taken at time t and accrues
  // overload debt over `dt` seconds.
  void record_sample(double t, double dt);
  // Starts a new accounting window: readings restart from the demand of the
  // requests that are still active.
  void reset_measurements();

 private:
  void recompute();

  ServerSpec spec_;
  double os_overhead_;
  std::size_t max_samples_;
  std::vector<Request> active_;  // admission order
  Resources demand_;
  Resources util_;
  Resources overload_debt_;
  std::map<std::string, Resources> measured_by_class_;
  std::deque<UtilSample> samples_;
};

// Mean of the samples taken in (t_last - window, t_last].
// Requires window >= period > 0; throws InsufficientDataError when empty.
WindowedUtilization sample_window(const ServerState& state, double window, double period);

// Shares f = reading / sum(readings) per resource and loads = average * f.
ClassLoadBreakdown class_breakdown(const WindowedUtilization& util,
                                   const std::map<std::string, Resources>& measured_by_class);

}  // namespace mfbalance
