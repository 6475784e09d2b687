#include "mfbalance/balancer.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "mfbalance/error.hpp"

namespace mfbalance {

PolicyKind parse_policy(const std::string& name) {
  if (name == "round_robin") return PolicyKind::kRoundRobin;
  if (name == "least_loaded") return PolicyKind::kLeastLoaded;
  if (name == "min_imbalance") return PolicyKind::kMinImbalance;
  throw ConfigError("unknown policy '" + name +
                    "' (expected round_robin, least_loaded or min_imbalance)");
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kRoundRobin:
      return "round_robin";
    case PolicyKind::kLeastLoaded:
      return "least_loaded";
    case PolicyKind::kMinImbalance:
      return "min_imbalance";
  }
  return "unknown";
}

Resources util_after(const ServerSnapshot& server, const Request& r) {
  const Resources d = server.demand + demand_of(r);
  return {std::min(1.0, d.cpu / server.capacity.cpu), std::min(1.0, d.ram / server.capacity.ram),
          std::min(1.0, d.net / server.capacity.net)};
}

double predicted_total_imbalance(std::span<const ServerSnapshot> servers, const Request& r,
                                 std::size_t target, const Weights& w) {
  if (target >= servers.size()) throw ConfigError("dispatch target out of range");
  // Copy into a small buffer; the real snapshots stay untouched.
  thread_local std::vector<ServerSnapshot> scratch;
  scratch.assign(servers.begin(), servers.end());
  scratch[target].demand += demand_of(r);
  scratch[target].util = util_after(servers[target], r);

  const SystemAverages avg = system_averages(scratch);
  double sum = 0;
  for (const auto& s : scratch) sum += server_imbalance(s, avg, w);
  return sum / static_cast<double>(scratch.size());
}

Balancer::Balancer(Policy policy)
    : policy_(policy), tie_rng_(derive_seed(policy.tie_seed, "ties")) {
  policy_.weights.validate(1e-9);
}

std::size_t Balancer::break_tie(std::span<const std::size_t> candidates) {
  if (!policy_.random_ties || candidates.size() == 1) return candidates.front();
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(tie_rng_)];
}

DispatchDecision Balancer::dispatch(std::span<const ServerSnapshot> servers, const Request& r) {
  if (servers.empty()) throw ConfigError("cannot dispatch to an empty cluster");
  for (std::size_t i = 1; i < servers.size(); ++i)
    if (servers[i].id <= servers[i - 1].id)
      throw ConfigError("dispatch snapshots must be ordered by ascending server id");
  DispatchDecision d;
  d.request_id = r.id;

  if (policy_.kind == PolicyKind::kRoundRobin) {
    d.server_index = next_ % servers.size();
    next_ = (d.server_index + 1) % servers.size();
    d.server_id = servers[d.server_index].id;
    return d;
  }

  std::vector<double> score(servers.size());
  for (std::size_t i = 0; i < servers.size(); ++i) {
    score[i] = policy_.kind == PolicyKind::kLeastLoaded
                   ? policy_.weights.combine(servers[i].util)
                   : predicted_total_imbalance(servers, r, i, policy_.weights);
  }
  const double best = *std::min_element(score.begin(), score.end());
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < servers.size(); ++i)
    if (score[i] == best) candidates.push_back(i);

  d.server_index = break_tie(candidates);
  d.server_id = servers[d.server_index].id;
  d.tie_broken = candidates.size() > 1;
  if (policy_.kind == PolicyKind::kMinImbalance) d.predicted_imb_tot = best;
  return d;
}

}  // namespace mfbalance
