#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "mfbalance/metrics.hpp"
#include "mfbalance/rng.hpp"

namespace mfbalance {

enum class PolicyKind { kRoundRobin, kLeastLoaded, kMinImbalance };

PolicyKind parse_policy(const std::string& name);
std::string policy_name(PolicyKind kind);

struct Policy {
  PolicyKind kind = PolicyKind::kMinImbalance;
  Weights weights;
  // Break exact ties uniformly at random instead of by lowest id.
  bool random_ties = false;
  std::uint64_t tie_seed = 0;
};

struct DispatchDecision {
  std::uint64_t request_id = 0;
  int server_id = 0;
  std::size_t server_index = 0;  // position in the snapshot span
  double predicted_imb_tot = 0.0;  // set by min_imbalance
  bool tie_broken = false;
};

// IMB_tot of the cluster with `r` hypothetically admitted to snapshot `target`.
double predicted_total_imbalance(std::span<const ServerSnapshot> servers, const Request& r,
                                 std::size_t target, const Weights& w);

// Utilization of a server after admitting `r`, clipped at 1.
Resources util_after(const ServerSnapshot& server, const Request& r);

// Stateful dispatcher. Only the round-robin cursor and the tie-breaking stream
// change between calls; the snapshots are never modified.
class Balancer {
 public:
  explicit Balancer(Policy policy);

  const Policy& policy() const noexcept { return policy_; }

  // Snapshots must be ordered by ascending server id.
  DispatchDecision dispatch(std::span<const ServerSnapshot> servers, const Request& r);

 private:
  std::size_t break_tie(std::span<const std::size_t> candidates);

  Policy policy_;
  std::size_t next_ = 0;
  Rng tie_rng_;
};

}  // namespace mfbalance
