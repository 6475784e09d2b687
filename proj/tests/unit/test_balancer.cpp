#include <doctest.h>

#include <random>
#include <set>

#include "mfbalance/balancer.hpp"
#include "mfbalance/cluster.hpp"
#include "mfbalance/error.hpp"

using namespace mfbalance;

namespace {

Request req(double cpu, double ram = 0, double net = 0, std::uint64_t id = 1) {
  Request r;
  r.id = id;
  r.class_id = "a";
  r.duration = 100;
  r.cpu = cpu;
  r.ram = ram;
  r.net = net;
  return r;
}

ServerSnapshot idle(int id, Resources cap = {100, 100, 100}) { return {id, cap, {}, {}}; }

ServerSnapshot loaded(int id, Resources cap, Resources demand) {
  ServerSnapshot s{id, cap, demand, {}};
  s.util = {std::min(1.0, demand.cpu / cap.cpu), std::min(1.0, demand.ram / cap.ram),
            std::min(1.0, demand.net / cap.net)};
  return s;
}

// Clone the servers as real states, admit, and measure through the metrics module.
double clone_admit_measure(const std::vector<ServerSnapshot>& view, const Request& r,
                           std::size_t target, const Weights& w) {
  std::vector<ServerState> states;
  std::uint64_t id = 1000;
  for (const auto& s : view) {
    ServerState st({s.id, 1, s.capacity});
    Request base = req(s.demand.cpu, s.demand.ram, s.demand.net, ++id);
    st.admit(base);
    states.push_back(st);
  }
  Request copy = r;
  copy.id = 1;
  states[target].admit(copy);
  std::vector<ServerSnapshot> after;
  for (const auto& s : states) after.push_back(snapshot_of(s));
  return imbalance_report(0, after, w).imb_tot;
}

std::vector<ServerSnapshot> random_view(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> cap(50, 700), frac(0, 1.1);
  std::vector<ServerSnapshot> v;
  for (std::size_t i = 0; i < n; ++i) {
    const Resources c{cap(rng), cap(rng), cap(rng)};
    v.push_back(loaded(static_cast<int>(i + 1), c, {c.cpu * frac(rng), c.ram * frac(rng), c.net * frac(rng)}));
  }
  return v;
}

}  // namespace

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::kRoundRobin, PolicyKind::kLeastLoaded, PolicyKind::kMinImbalance})
    CHECK(parse_policy(policy_name(k)) == k);
  CHECK_THROWS_AS(parse_policy("random"), ConfigError);
}

TEST_CASE("round robin cycles") {
  Balancer b({PolicyKind::kRoundRobin});
  std::vector<ServerSnapshot> v = {idle(1), idle(2), idle(3)};
  std::vector<int> got;
  for (int i = 0; i < 6; ++i) got.push_back(b.dispatch(v, req(1)).server_id);
  CHECK(got == std::vector<int>{1, 2, 3, 1, 2, 3});
}

TEST_CASE("min_imbalance examples") {
  Balancer b({PolicyKind::kMinImbalance});
  std::vector<ServerSnapshot> two = {idle(1), idle(2)};
  const auto d = b.dispatch(two, req(10));
  CHECK(d.server_id == 1);
  CHECK(d.tie_broken);
  CHECK(predicted_total_imbalance(two, req(10), 0, {}) ==
        predicted_total_imbalance(two, req(10), 1, {}));

  std::vector<ServerSnapshot> skew = {loaded(1, {100, 100, 100}, {90, 0, 0}),
                                      loaded(2, {100, 100, 100}, {10, 0, 0})};
  const auto e = b.dispatch(skew, req(10));
  CHECK(e.server_id == 2);
  CHECK_FALSE(e.tie_broken);
  CHECK(predicted_total_imbalance(skew, req(10), 1, {}) <
        predicted_total_imbalance(skew, req(10), 0, {}));
  CHECK(e.predicted_imb_tot == predicted_total_imbalance(skew, req(10), 1, {}));
}

TEST_CASE("least loaded picks the lowest weighted utilization") {
  Balancer b({PolicyKind::kLeastLoaded});
  std::vector<ServerSnapshot> v = {loaded(1, {100, 100, 100}, {50, 50, 50}),
                                   loaded(2, {100, 100, 100}, {20, 30, 10}),
                                   loaded(3, {100, 100, 100}, {20, 30, 10})};
  const auto d = b.dispatch(v, req(1));
  CHECK(d.server_id == 2);
  CHECK(d.tie_broken);
}

TEST_CASE("predicted imbalance matches a clone-admit-measure oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto v = random_view(rng, 1 + trial % 6);
    std::uniform_real_distribution<double> d(0, 80);
    const Request r = req(d(rng), d(rng), d(rng));
    for (std::size_t t = 0; t < v.size(); ++t)
      CHECK(predicted_total_imbalance(v, r, t, {}) ==
            doctest::Approx(clone_admit_measure(v, r, t, {})).epsilon(1e-12));
  }
}

TEST_CASE("greedy choice is the exhaustive minimum") {
  std::mt19937_64 rng(5);
  Balancer b({PolicyKind::kMinImbalance});
  for (int trial = 0; trial < 500; ++trial) {
    const auto v = random_view(rng, 2 + trial % 5);
    std::uniform_real_distribution<double> d(0, 80);
    const Request r = req(d(rng), d(rng), d(rng));
    const auto dec = b.dispatch(v, r);
    for (std::size_t s = 0; s < v.size(); ++s) {
      const double p = predicted_total_imbalance(v, r, s, {});
      CHECK(dec.predicted_imb_tot <= p);
      if (p == dec.predicted_imb_tot) CHECK(dec.server_index <= s);
    }
  }
}

TEST_CASE("demand scale leaves the choice unchanged") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = random_view(rng, 6);
    const Request r = req(15, 25, 5);
    Balancer b({PolicyKind::kMinImbalance});
    const int before = b.dispatch(v, r).server_id;
    for (double alpha : {0.25, 8.0}) {
      auto scaled = v;
      for (auto& s : scaled) {
        s.capacity = s.capacity * alpha;
        s.demand = s.demand * alpha;
      }
      Request rs = r;
      rs.cpu *= alpha;
      rs.ram *= alpha;
      rs.net *= alpha;
      Balancer c({PolicyKind::kMinImbalance});
      CHECK(c.dispatch(scaled, rs).server_id == before);
    }
  }
}

TEST_CASE("dispatch is pure and deterministic") {
  std::mt19937_64 rng(7);
  const auto v = random_view(rng, 6);
  const auto copy = v;
  Balancer a({PolicyKind::kMinImbalance}), b({PolicyKind::kMinImbalance});
  CHECK(a.dispatch(v, req(20)).server_id == b.dispatch(v, req(20)).server_id);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(v[i].demand == copy[i].demand);
    CHECK(v[i].util == copy[i].util);
  }
}

TEST_CASE("random ties are seeded") {
  std::vector<ServerSnapshot> v = {idle(1), idle(2), idle(3), idle(4)};
  Policy p{PolicyKind::kLeastLoaded};
  p.random_ties = true;
  p.tie_seed = 9;
  Balancer a(p), b(p);
  std::set<int> seen;
  for (int i = 0; i < 40; ++i) {
    const int x = a.dispatch(v, req(1)).server_id;
    CHECK(x == b.dispatch(v, req(1)).server_id);
    seen.insert(x);
  }
  CHECK(seen.size() > 1);
}

TEST_CASE("dispatch errors") {
  Balancer b({PolicyKind::kMinImbalance});
  CHECK_THROWS_AS(b.dispatch(std::vector<ServerSnapshot>{}, req(1)), ConfigError);
  std::vector<ServerSnapshot> unordered = {idle(2), idle(1)};
  CHECK_THROWS_AS(b.dispatch(unordered, req(1)), ConfigError);
  CHECK_THROWS_AS(predicted_total_imbalance(unordered, req(1), 5, {}), ConfigError);
  Policy bad{PolicyKind::kRoundRobin, {0.5, 0.5, 0.5}};
  CHECK_THROWS_AS(Balancer{bad}, ConfigError);
}
