#include <doctest.h>

#include <sstream>

#include "mfbalance/error.hpp"
#include "mfbalance/sim.hpp"

using namespace mfbalance;

namespace {

TrafficTrace flat_trace(double rate, std::size_t length = 4096, double run_length = 500) {
  TrafficTrace t;
  t.slots.assign(length, rate);
  t.slot_duration = run_length / static_cast<double>(length);
  return t;
}

ArrivalHistory history_with(std::vector<double> times, double bin = 1.0) {
  ArrivalHistory h;
  h.times = std::move(times);
  h.bin = bin;
  return h;
}

}  // namespace

TEST_CASE("monitoring schedule") {
  MonitoringMode fixed;
  double current = fixed.interval;
  CHECK(next_monitoring_time(fixed, {}, 30, current) == 40);

  MonitoringMode adaptive;
  adaptive.kind = MonitoringKind::kAdaptive;
  adaptive.interval = 8;
  adaptive.min_interval = 1;
  adaptive.max_interval = 30;
  adaptive.cv_threshold = 1.0;
  // Every arrival in one bin of the trailing minute: CV well above 1.
  std::vector<double> bursty(100, 29.5);
  current = 8;
  CHECK(next_monitoring_time(adaptive, history_with(bursty), 30, current) == 34);
  CHECK(current == 4);

  // Steady arrivals at the max bound stay at max.
  std::vector<double> steady;
  for (int i = 0; i < 600; ++i) steady.push_back(i * 0.1 + 0.05);
  current = 30;
  CHECK(next_monitoring_time(adaptive, history_with(steady), 60, current) == 90);
  CHECK(current == 30);
  current = 1;
  next_monitoring_time(adaptive, history_with(bursty), 30, current);
  CHECK(current == 1);

  MonitoringMode per;
  per.kind = MonitoringKind::kPerRequest;
  ArrivalHistory h;
  h.next_arrival = 12.5;
  CHECK(next_monitoring_time(per, h, 10, current) == 12.5);
  h.next_arrival.reset();
  CHECK(std::isinf(next_monitoring_time(per, h, 10, current)));
}

TEST_CASE("arrival coefficient of variation") {
  CHECK(arrival_cv(history_with({}), 60, 60) == 0.0);
  std::vector<double> even;
  for (int i = 0; i < 60; ++i) even.push_back(i + 0.5);
  CHECK(arrival_cv(history_with(even), 60, 60) == doctest::Approx(0.0));
  CHECK(arrival_cv(history_with(std::vector<double>(10, 59.5)), 60, 60) ==
        doctest::Approx(std::sqrt(59.0)));
}

TEST_CASE("monitoring validation and names") {
  MonitoringMode m;
  m.kind = MonitoringKind::kAdaptive;
  m.interval = 40;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  for (auto k : {MonitoringKind::kPerRequest, MonitoringKind::kFixedInterval, MonitoringKind::kAdaptive})
    CHECK(parse_monitoring(monitoring_name(k)) == k);
  CHECK_THROWS_AS(parse_monitoring("hourly"), ConfigError);
  CHECK(parse_dispatch_view("instantaneous") == DispatchView::kInstantaneous);
  CHECK_THROWS_AS(parse_dispatch_view("psychic"), ConfigError);
}

TEST_CASE("scenario validation") {
  Scenario s = default_scenario(0.8, 2);
  CHECK_NOTHROW(s.validate());
  CHECK(s.traffic.slot_duration * s.traffic.length == doctest::Approx(s.run_length));
  s.run_length = 5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = default_scenario(0.8, 2);
  s.tick = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = default_scenario(1.2, 2);
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("zero traffic") {
  Scenario s = default_scenario(0.8, 2);
  const auto r = run_on_trace(s, flat_trace(0.0));
  REQUIRE(r.reports.size() == 50);
  for (const auto& rep : r.reports) CHECK(rep.imb_tot == 0.0);
  CHECK(r.summary.equilibrium_time == r.reports.front().t);
  CHECK(r.summary.materialized == 0);
}

TEST_CASE("runs are deterministic and reports ordered") {
  Scenario s = default_scenario(0.9, 4, 21);
  const auto a = run(s);
  const auto b = run(s);
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].imb_tot == b.reports[i].imb_tot);
    if (i) CHECK(a.reports[i].t > a.reports[i - 1].t);
  }
  CHECK(a.summary.admitted + a.summary.dropped == a.summary.materialized);
  CHECK(a.summary.materialized > 0);

  Scenario rr = s;
  rr.policy.kind = PolicyKind::kRoundRobin;
  const auto c = run(rr);
  bool differs = false;
  for (std::size_t i = 0; i < c.reports.size(); ++i) differs |= c.reports[i].imb_tot != a.reports[i].imb_tot;
  CHECK(differs);
}

TEST_CASE("rejection mode conserves requests") {
  Scenario s = default_scenario(0.8, 2, 4);
  for (auto& c : s.classes) c.cpu_demand *= 6;
  s.reject_when_saturated = true;
  const auto r = run_on_trace(s, flat_trace(8.0));
  CHECK(r.summary.dropped > 0);
  CHECK(r.summary.admitted + r.summary.dropped == r.summary.materialized);
}

TEST_CASE("monitoring modes produce reports") {
  Scenario s = default_scenario(0.8, 2, 6);
  s.monitoring.kind = MonitoringKind::kAdaptive;
  const auto a = run_on_trace(s, flat_trace(2.0));
  CHECK(a.reports.size() > 10);
  s.monitoring.kind = MonitoringKind::kPerRequest;
  const auto p = run_on_trace(s, flat_trace(2.0));
  CHECK(p.reports.size() > a.reports.size());
  s.record_breakdowns = true;
  s.monitoring.kind = MonitoringKind::kFixedInterval;
  const auto f = run_on_trace(s, flat_trace(2.0));
  CHECK_FALSE(f.reports.back().breakdowns.empty());
}

TEST_CASE("sweep") {
  CHECK(table1_grid().size() == 16);
  Scenario base = default_scenario(0.8, 2, 3);
  const std::vector<SweepCell> one = {{0.7, 2.0}};
  const auto rows = sweep(one, base, {1, 1});
  REQUIRE(rows.size() == 1);
  Scenario direct = base;
  direct.traffic.target_h = 0.7;
  direct.seed = sweep_seed(base.seed, 0, 0);
  const auto r = run(direct);
  CHECK(rows[0].imb_tot_final == r.summary.imb_tot_final);

  const std::vector<SweepCell> two = {{0.7, 2.0}, {0.9, 6.0}};
  const auto a = sweep(two, base, {2, 0});
  const auto b = sweep(two, base, {3, 0});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(a[c].replicate_imb_tot_final[k] == b[c].replicate_imb_tot_final[k]);

  std::ostringstream csv;
  write_sweep_csv(csv, a);
  CHECK(csv.str().rfind("H,delta_h,t_eq,t_eq_censored,imb_tot_final,seeds\n", 0) == 0);

  CHECK_THROWS_AS(sweep({}, base), ConfigError);
  CHECK_THROWS_AS(sweep(one, base, {0, 1}), ConfigError);
}
