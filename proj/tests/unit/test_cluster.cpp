#include <doctest.h>

#include <random>

#include "mfbalance/cluster.hpp"
#include "mfbalance/error.hpp"

using namespace mfbalance;

namespace {

ServerSpec spec(int id, double cpu, double ram, double net) { return {id, 1, {cpu, ram, net}}; }

Request req(std::uint64_t id, double cpu, double ram, double net, double arrival = 0,
            double duration = 10, std::string cls = "a") {
  Request r;
  r.id = id;
  r.class_id = std::move(cls);
  r.arrival_time = arrival;
  r.duration = duration;
  r.cpu = cpu;
  r.ram = ram;
  r.net = net;
  return r;
}

ServerState with_samples(const std::vector<double>& cpu) {
  ServerState s(spec(1, 100, 100, 100));
  double t = 0;
  for (double u : cpu) {
    s.release_expired(t);
    s.admit(req(static_cast<std::uint64_t>(t) + 1, u * 100, 0, 0, t, 10));
    t += 10;
    s.record_sample(t, 10);
  }
  return s;
}

}  // namespace

TEST_CASE("default cluster") {
  const auto c = default_cluster();
  REQUIRE(c.size() == 12);
  CHECK_NOTHROW(validate_cluster(c));
  CHECK(c[0].id == 11);
  CHECK(c[0].capacity == Resources{400, 450, 300});
  CHECK(c[1].capacity == Resources{300, 350, 250});
  CHECK(c[5].capacity == Resources{500, 550, 350});
  CHECK(c[11].id == 26);
  CHECK(c[11].capacity == Resources{600, 650, 400});
}

TEST_CASE("cluster validation") {
  CHECK_THROWS_AS(validate_cluster(std::vector<ServerSpec>{}), ConfigError);
  CHECK_THROWS_AS(validate_cluster(std::vector{spec(1, 1, 1, 1), spec(1, 2, 2, 2)}), ConfigError);
  CHECK_THROWS_AS(validate_cluster(std::vector{spec(1, 0, 1, 1)}), ConfigError);
  CHECK_THROWS_AS(ServerState(spec(1, 1, 1, 1), 0.0), ConfigError);
}

TEST_CASE("admit and release") {
  ServerState s(spec(1, 400, 450, 300));
  s.admit(req(1, 40, 0, 0));
  CHECK(s.util().cpu == doctest::Approx(0.1));
  CHECK_THROWS_AS(s.admit(req(1, 40, 0, 0)), ConfigError);

  s.admit(req(2, 40, 0, 0, 0, 20));
  CHECK(s.util().cpu == doctest::Approx(0.2));
  CHECK(s.release_expired(5) == 0);
  CHECK(s.release_expired(10) == 1);
  CHECK(s.util().cpu == doctest::Approx(0.1));
  CHECK(s.release_expired(20) == 1);
  CHECK(s.util() == Resources{0, 0, 0});
}

TEST_CASE("overload clips and accrues debt") {
  ServerState s(spec(1, 100, 100, 100));
  s.admit(req(1, 150, 50, 0));
  CHECK(s.util().cpu == 1.0);
  CHECK(s.util().ram == 0.5);
  CHECK(s.overload().cpu == doctest::Approx(0.5));
  s.record_sample(1, 2);
  CHECK(s.overload_debt().cpu == doctest::Approx(1.0));
  CHECK(s.overload_debt().ram == 0.0);
}

TEST_CASE("admit and release are exact inverses") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 30);
  ServerState s(spec(1, 333, 271, 199));
  for (std::uint64_t i = 1; i <= 20; ++i) s.admit(req(i, u(rng), u(rng), u(rng), 0, 1000));
  const Resources before = s.util();
  for (std::uint64_t i = 100; i < 150; ++i) s.admit(req(i, u(rng), u(rng), u(rng), 0, 5));
  s.release_expired(5);
  CHECK(s.util() == before);
  CHECK(s.util().cpu <= 1.0);
}

TEST_CASE("class readings include the OS overhead") {
  ServerState s(spec(1, 100, 100, 100), 1.05);
  s.admit(req(1, 10, 20, 30, 0, 1, "x"));
  s.admit(req(2, 10, 0, 0, 0, 5, "y"));
  CHECK(s.measured_by_class().at("x").cpu == doctest::Approx(10.5));
  CHECK(s.measured_by_class().at("y").cpu == doctest::Approx(10.5));
  s.release_expired(1);
  s.reset_measurements();
  CHECK(s.measured_by_class().size() == 1);
  CHECK(s.measured_by_class().count("y") == 1);
}

TEST_CASE("windowed averages") {
  const auto six = with_samples({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  const auto w = sample_window(six, 60, 10);
  CHECK(w.cpu_avg == doctest::Approx(0.5));
  CHECK(w.samples == 6);

  CHECK(sample_window(with_samples({0, 0, 0}), 30, 10).cpu_avg == 0.0);
  CHECK(sample_window(with_samples({0.2, 0.4, 0.6}), 30, 10).cpu_avg == doctest::Approx(0.4));
  // Only the trailing window counts.
  CHECK(sample_window(with_samples({0.9, 0.2, 0.4}), 20, 10).cpu_avg == doctest::Approx(0.3));

  ServerState empty(spec(1, 1, 1, 1));
  CHECK_THROWS_AS(sample_window(empty, 10, 10), InsufficientDataError);
  CHECK_THROWS_AS(sample_window(six, 5, 10), ConfigError);
}

TEST_CASE("class breakdown") {
  WindowedUtilization w;
  w.cpu_avg = 0.6;
  w.ram_avg = 0.3;
  w.net_avg = 0.0;
  const auto b = class_breakdown(w, {{"A", {30, 5, 1}}, {"B", {10, 15, 3}}});
  CHECK(b.classes.at("A").share.cpu == doctest::Approx(0.75));
  CHECK(b.classes.at("B").share.cpu == doctest::Approx(0.25));
  CHECK(b.classes.at("A").load.cpu == doctest::Approx(0.45));
  CHECK(b.classes.at("B").load.cpu == doctest::Approx(0.15));
  CHECK(b.classes.at("A").load.ram + b.classes.at("B").load.ram == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(b.classes.at("A").load.net == 0.0);

  const auto single = class_breakdown(w, {{"only", {7, 7, 7}}});
  CHECK(single.classes.at("only").share.cpu == 1.0);
  CHECK(single.classes.at("only").load.cpu == 0.6);

  // Scale invariance of shares.
  const auto scaled = class_breakdown(w, {{"A", {300, 5, 1}}, {"B", {100, 15, 3}}});
  CHECK(scaled.classes.at("A").share.cpu == doctest::Approx(0.75));

  const auto zero = class_breakdown(w, {{"A", {0, 1, 1}}, {"B", {0, 1, 1}}});
  CHECK(zero.uniform_cpu);
  CHECK_FALSE(zero.uniform_ram);
  CHECK(zero.classes.at("A").share.cpu == 0.5);
  CHECK_THROWS_AS(class_breakdown(w, {}), InsufficientDataError);
}
