#include <doctest.h>

#include <sstream>

#include "mfbalance/config.hpp"
#include "mfbalance/error.hpp"

using namespace mfbalance;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.ini");
}

}  // namespace

TEST_CASE("empty file gives the defaults") {
  const auto c = parse("");
  CHECK(c.scenario.cluster.size() == 12);
  CHECK(c.scenario.classes.size() == 3);
  CHECK(c.grid.size() == 16);
  CHECK(c.seeds == 10);
  CHECK(c.sections.empty());
  CHECK(c.scenario.monitoring.interval == 10);
  CHECK(c.scenario.run_length == 500);
}

TEST_CASE("all sections") {
  const auto c = parse(R"(
[cluster]
server.1 = 1 100 200 300
server.2 = 1 50 60 70
os_overhead = 1.1

[classes]
web = 1 2 3 10 0.25
db = 4 5 6 20 3/4

[traffic]
h = 0.7
delta_h = 4
length = 8192
mean_rate = 5

[policy]
name = round_robin
a = 1/2
b = 1/4
c = 1/4
random_ties = true

[monitoring]
mode = adaptive
interval = 8
min_interval = 2
max_interval = 32
cv_threshold = 1.5
cv_window = 30
view = instantaneous

[run]
run_length = 1000
tick = 0.5
seed = 77
reject_when_saturated = yes
epsilon = 0.01
seeds = 3
grid = 0.6:1.5 0.9:6
out = results
verbosity = 2
)");
  CHECK(c.scenario.cluster.size() == 2);
  CHECK(c.scenario.cluster[1].capacity.net == 70);
  CHECK(c.scenario.os_overhead == 1.1);
  CHECK(c.scenario.classes[1].weight == 0.75);
  CHECK(c.scenario.classes[0].mean_duration == 10);
  CHECK(c.scenario.traffic.target_h == 0.7);
  CHECK(c.scenario.traffic.length == 8192);
  CHECK(c.scenario.traffic.slot_duration == doctest::Approx(1000.0 / 8192));
  CHECK(c.scenario.policy.kind == PolicyKind::kRoundRobin);
  CHECK(c.scenario.policy.weights.a == 0.5);
  CHECK(c.scenario.policy.random_ties);
  CHECK(c.scenario.monitoring.kind == MonitoringKind::kAdaptive);
  CHECK(c.scenario.view == DispatchView::kInstantaneous);
  CHECK(c.scenario.tick == 0.5);
  CHECK(c.scenario.seed == 77);
  CHECK(c.scenario.reject_when_saturated);
  CHECK(c.scenario.equilibrium.epsilon == 0.01);
  CHECK(c.seeds == 3);
  REQUIRE(c.grid.size() == 2);
  CHECK(c.grid[1].target_delta_h == 6);
  CHECK(c.out_dir == "results");
  CHECK(c.verbosity == 2);
  CHECK(c.has_section("monitoring"));

  std::stringstream text;
  write_config(text, c);
  const auto back = parse_config(text, "roundtrip");
  std::stringstream again;
  write_config(again, back);
  CHECK(again.str() == text.str());
}

TEST_CASE("rejected configurations") {
  CHECK_THROWS_AS(parse("[policy]\na = 0.5\nb = 0.3\nc = 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[policy]\na = 0.3333\nb = 0.3333\nc = 0.3333\n"), ConfigError);
  CHECK_NOTHROW(parse("[policy]\na = 1/3\nb = 1/3\nc = 1/3\n"));
  CHECK_THROWS_AS(parse("[traffic]\nh = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[traffic]\nh = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[cluster]\nserver.1 = 1 0 10 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("[cluster]\nserver.1 = 1 -5 10 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("[cluster]\nserver.1 = 1 5 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("[classes]\na = 1 1 1 5 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nrun_length = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nseeds = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\ngrid = 0.5-2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nformats = xlsx\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\ntick = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nreject_when_saturated = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("[policy]\nname = random\n"), ConfigError);
  CHECK_THROWS_AS(parse("[policy]\nnmae = round_robin\n"), ConfigError);
  CHECK_THROWS_AS(parse("[weather]\nsun = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = 3\n"), ConfigError);
}

TEST_CASE("syntax errors name the line") {
  try {
    parse("[run]\nseed = 1\nthis line has no equals sign\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), IoError);
}
