#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mfbalance/sim.hpp"

namespace mfbalance {

// Everything one invocation of the command line tool needs. The INI file has
// the sections cluster, classes, traffic, policy, monitoring and run, each a
// flat list of key = value lines:
//
//   [cluster]     server.<id> = <cluster> <cpu> <ram> <net>, os_overhead
//   [classes]     <name> = <cpu> <ram> <net> <mean duration s> <weight>
//   [traffic]     h, delta_h, length, mean_rate, slot_duration
//   [policy]      name, a, b, c, random_ties
//   [monitoring]  mode, interval, min_interval, max_interval, cv_threshold,
//                 cv_window, view
//   [run]         run_length, tick, seed, reject_when_saturated,
//                 equilibrium_window, epsilon, final_window, seeds, grid,
//                 out, formats, verbosity
//
// Reals may be written as fractions ("1/3"). A missing section or key keeps
// its default. Listing any server or class replaces the whole default list.
struct RunConfig {
  Scenario scenario = default_scenario(0.8, 2.0);
  std::filesystem::path out_dir = "out";
  std::vector<std::string> formats = {"csv"};
  int verbosity = 0;
  std::vector<SweepCell> grid = table1_grid();
  std::size_t seeds = 10;
  bool slot_duration_set = false;  // otherwise the trace spans the run exactly
  std::set<std::string> sections;  // sections present in the file

  bool has_section(const std::string& name) const { return sections.count(name) > 0; }
  // Nested scenario checks plus output settings. Throws ConfigError.
  void validate() const;
};

// Parses INI text; `source` names the input in error messages.
// Throws ParseError for malformed lines and ConfigError for bad values.
RunConfig parse_config(std::istream& in, const std::string& source = "config");

// Reads and parses a file; IoError when it cannot be opened.
RunConfig load_config(const std::filesystem::path& path);

// Writes `config` back as INI text that parse_config reads to the same values.
void write_config(std::ostream& out, const RunConfig& config);

// Keeps slot_duration * length equal to run_length unless set explicitly.
void sync_slot_duration(RunConfig& config);

}  // namespace mfbalance
