#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfbalance/error.hpp"
#include "mfbalance/fractal.hpp"

namespace mfbalance {

// Generation target for one multifractal arrival trace.
struct MultifractalSpec {
  double target_h = 0.8;
  double target_delta_h = 2.0;
  std::size_t length = 4096;   // slots; power of two, at least 2^12
  double slot_duration = 1.0;  // seconds
  double mean_rate = 8.0;      // mean intensity (expected arrivals per slot)
  std::uint64_t seed = 1;

  void validate() const;
};

// Binomial cascade knobs. The spread of the two-point multipliers
// {0.5 - w, 0.5 + w} runs linearly from `coarse_spread` at the top level to
// `weight_spread` at the finest level. With probability `extreme_rate` a node
// in the first `extreme_levels` levels instead splits with light share
// (0.5 - w) * 10^-extreme_depth; at most `extreme_floor` decades are removed
// along any one path.
struct CascadeParams {
  int depth = 12;
  double weight_spread = 0.3;
  std::optional<double> coarse_spread;  // defaults to weight_spread
  double extreme_rate = 0.0;
  double extreme_depth = 0.0;
  int extreme_levels = 64;
  double extreme_floor = 1e9;
  bool random_orientation = true;  // false: heavier share always goes left
  void validate() const;
};

// Intensity = exp(envelope_sigma * fGn(envelope_h)) * cascade, rescaled to the
// mean rate. A monofractal trace (target delta_h = 0) uses a flat cascade.
struct GeneratorParams {
  double envelope_h = 0.5;
  double envelope_sigma = 1.6;
  CascadeParams cascade;
  void validate() const;
};

struct TrafficTrace {
  std::vector<double> slots;  // expected arrivals per slot, all >= 0
  double slot_duration = 1.0;
  HurstCurve achieved;
  GeneratorParams params;     // generator settings that produced the slots
  int iterations = 0;         // calibration rounds used

  double duration() const { return slot_duration * static_cast<double>(slots.size()); }
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, TrafficTrace best)
      : Error(what, ExitCode::kCalibration), best_(std::move(best)) {}
  const TrafficTrace& best() const noexcept { return best_; }

 private:
  TrafficTrace best_;
};

struct FlowClass {
  std::string id;
  double cpu_demand = 1.0;
  double ram_demand = 1.0;
  double net_demand = 1.0;
  double mean_duration = 5.0;  // seconds
  double weight = 1.0;         // share of arrivals
};

// Throws ConfigError when the list is empty, a demand is nonpositive or the
// weights do not sum to 1 within 1e-9.
void validate_classes(std::span<const FlowClass> classes);

// Three classes (cpu-, memory- and network-heavy) used when none are configured.
std::vector<FlowClass> default_classes();

struct Request {
  std::uint64_t id = 0;
  std::string class_id;
  double arrival_time = 0.0;
  double duration = 1.0;
  double cpu = 0.0;
  double ram = 0.0;
  double net = 0.0;

  double departure_time() const { return arrival_time + duration; }
};

// Fractional Gaussian noise with unit variance, circulant embedding.
std::vector<double> generate_fgn(double h, std::size_t n, std::uint64_t seed);

// Multiplicative binomial cascade on 2^depth cells with total mass 1.
std::vector<double> generate_cascade(const CascadeParams& params, std::uint64_t seed);

// Builds the intensity trace for fixed generator settings (no calibration).
// The result is normalized to spec.mean_rate; `achieved` is left empty.
TrafficTrace compose_traffic(const MultifractalSpec& spec, const GeneratorParams& params);

struct CalibrationOptions {
  int max_iterations = 12;  // per realization
  int restarts = 4;         // fresh realizations tried after the first
  double h_tolerance = 0.05;
  // Delta-h tolerance is max(dh_abs_tolerance, dh_rel_tolerance * target).
  double dh_abs_tolerance = 0.15;
  double dh_rel_tolerance = 0.2;
};

bool within_tolerance(const MultifractalSpec& spec, const HurstCurve& curve,
                      const CalibrationOptions& options = {});

// Calibrated trace whose measured h(2) and delta_h match the spec targets.
// Throws CalibrationError carrying the best trace when iterations run out.
TrafficTrace generate_traffic(const MultifractalSpec& spec, const CalibrationOptions& options = {});

struct MaterializeOptions {
  double arrivals_per_slot = 8.0;  // global mean the trace is rescaled to
};

// Poisson arrivals per slot, classes drawn by weight, exponential durations.
std::vector<Request> materialize_requests(const TrafficTrace& trace,
                                          std::span<const FlowClass> classes, std::uint64_t seed,
                                          const MaterializeOptions& options = {});

void write_trace_csv(std::ostream& out, const TrafficTrace& trace);
// Reads `slot,intensity`; slot_duration is taken from the argument.
TrafficTrace read_trace_csv(std::istream& in, const std::string& source,
                            double slot_duration = 1.0);
void write_requests_csv(std::ostream& out, std::span<const Request> requests);

}  // namespace mfbalance
