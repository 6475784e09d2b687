#include "mfbalance/traffic.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>

#include "mfbalance/csv.hpp"
#include "mfbalance/rng.hpp"

namespace mfbalance {

namespace {

// The FFTW planner is not reentrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place forward DFT.
void dft(std::vector<std::complex<double>>& data) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(data.size()), buf, buf, FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

bool is_power_of_two(std::size_t n) { return n > 0 && std::has_single_bit(n); }

constexpr double kMonofractalSigma = 0.25;

void normalize_mean(std::vector<double>& x, double mean) {
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  const double scale = mean * static_cast<double>(x.size()) / total;
  for (double& v : x) v *= scale;
}

std::vector<double> lognormal_envelope(double h, std::size_t n, std::uint64_t seed, double sigma) {
  auto g = generate_fgn(h, n, seed);
  for (double& v : g) v = std::exp(sigma * v);
  return g;
}

}  // namespace

void MultifractalSpec::validate() const {
  if (!(target_h > 0.0 && target_h < 1.0)) throw ConfigError("target H must lie in (0, 1)");
  if (!(target_delta_h >= 0.0) || !std::isfinite(target_delta_h))
    throw ConfigError("target delta_h must be nonnegative");
  if (!is_power_of_two(length) || length < 4096)
    throw ConfigError("trace length must be a power of two >= 4096");
  if (!(slot_duration > 0.0)) throw ConfigError("slot duration must be positive");
  if (!(mean_rate > 0.0)) throw ConfigError("mean rate must be positive");
}

void CascadeParams::validate() const {
  if (depth < 1 || depth > 30) throw ConfigError("cascade depth must be in [1, 30]");
  auto check_spread = [](double w, const char* name) {
    if (!(w >= 0.0 && w <= 0.5)) throw ConfigError(std::string(name) + " must lie in [0, 0.5]");
  };
  check_spread(weight_spread, "weight_spread");
  if (coarse_spread) check_spread(*coarse_spread, "coarse_spread");
  if (!(extreme_rate >= 0.0 && extreme_rate <= 1.0))
    throw ConfigError("extreme_rate must lie in [0, 1]");
  if (!(extreme_depth >= 0.0) || !std::isfinite(extreme_depth))
    throw ConfigError("extreme_depth must be nonnegative");
  if (extreme_levels < 0) throw ConfigError("extreme_levels must be nonnegative");
  if (!(extreme_floor >= 0.0)) throw ConfigError("extreme_floor must be nonnegative");
}

void GeneratorParams::validate() const {
  if (!(envelope_h > 0.0 && envelope_h < 1.0)) throw ConfigError("envelope_h must lie in (0, 1)");
  if (!(envelope_sigma >= 0.0) || !std::isfinite(envelope_sigma))
    throw ConfigError("envelope_sigma must be nonnegative");
  cascade.validate();
}

void validate_classes(std::span<const FlowClass> classes) {
  if (classes.empty()) throw ConfigError("at least one flow class is required");
  double total = 0;
  for (const auto& c : classes) {
    if (!(c.cpu_demand > 0 && c.ram_demand > 0 && c.net_demand > 0))
      throw ConfigError("class '" + c.id + "' must have positive demands");
    if (!(c.mean_duration > 0)) throw ConfigError("class '" + c.id + "' needs a positive duration");
    if (!(c.weight >= 0)) throw ConfigError("class '" + c.id + "' has a negative weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class weights must sum to 1");
}

std::vector<FlowClass> default_classes() {
  return {
      {"interactive", 1.2, 0.6, 0.4, 40.0, 0.5},
      {"batch", 0.5, 1.5, 0.3, 60.0, 0.3},
      {"stream", 0.3, 0.5, 1.2, 50.0, 0.2},
  };
}

std::vector<double> generate_fgn(double h, std::size_t n, std::uint64_t seed) {
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("fGn Hurst exponent must lie in (0, 1)");
  if (!is_power_of_two(n)) throw ConfigError("fGn length must be a power of two");

  const std::size_t m = 2 * n;
  auto gamma = [h](double k) {
    const double e = 2.0 * h;
    return 0.5 * (std::pow(std::abs(k + 1), e) - 2.0 * std::pow(std::abs(k), e) +
                  std::pow(std::abs(k - 1), e));
  };
  std::vector<std::complex<double>> row(m);
  for (std::size_t k = 0; k <= n; ++k) row[k] = gamma(static_cast<double>(k));
  for (std::size_t k = n + 1; k < m; ++k) row[k] = row[m - k];
  dft(row);  // eigenvalues of the circulant embedding

  Rng rng(derive_seed(seed, "fgn"));
  std::normal_distribution<double> normal;
  std::vector<std::complex<double>> z(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double lambda = std::max(row[k].real(), 0.0);
    const double re = normal(rng);
    const double im = normal(rng);
    z[k] = std::sqrt(lambda / static_cast<double>(m)) * std::complex<double>(re, im);
  }
  dft(z);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = z[k].real();
  return out;
}

std::vector<double> generate_cascade(const CascadeParams& params, std::uint64_t seed) {
  params.validate();
  const double coarse = params.coarse_spread.value_or(params.weight_spread);
  const double fine = params.weight_spread;

  Rng rng(derive_seed(seed, "cascade"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> mass{1.0};
  // Decades already removed along the path to each node; near-empty splits
  // stop deepening once extreme_floor decades are reached.
  std::vector<double> removed{0.0};
  for (int level = 0; level < params.depth; ++level) {
    const double t = params.depth > 1 ? static_cast<double>(level) / (params.depth - 1) : 1.0;
    const double spread = coarse + (fine - coarse) * t;
    std::vector<double> next(mass.size() * 2);
    std::vector<double> next_removed(mass.size() * 2);
    for (std::size_t i = 0; i < mass.size(); ++i) {
      // Both draws are taken for every node so that the stream layout does not
      // depend on the parameters.
      const bool flip = unit(rng) < 0.5;
      const bool extreme = unit(rng) < params.extreme_rate && level < params.extreme_levels;
      const double decades =
          extreme ? std::clamp(params.extreme_floor - removed[i], 0.0, params.extreme_depth) : 0.0;
      const double light = (0.5 - spread) * std::pow(10.0, -decades);
      const double heavy = 1.0 - light;
      const bool heavy_left = params.random_orientation ? !flip : true;
      next[2 * i] = mass[i] * (heavy_left ? heavy : light);
      next[2 * i + 1] = mass[i] * (heavy_left ? light : heavy);
      next_removed[2 * i] = removed[i] + (heavy_left ? 0.0 : decades);
      next_removed[2 * i + 1] = removed[i] + (heavy_left ? decades : 0.0);
    }
    mass = std::move(next);
    removed = std::move(next_removed);
  }
  return mass;
}

TrafficTrace compose_traffic(const MultifractalSpec& spec, const GeneratorParams& params) {
  spec.validate();
  params.validate();
  TrafficTrace trace;
  trace.slot_duration = spec.slot_duration;
  trace.params = params;
  trace.params.cascade.depth = std::countr_zero(spec.length);
  trace.slots = lognormal_envelope(params.envelope_h, spec.length,
                                   derive_seed(spec.seed, "envelope"), params.envelope_sigma);
  if (spec.target_delta_h != 0.0) {
    const auto cascade = generate_cascade(trace.params.cascade, derive_seed(spec.seed, "cascade"));
    for (std::size_t i = 0; i < trace.slots.size(); ++i) trace.slots[i] *= cascade[i];
  }
  normalize_mean(trace.slots, spec.mean_rate);
  return trace;
}

bool within_tolerance(const MultifractalSpec& spec, const HurstCurve& curve,
                      const CalibrationOptions& options) {
  const double dh_tol =
      std::max(options.dh_abs_tolerance, options.dh_rel_tolerance * spec.target_delta_h);
  return std::abs(curve.h2() - spec.target_h) <= options.h_tolerance &&
         std::abs(curve.delta_h - spec.target_delta_h) <= dh_tol;
}

namespace {

// Calibration knobs. `shape` sets the envelope Hurst exponent; below 0.5 it
// also adds fine-scale cascade spread, which lowers h(2) further. `hetero`
// makes near-empty splits both more frequent and deeper, which widens the
// spectrum and concentrates the traffic into bursts.
constexpr double kEnvelopeSigma = 1.6;
constexpr double kMaxFineSpread = 0.4;
constexpr int kExtremeLevels = 8;
constexpr double kShapeMin = -0.5, kShapeMax = 0.98;
constexpr double kHeteroMin = -1.0, kHeteroMax = 1.3;

GeneratorParams params_for(const MultifractalSpec& spec, double shape, double hetero) {
  GeneratorParams g;
  g.envelope_h = std::clamp(shape, 0.02, 0.98);
  g.envelope_sigma = kEnvelopeSigma;
  CascadeParams& c = g.cascade;
  c.depth = std::countr_zero(spec.length);
  c.coarse_spread = 0.0;
  c.weight_spread = kMaxFineSpread * std::clamp((0.5 - shape) / 0.5, 0.0, 1.0);
  const double e = std::max(hetero, 0.0);
  c.extreme_rate = std::min(0.7, 0.05 + 0.4 * e * e);
  c.extreme_depth = std::max(0.0, 1.0 + 2.5 * hetero);
  c.extreme_levels = kExtremeLevels;
  return g;
}

struct SecantKnob {
  double value;
  double lo, hi;
  double nominal_slope;  // d(measure)/d(knob), sign included
  double max_step;
  std::optional<std::pair<double, double>> previous;  // (knob, error)

  void update(double error) {
    double slope = nominal_slope;
    if (previous) {
      const auto [pv, pe] = *previous;
      if (value != pv) {
        const double s = (error - pe) / (value - pv);
        // Accept only slopes with the expected sign and sane magnitude.
        if (std::isfinite(s) && s * nominal_slope > 0 &&
            std::abs(s) > 0.05 * std::abs(nominal_slope))
          slope = s;
      }
    }
    previous = {value, error};
    double step = -error / slope;
    step = std::clamp(step, -max_step, max_step);
    value = std::clamp(value + step, lo, hi);
  }
};

double score(const MultifractalSpec& spec, const HurstCurve& c, const CalibrationOptions& o) {
  const double dh_tol = std::max(o.dh_abs_tolerance, o.dh_rel_tolerance * spec.target_delta_h);
  return std::max(std::abs(c.h2() - spec.target_h) / o.h_tolerance,
                  std::abs(c.delta_h - spec.target_delta_h) / dh_tol);
}

}  // namespace

TrafficTrace generate_traffic(const MultifractalSpec& spec, const CalibrationOptions& options) {
  spec.validate();
  if (options.max_iterations < 1 || options.restarts < 0)
    throw ConfigError("calibration needs at least one iteration and nonnegative restarts");
  const ScaleGrid scales = ScaleGrid::log_spaced(spec.length);
  const QGrid q = QGrid::standard();

  std::optional<TrafficTrace> best;
  double best_score = std::numeric_limits<double>::infinity();
  // Returns true once the trace is within tolerance.
  auto evaluate = [&](TrafficTrace trace, int iteration) {
    trace.iterations = iteration;
    const double s = score(spec, trace.achieved, options);
    if (s < best_score) {
      best_score = s;
      best = std::move(trace);
    }
    return s <= 1.0;
  };

  // A realization can sit outside the reachable range for its seed; in that
  // case the search restarts on a fresh realization.
  for (int attempt = 0; attempt <= options.restarts; ++attempt) {
    MultifractalSpec draw = spec;
    if (attempt > 0)
      draw.seed = derive_seed(spec.seed, "restart", static_cast<std::uint64_t>(attempt));
    if (spec.target_delta_h == 0.0) {
      SecantKnob base{spec.target_h, 0.02, 0.98, 1.0, 0.2, std::nullopt};
      for (int it = 1; it <= options.max_iterations; ++it) {
        GeneratorParams p;
        p.envelope_h = base.value;
        p.envelope_sigma = kMonofractalSigma;
        auto trace = compose_traffic(draw, p);
        trace.achieved = estimate_hurst_curve(trace.slots, q, scales);
        const double h2 = trace.achieved.h2();
        if (evaluate(std::move(trace), attempt * options.max_iterations + it)) return *best;
        base.update(h2 - spec.target_h);
      }
    } else {
      SecantKnob shape{spec.target_h - 0.1, kShapeMin, kShapeMax, 0.6, 0.25, std::nullopt};
      SecantKnob hetero{std::clamp((spec.target_delta_h - 1.5) / 4.5, 0.0, 1.0), kHeteroMin,
                        kHeteroMax, 4.0, 0.3, std::nullopt};
      for (int it = 1; it <= options.max_iterations; ++it) {
        auto trace = compose_traffic(draw, params_for(draw, shape.value, hetero.value));
        trace.achieved = estimate_hurst_curve(trace.slots, q, scales);
        const double h2 = trace.achieved.h2();
        const double dh = trace.achieved.delta_h;
        if (evaluate(std::move(trace), attempt * options.max_iterations + it)) return *best;
        shape.update(h2 - spec.target_h);
        hetero.update(dh - spec.target_delta_h);
      }
    }
  }
  throw CalibrationError("traffic calibration did not reach H=" + format_number(spec.target_h) +
                             ", delta_h=" + format_number(spec.target_delta_h) + " within " +
                             std::to_string(options.restarts + 1) + " realizations",
                         *best);
}

std::vector<Request> materialize_requests(const TrafficTrace& trace,
                                          std::span<const FlowClass> classes, std::uint64_t seed,
                                          const MaterializeOptions& options) {
  validate_classes(classes);
  if (trace.slots.empty()) throw ConfigError("trace has no slots");
  if (!(options.arrivals_per_slot >= 0)) throw ConfigError("arrivals per slot must be >= 0");

  const double total = std::accumulate(trace.slots.begin(), trace.slots.end(), 0.0);
  std::vector<Request> out;
  if (total <= 0.0) return out;
  const double scale = options.arrivals_per_slot * static_cast<double>(trace.slots.size()) / total;

  Rng rng(derive_seed(seed, "arrivals"));
  std::vector<double> weights;
  for (const auto& c : classes) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t k = 0; k < trace.slots.size(); ++k) {
    const double mean = trace.slots[k] * scale;
    if (mean <= 0.0) continue;
    std::poisson_distribution<long long> count_dist(mean);
    const long long count = count_dist(rng);
    const std::size_t first = out.size();
    for (long long i = 0; i < count; ++i) {
      const FlowClass& c = classes[pick_class(rng)];
      Request r;
      r.class_id = c.id;
      r.arrival_time = (static_cast<double>(k) + unit(rng)) * trace.slot_duration;
      r.duration = std::exponential_distribution<double>(1.0 / c.mean_duration)(rng);
      if (r.duration <= 0.0) r.duration = std::numeric_limits<double>::min();
      r.cpu = c.cpu_demand;
      r.ram = c.ram_demand;
      r.net = c.net_demand;
      out.push_back(std::move(r));
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
              [](const Request& a, const Request& b) { return a.arrival_time < b.arrival_time; });
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i + 1;
  return out;
}

void write_trace_csv(std::ostream& out, const TrafficTrace& trace) {
  out << "slot,intensity\n";
  for (std::size_t i = 0; i < trace.slots.size(); ++i)
    out << i << ',' << format_number(trace.slots[i]) << '\n';
}

TrafficTrace read_trace_csv(std::istream& in, const std::string& source, double slot_duration) {
  const CsvTable table = read_csv(in, source);
  const std::size_t slot_col = table.column("slot");
  const std::size_t value_col = table.column("intensity");
  TrafficTrace trace;
  trace.slot_duration = slot_duration;
  trace.slots.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double slot = table.number(r, slot_col);
    if (slot != static_cast<double>(r))
      throw ParseError(source, table.line_numbers[r], "slots must be numbered 0, 1, 2, ...");
    const double v = table.number(r, value_col);
    if (v < 0) throw ParseError(source, table.line_numbers[r], "intensity must be nonnegative");
    trace.slots.push_back(v);
  }
  return trace;
}

void write_requests_csv(std::ostream& out, std::span<const Request> requests) {
  out << "id,class,arrival,duration,cpu,ram,net\n";
  for (const auto& r : requests) {
    out << r.id << ',' << r.class_id << ',' << format_number(r.arrival_time) << ','
        << format_number(r.duration) << ',' << format_number(r.cpu) << ','
        << format_number(r.ram) << ',' << format_number(r.net) << '\n';
  }
}

}  // namespace mfbalance
