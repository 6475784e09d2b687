#include "mfbalance/fractal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "mfbalance/csv.hpp"
#include "mfbalance/error.hpp"

namespace mfbalance {

QGrid::QGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw ConfigError("q grid needs at least two orders");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw ConfigError("q grid contains a non-finite order");
    if (values_[i] == 0.0) throw ConfigError("q grid must not contain 0");
    if (i > 0 && values_[i] <= values_[i - 1])
      throw ConfigError("q grid must be strictly increasing");
  }
  if (std::find(values_.begin(), values_.end(), 2.0) == values_.end())
    throw ConfigError("q grid must contain q = 2");
}

QGrid QGrid::standard() { return QGrid({-5, -4, -3, -2, -1, 1, 2, 3, 4, 5}); }

ScaleGrid::ScaleGrid(std::vector<std::size_t> scales, int detrend_order)
    : scales_(std::move(scales)), detrend_order_(detrend_order) {
  if (detrend_order_ < 0) throw ConfigError("detrend order must be nonnegative");
  if (scales_.size() < 2) throw ConfigError("scale grid needs at least two scales");
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    if (i > 0 && scales_[i] <= scales_[i - 1])
      throw ConfigError("scale grid must be strictly increasing");
  }
  if (scales_.front() < static_cast<std::size_t>(detrend_order_) + 2)
    throw ConfigError("smallest scale must be at least detrend order + 2");
}

ScaleGrid ScaleGrid::log_spaced(std::size_t length, std::size_t count, std::size_t min_scale,
                                int detrend_order) {
  const std::size_t max_scale = length / 4;
  if (count < 2 || max_scale <= min_scale)
    throw InsufficientDataError("series of length " + std::to_string(length) +
                                " is too short for scales starting at " +
                                std::to_string(min_scale));
  const double lo = std::log(static_cast<double>(min_scale));
  const double hi = std::log(static_cast<double>(max_scale));
  std::vector<std::size_t> scales;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = std::exp(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
    const auto s = static_cast<std::size_t>(std::lround(v));
    if (scales.empty() || s > scales.back()) scales.push_back(s);
  }
  return ScaleGrid(std::move(scales), detrend_order);
}

ScaleGrid ScaleGrid::dyadic(std::size_t length, std::size_t min_scale, int detrend_order) {
  std::vector<std::size_t> scales;
  for (std::size_t s = min_scale; s <= length / 4; s *= 2) scales.push_back(s);
  if (scales.size() < 2)
    throw InsufficientDataError("series of length " + std::to_string(length) +
                                " is too short for dyadic scales");
  return ScaleGrid(std::move(scales), detrend_order);
}

double HurstCurve::h(double q) const {
  auto it = points.find(q);
  if (it == points.end()) throw ConfigError("q = " + std::to_string(q) + " is not on the curve");
  return it->second;
}

namespace {

struct LineFit {
  double slope;
  double intercept;
  double r2;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double r2 = 1.0;
  if (syy > 0) {
    double ssr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - (intercept + slope * x[i]);
      ssr += e * e;
    }
    r2 = std::clamp(1.0 - ssr / syy, 0.0, 1.0);
  }
  return {slope, intercept, r2};
}

// Squared detrended fluctuation of every forward and backward window at one scale.
std::vector<double> window_variances(const std::vector<double>& profile, std::size_t scale,
                                     int order) {
  const std::size_t n = profile.size();
  const std::size_t windows = n / scale;

  // Orthonormal basis of the polynomial subspace; residual = y - Q Q^T y.
  Eigen::MatrixXd vandermonde(scale, order + 1);
  for (std::size_t t = 0; t < scale; ++t) {
    const double u = 2.0 * static_cast<double>(t) / static_cast<double>(scale - 1) - 1.0;
    double p = 1.0;
    for (int k = 0; k <= order; ++k) {
      vandermonde(t, k) = p;
      p *= u;
    }
  }
  const Eigen::MatrixXd basis =
      vandermonde.householderQr().householderQ() * Eigen::MatrixXd::Identity(scale, order + 1);

  std::vector<double> out;
  out.reserve(2 * windows);
  Eigen::VectorXd seg(scale);
  auto measure = [&](std::size_t start) {
    for (std::size_t t = 0; t < scale; ++t) seg(t) = profile[start + t];
    const Eigen::VectorXd resid = seg - basis * (basis.transpose() * seg);
    out.push_back(resid.squaredNorm() / static_cast<double>(scale));
  };
  for (std::size_t v = 0; v < windows; ++v) measure(v * scale);
  const std::size_t offset = n - windows * scale;
  for (std::size_t v = 0; v < windows; ++v) measure(offset + v * scale);
  return out;
}

// log F_q(s) from squared window fluctuations, evaluated in log space.
// Returns NaN when no window survives the q < 0 floor.
double log_fluctuation(const std::vector<double>& f2, double q, std::size_t& dropped) {
  std::vector<double> terms;
  terms.reserve(f2.size());
  const double floor2 = kMinFluctuation * kMinFluctuation;
  for (double v : f2) {
    if (q < 0 && v < floor2) {
      ++dropped;
      continue;
    }
    if (v <= 0) {
      terms.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    terms.push_back(0.5 * q * std::log(v));
  }
  if (terms.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) return -std::numeric_limits<double>::infinity();
  double acc = 0;
  for (double t : terms) acc += std::exp(t - peak);
  return (peak + std::log(acc / static_cast<double>(terms.size()))) / q;
}

}  // namespace

HurstCurve estimate_hurst_curve(std::span<const double> series, const QGrid& q,
                                const ScaleGrid& scales) {
  const std::size_t n = series.size();
  if (n < 4 * scales.max_scale())
    throw InsufficientDataError("series length " + std::to_string(n) +
                                " is shorter than 4 x largest scale " +
                                std::to_string(scales.max_scale()));
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) throw DegenerateInputError("series is constant");
  for (double v : series)
    if (!std::isfinite(v)) throw DegenerateInputError("series contains non-finite values");

  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> profile(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += series[i] - mean;
    profile[i] = acc;
  }

  const auto& qs = q.values();
  std::vector<std::vector<double>> log_s(qs.size()), log_f(qs.size());
  HurstCurve curve;
  for (std::size_t s : scales.scales()) {
    const auto f2 = window_variances(profile, s, scales.detrend_order());
    for (std::size_t j = 0; j < qs.size(); ++j) {
      const double lf = log_fluctuation(f2, qs[j], curve.dropped_windows);
      if (!std::isfinite(lf)) continue;
      log_s[j].push_back(std::log(static_cast<double>(s)));
      log_f[j].push_back(lf);
    }
  }

  for (std::size_t j = 0; j < qs.size(); ++j) {
    if (log_s[j].size() < 2)
      throw DegenerateInputError("no measurable fluctuation for q = " + std::to_string(qs[j]));
    const LineFit fit = fit_line(log_s[j], log_f[j]);
    curve.points[qs[j]] = fit.slope;
    curve.prefactors[qs[j]] = fit.intercept;
    curve.fit_quality[qs[j]] = fit.r2;
  }
  curve.delta_h = delta_h(curve);
  curve.increasing = curve.delta_h < 0;
  return curve;
}

HurstCurve estimate_hurst_curve(std::span<const double> series) {
  return estimate_hurst_curve(series, QGrid::standard(), ScaleGrid::log_spaced(series.size()));
}

double delta_h(const HurstCurve& curve) {
  if (curve.points.size() < 2)
    throw InsufficientDataError("delta_h needs at least two curve points");
  return curve.points.begin()->second - curve.points.rbegin()->second;
}

void write_curve_csv(std::ostream& out, const HurstCurve& curve) {
  out << "q,h_q,intercept,r2\n";
  for (const auto& [q, h] : curve.points) {
    out << format_number(q) << ',' << format_number(h) << ','
        << format_number(curve.prefactors.at(q)) << ','
        << format_number(curve.fit_quality.at(q)) << '\n';
  }
  out << "delta_h," << format_number(curve.delta_h) << ",,\n";
}

}  // namespace mfbalance
