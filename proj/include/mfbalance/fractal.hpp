#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace mfbalance {

// Moment orders for the fluctuation function. Strictly increasing, no zero,
// and always contains q = 2.
class QGrid {
 public:
  explicit QGrid(std::vector<double> values);
  static QGrid standard();  // {-5,...,-1,1,...,5}

  const std::vector<double>& values() const noexcept { return values_; }
  double min() const { return values_.front(); }
  double max() const { return values_.back(); }

 private:
  std::vector<double> values_;
};

// Window sizes (in samples) and polynomial detrending order.
class ScaleGrid {
 public:
  ScaleGrid(std::vector<std::size_t> scales, int detrend_order = 1);

  // `count` logarithmically spaced integers in [min_scale, length / 4].
  static ScaleGrid log_spaced(std::size_t length, std::size_t count = 16,
                              std::size_t min_scale = 16, int detrend_order = 1);
  // Powers of two in [min_scale, length / 4].
  static ScaleGrid dyadic(std::size_t length, std::size_t min_scale = 16,
                          int detrend_order = 1);

  const std::vector<std::size_t>& scales() const noexcept { return scales_; }
  int detrend_order() const noexcept { return detrend_order_; }
  std::size_t max_scale() const { return scales_.back(); }

 private:
  std::vector<std::size_t> scales_;
  int detrend_order_;
};

struct HurstCurve {
  std::map<double, double> points;       // q -> h(q)
  std::map<double, double> prefactors;   // q -> intercept of log F_q(s) vs log s
  std::map<double, double> fit_quality;  // q -> R^2 of that fit
  double delta_h = 0.0;                  // h(q_min) - h(q_max)
  std::size_t dropped_windows = 0;       // near-zero windows left out of q < 0 averages
  bool increasing = false;               // h(q_min) < h(q_max); unphysical for traffic

  double h(double q) const;  // throws if q is not on the curve
  double h2() const { return h(2.0); }
};

// Windows whose fluctuation falls below this are excluded from q < 0 moments.
inline constexpr double kMinFluctuation = 1e-12;

// Multifractal detrended fluctuation analysis of `series`.
// Requires series.size() >= 4 * scales.max_scale() and a non-constant series.
HurstCurve estimate_hurst_curve(std::span<const double> series, const QGrid& q,
                                const ScaleGrid& scales);

// Same, with the standard q grid and log-spaced scales for the series length.
HurstCurve estimate_hurst_curve(std::span<const double> series);

// h(q_min) - h(q_max) from the curve's points.
double delta_h(const HurstCurve& curve);

// CSV rows `q,h_q,intercept,r2` followed by a `delta_h,<value>,,` footer row.
void write_curve_csv(std::ostream& out, const HurstCurve& curve);

}  // namespace mfbalance
