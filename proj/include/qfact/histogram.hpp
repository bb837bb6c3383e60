#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "qfact/error.hpp"

namespace qfact {

/// Fixed-width histogram over [lo, hi]. Samples outside the range land in the
/// edge bins, so mass() always sums to one over every recorded sample.
class Histogram {
 public:
  Histogram() = default;

  Histogram(double lo, double hi, std::size_t bins) : lo_(lo), hi_(hi), counts_(bins, 0) {
    if (bins == 0) throw InvalidArgumentError("histogram needs at least one bin");
    if (!(hi > lo)) throw InvalidArgumentError("histogram range is empty");
  }

  /// Range covering every value and every point in `include`. A range
  /// narrower than 1e-9 of max(|values|, scale_hint) is degenerate: it is
  /// widened by 1e-6 of that scale and shifted so the value sits mid-bin.
  static Histogram fit(std::span<const double> values, std::size_t bins,
                       std::initializer_list<double> include = {}, double scale_hint = 0.0) {
    return fit(values, bins, std::span<const double>(include.begin(), include.size()), scale_hint);
  }

  static Histogram fit(std::span<const double> values, std::size_t bins,
                       std::span<const double> include, double scale_hint = 0.0) {
    if (bins == 0) throw InvalidArgumentError("histogram needs at least one bin");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (double v : include) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) {
      lo = -1.0;
      hi = 1.0;
    }
    const double scale = std::max({std::abs(lo), std::abs(hi), std::abs(scale_hint)});
    if (hi - lo <= 1e-9 * scale) {
      const double pad = scale > 0.0 ? 1e-6 * scale : 1.0;
      const double mid = 0.5 * (lo + hi);
      lo = mid - pad;
      hi = mid + pad;
      if (bins % 2 == 0) {
        const double half = pad / static_cast<double>(bins);
        lo -= half;
        hi -= half;
      }
    } else {
      const double pad = 1e-9 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
    Histogram h(lo, hi, bins);
    for (double v : values) h.add(v);
    return h;
  }

  std::size_t bin_of(double x) const {
    const double t = (x - lo_) / (hi_ - lo_) * static_cast<double>(counts_.size());
    if (!(t > 0.0)) return 0;
    return std::min(counts_.size() - 1, static_cast<std::size_t>(t));
  }

  void add(double x) {
    ++counts_[bin_of(x)];
    ++total_;
  }

  void merge(const Histogram& other) {
    if (other.lo_ != lo_ || other.hi_ != hi_ || other.counts_.size() != counts_.size())
      throw InvalidArgumentError("histograms with different binning cannot be merged");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
  }

  std::vector<double> mass() const {
    std::vector<double> m(counts_.size(), 0.0);
    if (total_ == 0) return m;
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
    return m;
  }

  double bin_low(std::size_t i) const { return lo_ + width() * static_cast<double>(i); }
  double bin_high(std::size_t i) const {
    return i + 1 == counts_.size() ? hi_ : lo_ + width() * static_cast<double>(i + 1);
  }
  double bin_center(std::size_t i) const { return 0.5 * (bin_low(i) + bin_high(i)); }
  double width() const { return (hi_ - lo_) / static_cast<double>(counts_.size()); }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  std::size_t bins() const noexcept { return counts_.size(); }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t total() const noexcept { return total_; }

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// 0.5 * sum |p - q|
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgumentError("distributions differ in support size");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // population variance
  double stddev() const { return std::sqrt(variance); }
};

/// Two-pass mean and variance; exact zero for constant input.
inline MeanVar mean_var(std::span<const double> xs) {
  MeanVar r;
  if (xs.empty()) return r;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    r.mean = xs.front();
    return r;
  }
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - r.mean) * (x - r.mean);
  r.variance = v / static_cast<double>(xs.size());
  return r;
}

}  // namespace qfact
