#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "qfact/error.hpp"
#include "qfact/hilbert.hpp"

namespace qfact::reconstruct {

inline constexpr double kZeroAmplitude = 1e-12;

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

/// Per-observable moduli and phases of the expansion coefficients of one
/// (unknown) state. The reference observable's first phase is the gauge and
/// is always 0; phases of zero-amplitude components are 0.
struct ExpansionSet {
  std::string reference_observable;
  std::map<std::string, std::vector<double>> amplitudes;
  std::map<std::string, std::vector<double>> phases;

  /// Complex coefficients sum_j e^{i alpha_j} |c_j| for one observable.
  hilbert::CVector coefficients(const std::string& obs) const {
    const auto a = amplitudes.find(obs);
    const auto p = phases.find(obs);
    if (a == amplitudes.end() || p == phases.end())
      throw UnlinkedObservableError("expansion has no entry for '" + obs + "'");
    hilbert::CVector c(static_cast<Eigen::Index>(a->second.size()));
    for (std::size_t j = 0; j < a->second.size(); ++j)
      c(static_cast<Eigen::Index>(j)) = std::polar(a->second[j], p->second[j]);
    return c;
  }

  hilbert::CVector reference_coefficients() const { return coefficients(reference_observable); }

  void set(const std::string& obs, const hilbert::CVector& c) {
    auto& a = amplitudes[obs];
    auto& p = phases[obs];
    a.resize(static_cast<std::size_t>(c.size()));
    p.resize(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      const auto z = c(static_cast<Eigen::Index>(j));
      a[j] = std::abs(z);
      p[j] = a[j] > kZeroAmplitude ? wrap_phase(std::arg(z)) : 0.0;
    }
  }
};

}  // namespace qfact::reconstruct
