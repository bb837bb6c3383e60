#pragma once

// Reconstruction of a predictively equivalent state expansion from measured
// laws alone: moduli from the reference law (|c_j| = sqrt(pi_j)), phases
// fitted so that the Dirac transforms reproduce every partner law, and
// derived expansions on every linked basis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qfact/error.hpp"
#include "qfact/executor.hpp"
#include "qfact/expansion.hpp"
#include "qfact/finprob.hpp"
#include "qfact/hilbert.hpp"
#include "qfact/rng.hpp"

namespace qfact::reconstruct {

using hilbert::CMatrix;
using hilbert::Complex;
using hilbert::CVector;
using hilbert::TransformMatrix;

inline std::vector<double> amplitudes_from_law(const std::vector<double>& law) {
  if (law.empty()) throw EmptyLawError("amplitudes of an empty law");
  std::vector<double> a;
  a.reserve(law.size());
  for (double p : law) {
    if (p < 0.0) throw InvalidArgumentError("negative probability");
    a.push_back(std::sqrt(p));
  }
  return a;
}

inline std::vector<double> amplitudes_from_law(const finprob::FactualLaw& law) {
  return amplitudes_from_law(finprob::frequencies(law));
}

/// A measured law on a partner basis B with the transform from the reference.
struct PartnerLaw {
  std::vector<double> law;
  TransformMatrix tau;                 // reference -> B
  std::optional<std::uint64_t> trials;  // sample size, absent for exact laws
};

enum class Ambiguity { unique, conjugate_pair, underdetermined };

inline const char* to_string(Ambiguity a) {
  switch (a) {
    case Ambiguity::unique: return "unique";
    case Ambiguity::conjugate_pair: return "conjugate-pair";
    case Ambiguity::underdetermined: return "underdetermined";
  }
  return "?";
}

struct RetrievalConfig {
  std::size_t restarts = 32;
  /// Residual accepted as consistent. Unset: 1e-10 for exact laws, otherwise
  /// 10x the summed binomial variance of the measured laws.
  std::optional<double> tolerance;
  std::size_t max_iterations = 5000;
  std::uint64_t seed = 0x5eed;
  /// Two phase vectors name different states when their weighted distance
  /// max_j |c_j| |e^{i a_j} - e^{i b_j}| exceeds this.
  double distinct_threshold = 1e-3;
  bool record_trace = false;
};

struct RetrievalReport {
  double residual = 0.0;
  std::size_t restarts_used = 0;  // restarts run until the winning one, inclusive
  bool converged = false;
  Ambiguity ambiguity_flag = Ambiguity::unique;
  double tolerance = 0.0;
  std::size_t iterations = 0;     // descent steps of the winning restart
  double conjugate_residual = 0.0;
  std::vector<double> trace;      // residual after each accepted step (record_trace)
};

struct PhaseRetrieval {
  std::vector<double> phases;  // on the reference basis, gauge phase 0
  RetrievalReport report;
};

/// R(alpha) = sum_B sum_k (|sum_j tau_kj |c_j| e^{i alpha_j}|^2 - pi_B(k))^2 and
/// its gradient, over the phases of the nonzero components.
class ConsistencyResidual {
 public:
  ConsistencyResidual(const std::vector<double>& amplitudes, const std::vector<PartnerLaw>& partners)
      : amps_(amplitudes) {
    const auto d = static_cast<Eigen::Index>(amplitudes.size());
    for (const auto& p : partners) {
      hilbert::require_same_dim(p.tau.dim(), amplitudes.size(), "retrieve_phases");
      hilbert::require_same_dim(p.law.size(), amplitudes.size(), "retrieve_phases");
      CMatrix m = p.tau.entries();
      for (Eigen::Index j = 0; j < d; ++j) m.col(j) *= amplitudes[static_cast<std::size_t>(j)];
      weighted_.push_back(std::move(m));
      laws_.push_back(Eigen::Map<const Eigen::VectorXd>(p.law.data(), d));
    }
  }

  double value(const std::vector<double>& phases) const {
    const CVector e = unit_phasors(phases);
    double r = 0.0;
    for (std::size_t b = 0; b < weighted_.size(); ++b) {
      const CVector dk = weighted_[b] * e;
      r += (dk.cwiseAbs2() - laws_[b]).squaredNorm();
    }
    return r;
  }

  double value_and_gradient(const std::vector<double>& phases, std::vector<double>& grad) const {
    const CVector e = unit_phasors(phases);
    grad.assign(phases.size(), 0.0);
    double r = 0.0;
    for (std::size_t b = 0; b < weighted_.size(); ++b) {
      const auto& m = weighted_[b];
      const CVector dk = m * e;
      const Eigen::VectorXd res = dk.cwiseAbs2() - laws_[b];
      r += res.squaredNorm();
      // dR/da_j = sum_k 2 res_k * (-2 Im(conj(d_k) M_kj e_j))
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double g = 0.0;
        for (Eigen::Index k = 0; k < m.rows(); ++k)
          g += res(k) * (std::conj(dk(k)) * m(k, j) * e(j)).imag();
        grad[static_cast<std::size_t>(j)] += -4.0 * g;
      }
    }
    return r;
  }

  const std::vector<double>& amplitudes() const noexcept { return amps_; }

 private:
  static CVector unit_phasors(const std::vector<double>& phases) {
    CVector e(static_cast<Eigen::Index>(phases.size()));
    for (std::size_t j = 0; j < phases.size(); ++j) e(static_cast<Eigen::Index>(j)) = std::polar(1.0, phases[j]);
    return e;
  }

  std::vector<double> amps_;
  std::vector<CMatrix> weighted_;
  std::vector<Eigen::VectorXd> laws_;
};

struct DescentResult {
  std::vector<double> phases;
  double residual = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

/// Gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking over the phases listed in `free`; the others stay fixed.
/// Every accepted step strictly lowers R.
inline DescentResult descend(const ConsistencyResidual& r, std::vector<double> phases,
                             const std::vector<std::size_t>& free, std::size_t max_iterations,
                             bool record_trace = false) {
  constexpr double kFloor = 1e-32;
  constexpr double kArmijo = 1e-4;
  DescentResult out;
  std::vector<double> full_grad;
  double f = r.value_and_gradient(phases, full_grad);
  auto project = [&](const std::vector<double>& g) {
    std::vector<double> p(free.size());
    for (std::size_t i = 0; i < free.size(); ++i) p[i] = g[free[i]];
    return p;
  };
  std::vector<double> g = project(full_grad);
  double step = 1.0;
  std::vector<double> trial = phases;
  for (std::size_t it = 0; it < max_iterations && !free.empty(); ++it) {
    double gg = 0.0;
    for (double x : g) gg += x * x;
    if (f <= kFloor || gg == 0.0) break;
    bool accepted = false;
    double f_new = f;
    while (step > 1e-18) {
      for (std::size_t i = 0; i < free.size(); ++i) trial[free[i]] = phases[free[i]] - step * g[i];
      f_new = r.value(trial);
      if (f_new < f - kArmijo * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    r.value_and_gradient(trial, full_grad);
    auto g_new = project(full_grad);
    double sy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < free.size(); ++i) {
      const double s = -step * g[i];
      sy += s * (g_new[i] - g[i]);
      ss += s * s;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : std::min(2.0 * step, 1e6);
    phases = trial;
    f = f_new;
    g = std::move(g_new);
    ++out.iterations;
    if (record_trace) out.trace.push_back(f);
  }
  out.phases = std::move(phases);
  out.residual = f;
  return out;
}

namespace detail {
inline double summed_binomial_variance(const std::vector<double>& law, std::uint64_t n) {
  double v = 0.0;
  for (double p : law) v += p * (1.0 - p);
  return v / static_cast<double>(n);
}

inline bool is_permutation_like(const TransformMatrix& t) {
  const auto& m = t.entries();
  for (Eigen::Index k = 0; k < m.rows(); ++k)
    if (m.row(k).cwiseAbs().maxCoeff() < 1.0 - 1e-9) return false;
  return true;
}

/// Gauge fixing: the first nonzero component carries phase 0, zero
/// components carry phase 0, everything else is wrapped into (-pi, pi].
inline std::vector<double> normalize_gauge(std::vector<double> phases, const std::vector<double>& amps) {
  std::size_t gauge = amps.size();
  for (std::size_t j = 0; j < amps.size(); ++j)
    if (amps[j] > kZeroAmplitude) {
      gauge = j;
      break;
    }
  const double offset = gauge < amps.size() ? phases[gauge] : 0.0;
  for (std::size_t j = 0; j < phases.size(); ++j)
    phases[j] = amps[j] > kZeroAmplitude && j != gauge ? wrap_phase(phases[j] - offset) : 0.0;
  return phases;
}

inline double state_distance(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<double>& amps) {
  double d = 0.0;
  for (std::size_t j = 0; j < amps.size(); ++j)
    d = std::max(d, amps[j] * std::abs(std::polar(1.0, a[j]) - std::polar(1.0, b[j])));
  return d;
}
}  // namespace detail

/// Fits the reference phases to the partner laws by multi-start descent.
/// Restart 0 starts from all-zero phases, restart r > 0 from uniform random
/// phases drawn from Rng(cfg.seed, r). Lowest residual wins; ties go to the
/// lowest restart index. Never throws on non-convergence: callers read
/// report.converged (retrieve_phases below raises instead).
inline PhaseRetrieval retrieve_phases_unchecked(const std::vector<double>& law_a,
                                                const std::vector<PartnerLaw>& partners,
                                                const RetrievalConfig& cfg = {},
                                                std::optional<std::uint64_t> trials_a = {},
                                                const Executor& exec = serial_executor()) {
  if (partners.empty()) throw InvalidArgumentError("phase retrieval needs at least one partner law");
  if (cfg.restarts == 0) throw InvalidArgumentError("at least one restart is required");
  const auto amps = amplitudes_from_law(law_a);
  const std::size_t dim = amps.size();
  const ConsistencyResidual residual(amps, partners);

  double tol = 1e-10;
  if (cfg.tolerance) {
    tol = *cfg.tolerance;
  } else {
    double var = 0.0;
    bool sampled = false;
    for (const auto& p : partners)
      if (p.trials) {
        sampled = true;
        var += detail::summed_binomial_variance(p.law, *p.trials);
      }
    if (trials_a) {
      sampled = true;
      var += static_cast<double>(partners.size()) * detail::summed_binomial_variance(law_a, *trials_a);
    }
    if (sampled) tol = std::max(tol, 10.0 * var);
  }

  std::vector<std::size_t> free;
  {
    bool gauge_taken = false;
    for (std::size_t j = 0; j < dim; ++j) {
      if (amps[j] <= kZeroAmplitude) continue;
      if (!gauge_taken) {
        gauge_taken = true;
        continue;
      }
      free.push_back(j);
    }
  }

  std::vector<DescentResult> runs(cfg.restarts);
  exec(cfg.restarts, [&](std::size_t r) {
    std::vector<double> start(dim, 0.0);
    if (r > 0) {
      Rng rng(cfg.seed, r);
      for (auto j : free) start[j] = rng.uniform(-std::numbers::pi, std::numbers::pi);
    }
    runs[r] = descend(residual, std::move(start), free, cfg.max_iterations, cfg.record_trace);
    runs[r].phases = detail::normalize_gauge(runs[r].phases, amps);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].residual < runs[best].residual) best = r;

  PhaseRetrieval out;
  out.phases = runs[best].phases;
  auto& rep = out.report;
  rep.residual = runs[best].residual;
  rep.restarts_used = best + 1;
  rep.tolerance = tol;
  rep.converged = rep.residual <= tol;
  rep.iterations = runs[best].iterations;
  rep.trace = std::move(runs[best].trace);

  std::vector<double> conj(dim);
  for (std::size_t j = 0; j < dim; ++j) conj[j] = -out.phases[j];
  conj = detail::normalize_gauge(conj, amps);
  rep.conjugate_residual = residual.value(conj);

  const bool all_trivial = std::all_of(partners.begin(), partners.end(),
                                       [](const PartnerLaw& p) { return detail::is_permutation_like(p.tau); });
  const bool conj_distinct = detail::state_distance(conj, out.phases, amps) > cfg.distinct_threshold;
  bool other_solution = false;
  for (const auto& run : runs) {
    if (run.residual > tol) continue;
    if (detail::state_distance(run.phases, out.phases, amps) > cfg.distinct_threshold &&
        detail::state_distance(run.phases, conj, amps) > cfg.distinct_threshold)
      other_solution = true;
  }
  if ((all_trivial && !free.empty()) || other_solution)
    rep.ambiguity_flag = Ambiguity::underdetermined;
  else if (conj_distinct && rep.conjugate_residual <= std::max(tol, rep.residual))
    rep.ambiguity_flag = Ambiguity::conjugate_pair;
  else
    rep.ambiguity_flag = Ambiguity::unique;
  return out;
}

/// As retrieve_phases_unchecked, raising InconsistentLawsError when the best
/// residual exceeds the tolerance.
inline PhaseRetrieval retrieve_phases(const std::vector<double>& law_a, const std::vector<PartnerLaw>& partners,
                                      const RetrievalConfig& cfg = {}, std::optional<std::uint64_t> trials_a = {},
                                      const Executor& exec = serial_executor()) {
  auto out = retrieve_phases_unchecked(law_a, partners, cfg, trials_a, exec);
  if (!out.report.converged)
    throw InconsistentLawsError("no phase assignment reproduces the partner laws: residual " +
                                std::to_string(out.report.residual) + " > tolerance " +
                                std::to_string(out.report.tolerance));
  return out;
}

/// Factual-law form: partners keyed by observable name; sampling sizes are
/// taken from the laws themselves.
inline PhaseRetrieval retrieve_phases(const finprob::FactualLaw& law_a,
                                      const std::map<std::string, finprob::FactualLaw>& others,
                                      const std::map<std::string, TransformMatrix>& taus,
                                      const RetrievalConfig& cfg = {}, const Executor& exec = serial_executor()) {
  std::vector<PartnerLaw> partners;
  for (const auto& [name, law] : others) {
    auto it = taus.find(name);
    if (it == taus.end()) throw UnlinkedObservableError("no transform to '" + name + "'");
    partners.push_back({finprob::frequencies(law), it->second, law.n_total()});
  }
  return retrieve_phases(finprob::frequencies(law_a), partners, cfg, law_a.n_total(), exec);
}

/// Reference expansion from sqrt(pi_A) and the retrieved phases, and the
/// derived expansion d = tau c on every linked observable.
inline ExpansionSet assemble_equivalent(const std::string& reference, const std::vector<double>& law_a,
                                        const std::vector<double>& phases_a,
                                        const std::vector<TransformMatrix>& taus) {
  const auto amps = amplitudes_from_law(law_a);
  hilbert::require_same_dim(phases_a.size(), amps.size(), "assemble_equivalent");
  ExpansionSet e;
  e.reference_observable = reference;
  CVector c(static_cast<Eigen::Index>(amps.size()));
  const auto ph = detail::normalize_gauge(phases_a, amps);
  for (std::size_t j = 0; j < amps.size(); ++j) c(static_cast<Eigen::Index>(j)) = std::polar(amps[j], ph[j]);
  e.amplitudes[reference] = amps;
  e.phases[reference] = ph;
  for (const auto& t : taus) {
    if (t.source() != reference)
      throw UnlinkedObservableError("transform " + t.source() + "->" + t.target() + " does not start at the reference");
    if (t.target() == reference) continue;
    e.set(t.target(), hilbert::dirac_transform(c, t));
  }
  return e;
}

/// Law-map form: every non-reference law must be linked by a transform.
inline ExpansionSet assemble_equivalent(const std::map<std::string, std::vector<double>>& laws,
                                        const std::string& reference, const std::vector<double>& phases_a,
                                        const std::vector<TransformMatrix>& taus) {
  auto ref = laws.find(reference);
  if (ref == laws.end()) throw UnlinkedObservableError("no law for the reference '" + reference + "'");
  for (const auto& [name, law] : laws) {
    if (name == reference) continue;
    const bool linked = std::any_of(taus.begin(), taus.end(), [&](const TransformMatrix& t) {
      return t.source() == reference && t.target() == name;
    });
    if (!linked) throw UnlinkedObservableError("no transform from '" + reference + "' to '" + name + "'");
  }
  return assemble_equivalent(reference, ref->second, phases_a, taus);
}

/// max_k | |d_k| - sqrt(pi_B(k)) | over every observable present in both.
inline double max_amplitude_mismatch(const ExpansionSet& e, const std::map<std::string, std::vector<double>>& laws) {
  double m = 0.0;
  for (const auto& [name, law] : laws) {
    auto it = e.amplitudes.find(name);
    if (it == e.amplitudes.end()) continue;
    for (std::size_t k = 0; k < law.size(); ++k) m = std::max(m, std::abs(it->second[k] - std::sqrt(law[k])));
  }
  return m;
}

/// Predicted law |tau c|^2 of an observable C linked to the reference.
inline std::vector<double> predict_heldout(const ExpansionSet& e, const TransformMatrix& tau_to_c) {
  if (tau_to_c.source() != e.reference_observable)
    throw UnlinkedObservableError("transform starts at '" + tau_to_c.source() + "', not at the reference '" +
                                  e.reference_observable + "'");
  const CVector d = hilbert::dirac_transform(e.reference_coefficients(), tau_to_c);
  std::vector<double> p(static_cast<std::size_t>(d.size()));
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(d(static_cast<Eigen::Index>(k)));
  return p;
}

}  // namespace qfact::reconstruct
