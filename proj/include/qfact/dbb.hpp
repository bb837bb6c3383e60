#pragma once

// de Broglie-Bohm guidance on closed-form interference states: guided
// velocity and momentum, quantum potential and force, ionization kicks and
// trace angles, the two-layer trace experiment, and the extended-Born
// Monte-Carlo comparison.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <algorithm>
#include <span>
#include <cstdint>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

#include "qfact/error.hpp"
#include "qfact/executor.hpp"
#include "qfact/histogram.hpp"
#include "qfact/rng.hpp"

namespace qfact::dbb {

using Complex = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kLightSpeed = 299792458.0;      // m/s
inline constexpr double kNeutronMass = 1.67492749804e-27;  // kg

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Stationary superposition of two plane waves of equal frequency whose
/// propagation directions make angles +-theta0 with Oz:
///   psi0 = sqrt2 cos(chi z + delta/2) exp(2 pi i nu (t - x sin(theta0)/V)) exp(i delta/2)
/// with chi = 2 pi (nu/V) cos(theta0).
struct TwoWaveState {
  double nu = 0.0;           // frequency, 1/s
  double V = 0.0;            // phase speed, m/s
  double theta0 = 0.0;       // half-angle, rad
  double delta_phase = 0.0;  // relative phase of the two waves, rad
  double m0 = 0.0;           // rest mass, kg
  double M = 0.0;            // quantum mass, kg
  double c = kLightSpeed;
  double h = kPlanck;

  /// Free particle of rest mass m0 and speed v12 in each branch:
  /// M = m0 gamma, h nu = M c^2, V = c^2 / v12.
  static TwoWaveState for_particle(double m0, double v12, double theta0, double delta_phase = 0.0,
                                   double h = kPlanck, double c = kLightSpeed) {
    if (!(v12 > 0.0 && v12 < c)) throw InvalidArgumentError("branch speed must lie in (0, c)");
    TwoWaveState s;
    s.m0 = m0;
    s.M = m0 / std::sqrt(1.0 - (v12 / c) * (v12 / c));
    s.c = c;
    s.h = h;
    s.nu = s.M * c * c / h;
    s.V = c * c / v12;
    s.theta0 = theta0;
    s.delta_phase = delta_phase;
    s.validate();
    return s;
  }

  /// Thermal neutron, 2200 m/s per branch, theta0 = 1 rad.
  static TwoWaveState neutron_default() { return for_particle(kNeutronMass, 2200.0, 1.0); }

  double hbar() const { return h / (2.0 * std::numbers::pi); }
  double wavenumber() const { return 2.0 * std::numbers::pi * nu / V; }
  double chi() const { return wavenumber() * std::cos(theta0); }
  double branch_speed() const { return c * c / V; }  // v12
  double omega() const { return 2.0 * std::numbers::pi * nu; }
  /// Period of the fringe density a^2(z).
  double fringe_period() const { return std::numbers::pi / chi(); }

  void validate() const {
    if (!(nu > 0.0 && V > 0.0 && m0 > 0.0 && M > 0.0 && c > 0.0 && h > 0.0))
      throw InvariantViolationError("two-wave parameters must be positive");
    if (!(chi() > 0.0)) throw InvariantViolationError("chi must be positive");
    if (!(branch_speed() * std::sin(theta0) < c))
      throw InvariantViolationError("guided speed must stay below c");
  }

  /// Component waves (1/sqrt2) exp(i(omega t - k x sin(theta0) +- k z cos(theta0))),
  /// the first carrying the relative phase delta.
  Complex component(int which, const Vec3& r, double t) const {
    const double k = wavenumber();
    const double sgn = which == 0 ? 1.0 : -1.0;
    const double ph = omega() * t - k * r[0] * std::sin(theta0) + sgn * k * r[2] * std::cos(theta0) +
                      (which == 0 ? delta_phase : 0.0);
    return std::polar(1.0 / std::numbers::sqrt2, ph);
  }

  Complex wave(const Vec3& r, double t) const { return component(0, r, t) + component(1, r, t); }
};

/// a = sqrt2 cos(chi z + delta/2); independent of t for the stable state.
inline double amplitude(const TwoWaveState& s, double z, double /*t*/ = 0.0) {
  return std::numbers::sqrt2 * std::cos(s.chi() * z + 0.5 * s.delta_phase);
}

/// ((c^2/V) sin(theta0), 0, 0)
inline Vec3 guided_velocity(const TwoWaveState& s) {
  return {s.c * s.c / s.V * std::sin(s.theta0), 0.0, 0.0};
}

/// M * guided_velocity
inline Vec3 guided_momentum(const TwoWaveState& s) { return s.M * guided_velocity(s); }

/// QM_HD momentum spectrum of the state: the two branch momenta
/// p12 (sin(theta0), 0, +-cos(theta0)), p12 = M v12.
inline std::array<Vec3, 2> branch_momenta(const TwoWaveState& s) {
  const double p = s.M * s.branch_speed();
  return {Vec3{p * std::sin(s.theta0), 0.0, p * std::cos(s.theta0)},
          Vec3{p * std::sin(s.theta0), 0.0, -p * std::cos(s.theta0)}};
}

namespace detail {
inline constexpr double kNodeTolerance = 1e-12;

struct AmplitudeJet {
  double a, az, azz, azzz;
};

inline AmplitudeJet amplitude_jet(const TwoWaveState& s, double z) {
  const double chi = s.chi();
  const double u = chi * z + 0.5 * s.delta_phase;
  const double c = std::cos(u), sn = std::sin(u);
  const double r2 = std::numbers::sqrt2;
  return {r2 * c, -r2 * chi * sn, -r2 * chi * chi * c, r2 * chi * chi * chi * sn};
}
}  // namespace detail

/// Q = (h^2 / 8 pi^2 m0) box(a)/a, with box = (1/c^2) d^2/dt^2 - laplacian.
/// For the stationary cosine amplitude box(a)/a = chi^2 at every off-node z.
inline double quantum_potential(const TwoWaveState& s, double z) {
  const auto j = detail::amplitude_jet(s, z);
  if (std::abs(j.a) < detail::kNodeTolerance * std::numbers::sqrt2)
    throw NodeSingularityError("quantum potential is singular at an amplitude node");
  const double box_over_a = -j.azz / j.a;
  return s.h * s.h / (8.0 * std::numbers::pi * std::numbers::pi * s.m0) * box_over_a;
}

/// -dQ/dz. d/dz(-a''/a) = -(a''' a - a'' a') / a^2; the cosine amplitude
/// obeys a'' = -chi^2 a (so a''' = -chi^2 a'), which cancels the numerator
/// term by term. Zero at nodes, where the constancy of box(a)/a on either
/// side fixes the limit.
inline double quantum_force(const TwoWaveState& s, double z) {
  const auto j = detail::amplitude_jet(s, z);
  if (std::abs(j.a) < detail::kNodeTolerance * std::numbers::sqrt2) return 0.0;
  const double chi2 = s.chi() * s.chi();
  const double a_az = j.a * j.az;
  const double d_ratio = -((-chi2 * a_az) - (-chi2 * a_az)) / (j.a * j.a);
  return -s.h * s.h / (8.0 * std::numbers::pi * std::numbers::pi * s.m0) * d_ratio;
}

struct TrajectoryPoint {
  double t;
  Vec3 r;
  Vec3 v;
};

/// Velocity-Verlet integration of M dv/dt = -dQ/dz e_z from r0 with the guided
/// velocity as initial condition, over [0, T] in `steps` equal steps.
inline std::vector<TrajectoryPoint> integrate_trajectory(const TwoWaveState& s, const Vec3& r0, double T,
                                                         std::size_t steps) {
  s.validate();
  if (!(T >= 0.0) || steps == 0) throw InvalidArgumentError("trajectory needs T >= 0 and steps > 0");
  const double dt = T / static_cast<double>(steps);
  std::vector<TrajectoryPoint> out;
  out.reserve(steps + 1);
  Vec3 r = r0, v = guided_velocity(s);
  double a = quantum_force(s, r[2]) / s.M;
  out.push_back({0.0, r, v});
  for (std::size_t i = 1; i <= steps; ++i) {
    r = r + dt * v + Vec3{0.0, 0.0, 0.5 * a * dt * dt};
    const double a_next = quantum_force(s, r[2]) / s.M;
    v[2] += 0.5 * (a + a_next) * dt;
    a = a_next;
    out.push_back({dt * static_cast<double>(i), r, v});
  }
  return out;
}

/// Default kick scale h^2 chi / (4 pi c^2 m0^2), in m/rad.
inline double default_kick_scale(const TwoWaveState& s) {
  return s.h * s.h * s.chi() / (4.0 * std::numbers::pi * s.c * s.c * s.m0 * s.m0);
}

/// Fringe displacement produced by a phase jump dd: -kappa * dd.
inline double ionization_kick(double dd, double kappa) {
  if (kappa < 0.0) throw InvalidArgumentError("kick scale must be non-negative");
  return -kappa * dd;
}

/// gamma_i = atan(sum_{j<=i} dz_j / lambda_j): the angle with Ox of the trace
/// segment from the first ionization to the one after interaction i.
inline std::vector<double> trace_angles(const std::vector<double>& kicks,
                                        const std::vector<double>& spacings) {
  if (kicks.size() != spacings.size())
    throw InvalidArgumentError("trace_angles: kicks and spacings differ in length");
  std::vector<double> out;
  out.reserve(kicks.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < kicks.size(); ++j) {
    if (!(spacings[j] > 0.0)) throw InvalidArgumentError("trace_angles: spacings must be positive");
    sum += kicks[j] / spacings[j];
    out.push_back(std::atan(sum));
  }
  return out;
}

/// Sum of plane waves sum_n w_n exp(i p_n . r / hbar) on a cube [0, box)^3.
struct PlaneWaveSum {
  struct Component {
    Complex weight;
    Vec3 momentum;
  };
  std::vector<Component> components;
  double box = 1.0;
  double hbar = 1.0;

  void validate() const {
    if (components.empty()) throw InvariantViolationError("plane-wave sum has no component");
    bool any = false;
    for (const auto& c : components) any = any || c.weight != Complex{};
    if (!any) throw ZeroFieldError("all plane-wave weights are zero");
    if (!(box > 0.0) || !(hbar > 0.0)) throw InvariantViolationError("box and hbar must be positive");
  }

  Complex value(const Vec3& r) const {
    Complex s{};
    for (const auto& c : components) s += c.weight * std::polar(1.0, dot(c.momentum, r) / hbar);
    return s;
  }

  double density(const Vec3& r) const { return std::norm(value(r)); }

  /// (sum |w_n|)^2 >= |psi|^2 everywhere.
  double density_bound() const {
    double s = 0.0;
    for (const auto& c : components) s += std::abs(c.weight);
    return s * s;
  }

  /// hbar grad(phase) = Re(conj(psi) sum_n w_n p_n e_n) / |psi|^2
  Vec3 guided_momentum(const Vec3& r) const {
    Complex psi{};
    std::array<Complex, 3> grad{};
    for (const auto& c : components) {
      const Complex e = c.weight * std::polar(1.0, dot(c.momentum, r) / hbar);
      psi += e;
      for (int k = 0; k < 3; ++k) grad[k] += c.momentum[k] * e;
    }
    const double rho = std::norm(psi);
    if (rho <= 0.0) throw NodeSingularityError("guided momentum undefined at a node of the field");
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = (std::conj(psi) * grad[k]).real() / rho;
    return p;
  }

  /// The two-wave state in the exp(+i p.r/hbar) convention (complex conjugate
  /// of its exp(i(omega t - k.r)) form), with branch momenta hbar k.
  static PlaneWaveSum from_two_wave(const TwoWaveState& s, double box) {
    const double hb = s.hbar();
    const double k = s.wavenumber();
    const double st = std::sin(s.theta0), ct = std::cos(s.theta0);
    PlaneWaveSum w;
    w.hbar = hb;
    w.box = box;
    w.components.push_back({std::polar(1.0 / std::numbers::sqrt2, -s.delta_phase),
                            Vec3{hb * k * st, 0.0, -hb * k * ct}});
    w.components.push_back({Complex(1.0 / std::numbers::sqrt2, 0.0), Vec3{hb * k * st, 0.0, hb * k * ct}});
    return w;
  }
};

/// Position drawn from |psi|^2 on the box by rejection against density_bound().
inline Vec3 sample_position(const PlaneWaveSum& w, Rng& rng) {
  const double bound = w.density_bound();
  for (;;) {
    const Vec3 r{rng.uniform(0.0, w.box), rng.uniform(0.0, w.box), rng.uniform(0.0, w.box)};
    if (rng.uniform() * bound < w.density(r)) return r;
  }
}

/// z drawn from a^2(z) on [0, window) by rejection (a^2 <= 2); x = y = 0.
inline Vec3 sample_position(const TwoWaveState& s, double window, Rng& rng) {
  for (;;) {
    const double z = rng.uniform(0.0, window);
    const double a = amplitude(s, z);
    if (rng.uniform() * 2.0 < a * a) return {0.0, 0.0, z};
  }
}

/// A closed-form wave attached to a specimen for guided coding.
struct GuidedWave {
  std::variant<TwoWaveState, PlaneWaveSum> wave;
  /// z-extent sampled for a two-wave state; 0 selects 8 fringe periods.
  double window = 0.0;

  double effective_window() const {
    if (const auto* s = std::get_if<TwoWaveState>(&wave))
      return window > 0.0 ? window : 8.0 * s->fringe_period();
    return std::get<PlaneWaveSum>(wave).box;
  }

  double hbar() const {
    if (const auto* s = std::get_if<TwoWaveState>(&wave)) return s->hbar();
    return std::get<PlaneWaveSum>(wave).hbar;
  }

  Vec3 sample_position(Rng& rng) const {
    if (const auto* s = std::get_if<TwoWaveState>(&wave))
      return dbb::sample_position(*s, effective_window(), rng);
    return dbb::sample_position(std::get<PlaneWaveSum>(wave), rng);
  }

  /// Guided momentum at (r, t); both closed forms are stationary in t.
  Vec3 momentum_at(const Vec3& r, double /*t*/) const {
    if (const auto* s = std::get_if<TwoWaveState>(&wave)) return guided_momentum(*s);
    return std::get<PlaneWaveSum>(wave).guided_momentum(r);
  }
};

// ---------------------------------------------------------------------------
// Two-layer trace experiment

struct ExpConfig {
  double lambda_sep = 1e-3;               // L1 -> L2 distance, m
  std::optional<double> kappa;            // m/rad; default_kick_scale() when unset
  double dd_half_width = std::numbers::pi / 2.0;  // phase jumps uniform on [-w, w]
  std::uint64_t n_trials = 100000;
  std::uint32_t elastic_interactions_per_trial = 0;
  std::uint32_t max_l1_ionizations = 2;   // 1 or 2 initial ionizations are kept
  double layer_thickness = 1e-9;          // L1 thickness, m
  double fringe_periods = 8.0;            // z-window at L1, in fringe periods
  std::size_t bins = 64;
  std::size_t fringe_bins_per_period = 16;
  std::vector<double> lambda_factors{1.0, 2.0, 4.0, 8.0};

  void validate() const {
    if (!(lambda_sep > 0.0)) throw InvalidArgumentError("lambda_sep must be positive");
    if (kappa && *kappa < 0.0) throw InvalidArgumentError("kappa must be non-negative");
    if (!(dd_half_width >= 0.0)) throw InvalidArgumentError("phase-jump half width must be >= 0");
    if (n_trials == 0) throw InvalidArgumentError("n_trials must be positive");
    if (max_l1_ionizations < 1 || max_l1_ionizations > 2)
      throw InvalidArgumentError("max_l1_ionizations must be 1 or 2");
    if (!(layer_thickness > 0.0 && layer_thickness < lambda_sep))
      throw InvalidArgumentError("layer thickness must lie in (0, lambda_sep)");
    if (!(fringe_periods > 0.0) || bins == 0 || fringe_bins_per_period == 0)
      throw InvalidArgumentError("histogram settings must be positive");
    for (double f : lambda_factors)
      if (!(f > 0.0)) throw InvalidArgumentError("lambda factors must be positive");
  }
};

struct TraceRecord {
  struct Ionization {
    Vec3 position;
    double time;
  };
  std::vector<Ionization> ionizations;  // L1 ionization(s), then the L2 entry
  Vec3 estimated_p{};
  std::vector<double> gammas;
  std::vector<double> kicks;
};

inline double kick_scale(const TwoWaveState& s, const ExpConfig& cfg) {
  return cfg.kappa ? *cfg.kappa : default_kick_scale(s);
}


namespace detail {
struct KickDraw {
  std::vector<double> l1_kicks;  // one per ionization inside L1
  std::vector<double> kicks;     // per segment: summed L1 kicks, then elastic kicks
  std::vector<double> spacings;
};

/// Kicks and segment lengths between L1 and a layer at distance lambda.
inline KickDraw draw_kicks(const ExpConfig& cfg, double kappa, double lambda, Rng& rng) {
  KickDraw d;
  const std::uint32_t n_l1 = cfg.max_l1_ionizations == 2 && rng.uniform() < 0.5 ? 2u : 1u;
  double first = 0.0;
  for (std::uint32_t l = 0; l < n_l1; ++l) {
    d.l1_kicks.push_back(ionization_kick(rng.uniform(-cfg.dd_half_width, cfg.dd_half_width), kappa));
    first += d.l1_kicks.back();
  }
  const std::uint32_t segments = cfg.elastic_interactions_per_trial + 1;
  d.kicks.push_back(first);
  for (std::uint32_t e = 0; e < cfg.elastic_interactions_per_trial; ++e)
    d.kicks.push_back(ionization_kick(rng.uniform(-cfg.dd_half_width, cfg.dd_half_width), kappa));
  d.spacings.assign(segments, lambda / static_cast<double>(segments));
  return d;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ma = mean_var(a), mb = mean_var(b);
  if (ma.variance == 0.0 || mb.variance == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma.mean) * (b[i] - mb.mean);
  return s / static_cast<double>(a.size()) / (ma.stddev() * mb.stddev());
}
}  // namespace detail

/// One trial: z drawn from the fringe density at L1, one or two ionizations
/// inside L1 with their kicks, guided flight along Ox to L2, and the
/// time-of-flight momentum estimate from the first L1 and the L2 registration.
inline TraceRecord run_exp_trial(const TwoWaveState& s, const ExpConfig& cfg, Rng& rng) {
  const double kappa = kick_scale(s, cfg);
  const double window = cfg.fringe_periods * s.fringe_period();
  const double vx = guided_velocity(s)[0];
  const Vec3 r1 = sample_position(s, window, rng);
  const auto draw = detail::draw_kicks(cfg, kappa, cfg.lambda_sep, rng);

  TraceRecord tr;
  tr.kicks = draw.kicks;
  tr.gammas = trace_angles(draw.kicks, draw.spacings);
  tr.ionizations.push_back({r1, 0.0});
  if (draw.l1_kicks.size() == 2)
    tr.ionizations.push_back({Vec3{r1[0] + cfg.layer_thickness, r1[1], r1[2] + draw.l1_kicks[0]},
                              cfg.layer_thickness / vx});
  double dz = 0.0;
  for (double k : draw.kicks) dz += k;
  const Vec3 r2{r1[0] + cfg.lambda_sep, r1[1], r1[2] + dz};
  const double t2 = cfg.lambda_sep / vx;
  tr.ionizations.push_back({r2, t2});
  tr.estimated_p = (s.M / t2) * (r2 - r1);
  return tr;
}

struct LambdaScalingRow {
  double lambda = 0.0;
  double mean_abs_gamma = 0.0;
};

struct ExpSummary {
  std::uint64_t n_trials = 0;
  double kappa = 0.0;
  Vec3 guided_p{};
  std::array<Vec3, 2> reference_spectrum{};
  double reference_angle = 0.0;   // angle of the branch momenta with Ox
  Vec3 mean_estimated_p{};
  double max_p_deviation = 0.0;   // max |p_est - guided_p| / |guided_p|
  double sigma_px = 0.0;
  double sigma_z = 0.0;           // spread of the L1 registration z
  double heisenberg_product = 0.0;
  double hbar_half = 0.0;
  double mean_gamma = 0.0;
  double gamma_stderr = 0.0;
  double mean_abs_gamma = 0.0;
  double max_abs_gamma = 0.0;
  Histogram angle_histogram;      // direction of estimated p with Ox
  Histogram px_histogram;
  Histogram fringe_histogram;     // z at L2
  double fringe_correlation = 0.0;  // Pearson(fringe mass, a^2 at bin centers)
  double reference_mass = 0.0;    // angle mass in the bins holding +-reference_angle
  std::vector<LambdaScalingRow> lambda_table;
  double lambda_slope = 0.0;      // log-log slope of mean |gamma| vs lambda; NaN if undefined
};

inline ExpSummary simulate_exp(const TwoWaveState& s, const ExpConfig& cfg, std::uint64_t seed,
                               const Executor& exec = serial_executor()) {
  s.validate();
  cfg.validate();
  const std::size_t n = cfg.n_trials;
  std::vector<double> px(n), pz(n), z1(n), z2(n), gamma(n), dev(n);
  const Vec3 p0 = guided_momentum(s);
  const double p0n = norm(p0);
  exec(n, [&](std::size_t i) {
    Rng rng(seed, i);
    const auto tr = run_exp_trial(s, cfg, rng);
    px[i] = tr.estimated_p[0];
    pz[i] = tr.estimated_p[2];
    z1[i] = tr.ionizations.front().position[2];
    z2[i] = tr.ionizations.back().position[2];
    gamma[i] = tr.gammas.back();
    dev[i] = p0n > 0.0 ? norm(tr.estimated_p - p0) / p0n : norm(tr.estimated_p);
  });

  ExpSummary out;
  out.n_trials = n;
  out.kappa = kick_scale(s, cfg);
  out.guided_p = p0;
  out.reference_spectrum = branch_momenta(s);
  out.reference_angle = std::atan2(out.reference_spectrum[0][2], out.reference_spectrum[0][0]);
  out.hbar_half = 0.5 * s.hbar();

  const auto mx = mean_var(px), mz = mean_var(pz), mz1 = mean_var(z1), mg = mean_var(gamma);
  out.mean_estimated_p = {mx.mean, 0.0, mz.mean};
  out.sigma_px = mx.stddev();
  out.sigma_z = mz1.stddev();
  out.heisenberg_product = out.sigma_px * out.sigma_z;
  out.mean_gamma = mg.mean;
  out.gamma_stderr = mg.stddev() / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.max_p_deviation = std::max(out.max_p_deviation, dev[i]);
    out.mean_abs_gamma += std::abs(gamma[i]) / static_cast<double>(n);
    out.max_abs_gamma = std::max(out.max_abs_gamma, std::abs(gamma[i]));
  }

  std::vector<double> angle(n);
  for (std::size_t i = 0; i < n; ++i) angle[i] = std::atan2(pz[i], px[i]);
  out.angle_histogram = Histogram::fit(angle, cfg.bins, {-out.reference_angle, out.reference_angle});
  {
    const auto m = out.angle_histogram.mass();
    const auto lo = out.angle_histogram.bin_of(-out.reference_angle);
    const auto hi = out.angle_histogram.bin_of(out.reference_angle);
    out.reference_mass = m[lo] + (hi != lo ? m[hi] : 0.0);
  }
  out.px_histogram = Histogram::fit(px, cfg.bins);

  const double window = cfg.fringe_periods * s.fringe_period();
  const auto fb = static_cast<std::size_t>(std::ceil(cfg.fringe_periods)) * cfg.fringe_bins_per_period;
  out.fringe_histogram = Histogram(0.0, window, fb);
  for (double z : z2) out.fringe_histogram.add(z);
  {
    std::vector<double> predicted(fb);
    for (std::size_t b = 0; b < fb; ++b) {
      const double a = amplitude(s, out.fringe_histogram.bin_center(b));
      predicted[b] = a * a;
    }
    out.fringe_correlation = detail::pearson(out.fringe_histogram.mass(), predicted);
  }

  // mean |gamma| against the L1 -> L2 distance, fresh streams per distance
  const double kappa = out.kappa;
  for (std::size_t f = 0; f < cfg.lambda_factors.size(); ++f) {
    const double lambda = cfg.lambda_factors[f] * cfg.lambda_sep;
    std::vector<double> g(n);
    const auto stream_seed = derive_seed(seed, 0x1a3bdaULL + f);
    exec(n, [&](std::size_t i) {
      Rng rng(stream_seed, i);
      const auto d = detail::draw_kicks(cfg, kappa, lambda, rng);
      g[i] = std::abs(trace_angles(d.kicks, d.spacings).back());
    });
    double m = 0.0;
    for (double x : g) m += x;
    out.lambda_table.push_back({lambda, m / static_cast<double>(n)});
  }
  out.lambda_slope = std::numeric_limits<double>::quiet_NaN();
  if (out.lambda_table.size() >= 2 &&
      std::all_of(out.lambda_table.begin(), out.lambda_table.end(),
                  [](const LambdaScalingRow& r) { return r.mean_abs_gamma > 0.0; })) {
    std::vector<double> lx, ly;
    for (const auto& r : out.lambda_table) {
      lx.push_back(std::log(r.lambda));
      ly.push_back(std::log(r.mean_abs_gamma));
    }
    const auto vx = mean_var(lx), vy = mean_var(ly);
    double cov = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) cov += (lx[i] - vx.mean) * (ly[i] - vy.mean);
    out.lambda_slope = cov / static_cast<double>(lx.size()) / vx.variance;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extended-Born comparison

struct SpectrumLine {
  Vec3 momentum{};
  double weight = 0.0;
};

/// Candidate spectrum of pairwise momentum sums p_j + p_k (j < k) weighted by
/// |w_j w_k|^2, normalized. A single component yields {p_1} with weight 1.
inline std::vector<SpectrumLine> pair_sum_spectrum(const PlaneWaveSum& w) {
  std::vector<SpectrumLine> out;
  const auto& c = w.components;
  if (c.size() == 1) return {{c[0].momentum, 1.0}};
  double total = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j)
    for (std::size_t k = j + 1; k < c.size(); ++k) {
      const double wt = std::norm(c[j].weight * c[k].weight);
      out.push_back({c[j].momentum + c[k].momentum, wt});
      total += wt;
    }
  if (total > 0.0)
    for (auto& l : out) l.weight /= total;
  return out;
}

/// Relative to the largest component momentum.
inline constexpr double kDeltaTolerance = 1e-9;

struct BornComparison {
  std::uint64_t n_samples = 0;
  Vec3 mean_guided_p{};
  Vec3 sigma_guided_p{};
  bool delta = false;  // every sample within kDeltaTolerance of the mean, on every axis
  std::array<Histogram, 3> guided_histogram;  // per axis
  std::vector<SpectrumLine> candidate_spectrum;
  std::array<std::vector<double>, 3> candidate_mass;  // on the guided binning
  std::array<double, 3> tv_per_axis{};
  double tv_distance = 0.0;                  // max over axes
};

/// Samples positions from |psi|^2, evaluates hbar grad(phase) at each, and
/// sets the guided-momentum histograms beside the pair-sum candidate spectrum.
inline BornComparison extended_born_check(const PlaneWaveSum& w, std::uint64_t n_samples,
                                          std::uint64_t seed, std::size_t bins = 64,
                                          const Executor& exec = serial_executor()) {
  w.validate();
  if (n_samples == 0) throw InvalidArgumentError("n_samples must be positive");
  const std::size_t n = n_samples;
  std::array<std::vector<double>, 3> p{std::vector<double>(n), std::vector<double>(n),
                                       std::vector<double>(n)};
  exec(n, [&](std::size_t i) {
    Rng rng(seed, i);
    const Vec3 g = w.guided_momentum(sample_position(w, rng));
    for (int k = 0; k < 3; ++k) p[k][i] = g[k];
  });

  BornComparison out;
  out.n_samples = n;
  out.candidate_spectrum = pair_sum_spectrum(w);
  double pscale = 0.0;
  for (const auto& c : w.components) pscale = std::max(pscale, norm(c.momentum));
  out.delta = true;
  for (int k = 0; k < 3; ++k) {
    const auto mv = mean_var(p[k]);
    out.mean_guided_p[k] = mv.mean;
    out.sigma_guided_p[k] = mv.stddev();
    for (double x : p[k]) out.delta = out.delta && std::abs(x - mv.mean) <= kDeltaTolerance * pscale;
    std::vector<double> cand;
    for (const auto& l : out.candidate_spectrum) cand.push_back(l.momentum[k]);
    out.guided_histogram[k] = Histogram::fit(p[k], bins, std::span<const double>(cand), pscale);
    out.candidate_mass[k].assign(bins, 0.0);
    for (const auto& l : out.candidate_spectrum)
      out.candidate_mass[k][out.guided_histogram[k].bin_of(l.momentum[k])] += l.weight;
    out.tv_per_axis[k] = total_variation(out.guided_histogram[k].mass(), out.candidate_mass[k]);
    out.tv_distance = std::max(out.tv_distance, out.tv_per_axis[k]);
  }
  return out;
}

}  // namespace qfact::dbb
