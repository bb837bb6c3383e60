// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qfact/cli/commands.hpp"
#include "qfact/dbb.hpp"
#include "qfact/genesis.hpp"
#include "qfact/reconstruct.hpp"

using namespace qfact;
using hilbert::CMatrix;
using hilbert::Complex;
using hilbert::ObservableSpec;
using hilbert::OracleState;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f2s(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double max_dev(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k] - y[k]));
  return m;
}

double hist_sum(const Histogram& h) {
  const auto m = h.mass();
  return std::accumulate(m.begin(), m.end(), 0.0);
}

std::vector<oracle::cd> to_std(const hilbert::CVector& v) {
  std::vector<oracle::cd> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

oracle::Mat to_std(const CMatrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), std::vector<oracle::cd>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[std::size_t(r)][std::size_t(c)] = m(r, c);
  return out;
}

OracleState coin_state(double p0) {
  hilbert::CVector v(2);
  v << std::sqrt(p0), std::sqrt(1.0 - p0);
  return OracleState(v);
}

// 1. Born-sampling fidelity
Outcome born_sampling() {
  Rng rng(20260101);
  const std::uint64_t n = 100000;
  int outcomes = 0, inside = 0;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t d = 2 + static_cast<std::size_t>(k) % 7;
    const auto psi = hilbert::random_state(d, rng);
    const auto obs = hilbert::random_observable("A", d, rng);
    const auto g = genesis::GenerationOp::simple("G", psi);
    const auto f = finprob::frequencies(genesis::run_successions(*g, obs, n, {}, 1000 + k));
    const auto expected = oracle::born(to_std(psi.amplitudes()), to_std(obs.eigenbasis()));
    for (std::size_t j = 0; j < d; ++j) {
      const double sigma = oracle::binom_sigma(expected[j], double(n));
      const double z = sigma > 0 ? std::abs(f[j] - expected[j]) / sigma : (f[j] == expected[j] ? 0.0 : INFINITY);
      worst = std::max(worst, z);
      ++outcomes;
      inside += z <= 3.0;
    }
  }
  return {inside == outcomes,
          std::to_string(inside) + "/" + std::to_string(outcomes) + " outcomes within 3 sigma, worst " + f2s(worst) +
              " sigma"};
}

// 2. Stability detector
Outcome stability_detector() {
  const auto obs = ObservableSpec::standard("A", 2);
  const auto fair = genesis::GenerationOp::simple("fair", coin_state(0.5));
  const auto lo = genesis::PreparedGeneration(*genesis::GenerationOp::simple("lo", coin_state(0.3)));
  const auto hi = genesis::PreparedGeneration(*genesis::GenerationOp::simple("hi", coin_state(0.7)));
  finprob::LawParams p;  // eps 0.02, delta 0.05, block 10^4
  int stable = 0, unstable = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    stable += finprob::check_convergence(genesis::run_successions(*fair, obs, 1000000, p, rep)).stable;
    auto drift = finprob::FactualLaw::for_observable("A", 2, p);
    genesis::extend_successions(drift, lo, obs, 500000, 5000 + rep, 0);
    genesis::extend_successions(drift, hi, obs, 500000, 5000 + rep, 500000);
    unstable += !finprob::check_convergence(drift).stable;
  }
  return {stable >= 99 && unstable == 100,
          "fair stable " + std::to_string(stable) + "/100, drift unstable " + std::to_string(unstable) + "/100"};
}

struct Fixture {
  OracleState psi;
  ObservableSpec a, b0, b1, c;
};

Fixture random_fixture(std::size_t d, Rng& rng) {
  return {hilbert::random_state(d, rng), hilbert::random_observable("A", d, rng),
          hilbert::random_observable("B0", d, rng), hilbert::random_observable("B1", d, rng),
          hilbert::random_observable("C", d, rng)};
}

// 3. Reconstruction round trip
Outcome reconstruction_round_trip() {
  using namespace reconstruct;
  Rng rng(31);
  int exact_ok = 0, sampled_ok = 0;
  double worst_exact = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto f = random_fixture(2 + static_cast<std::size_t>(k) % 3, rng);
    const auto tau_c = hilbert::TransformMatrix::between(f.a, f.c);
    const auto truth = hilbert::born_law(f.psi, f.c);

    const auto law_a = hilbert::born_law(f.psi, f.a);
    try {
      const auto r = retrieve_phases(law_a, {{hilbert::born_law(f.psi, f.b0), hilbert::TransformMatrix::between(f.a, f.b0), std::nullopt},
                                             {hilbert::born_law(f.psi, f.b1), hilbert::TransformMatrix::between(f.a, f.b1), std::nullopt}});
      const double dev = max_dev(predict_heldout(assemble_equivalent("A", law_a, r.phases, {}), tau_c), truth);
      worst_exact = std::max(worst_exact, dev);
      exact_ok += dev < 1e-6;
    } catch (const InconsistentLawsError&) {
      worst_exact = INFINITY;
    }

    const auto g = genesis::GenerationOp::simple("G", f.psi);
    const auto la = genesis::run_successions(*g, f.a, 1000000, {}, probtree::law_seed(k, "A"));
    std::map<std::string, finprob::FactualLaw> others;
    std::map<std::string, hilbert::TransformMatrix> taus;
    for (const auto* b : {&f.b0, &f.b1}) {
      others.emplace(b->name(), genesis::run_successions(*g, *b, 1000000, {}, probtree::law_seed(k, b->name())));
      taus.emplace(b->name(), hilbert::TransformMatrix::between(f.a, *b));
    }
    try {
      const auto r = retrieve_phases(la, others, taus);
      const auto e = assemble_equivalent("A", finprob::frequencies(la), r.phases, {});
      sampled_ok += max_dev(predict_heldout(e, tau_c), truth) < 0.02;
    } catch (const InconsistentLawsError&) {
    }
  }
  return {exact_ok == 100 && sampled_ok >= 95,
          "exact " + std::to_string(exact_ok) + "/100 (worst " + f2s(worst_exact) + "), sampled n=1e6 " +
              std::to_string(sampled_ok) + "/100 below 0.02"};
}

// 4. Consistency residual
Outcome consistency_residual() {
  using namespace reconstruct;
  Rng rng(41);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto f = random_fixture(2 + static_cast<std::size_t>(k) % 3, rng);
    const auto r = retrieve_phases(hilbert::born_law(f.psi, f.a),
                                   {{hilbert::born_law(f.psi, f.b0), hilbert::TransformMatrix::between(f.a, f.b0), std::nullopt},
                                    {hilbert::born_law(f.psi, f.b1), hilbert::TransformMatrix::between(f.a, f.b1), std::nullopt}});
    worst = std::max(worst, r.report.residual);
  }
  const std::vector<PartnerLaw> bad{{{0.5, 0.5}, hilbert::TransformMatrix("A", "B", CMatrix::Identity(2, 2)), std::nullopt}};
  const double residual = ConsistencyResidual(amplitudes_from_law(std::vector<double>{1.0, 0.0}), bad).value({0.0, 0.0});
  bool raised = false;
  try {
    retrieve_phases({1.0, 0.0}, bad);
  } catch (const InconsistentLawsError&) {
    raised = true;
  }
  return {worst < 1e-10 && std::abs(residual - 0.5) < 1e-15 && raised,
          "consistent max residual " + f2s(worst) + ", non-quantum residual " + f2s(residual) +
              (raised ? ", inconsistent-laws raised" : ", NOT raised")};
}

// 5. Interference inequality
Outcome interference() {
  // |0> and |1> composed with equal weights, measured on the balanced basis
  const ObservableSpec obs("B", {-1.0, 1.0}, hilbert::balanced_basis(0.0));
  const auto g1 = genesis::GenerationOp::simple("G1", OracleState::basis(2, 0));
  const auto g2 = genesis::GenerationOp::simple("G2", OracleState::basis(2, 1));
  const Complex l1 = 1.0, l2 = 1.0;
  const auto composite = genesis::GenerationOp::composed("G12", {l1, l2}, {g1, g2});
  const auto pc = hilbert::born_law(genesis::resolve_state(*composite), obs);
  const auto p1 = hilbert::born_law(genesis::resolve_state(*g1), obs);
  const auto p2 = hilbert::born_law(genesis::resolve_state(*g2), obs);
  const double w1 = std::norm(l1) / (std::norm(l1) + std::norm(l2));
  double gap = 0.0;
  for (std::size_t j = 0; j < 2; ++j) gap = std::max(gap, std::abs(pc[j] - (w1 * p1[j] + (1 - w1) * p2[j])));

  Rng rng(51);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t d = 2 + static_cast<std::size_t>(k) % 4;
    const auto a = hilbert::random_state(d, rng), b = hilbert::random_state(d, rng);
    const auto o = hilbert::random_observable("A", d, rng);
    const Complex m1(rng.normal(), rng.normal()), m2(rng.normal(), rng.normal());
    const auto c1 = to_std(hilbert::CVector(o.eigenbasis().adjoint() * a.amplitudes()));
    const auto c2 = to_std(hilbert::CVector(o.eigenbasis().adjoint() * b.amplitudes()));
    const auto hand = oracle::four_term(m1, c1, m2, c2);
    const auto lib = hilbert::interference_expansion(m1, a, m2, b, o).normalized_total();
    const auto born = hilbert::born_law(hilbert::compose_superposition({m1, m2}, {a, b}), o);
    worst = std::max({worst, max_dev(lib, born), max_dev(hand, born)});
  }
  return {gap > 0.1 && worst < 1e-12,
          "composite vs mixture gap " + f2s(gap) + ", four-term vs Born max deviation " + f2s(worst)};
}

// 6. dBB closed forms
Outcome dbb_closed_forms() {
  using namespace dbb;
  double max_force = 0.0, max_v_rel = 0.0, max_line = 0.0;
  Rng rng(61);
  for (double theta : {0.3, 0.7, 1.0, 1.3}) {
    const auto s = TwoWaveState::for_particle(kNeutronMass, 2200.0, theta, rng.uniform(0.0, 6.0));
    for (int i = 0; i < 2500; ++i) max_force = std::max(max_force, std::abs(quantum_force(s, rng.uniform(0.0, 1e-8))));
    // v_x from the numerical phase: -c^2 (d phi/dx) / (d phi/dt)
    const Vec3 r{1.3e-11, 0.0, 0.21 * s.fringe_period()};
    const double ht = 1e-27, hx = 1e-12;
    const double dphidt = std::arg(s.wave(r, ht) / s.wave(r, -ht)) / (2 * ht);
    Vec3 a = r, b = r;
    a[0] += hx;
    b[0] -= hx;
    const double dphidx = std::arg(s.wave(a, 0.0) / s.wave(b, 0.0)) / (2 * hx);
    const double vx = -s.c * s.c / dphidt * dphidx;
    max_v_rel = std::max(max_v_rel, std::abs(vx - guided_velocity(s)[0]) / std::abs(vx));
    // zero-force trajectories from several heights
    const double v0 = guided_velocity(s)[0];
    for (double z0 : {1e-11, 0.37 * s.fringe_period(), 2.9 * s.fringe_period()}) {
      const Vec3 r0{1e-6, 0.0, z0};
      const double T = 1e-3 / v0;
      const auto tr = integrate_trajectory(s, r0, T, 2000);
      for (const auto& pt : tr) {
        const double x_exact = r0[0] + v0 * pt.t;
        max_line = std::max({max_line, std::abs(pt.r[0] - x_exact) / std::abs(x_exact), std::abs(pt.r[2] - z0),
                             std::abs(pt.r[1])});
      }
    }
  }
  return {max_force < 1e-10 && max_v_rel < 1e-6 && max_line < 1e-12,
          "max |F| " + f2s(max_force) + ", velocity vs finite difference " + f2s(max_v_rel) +
              " relative, straight-line error " + f2s(max_line)};
}

// 7. Trace scaling
Outcome trace_scaling() {
  dbb::ExpConfig cfg;
  cfg.n_trials = 100000;
  const auto r = dbb::simulate_exp(dbb::TwoWaveState::neutron_default(), cfg, 71);
  std::string rows;
  for (const auto& row : r.lambda_table) rows += " " + f2s(row.mean_abs_gamma);
  return {std::abs(r.lambda_slope + 1.0) <= 0.1 && r.lambda_table.size() == 4,
          "slope " + f2s(r.lambda_slope) + ", mean |gamma| at 1,2,4,8 lambda0:" + rows};
}

// 8. Heisenberg product
Outcome heisenberg() {
  dbb::ExpConfig cfg;
  cfg.n_trials = 100000;
  const auto r = dbb::simulate_exp(dbb::TwoWaveState::neutron_default(), cfg, 81);
  return {r.sigma_px == 0.0 && r.sigma_z > 0.0 && r.heisenberg_product < r.hbar_half,
          "sigma(px) " + f2s(r.sigma_px) + ", sigma(z) " + f2s(r.sigma_z) + " m, product " +
              f2s(r.heisenberg_product) + " < hbar/2 " + f2s(r.hbar_half)};
}

// 9. Extended Born check
Outcome born_check() {
  using namespace dbb;
  constexpr double pi = std::numbers::pi;
  bool ok = true;
  double worst_sum = 0.0;
  auto sums = [&](const BornComparison& r) {
    for (const auto& h : r.guided_histogram) worst_sum = std::max(worst_sum, std::abs(hist_sum(h) - 1.0));
  };

  PlaneWaveSum single;
  single.components = {{{0.6, 0.8}, {2 * pi, -4 * pi, 0.0}}};
  const auto r1 = extended_born_check(single, 5000, 91);
  sums(r1);
  double d1 = 0.0;
  for (int k = 0; k < 3; ++k) d1 = std::max(d1, std::abs(r1.mean_guided_p[k] - single.components[0].momentum[k]));
  ok = ok && r1.delta && d1 < 1e-9 * 4 * pi;

  const auto s = TwoWaveState::neutron_default();
  const auto r2 = extended_born_check(PlaneWaveSum::from_two_wave(s, 8.0 * s.fringe_period()), 20000, 92);
  sums(r2);
  const auto p0 = guided_momentum(s);
  const double d2 = norm(r2.mean_guided_p - p0) / norm(p0);
  ok = ok && r2.delta && d2 < 1e-9;

  const std::vector<oracle::PlaneWave> waves{
      {{1.0, 0.0}, {2 * pi, 0.0, 0.0}}, {{0.5, 0.2}, {0.0, 4 * pi, 0.0}}, {{0.3, -0.1}, {-2 * pi, 2 * pi, 2 * pi}}};
  PlaneWaveSum unequal;
  for (const auto& w : waves) unequal.components.push_back({w.w, {w.p[0], w.p[1], w.p[2]}});
  const auto r3 = extended_born_check(unequal, 200000, 93);
  sums(r3);
  const auto q = oracle::quadrature_mean_momentum(waves, 1.0, 1.0, 48);
  const double scale = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
  double d3 = 0.0;
  for (int k = 0; k < 3; ++k) d3 = std::max(d3, std::abs(r3.mean_guided_p[k] - q[k]) / scale);
  ok = ok && d3 < 0.01 && worst_sum < 1e-9;

  return {ok, "single-wave delta " + std::string(r1.delta ? "yes" : "no") + ", two-wave delta at p0 " +
                  std::string(r2.delta ? "yes" : "no") + " (rel " + f2s(d2) + "), unequal vs quadrature " + f2s(d3) +
                  " relative, histogram sum error " + f2s(worst_sum) + ", reported TV: single " +
                  f2s(r1.tv_distance) + ", equal-weight " + f2s(r2.tv_distance) + ", unequal " + f2s(r3.tv_distance)};
}

// 10. Determinism across worker counts
std::map<std::string, std::string> tree_of(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[fs::relative(e.path(), dir).string()] = cli::read_file(e.path());
  return out;
}

Outcome determinism() {
  const auto tmp = fs::temp_directory_path() / "qfact_acceptance";
  int scenarios = 0, identical = 0;
  std::string broken;
  for (const auto& e : fs::directory_iterator(QFACT_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    const auto sc = cli::load_scenario(e.path());
    const auto name = e.path().stem().string();
    ++scenarios;
    fs::remove_all(tmp);
    const auto m1 = cli::execute(*sc.command, e.path(), std::nullopt, tmp / "w1", 1);
    const auto m4 = cli::execute(*sc.command, e.path(), std::nullopt, tmp / "w4", 4);
    const auto again = cli::execute(*sc.command, e.path(), std::nullopt, tmp / "w1b", 1);
    const auto t1 = tree_of(tmp / "w1");
    bool same = !t1.empty() && t1 == tree_of(tmp / "w4") && t1 == tree_of(tmp / "w1b") &&
                m1.outputs.size() == m4.outputs.size() && m1.exit_code == m4.exit_code;
    for (std::size_t i = 0; same && i < m1.outputs.size(); ++i)
      same = m1.outputs[i].checksum == m4.outputs[i].checksum && m1.outputs[i].checksum == again.outputs[i].checksum;
    identical += same;
    if (!same) broken += " " + name;
  }
  fs::remove_all(tmp);
  return {scenarios > 0 && identical == scenarios,
          std::to_string(identical) + "/" + std::to_string(scenarios) +
              " scenarios byte-identical for workers 1, 4 and a repeat" + (broken.empty() ? "" : "; differing:" + broken)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "Born-sampling fidelity", 30.0, born_sampling},
      {2, "stability detector", 20.0, stability_detector},
      {3, "reconstruction round trip", 300.0, reconstruction_round_trip},
      {4, "consistency residual", 1.0, consistency_residual},
      {5, "interference inequality", 0.0, interference},
      {6, "dBB closed forms", 0.0, dbb_closed_forms},
      {7, "trace scaling", 60.0, trace_scaling},
      {8, "Heisenberg product", 0.0, heisenberg},
      {9, "extended Born check", 0.0, born_check},
      {10, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_seconds == 0.0 || secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %2d  %-26s %7.2fs%s  %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                in_time ? "" : " (over limit)", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
