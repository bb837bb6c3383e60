#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qfact/cli/io.hpp"
#include "qfact/cli/scenario.hpp"
#include "qfact/executor.hpp"

namespace qfact::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;   // bad flags, schema errors
inline constexpr int kExitDomain = 3;  // run completed but the module rejected the data

struct OutputFile {
  std::string name;  // relative to the output directory
  std::string content;
};

struct CommandResult {
  std::vector<OutputFile> files;
  int exit_code = kExitOk;
  std::string message;

  void add(std::string name, std::string content) { files.push_back({std::move(name), std::move(content)}); }
  void add_json(std::string name, const json& j) { add(std::move(name), j.dump(2) + "\n"); }
};

struct RunManifest {
  struct Entry {
    std::string file;
    std::uint64_t bytes = 0;
    std::uint64_t checksum = 0;  // FNV-1a 64
  };
  std::string command;
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int exit_code = 0;
  std::string message;
  std::vector<Entry> outputs;
  double wall_clock_seconds = 0.0;  // the only field that varies between identical runs

  json to_json() const {
    json outs = json::array();
    for (const auto& e : outputs) outs.push_back({{"file", e.file}, {"bytes", e.bytes}, {"fnv1a64", hex64(e.checksum)}});
    return {{"command", command},        {"scenario_hash", hex64(scenario_hash)},
            {"seed", seed},              {"workers", workers},
            {"exit_code", exit_code},    {"message", message},
            {"outputs", outs},
            {"wall_clock_seconds", wall_clock_seconds}};
  }
};

namespace detail {

inline json vec_json(const dbb::Vec3& v) { return json::array({num(v[0]), num(v[1]), num(v[2])}); }

inline json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline CommandResult cmd_stability(const Scenario& sc, std::uint64_t seed, const Executor& exec) {
  const auto& s = *sc.stability;
  finprob::FactualLaw law;
  if (s.law) {
    law = *s.law;
  } else {
    const auto& obs = sc.observable(s.observable);
    law = finprob::FactualLaw::for_observable(obs.name(), obs.dim(), s.params);
    std::uint64_t first = 0;
    for (const auto& seg : s.segments) {
      genesis::extend_successions(law, genesis::PreparedGeneration(sc.generation(seg.generation)), obs, seg.n, seed,
                                  first, exec);
      first += seg.n;
    }
  }
  CommandResult r;
  json verdict;
  try {
    verdict = verdict_to_json(finprob::check_convergence(law));
    verdict["status"] = "ok";
  } catch (const InsufficientDataError& e) {
    verdict = {{"status", "insufficient-data"}, {"error", e.what()}};
    r.exit_code = kExitDomain;
    r.message = e.what();
  }
  verdict["params"] = law_params_to_json(law.params());
  verdict["n_total"] = law.n_total();
  r.add_json("verdict.json", verdict);
  r.add_json("law.json", law_to_json(law));
  r.add("law.csv", law_to_csv(law));
  return r;
}

inline CommandResult cmd_tree(const Scenario& sc, std::uint64_t seed, const Executor& exec) {
  const auto& t = *sc.tree;
  std::vector<hilbert::ObservableSpec> obs;
  for (const auto& o : t.observables) obs.push_back(sc.observable(o));
  const auto& gen = sc.generation(t.generation);
  auto tree = probtree::build_tree(gen, obs, t.n, t.params, seed, exec);

  CommandResult r;
  json branches = json::array();
  for (const auto& b : tree.branches) {
    json laws = json::object();
    for (const auto& [name, law] : b.laws) {
      const std::string stem = "laws/" + safe_name(name);
      r.add_json(stem + ".json", law_to_json(law));
      r.add(stem + ".csv", law_to_csv(law));
      laws[name] = {{"json", stem + ".json"}, {"csv", stem + ".csv"}, {"frequencies", finprob::frequencies(law)}};
    }
    branches.push_back({{"members", b.group.members}, {"laws", laws}});
  }
  json out = {{"trunk", tree.trunk},
              {"trunk_only", tree.trunk_only},
              {"guided", tree.guided},
              {"n_per_observable", t.n},
              {"params", law_params_to_json(t.params)},
              {"branches", branches}};
  if (t.meta_reference) {
    // expansion of the recipe's hidden state on the reference basis
    const auto& ref = sc.observable(*t.meta_reference);
    reconstruct::ExpansionSet e;
    e.reference_observable = ref.name();
    e.set(ref.name(), ref.eigenbasis().adjoint() * genesis::resolve_state(gen).amplitudes());
    std::vector<hilbert::TransformMatrix> taus;
    for (const auto& o : t.observables)
      if (o != ref.name()) taus.push_back(sc.transform(ref.name(), o));
    tree.mpc = probtree::meta_correlation(tree, e, taus, t.flag_threshold);
    json pairs = json::array();
    for (const auto& p : tree.mpc.pairs)
      pairs.push_back({{"a", p.a},
                       {"b", p.b},
                       {"residual", p.residual},
                       {"flagged", p.flagged},
                       {"predicted", doubles(p.predicted)},
                       {"measured", doubles(p.measured)}});
    out["meta_correlation"] = {{"reference", ref.name()},
                               {"flag_threshold", tree.mpc.flag_threshold},
                               {"max_residual", tree.mpc.max_residual()},
                               {"pairs", pairs}};
  }
  r.add_json("tree.json", out);
  return r;
}

inline CommandResult cmd_reconstruct(const Scenario& sc, std::uint64_t seed, const Executor& exec) {
  const auto& rc = *sc.reconstruct;
  std::vector<std::string> all{rc.reference};
  all.insert(all.end(), rc.partners.begin(), rc.partners.end());
  all.insert(all.end(), rc.heldout.begin(), rc.heldout.end());

  std::map<std::string, std::vector<double>> laws = rc.laws;
  std::map<std::string, std::uint64_t> trials = rc.trials;
  std::optional<hilbert::OracleState> hidden;
  if (rc.generation) {
    const auto& gen = sc.generation(*rc.generation);
    hidden = genesis::resolve_state(gen);
    for (const auto& name : all) {
      const auto& o = sc.observable(name);
      if (rc.n) {
        finprob::LawParams p;
        p.block_size = *rc.n;
        const auto law = genesis::run_successions(gen, o, *rc.n, p, probtree::law_seed(seed, name), exec);
        laws[name] = finprob::frequencies(law);
        trials[name] = *rc.n;
      } else {
        laws[name] = hilbert::born_law(*hidden, o);
      }
    }
  }
  auto opt_trials = [&](const std::string& n) -> std::optional<std::uint64_t> {
    if (auto it = trials.find(n); it != trials.end()) return it->second;
    return std::nullopt;
  };

  std::vector<reconstruct::PartnerLaw> partners;
  std::vector<hilbert::TransformMatrix> taus;
  for (const auto& b : rc.partners) {
    taus.push_back(sc.transform(rc.reference, b));
    partners.push_back({laws.at(b), taus.back(), opt_trials(b)});
  }
  auto cfg = rc.retrieval;
  if (!rc.retrieval_seed_given) cfg.seed = derive_seed(seed, fnv1a(std::string("retrieval")));
  const auto res = reconstruct::retrieve_phases_unchecked(laws.at(rc.reference), partners, cfg,
                                                          opt_trials(rc.reference), exec);
  const auto& rep = res.report;

  CommandResult r;
  json report = {{"reference", rc.reference},
                 {"partners", rc.partners},
                 {"residual", rep.residual},
                 {"tolerance", rep.tolerance},
                 {"converged", rep.converged},
                 {"ambiguity", reconstruct::to_string(rep.ambiguity_flag)},
                 {"restarts_used", rep.restarts_used},
                 {"iterations", rep.iterations},
                 {"conjugate_residual", rep.conjugate_residual},
                 {"reference_phases", doubles(res.phases)},
                 {"source", rc.generation ? (rc.n ? "sampled" : "exact") : "given"}};
  if (!rep.converged) {
    report["status"] = "inconsistent-laws";
    r.exit_code = kExitDomain;
    r.message = "no phase assignment reproduces the partner laws (residual " + fmt(rep.residual) + ")";
    r.add_json("report.json", report);
    return r;
  }
  report["status"] = "ok";

  for (const auto& c : rc.heldout) taus.push_back(sc.transform(rc.reference, c));
  const auto e = reconstruct::assemble_equivalent(rc.reference, laws.at(rc.reference), res.phases, taus);
  std::map<std::string, std::vector<double>> linked;
  for (const auto& b : rc.partners) linked[b] = laws.at(b);
  linked[rc.reference] = laws.at(rc.reference);
  report["max_amplitude_mismatch"] = reconstruct::max_amplitude_mismatch(e, linked);

  json held = json::array();
  double worst = 0.0;
  for (const auto& c : rc.heldout) {
    const auto pred = reconstruct::predict_heldout(e, sc.transform(rc.reference, c));
    double dev = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) dev = std::max(dev, std::abs(pred[k] - laws.at(c)[k]));
    worst = std::max(worst, dev);
    held.push_back({{"observable", c}, {"predicted", doubles(pred)}, {"measured", doubles(laws.at(c))}, {"max_deviation", dev}});
  }
  report["heldout"] = held;
  report["heldout_max_deviation"] = worst;
  if (hidden) {
    const auto& ref = sc.observable(rc.reference);
    const hilbert::CVector psi = ref.eigenbasis() * e.reference_coefficients();
    report["oracle_fidelity"] = std::norm(hidden->amplitudes().dot(psi));
  }

  json obs = json::object();
  for (const auto& [name, a] : e.amplitudes) obs[name] = {{"amplitudes", doubles(a)}, {"phases", doubles(e.phases.at(name))}};
  r.add_json("expansion.json", {{"reference", e.reference_observable}, {"observables", obs}});
  r.add_json("report.json", report);
  return r;
}

inline CommandResult cmd_exp(const Scenario& sc, std::uint64_t seed, const Executor& exec) {
  const auto& ex = *sc.exp;
  const auto s = dbb::simulate_exp(ex.state, ex.config, seed, exec);
  CommandResult r;
  json lam = json::array();
  Csv lcsv({"lambda", "mean_abs_gamma"});
  for (const auto& row : s.lambda_table) {
    lam.push_back({{"lambda", row.lambda}, {"mean_abs_gamma", num(row.mean_abs_gamma)}});
    lcsv.row(row.lambda, row.mean_abs_gamma);
  }
  const json summary = {
      {"n_trials", s.n_trials},
      {"kappa", s.kappa},
      {"guided_momentum", vec_json(s.guided_p)},
      {"reference_spectrum", json::array({vec_json(s.reference_spectrum[0]), vec_json(s.reference_spectrum[1])})},
      {"reference_angle", s.reference_angle},
      {"mean_estimated_momentum", vec_json(s.mean_estimated_p)},
      {"max_relative_momentum_deviation", s.max_p_deviation},
      {"sigma_px", s.sigma_px},
      {"sigma_z", s.sigma_z},
      {"heisenberg_product", s.heisenberg_product},
      {"hbar_half", s.hbar_half},
      {"heisenberg_product_below_hbar_half", s.heisenberg_product < s.hbar_half},
      {"mean_gamma", s.mean_gamma},
      {"gamma_stderr", s.gamma_stderr},
      {"mean_abs_gamma", s.mean_abs_gamma},
      {"max_abs_gamma", s.max_abs_gamma},
      {"fringe_correlation", s.fringe_correlation},
      {"reference_mass", s.reference_mass},
      {"lambda_table", lam},
      {"lambda_slope", num(s.lambda_slope)},
      {"histograms", {"exp_angle.csv", "exp_px.csv", "exp_fringe.csv"}}};
  r.add_json("exp_summary.json", summary);
  r.add("exp_angle.csv", histogram_csv(s.angle_histogram));
  r.add("exp_px.csv", histogram_csv(s.px_histogram));
  {
    std::vector<double> pred(s.fringe_histogram.bins());
    double tot = 0.0;
    for (std::size_t b = 0; b < pred.size(); ++b) {
      const double a = dbb::amplitude(ex.state, s.fringe_histogram.bin_center(b));
      tot += pred[b] = a * a;
    }
    for (auto& p : pred) p /= tot;
    r.add("exp_fringe.csv", histogram_csv(s.fringe_histogram, {{"predicted_mass", pred}}));
  }
  r.add("exp_lambda_scaling.csv", lcsv.str());
  return r;
}

inline CommandResult cmd_borncheck(const Scenario& sc, std::uint64_t seed, const Executor& exec) {
  const auto& b = *sc.borncheck;
  const auto c = dbb::extended_born_check(b.wave, b.n_samples, seed, b.bins, exec);
  CommandResult r;
  static const char* axes[3] = {"px", "py", "pz"};
  json spec = json::array();
  Csv scsv({"px", "py", "pz", "weight"});
  for (const auto& l : c.candidate_spectrum) {
    spec.push_back({{"momentum", vec_json(l.momentum)}, {"weight", l.weight}});
    scsv.row(l.momentum[0], l.momentum[1], l.momentum[2], l.weight);
  }
  json tv = json::object();
  for (int k = 0; k < 3; ++k) {
    tv[axes[k]] = c.tv_per_axis[k];
    r.add(std::string("born_") + axes[k] + ".csv",
          histogram_csv(c.guided_histogram[k], {{"candidate_mass", c.candidate_mass[k]}}));
  }
  r.add("born_candidate_spectrum.csv", scsv.str());
  r.add_json("born_summary.json", {{"n_samples", c.n_samples},
                                   {"mean_guided_momentum", vec_json(c.mean_guided_p)},
                                   {"sigma_guided_momentum", vec_json(c.sigma_guided_p)},
                                   {"delta", c.delta},
                                   {"candidate_spectrum", spec},
                                   {"tv_per_axis", tv},
                                   {"tv_distance", c.tv_distance}});
  return r;
}

}  // namespace detail

/// Runs one pipeline in memory. The seed argument overrides the scenario's.
inline CommandResult run_command(const std::string& command, const Scenario& sc, std::uint64_t seed,
                                 const Executor& exec = serial_executor()) {
  if (sc.command && *sc.command != command)
    throw SchemaError("scenario is written for '" + *sc.command + "', not '" + command + "'");
  auto need = [&](bool present) {
    if (!present) throw SchemaError("scenario has no '" + command + "' section");
  };
  if (command == "stability") return need(sc.stability.has_value()), detail::cmd_stability(sc, seed, exec);
  if (command == "tree") return need(sc.tree.has_value()), detail::cmd_tree(sc, seed, exec);
  if (command == "reconstruct") return need(sc.reconstruct.has_value()), detail::cmd_reconstruct(sc, seed, exec);
  if (command == "exp") return need(sc.exp.has_value()), detail::cmd_exp(sc, seed, exec);
  if (command == "borncheck") return need(sc.borncheck.has_value()), detail::cmd_borncheck(sc, seed, exec);
  throw SchemaError("unknown command '" + command + "'");
}

inline std::uint64_t resolve_seed(const Scenario& sc, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (sc.seed) return *sc.seed;
  throw SchemaError("no seed: set 'seed' in the scenario or pass --seed");
}

/// Writes every output file and manifest.json under `dir`.
inline RunManifest write_outputs(const std::filesystem::path& dir, const CommandResult& r, RunManifest m) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  m.exit_code = r.exit_code;
  m.message = r.message;
  for (const auto& f : r.files) {
    const fs::path p = dir / f.name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    m.outputs.push_back({f.name, f.content.size(), fnv1a(f.content)});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.to_json().dump(2) << "\n";
  return m;
}

/// Load, run, write: the whole command-line pipeline minus argument parsing.
inline RunManifest execute(const std::string& command, const std::filesystem::path& scenario_path,
                           std::optional<std::uint64_t> seed_override, std::optional<std::filesystem::path> out_dir,
                           unsigned workers) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sc = load_scenario(scenario_path);
  const auto seed = resolve_seed(sc, seed_override);
  std::filesystem::path dir;
  if (out_dir) dir = *out_dir;
  else if (sc.output) dir = scenario_path.parent_path() / *sc.output;
  else throw SchemaError("no output directory: set 'output' in the scenario or pass --out");
  const auto result = run_command(command, sc, seed, thread_executor(workers));
  RunManifest m;
  m.command = command;
  m.scenario_hash = sc.hash;
  m.seed = seed;
  m.workers = workers;
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return write_outputs(dir, result, m);
}

}  // namespace qfact::cli
