#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qfact/cli/io.hpp"
#include "qfact/dbb.hpp"
#include "qfact/genesis.hpp"
#include "qfact/probtree.hpp"
#include "qfact/reconstruct.hpp"

namespace qfact::cli {

struct StabilitySection {
  struct Segment {
    std::string generation;
    std::uint64_t n = 0;
  };
  std::optional<finprob::FactualLaw> law;  // given law, or
  std::string observable;                  // a sampling recipe: segments run back to back
  std::vector<Segment> segments;
  finprob::LawParams params;
};

struct TreeSection {
  std::string generation;
  std::vector<std::string> observables;
  std::uint64_t n = 0;
  finprob::LawParams params;
  std::optional<std::string> meta_reference;  // expansion of the hidden state on this basis
  double flag_threshold = probtree::kDefaultFlagThreshold;
};

struct ReconstructSection {
  std::string reference;
  std::vector<std::string> partners;
  std::vector<std::string> heldout;
  std::optional<std::string> generation;  // laws from this recipe ...
  std::optional<std::uint64_t> n;         // ... sampled when set, exact Born laws otherwise
  std::map<std::string, std::vector<double>> laws;  // or given laws
  std::map<std::string, std::uint64_t> trials;      // sample sizes of given laws
  reconstruct::RetrievalConfig retrieval;
  bool retrieval_seed_given = false;
};

struct ExpSection {
  dbb::TwoWaveState state;
  dbb::ExpConfig config;
};

struct BornSection {
  dbb::PlaneWaveSum wave;
  std::uint64_t n_samples = 100000;
  std::size_t bins = 64;
};

struct Scenario {
  std::string text;
  std::uint64_t hash = 0;  // FNV-1a of the file bytes
  std::optional<std::uint64_t> seed;
  std::optional<std::string> command;
  std::optional<std::string> output;
  std::map<std::string, hilbert::OracleState> states;
  std::map<std::string, hilbert::ObservableSpec> observables;
  std::map<std::string, hilbert::HamiltonianSpec> hamiltonians;
  std::map<std::string, genesis::GenerationPtr> generations;
  std::map<std::pair<std::string, std::string>, hilbert::TransformMatrix> transforms;  // explicit ones
  std::optional<StabilitySection> stability;
  std::optional<TreeSection> tree;
  std::optional<ReconstructSection> reconstruct;
  std::optional<ExpSection> exp;
  std::optional<BornSection> borncheck;

  const hilbert::ObservableSpec& observable(const std::string& name) const {
    auto it = observables.find(name);
    if (it == observables.end()) throw SchemaError("unknown observable '" + name + "'");
    return it->second;
  }

  const genesis::GenerationOp& generation(const std::string& name) const {
    auto it = generations.find(name);
    if (it == generations.end()) throw SchemaError("unknown generation '" + name + "'");
    return *it->second;
  }

  /// Explicit transform if given, else the change of basis between the two
  /// observables' eigenbases.
  hilbert::TransformMatrix transform(const std::string& from, const std::string& to) const {
    if (auto it = transforms.find({from, to}); it != transforms.end()) return it->second;
    if (auto it = transforms.find({to, from}); it != transforms.end()) return it->second.inverse();
    if (observables.count(from) && observables.count(to))
      return hilbert::TransformMatrix::between(observables.at(from), observables.at(to));
    throw SchemaError("no transform from '" + from + "' to '" + to + "'");
  }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw SchemaError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + "." + key + ": wrong type");
  }
}

template <typename T>
std::optional<T> opt(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return get<T>(j, key, where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return opt<T>(j, key, where).value_or(fallback);
}

/// Runs `f`, turning module invariant failures into schema diagnostics.
template <typename F>
auto guarded(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

inline hilbert::OracleState parse_state(const json& j, const std::string& where) {
  if (j.is_array()) return guarded(where, [&] { return hilbert::OracleState(to_cvector(j, where)); });
  check_keys(j, {"amplitudes", "normalize", "basis", "dim"}, where);
  if (j.contains("basis")) {
    const auto d = get<std::size_t>(j, "dim", where);
    const auto b = get<std::size_t>(j, "basis", where);
    if (b >= d) throw SchemaError(where + ": basis index outside the dimension");
    return guarded(where, [&] { return hilbert::OracleState::basis(d, b); });
  }
  const auto v = to_cvector(j.contains("amplitudes") ? j.at("amplitudes") : json(), where + ".amplitudes");
  if (get_or(j, "normalize", false, where))
    return guarded(where, [&] { return hilbert::OracleState::normalized(v); });
  return guarded(where, [&] { return hilbert::OracleState(v); });
}

inline hilbert::ObservableSpec parse_observable(const std::string& name, const json& j, const std::string& where) {
  check_keys(j, {"dim", "eigenvalues", "matrix", "eigenbasis", "fourier", "balanced"}, where);
  const auto ev = get_or(j, "eigenvalues", std::vector<double>{}, where);
  return guarded(where, [&]() -> hilbert::ObservableSpec {
    if (j.contains("matrix")) return hilbert::ObservableSpec::from_hermitian(name, to_cmatrix(j.at("matrix"), where));
    hilbert::CMatrix basis;
    if (j.contains("eigenbasis")) {
      basis = to_cmatrix(j.at("eigenbasis"), where + ".eigenbasis");
    } else if (j.contains("fourier")) {
      basis = hilbert::fourier_basis(get<std::size_t>(j, "fourier", where));
    } else if (j.contains("balanced")) {
      basis = hilbert::balanced_basis(get<double>(j, "balanced", where));
    } else {
      return hilbert::ObservableSpec::standard(name, get<std::size_t>(j, "dim", where), ev);
    }
    auto values = ev;
    if (values.empty())
      for (Eigen::Index k = 0; k < basis.cols(); ++k) values.push_back(static_cast<double>(k));
    return hilbert::ObservableSpec(name, values, basis);
  });
}

inline dbb::TwoWaveState parse_particle(const json& j, const std::string& where) {
  check_keys(j, {"m0", "v12", "theta0", "delta_phase"}, where);
  return guarded(where, [&] {
    return dbb::TwoWaveState::for_particle(get_or(j, "m0", dbb::kNeutronMass, where), get_or(j, "v12", 2200.0, where),
                                           get_or(j, "theta0", 1.0, where), get_or(j, "delta_phase", 0.0, where));
  });
}

inline dbb::PlaneWaveSum parse_plane_waves(const json& j, const std::string& where) {
  if (j.contains("two_wave")) {
    check_keys(j, {"two_wave", "box_periods"}, where);
    const auto s = parse_particle(j.at("two_wave"), where + ".two_wave");
    const double periods = get_or(j, "box_periods", 8.0, where);
    if (!(periods > 0.0)) throw SchemaError(where + ".box_periods: must be positive");
    return dbb::PlaneWaveSum::from_two_wave(s, periods * s.fringe_period());
  }
  check_keys(j, {"box", "hbar", "components"}, where);
  dbb::PlaneWaveSum w;
  w.box = get_or(j, "box", 1.0, where);
  w.hbar = get_or(j, "hbar", 1.0, where);
  const auto comps = j.contains("components") ? j.at("components") : json();
  if (!comps.is_array() || comps.empty()) throw SchemaError(where + ".components: expected a non-empty array");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string cw = where + ".components[" + std::to_string(i) + "]";
    check_keys(comps[i], {"weight", "momentum"}, cw);
    const auto p = get<std::vector<double>>(comps[i], "momentum", cw);
    if (p.size() != 3) throw SchemaError(cw + ".momentum: expected 3 components");
    w.components.push_back({to_complex(comps[i].contains("weight") ? comps[i].at("weight") : json(), cw + ".weight"),
                            dbb::Vec3{p[0], p[1], p[2]}});
  }
  guarded(where, [&] {
    w.validate();
    return 0;
  });
  return w;
}

inline dbb::GuidedWave parse_guided(const json& j, const std::string& where) {
  check_keys(j, {"two_wave", "window", "plane_waves"}, where);
  dbb::GuidedWave g;
  if (j.contains("two_wave")) {
    g.wave = parse_particle(j.at("two_wave"), where + ".two_wave");
    g.window = get_or(j, "window", 0.0, where);
  } else if (j.contains("plane_waves")) {
    g.wave = parse_plane_waves(j.at("plane_waves"), where + ".plane_waves");
  } else {
    throw SchemaError(where + ": expected 'two_wave' or 'plane_waves'");
  }
  return g;
}

inline finprob::LawParams parse_params(const json& j, const std::string& where) {
  finprob::LawParams p;
  try {
    if (j.contains("block_size")) p.block_size = j.at("block_size").get<std::uint64_t>();
    if (j.contains("epsilon")) p.epsilon = j.at("epsilon").get<double>();
    if (j.contains("delta")) p.delta = j.at("delta").get<double>();
  } catch (const json::exception&) {
    throw SchemaError(where + ": law parameters have the wrong type");
  }
  return guarded(where, [&] {
    p.validate();
    return p;
  });
}

class GenerationResolver {
 public:
  GenerationResolver(const json& defs, Scenario& sc) : defs_(defs), sc_(sc) {}

  genesis::GenerationPtr resolve(const std::string& name, const std::string& from) {
    if (auto it = sc_.generations.find(name); it != sc_.generations.end()) return it->second;
    if (!defs_.contains(name)) throw SchemaError(from + ": unknown generation '" + name + "'");
    if (!active_.insert(name).second) throw SchemaError("generations: cycle through '" + name + "'");
    const std::string where = "generations." + name;
    const json& j = defs_.at(name);
    check_keys(j, {"state", "composed", "multi_system", "evolved", "guided"}, where);
    genesis::GenerationPtr g;
    if (j.contains("state")) {
      g = genesis::GenerationOp::simple(name, state(get<std::string>(j, "state", where), where));
    } else if (j.contains("composed")) {
      const auto& c = j.at("composed");
      check_keys(c, {"weights", "components"}, where + ".composed");
      const auto w = to_cvector(c.contains("weights") ? c.at("weights") : json(), where + ".composed.weights");
      std::vector<hilbert::Complex> weights(w.data(), w.data() + w.size());
      std::vector<genesis::GenerationPtr> parts;
      for (const auto& n : get<std::vector<std::string>>(c, "components", where + ".composed"))
        parts.push_back(resolve(n, where));
      g = guarded(where, [&] { return genesis::GenerationOp::composed(name, weights, parts); });
    } else if (j.contains("multi_system")) {
      const auto& m = j.at("multi_system");
      const std::string mw = where + ".multi_system";
      check_keys(m, {"state", "dims", "labels"}, mw);
      const auto st = state(get<std::string>(m, "state", mw), mw);
      g = guarded(where, [&] {
        return genesis::GenerationOp::multi_system(name, st, get<std::vector<std::size_t>>(m, "dims", mw),
                                                   get_or(m, "labels", std::vector<std::string>{}, mw));
      });
    } else if (j.contains("evolved")) {
      const auto& e = j.at("evolved");
      const std::string ew = where + ".evolved";
      check_keys(e, {"base", "hamiltonian", "dt"}, ew);
      auto base = resolve(get<std::string>(e, "base", ew), ew);
      const auto hname = get<std::string>(e, "hamiltonian", ew);
      auto h = sc_.hamiltonians.find(hname);
      if (h == sc_.hamiltonians.end()) throw SchemaError(ew + ": unknown hamiltonian '" + hname + "'");
      g = guarded(where, [&] {
        auto op = genesis::GenerationOp::evolved(name, base, h->second, get<double>(e, "dt", ew));
        hilbert::require_same_dim(genesis::recipe_dim(*base), h->second.dim(), "evolved generation");
        return op;
      });
    } else {
      throw SchemaError(where + ": expected one of state, composed, multi_system, evolved");
    }
    // resolving the recipe once checks weights and dimensions up front
    guarded(where, [&] { return genesis::resolve_state(*g); });
    if (j.contains("guided")) g = genesis::GenerationOp::with_guided_wave(g, parse_guided(j.at("guided"), where + ".guided"));
    active_.erase(name);
    sc_.generations.emplace(name, g);
    return g;
  }

 private:
  hilbert::OracleState state(const std::string& n, const std::string& where) const {
    auto it = sc_.states.find(n);
    if (it == sc_.states.end()) throw SchemaError(where + ": unknown state '" + n + "'");
    return it->second;
  }

  const json& defs_;
  Scenario& sc_;
  std::set<std::string> active_;
};

inline std::vector<std::string> name_list(const json& j, const char* key, const std::string& where, bool required) {
  if (!j.contains(key)) {
    if (required) throw SchemaError(where + ": missing '" + key + "'");
    return {};
  }
  return get<std::vector<std::string>>(j, key, where);
}

inline void parse_stability(const json& j, Scenario& sc) {
  const std::string where = "stability";
  check_keys(j, {"law", "observable", "segments", "params"}, where);
  StabilitySection s;
  s.params = parse_params(j.value("params", json::object()), where + ".params");
  if (j.contains("law")) {
    s.law = law_from_json(j.at("law"));
  } else {
    s.observable = get<std::string>(j, "observable", where);
    sc.observable(s.observable);
    const auto segs = j.contains("segments") ? j.at("segments") : json();
    if (!segs.is_array() || segs.empty()) throw SchemaError(where + ".segments: expected a non-empty array");
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const std::string sw = where + ".segments[" + std::to_string(i) + "]";
      check_keys(segs[i], {"generation", "n"}, sw);
      StabilitySection::Segment seg{get<std::string>(segs[i], "generation", sw), get<std::uint64_t>(segs[i], "n", sw)};
      if (seg.n == 0) throw SchemaError(sw + ".n: must be positive");
      const auto d = genesis::recipe_dim(sc.generation(seg.generation));
      if (d != sc.observable(s.observable).dim()) throw SchemaError(sw + ": generation and observable differ in dimension");
      s.segments.push_back(seg);
    }
  }
  sc.stability = std::move(s);
}

inline void parse_tree(const json& j, Scenario& sc) {
  const std::string where = "tree";
  check_keys(j, {"generation", "observables", "n", "params", "meta_reference", "flag_threshold"}, where);
  TreeSection t;
  t.generation = get<std::string>(j, "generation", where);
  const auto dim = genesis::recipe_dim(sc.generation(t.generation));
  t.observables = name_list(j, "observables", where, true);
  if (t.observables.empty()) throw SchemaError(where + ".observables: at least one is required");
  for (const auto& o : t.observables)
    if (sc.observable(o).dim() != dim) throw SchemaError(where + ": observable '" + o + "' has the wrong dimension");
  t.n = get<std::uint64_t>(j, "n", where);
  if (t.n == 0) throw SchemaError(where + ".n: must be positive");
  t.params = parse_params(j.value("params", json::object()), where + ".params");
  t.meta_reference = opt<std::string>(j, "meta_reference", where);
  if (t.meta_reference && std::find(t.observables.begin(), t.observables.end(), *t.meta_reference) == t.observables.end())
    throw SchemaError(where + ".meta_reference: must be one of the observables");
  t.flag_threshold = get_or(j, "flag_threshold", probtree::kDefaultFlagThreshold, where);
  sc.tree = std::move(t);
}

inline void parse_reconstruct(const json& j, Scenario& sc) {
  const std::string where = "reconstruct";
  check_keys(j, {"reference", "partners", "heldout", "generation", "n", "laws", "trials", "retrieval"}, where);
  ReconstructSection r;
  r.reference = get<std::string>(j, "reference", where);
  r.partners = name_list(j, "partners", where, true);
  if (r.partners.empty()) throw SchemaError(where + ".partners: at least one is required");
  r.heldout = name_list(j, "heldout", where, false);
  r.generation = opt<std::string>(j, "generation", where);
  r.n = opt<std::uint64_t>(j, "n", where);
  if (r.n && *r.n == 0) throw SchemaError(where + ".n: must be positive");
  std::vector<std::string> all{r.reference};
  all.insert(all.end(), r.partners.begin(), r.partners.end());
  all.insert(all.end(), r.heldout.begin(), r.heldout.end());
  if (r.generation) {
    if (j.contains("laws")) throw SchemaError(where + ": give either 'generation' or 'laws', not both");
    const auto d = genesis::recipe_dim(sc.generation(*r.generation));
    for (const auto& o : all)
      if (sc.observable(o).dim() != d) throw SchemaError(where + ": observable '" + o + "' has the wrong dimension");
  } else {
    if (r.n) throw SchemaError(where + ".n: only meaningful with 'generation'");
    const auto& laws = j.contains("laws") ? j.at("laws") : json();
    if (!laws.is_object()) throw SchemaError(where + ": expected 'generation' or a 'laws' object");
    for (const auto& [name, law] : laws.items()) {
      const std::string lw = where + ".laws." + name;
      if (law.is_object()) {
        const auto fl = law_from_json(law);
        r.laws[name] = finprob::frequencies(fl);
        r.trials[name] = fl.n_total();
      } else {
        r.laws[name] = guarded(lw, [&] { return law.get<std::vector<double>>(); });
      }
    }
    for (const auto& o : all)
      if (!r.laws.count(o)) throw SchemaError(where + ".laws: missing law of '" + o + "'");
    if (j.contains("trials"))
      for (const auto& [name, n] : j.at("trials").items())
        r.trials[name] = guarded(where + ".trials." + name, [&] { return n.get<std::uint64_t>(); });
  }
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto tau = sc.transform(r.reference, all[i]);
    if (r.laws.count(all[i]) && r.laws.at(all[i]).size() != tau.dim())
      throw SchemaError(where + ": law of '" + all[i] + "' and its transform differ in dimension");
  }
  if (j.contains("retrieval")) {
    const auto& c = j.at("retrieval");
    const std::string cw = where + ".retrieval";
    check_keys(c, {"restarts", "tolerance", "max_iterations", "seed", "distinct_threshold"}, cw);
    auto& cfg = r.retrieval;
    cfg.restarts = get_or(c, "restarts", cfg.restarts, cw);
    cfg.tolerance = opt<double>(c, "tolerance", cw);
    cfg.max_iterations = get_or(c, "max_iterations", cfg.max_iterations, cw);
    cfg.distinct_threshold = get_or(c, "distinct_threshold", cfg.distinct_threshold, cw);
    if (c.contains("seed")) {
      cfg.seed = get<std::uint64_t>(c, "seed", cw);
      r.retrieval_seed_given = true;
    }
    if (cfg.restarts == 0) throw SchemaError(cw + ".restarts: must be positive");
  }
  sc.reconstruct = std::move(r);
}

inline void parse_exp(const json& j, Scenario& sc) {
  const std::string where = "exp";
  check_keys(j, {"particle", "lambda_sep", "kappa", "dd_half_width", "n_trials", "elastic_interactions_per_trial",
                 "max_l1_ionizations", "layer_thickness", "fringe_periods", "bins", "fringe_bins_per_period",
                 "lambda_factors"},
             where);
  ExpSection e{parse_particle(j.value("particle", json::object()), where + ".particle"), {}};
  auto& c = e.config;
  c.lambda_sep = get_or(j, "lambda_sep", c.lambda_sep, where);
  c.kappa = opt<double>(j, "kappa", where);
  c.dd_half_width = get_or(j, "dd_half_width", c.dd_half_width, where);
  c.n_trials = get_or(j, "n_trials", c.n_trials, where);
  c.elastic_interactions_per_trial = get_or(j, "elastic_interactions_per_trial", c.elastic_interactions_per_trial, where);
  c.max_l1_ionizations = get_or(j, "max_l1_ionizations", c.max_l1_ionizations, where);
  c.layer_thickness = get_or(j, "layer_thickness", c.layer_thickness, where);
  c.fringe_periods = get_or(j, "fringe_periods", c.fringe_periods, where);
  c.bins = get_or(j, "bins", c.bins, where);
  c.fringe_bins_per_period = get_or(j, "fringe_bins_per_period", c.fringe_bins_per_period, where);
  c.lambda_factors = get_or(j, "lambda_factors", c.lambda_factors, where);
  guarded(where, [&] {
    c.validate();
    return 0;
  });
  sc.exp = std::move(e);
}

inline void parse_borncheck(const json& j, Scenario& sc) {
  const std::string where = "borncheck";
  check_keys(j, {"wave", "n_samples", "bins"}, where);
  if (!j.contains("wave")) throw SchemaError(where + ": missing 'wave'");
  BornSection b{parse_plane_waves(j.at("wave"), where + ".wave"), get_or(j, "n_samples", std::uint64_t{100000}, where),
                get_or(j, "bins", std::size_t{64}, where)};
  if (b.n_samples == 0) throw SchemaError(where + ".n_samples: must be positive");
  if (b.bins == 0) throw SchemaError(where + ".bins: must be positive");
  sc.borncheck = std::move(b);
}

}  // namespace detail

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"stability", "tree", "reconstruct", "exp", "borncheck"};
  return names;
}

/// Parses and validates a scenario: every referenced name must resolve and
/// every matrix must pass its invariants, or SchemaError names the field.
inline Scenario parse_scenario(const std::string& text) {
  using namespace detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scenario is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"description", "command", "seed", "output", "states", "observables", "hamiltonians", "generations",
              "transforms", "stability", "tree", "reconstruct", "exp", "borncheck"},
             "scenario");
  Scenario sc;
  sc.text = text;
  sc.hash = fnv1a(text);
  sc.seed = opt<std::uint64_t>(j, "seed", "scenario");
  sc.command = opt<std::string>(j, "command", "scenario");
  if (sc.command && std::find(command_names().begin(), command_names().end(), *sc.command) == command_names().end())
    throw SchemaError("scenario.command: unknown command '" + *sc.command + "'");
  sc.output = opt<std::string>(j, "output", "scenario");

  auto section = [&](const char* key) -> json {
    if (!j.contains(key)) return json::object();
    if (!j.at(key).is_object()) throw SchemaError(std::string(key) + ": expected an object");
    return j.at(key);
  };
  const json states = section("states"), observables = section("observables"), hamiltonians = section("hamiltonians");
  for (const auto& [name, v] : states.items()) sc.states.emplace(name, parse_state(v, "states." + name));
  for (const auto& [name, v] : observables.items())
    sc.observables.emplace(name, parse_observable(name, v, "observables." + name));
  for (const auto& [name, v] : hamiltonians.items()) {
    const std::string where = "hamiltonians." + name;
    check_keys(v, {"matrix", "hbar"}, where);
    if (!v.contains("matrix")) throw SchemaError(where + ": missing 'matrix'");
    sc.hamiltonians.emplace(name, guarded(where, [&] {
                              return hilbert::HamiltonianSpec(to_cmatrix(v.at("matrix"), where + ".matrix"),
                                                              get_or(v, "hbar", 1.0, where));
                            }));
  }
  {
    const json defs = section("generations");
    GenerationResolver res(defs, sc);
    for (const auto& [name, v] : defs.items()) res.resolve(name, "generations");
  }
  if (j.contains("transforms")) {
    const auto& t = j.at("transforms");
    if (!t.is_array()) throw SchemaError("transforms: expected an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string where = "transforms[" + std::to_string(i) + "]";
      check_keys(t[i], {"source", "target", "matrix"}, where);
      const auto src = get<std::string>(t[i], "source", where), dst = get<std::string>(t[i], "target", where);
      if (!t[i].contains("matrix")) throw SchemaError(where + ": missing 'matrix'");
      sc.transforms.insert_or_assign({src, dst}, guarded(where, [&] {
                                       return hilbert::TransformMatrix(src, dst, to_cmatrix(t[i].at("matrix"), where));
                                     }));
    }
  }
  if (j.contains("stability")) parse_stability(j.at("stability"), sc);
  if (j.contains("tree")) parse_tree(j.at("tree"), sc);
  if (j.contains("reconstruct")) parse_reconstruct(j.at("reconstruct"), sc);
  if (j.contains("exp")) parse_exp(j.at("exp"), sc);
  if (j.contains("borncheck")) parse_borncheck(j.at("borncheck"), sc);
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& p) { return parse_scenario(read_file(p)); }

}  // namespace qfact::cli
