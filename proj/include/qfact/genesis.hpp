#pragma once

// Operations of generation and individual coding-measurement successions.

#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qfact/dbb.hpp"
#include "qfact/error.hpp"
#include "qfact/executor.hpp"
#include "qfact/finprob.hpp"
#include "qfact/hilbert.hpp"
#include "qfact/rng.hpp"

namespace qfact::genesis {

using hilbert::Complex;
using hilbert::HamiltonianSpec;
using hilbert::ObservableSpec;
using hilbert::OracleState;
using dbb::Vec3;
using dbb::operator+;
using dbb::operator-;
using dbb::operator*;

struct GenerationOp;
using GenerationPtr = std::shared_ptr<const GenerationOp>;

struct Simple {
  OracleState state;
};

/// G(G1, G2, ...): the composite state is the normalized weighted sum.
struct Composed {
  std::vector<Complex> weights;
  std::vector<GenerationPtr> components;
};

/// One joint state of n micro-systems on the product of the factor spaces
/// (first factor most significant in the joint index).
struct MultiSystem {
  OracleState joint;
  std::vector<std::size_t> factor_dims;
  std::vector<std::string> factor_labels;
};

/// G^(t): the base recipe followed by free evolution under H for dt.
struct Evolved {
  GenerationPtr base;
  HamiltonianSpec hamiltonian;
  double dt = 0.0;
};

struct GenerationOp {
  std::string id;
  std::variant<Simple, Composed, MultiSystem, Evolved> kind;
  /// Closed-form wave carried by every specimen; enables guided coding.
  std::optional<dbb::GuidedWave> guided;

  static GenerationPtr simple(std::string id, OracleState state) {
    return std::make_shared<GenerationOp>(GenerationOp{std::move(id), Simple{std::move(state)}, {}});
  }

  static GenerationPtr composed(std::string id, std::vector<Complex> weights,
                                std::vector<GenerationPtr> components);

  static GenerationPtr multi_system(std::string id, OracleState joint, std::vector<std::size_t> dims,
                                    std::vector<std::string> labels = {}) {
    std::size_t prod = 1;
    for (auto d : dims) {
      if (d < 2) throw InvariantViolationError("factor dimensions must be >= 2");
      prod *= d;
    }
    if (dims.empty() || prod != joint.dim())
      throw DimensionMismatchError("factor dimensions do not multiply to the joint dimension");
    if (labels.empty())
      for (std::size_t i = 0; i < dims.size(); ++i) labels.push_back("S" + std::to_string(i + 1));
    if (labels.size() != dims.size())
      throw InvalidArgumentError("one label per factor system is required");
    return std::make_shared<GenerationOp>(
        GenerationOp{std::move(id), MultiSystem{std::move(joint), std::move(dims), std::move(labels)}, {}});
  }

  static GenerationPtr evolved(std::string id, GenerationPtr base, HamiltonianSpec h, double dt) {
    if (!base) throw InvalidArgumentError("evolved generation needs a base");
    if (dt < 0.0) throw InvalidArgumentError("evolution time must be non-negative");
    return std::make_shared<GenerationOp>(GenerationOp{std::move(id), Evolved{std::move(base), std::move(h), dt}, {}});
  }

  static GenerationPtr with_guided_wave(GenerationPtr g, dbb::GuidedWave wave) {
    auto copy = std::make_shared<GenerationOp>(*g);
    copy->guided = std::move(wave);
    return copy;
  }
};

/// The hidden state a recipe produces; the same for every realization.
inline OracleState resolve_state(const GenerationOp& g) {
  return std::visit(
      [](const auto& k) -> OracleState {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Simple>) {
          return k.state;
        } else if constexpr (std::is_same_v<K, Composed>) {
          std::vector<OracleState> states;
          states.reserve(k.components.size());
          for (const auto& c : k.components) states.push_back(resolve_state(*c));
          return hilbert::compose_superposition(k.weights, states);
        } else if constexpr (std::is_same_v<K, MultiSystem>) {
          return k.joint;
        } else {
          return hilbert::evolve(resolve_state(*k.base), k.hamiltonian, k.dt);
        }
      },
      g.kind);
}

inline std::size_t recipe_dim(const GenerationOp& g) {
  return std::visit(
      [](const auto& k) -> std::size_t {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Simple>) return k.state.dim();
        else if constexpr (std::is_same_v<K, Composed>) return recipe_dim(*k.components.front());
        else if constexpr (std::is_same_v<K, MultiSystem>) return k.joint.dim();
        else return recipe_dim(*k.base);
      },
      g.kind);
}

inline GenerationPtr GenerationOp::composed(std::string id, std::vector<Complex> weights,
                                            std::vector<GenerationPtr> components) {
  if (components.empty() || weights.size() != components.size())
    throw InvalidArgumentError("composed generation needs one weight per component");
  const auto d = recipe_dim(*components.front());
  for (const auto& c : components)
    if (!c || recipe_dim(*c) != d)
      throw DimensionMismatchError("composed components must share one dimension");
  return std::make_shared<GenerationOp>(
      GenerationOp{std::move(id), Composed{std::move(weights), std::move(components)}, {}});
}

/// One individual realization. Any measurement destroys it.
struct Specimen {
  std::shared_ptr<const OracleState> hidden_state;
  std::shared_ptr<const dbb::GuidedWave> dbb_attachment;
  std::optional<Vec3> corpuscle_position;  // m, or box units for plane-wave sums
  std::vector<std::size_t> factor_dims;    // empty for a single system
  std::vector<std::string> factor_labels;
  bool alive = true;
};

/// A recipe with its hidden state resolved once, ready for repeated realization.
struct PreparedGeneration {
  std::string id;
  std::shared_ptr<const OracleState> state;
  std::shared_ptr<const dbb::GuidedWave> guided;
  std::vector<std::size_t> factor_dims;
  std::vector<std::string> factor_labels;

  explicit PreparedGeneration(const GenerationOp& g)
      : id(g.id), state(std::make_shared<const OracleState>(resolve_state(g))) {
    if (g.guided) guided = std::make_shared<const dbb::GuidedWave>(*g.guided);
    if (const auto* m = std::get_if<MultiSystem>(&g.kind)) {
      factor_dims = m->factor_dims;
      factor_labels = m->factor_labels;
    }
  }
};

inline Specimen generate(const PreparedGeneration& g, Rng& rng) {
  Specimen s;
  s.hidden_state = g.state;
  s.dbb_attachment = g.guided;
  s.factor_dims = g.factor_dims;
  s.factor_labels = g.factor_labels;
  if (g.guided) s.corpuscle_position = g.guided->sample_position(rng);
  return s;
}

inline Specimen generate(const GenerationOp& g, Rng& rng) { return generate(PreparedGeneration(g), rng); }

/// A registered mark coded into one eigenvalue; the region cell index equals
/// the eigenvalue index.
struct CodedOutcome {
  std::string observable;
  std::string system;  // factor label for multi-system specimens, else empty
  int eigen_index = 0;
  double eigenvalue = 0.0;
  int region_index = 0;
  std::uint64_t trial_id = 0;

  finprob::OutcomeLabel label() const { return {observable, eigen_index}; }
};

namespace detail {
inline void consume(Specimen& s) {
  if (!s.alive)
    throw DestroyedSpecimenError("specimen already destroyed by a measurement; realize G again");
  s.alive = false;
}

inline CodedOutcome code_index(const ObservableSpec& obs, std::size_t j, std::uint64_t trial_id) {
  CodedOutcome o;
  o.observable = obs.name();
  o.eigen_index = static_cast<int>(j);
  o.eigenvalue = obs.eigenvalues()[j];
  o.region_index = o.eigen_index;
  o.trial_id = trial_id;
  return o;
}
}  // namespace detail

/// Coding postulate for microstates without quantum fields: the outcome is
/// drawn from the Born law of the hidden state.
inline CodedOutcome mes_coding_nc(Specimen& s, const ObservableSpec& obs, Rng& rng,
                                  std::uint64_t trial_id = 0) {
  hilbert::require_same_dim(s.hidden_state->dim(), obs.dim(), "mes_coding_nc");
  detail::consume(s);
  return detail::code_index(obs, hilbert::sample_outcome(*s.hidden_state, obs, rng), trial_id);
}

/// Complete measurement on a multi-system specimen: one coded outcome per
/// factor, drawn jointly from the Born law on the product eigenbasis.
inline std::vector<CodedOutcome> mes_coding_complete(Specimen& s,
                                                     const std::vector<ObservableSpec>& per_factor,
                                                     Rng& rng, std::uint64_t trial_id = 0) {
  if (s.factor_dims.empty()) throw InvalidArgumentError("specimen is not a multi-system specimen");
  if (per_factor.size() != s.factor_dims.size())
    throw DimensionMismatchError("one observable per factor system is required");
  hilbert::CMatrix basis = per_factor.front().eigenbasis();
  for (std::size_t f = 0; f < per_factor.size(); ++f) {
    hilbert::require_same_dim(per_factor[f].dim(), s.factor_dims[f], "mes_coding_complete");
    if (f > 0) basis = hilbert::kron(basis, per_factor[f].eigenbasis());
  }
  detail::consume(s);
  const hilbert::CVector c = basis.adjoint() * s.hidden_state->amplitudes();
  std::vector<double> law(static_cast<std::size_t>(c.size()));
  for (std::size_t j = 0; j < law.size(); ++j) law[j] = std::norm(c(static_cast<Eigen::Index>(j)));
  std::size_t joint = hilbert::sample_index(law, rng);
  std::vector<CodedOutcome> out(per_factor.size());
  for (std::size_t f = per_factor.size(); f-- > 0;) {
    const std::size_t j = joint % s.factor_dims[f];
    joint /= s.factor_dims[f];
    out[f] = detail::code_index(per_factor[f], j, trial_id);
    out[f].system = s.factor_labels.at(f);
  }
  return out;
}

struct GuidedOutcome {
  Vec3 position{};
  Vec3 momentum{};
};

/// Coding postulate for microstates with quantum fields: the trace start
/// fixes the position, the guidance law fixes the momentum.
inline GuidedOutcome mes_coding_guided(Specimen& s, double t) {
  if (!s.dbb_attachment || !s.corpuscle_position)
    throw GuidedCodingUnavailableError("specimen carries no guided wave");
  detail::consume(s);
  return {*s.corpuscle_position, s.dbb_attachment->momentum_at(*s.corpuscle_position, t)};
}

/// p = m (x_n - origin) / (t_n - t0)
inline Vec3 time_of_flight(const Vec3& x_n, double t_n, double t0, double m, const Vec3& origin = {}) {
  if (!(t_n > t0)) throw NonPositiveFlightTimeError("time of flight must be positive");
  if (!(m > 0.0)) throw InvalidArgumentError("mass must be positive");
  return (m / (t_n - t0)) * (x_n - origin);
}

/// Appends n successions [generate -> mes_coding_nc] to `law`, trial ids
/// first_trial .. first_trial+n-1. Trial i draws from Rng(seed, i), so the
/// result does not depend on the executor.
inline void extend_successions(finprob::FactualLaw& law, const PreparedGeneration& g,
                               const ObservableSpec& obs, std::uint64_t n, std::uint64_t seed,
                               std::uint64_t first_trial = 0, const Executor& exec = serial_executor()) {
  hilbert::require_same_dim(g.state->dim(), obs.dim(), "run_successions");
  if (law.spectrum().size() != obs.dim())
    throw SpectrumMismatchError("law spectrum does not match the observable");
  // every specimen of G carries the same hidden state, so its Born law is shared
  const auto born = hilbert::born_law(*g.state, obs);
  std::vector<std::uint32_t> outcome(n);
  exec(n, [&](std::size_t i) {
    Rng rng(seed, first_trial + i);
    Specimen s = generate(g, rng);
    detail::consume(s);
    outcome[i] = static_cast<std::uint32_t>(hilbert::sample_index(born, rng));
  });
  for (auto j : outcome) law.record_index(j);
}

inline finprob::FactualLaw run_successions(const GenerationOp& g, const ObservableSpec& obs,
                                           std::uint64_t n, finprob::LawParams params,
                                           std::uint64_t seed, const Executor& exec = serial_executor()) {
  if (n < 1) throw InvalidArgumentError("run_successions needs n >= 1");
  auto law = finprob::FactualLaw::for_observable(obs.name(), obs.dim(), params);
  extend_successions(law, PreparedGeneration(g), obs, n, seed, 0, exec);
  return law;
}

}  // namespace qfact::genesis
