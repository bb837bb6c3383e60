#pragma once

// Probability trees: the trunk G, one branch per group of mutually
// compatible observables, a factual law crowning each observable, and the
// meta-correlations between the crowns of different branches.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qfact/error.hpp"
#include "qfact/executor.hpp"
#include "qfact/expansion.hpp"
#include "qfact/finprob.hpp"
#include "qfact/genesis.hpp"
#include "qfact/hilbert.hpp"
#include "qfact/rng.hpp"

namespace qfact::probtree {

using finprob::FactualLaw;
using hilbert::ObservableSpec;
using hilbert::TransformMatrix;

inline constexpr double kCommuteTolerance = 1e-10;
inline constexpr double kDefaultFlagThreshold = 0.05;

struct CompatibilityGroup {
  std::vector<std::string> members;

  bool contains(const std::string& name) const {
    return std::find(members.begin(), members.end(), name) != members.end();
  }
};

struct MetaCorrelationPair {
  std::string a;
  std::string b;
  double residual = 0.0;  // max_k |predicted(b_k) - measured(b_k)|
  std::vector<double> predicted;
  std::vector<double> measured;
  bool flagged = false;   // residual above the record's threshold
};

struct MetaCorrelationRecord {
  std::vector<MetaCorrelationPair> pairs;
  double flag_threshold = kDefaultFlagThreshold;

  double max_residual() const {
    double m = 0.0;
    for (const auto& p : pairs) m = std::max(m, p.residual);
    return m;
  }
  bool any_flagged() const {
    return std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.flagged; });
  }
};

struct Branch {
  CompatibilityGroup group;
  std::map<std::string, FactualLaw> laws;
};

struct ProbabilityTree {
  std::string trunk;
  std::vector<Branch> branches;
  MetaCorrelationRecord mpc;
  bool trunk_only = false;
  /// Built under guided coding: every quantity is read off one trace, so the
  /// tree is a bare trunk whatever the commutation structure.
  bool guided = false;

  const FactualLaw& law(const std::string& obs) const {
    for (const auto& b : branches) {
      auto it = b.laws.find(obs);
      if (it != b.laws.end()) return it->second;
    }
    throw UnlinkedObservableError("tree has no law for '" + obs + "'");
  }

  std::map<std::string, std::vector<double>> measured_laws() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& b : branches)
      for (const auto& [name, l] : b.laws) out[name] = finprob::frequencies(l);
    return out;
  }
};

/// Greedy first-fit in input order: each observable joins the first group
/// whose members it all commutes with, else opens a new group.
inline std::vector<CompatibilityGroup> partition_branches(const std::vector<ObservableSpec>& observables) {
  if (observables.empty()) throw InvalidArgumentError("partition_branches needs observables");
  std::vector<CompatibilityGroup> groups;
  std::vector<std::vector<const ObservableSpec*>> members;
  for (const auto& o : observables) {
    bool placed = false;
    for (std::size_t g = 0; g < groups.size() && !placed; ++g) {
      const bool fits = std::all_of(members[g].begin(), members[g].end(), [&](const ObservableSpec* m) {
        return hilbert::commutator_norm(*m, o) < kCommuteTolerance;
      });
      if (fits) {
        groups[g].members.push_back(o.name());
        members[g].push_back(&o);
        placed = true;
      }
    }
    if (!placed) {
      groups.push_back({{o.name()}});
      members.push_back({&o});
    }
  }
  return groups;
}

/// Seed stream of one observable's law, keyed by name so that processing
/// order never changes the draws.
inline std::uint64_t law_seed(std::uint64_t seed, const std::string& observable) {
  return derive_seed(seed, fnv1a(observable));
}

inline ProbabilityTree build_tree(const genesis::GenerationOp& g, const std::vector<ObservableSpec>& observables,
                                  std::uint64_t n, finprob::LawParams params, std::uint64_t seed,
                                  const Executor& exec = serial_executor()) {
  if (n < 1) throw InvalidArgumentError("build_tree needs n >= 1 per observable");
  for (std::size_t i = 0; i < observables.size(); ++i)
    for (std::size_t k = i + 1; k < observables.size(); ++k)
      if (observables[i].name() == observables[k].name())
        throw InvalidArgumentError("duplicate observable '" + observables[i].name() + "'");
  ProbabilityTree tree;
  tree.trunk = g.id;
  tree.guided = g.guided.has_value();
  std::vector<CompatibilityGroup> groups;
  if (tree.guided) {
    CompatibilityGroup all;
    for (const auto& o : observables) all.members.push_back(o.name());
    groups.push_back(std::move(all));
  } else {
    groups = partition_branches(observables);
  }
  tree.trunk_only = groups.size() == 1;

  const genesis::PreparedGeneration prepared(g);
  for (auto& grp : groups) {
    Branch b;
    b.group = grp;
    for (const auto& name : grp.members) {
      const auto& o = *std::find_if(observables.begin(), observables.end(),
                                    [&](const ObservableSpec& x) { return x.name() == name; });
      auto law = FactualLaw::for_observable(o.name(), o.dim(), params);
      genesis::extend_successions(law, prepared, o, n, law_seed(seed, name), 0, exec);
      b.laws.emplace(name, std::move(law));
    }
    tree.branches.push_back(std::move(b));
  }
  return tree;
}

/// Joint sampling of a group of commuting observables: one succession codes
/// every member at once, through the shared eigenbasis of the first member.
struct JointBranchLaw {
  std::vector<std::string> members;
  std::map<std::vector<int>, std::uint64_t> joint_counts;
  std::map<std::string, FactualLaw> marginals;
};

inline JointBranchLaw sample_branch_jointly(const genesis::GenerationOp& g,
                                            const std::vector<ObservableSpec>& group, std::uint64_t n,
                                            finprob::LawParams params, std::uint64_t seed) {
  if (group.empty()) throw InvalidArgumentError("empty group");
  for (std::size_t i = 1; i < group.size(); ++i)
    if (hilbert::commutator_norm(group.front(), group[i]) >= kCommuteTolerance)
      throw InvalidArgumentError("joint sampling needs commuting observables");
  const auto& lead = group.front();
  // index of each member's eigenvalue on each lead eigenvector
  std::vector<std::vector<int>> code(lead.dim(), std::vector<int>(group.size()));
  for (std::size_t j = 0; j < lead.dim(); ++j)
    for (std::size_t m = 0; m < group.size(); ++m) {
      const hilbert::CVector ov = group[m].eigenbasis().adjoint() * lead.eigenvector(j);
      Eigen::Index best = 0;
      ov.cwiseAbs2().maxCoeff(&best);
      code[j][m] = static_cast<int>(best);
    }
  JointBranchLaw out;
  for (const auto& o : group) {
    out.members.push_back(o.name());
    out.marginals.emplace(o.name(), FactualLaw::for_observable(o.name(), o.dim(), params));
  }
  const genesis::PreparedGeneration prepared(g);
  const auto born = hilbert::born_law(*prepared.state, lead);
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    auto s = genesis::generate(prepared, rng);
    s.alive = false;
    const auto j = hilbert::sample_index(born, rng);
    ++out.joint_counts[code[j]];
    for (std::size_t m = 0; m < group.size(); ++m)
      out.marginals.at(group[m].name()).record_index(static_cast<std::size_t>(code[j][m]));
  }
  return out;
}

/// Predicted law of each other observable B from the reference expansion and
/// tau(reference -> B), against the measured law of B.
inline MetaCorrelationRecord meta_correlation(const std::map<std::string, std::vector<double>>& measured,
                                              const reconstruct::ExpansionSet& expansion,
                                              const std::vector<TransformMatrix>& taus,
                                              double flag_threshold = kDefaultFlagThreshold) {
  const auto& ref = expansion.reference_observable;
  const hilbert::CVector c = expansion.reference_coefficients();
  MetaCorrelationRecord rec;
  rec.flag_threshold = flag_threshold;
  for (const auto& [name, law] : measured) {
    if (name == ref) continue;
    auto it = std::find_if(taus.begin(), taus.end(), [&](const TransformMatrix& t) {
      return t.source() == ref && t.target() == name;
    });
    if (it == taus.end())
      throw UnlinkedObservableError("no transform from '" + ref + "' to '" + name + "'");
    const hilbert::CVector d = hilbert::dirac_transform(c, *it);
    if (static_cast<std::size_t>(d.size()) != law.size())
      throw DimensionMismatchError("measured law of '" + name + "' has the wrong length");
    MetaCorrelationPair p;
    p.a = ref;
    p.b = name;
    p.measured = law;
    for (std::size_t k = 0; k < law.size(); ++k) {
      p.predicted.push_back(std::norm(d(static_cast<Eigen::Index>(k))));
      p.residual = std::max(p.residual, std::abs(p.predicted.back() - law[k]));
    }
    p.flagged = p.residual > flag_threshold;
    rec.pairs.push_back(std::move(p));
  }
  return rec;
}

inline MetaCorrelationRecord meta_correlation(const ProbabilityTree& tree,
                                              const reconstruct::ExpansionSet& expansion,
                                              const std::vector<TransformMatrix>& taus,
                                              double flag_threshold = kDefaultFlagThreshold) {
  return meta_correlation(tree.measured_laws(), expansion, taus, flag_threshold);
}

}  // namespace qfact::probtree
