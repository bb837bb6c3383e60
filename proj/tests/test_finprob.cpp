#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "qfact/finprob.hpp"
#include "qfact/rng.hpp"

using namespace qfact;
using namespace qfact::finprob;

namespace {

FactualLaw coin_law(double p, std::uint64_t n, std::uint64_t seed, LawParams params = {}) {
  auto law = FactualLaw::for_observable("A", 2, params);
  Rng rng(seed);
  for (std::uint64_t i = 0; i < n; ++i) law.record_index(rng.uniform() < p ? 0 : 1);
  return law;
}

}  // namespace

TEST(Accumulate, FirstIncrement) {
  auto law = accumulate(FactualLaw::for_observable("a", 2), {"a", 0});
  EXPECT_EQ(law.count({"a", 0}), 1u);
  EXPECT_EQ(law.count({"a", 1}), 0u);
  EXPECT_EQ(law.n_total(), 1u);
}

TEST(Accumulate, DisjointIncrement) {
  auto law = accumulate(accumulate(FactualLaw::for_observable("a", 2), {"a", 0}), {"a", 1});
  EXPECT_EQ(law.count({"a", 0}), 1u);
  EXPECT_EQ(law.count({"a", 1}), 1u);
  EXPECT_EQ(law.n_total(), 2u);
}

TEST(Accumulate, LabelOutsideSpectrum) {
  EXPECT_THROW(accumulate(FactualLaw::for_observable("a", 2), {"a", 2}), UnknownLabelError);
  EXPECT_THROW(accumulate(FactualLaw::for_observable("a", 2), {"b", 0}), UnknownLabelError);
}

TEST(Accumulate, BlocksCloseWhenFull) {
  LawParams p;
  p.block_size = 3;
  auto law = FactualLaw::for_observable("a", 2, p);
  for (int i = 0; i < 7; ++i) law.record_index(i % 2);
  EXPECT_EQ(law.blocks().size(), 2u);
  EXPECT_EQ(law.open_block_size(), 1u);
  for (const auto& b : law.blocks()) EXPECT_EQ(std::accumulate(b.begin(), b.end(), std::uint64_t{0}), 3u);
}

TEST(Frequencies, Arithmetic) {
  auto law = FactualLaw::for_observable("a", 2);
  for (int i = 0; i < 3; ++i) law.record_index(0);
  law.record_index(1);
  const auto f = frequencies(law);
  EXPECT_DOUBLE_EQ(f[0], 0.75);
  EXPECT_DOUBLE_EQ(f[1], 0.25);
}

TEST(Frequencies, DeltaLaw) {
  auto law = FactualLaw::for_observable("a", 1);
  for (int i = 0; i < 5; ++i) law.record_index(0);
  EXPECT_EQ(frequencies(law), std::vector<double>{1.0});
}

TEST(Frequencies, EmptyLaw) { EXPECT_THROW(frequencies(FactualLaw::for_observable("a", 2)), EmptyLawError); }

TEST(Frequencies, SumToOneWithinRounding) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t k = 2 + rep % 7;
    auto law = FactualLaw::for_observable("a", k);
    const auto n = 1 + rng() % 5000;
    for (std::uint64_t i = 0; i < n; ++i) law.record_index(rng() % k);
    const auto f = frequencies(law);
    const double s = std::accumulate(f.begin(), f.end(), 0.0);
    EXPECT_NEAR(s, 1.0, k * std::numeric_limits<double>::epsilon());
  }
}

TEST(Convergence, IdenticalBlocksAreStable) {
  LawParams p;
  p.block_size = 4;
  p.epsilon = 1e-9;
  auto law = FactualLaw::for_observable("a", 2, p);
  for (int b = 0; b < 10; ++b) {
    law.record_index(0);
    law.record_index(0);
    law.record_index(0);
    law.record_index(1);
  }
  const auto v = check_convergence(law);
  EXPECT_TRUE(v.stable);
  EXPECT_EQ(v.worst_deviation, 0.0);
  EXPECT_EQ(v.complete_blocks, 10u);
  EXPECT_DOUBLE_EQ(v.pooled_frequencies.at({"a", 0}), 0.75);
}

TEST(Convergence, FairCoinStableProbabilityOracle) {
  // P(one block deviates more than eps) from the exact binomial tail, then
  // P(at most 5 of 100 blocks deviate).
  const double p_block = oracle::binom_two_sided_tail(10000, 0.5, 0.02);
  const double p_stable = oracle::binom_cdf(100, 5, p_block);
  EXPECT_LT(p_block, 1e-4);
  EXPECT_GT(p_stable, 0.99);

  int stable = 0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) stable += check_convergence(coin_law(0.5, 1000000, rep)).stable;
  EXPECT_EQ(stable, 10);
}

TEST(Convergence, DriftIsUnstable) {
  LawParams p;
  p.epsilon = 0.1;
  auto first = coin_law(0.3, 500000, 1, p);
  auto second = coin_law(0.7, 500000, 2, p);
  auto law = merge(first, second);
  ASSERT_EQ(law.blocks().size(), 100u);
  // direct block-frequency check: every block sits about 0.2 away from 0.5
  const auto v = check_convergence(law);
  for (const auto& b : law.blocks()) {
    const double f = double(b[0]) / 1e4;
    EXPECT_GT(std::abs(f - 0.5), 0.15);
  }
  EXPECT_FALSE(v.stable);
  EXPECT_NEAR(v.pooled_frequencies.at({"A", 0}), 0.5, 0.01);
  EXPECT_LT(v.per_label_fraction_within_epsilon.at({"A", 0}), 0.01);
}

TEST(Convergence, InsufficientData) {
  EXPECT_THROW(check_convergence(coin_law(0.5, 19999, 1)), InsufficientDataError);
  EXPECT_NO_THROW(check_convergence(coin_law(0.5, 20000, 1)));
}

TEST(Convergence, PartialBlockExcluded) {
  LawParams p;
  p.block_size = 10;
  auto law = FactualLaw::for_observable("a", 2, p);
  for (int i = 0; i < 30; ++i) law.record_index(0);
  for (int i = 0; i < 9; ++i) law.record_index(1);
  const auto v = check_convergence(law);
  EXPECT_TRUE(v.stable);
  EXPECT_EQ(v.pooled_frequencies.at({"a", 0}), 1.0);
}

TEST(Convergence, VerdictInvariantHolds) {
  Rng rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    LawParams p;
    p.block_size = 50;
    p.epsilon = 0.05 + 0.1 * rng.uniform();
    p.delta = 0.02 + 0.3 * rng.uniform();
    auto law = FactualLaw::for_observable("x", 3, p);
    for (int i = 0; i < 1000; ++i) law.record_index(rng.uniform() < 0.2 ? 0 : (rng.uniform() < 0.5 ? 1 : 2));
    const auto v = check_convergence(law);
    bool all = true;
    for (const auto& [l, f] : v.per_label_fraction_within_epsilon) all = all && f >= 1.0 - p.delta;
    EXPECT_EQ(v.stable, all);
    const auto again = check_convergence(law);
    EXPECT_EQ(again.stable, v.stable);
    EXPECT_EQ(again.worst_deviation, v.worst_deviation);
  }
}

TEST(Merge, CountWeightedPooledMean) {
  LawParams p;
  p.block_size = 100;
  auto a = coin_law(0.3, 1000, 1, p);
  auto b = coin_law(0.6, 3000, 2, p);
  const auto m = merge(a, b);
  const auto fa = frequencies(a), fb = frequencies(b), fm = frequencies(m);
  EXPECT_NEAR(fm[0], (1000 * fa[0] + 3000 * fb[0]) / 4000, 1e-15);
  EXPECT_EQ(m.blocks().size(), 40u);
}

TEST(Merge, AssociativeCommutativeUpToBlockOrder) {
  LawParams p;
  p.block_size = 7;
  Rng rng(3);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<FactualLaw> laws;
    for (int i = 0; i < 3; ++i) laws.push_back(coin_law(rng.uniform(), rng() % 40, rng(), p));
    const auto l = merge(merge(laws[0], laws[1]), laws[2]);
    const auto r = merge(laws[0], merge(laws[1], laws[2]));
    const auto c = merge(laws[1], laws[0]);
    EXPECT_EQ(l.counts(), r.counts());
    EXPECT_EQ(l.n_total(), r.n_total());
    EXPECT_EQ(l.blocks(), r.blocks());
    EXPECT_EQ(c.counts(), merge(laws[0], laws[1]).counts());
    auto sorted = [](std::vector<BlockCounts> b) {
      std::sort(b.begin(), b.end());
      return b;
    };
    EXPECT_EQ(sorted(c.blocks()), sorted(merge(laws[0], laws[1]).blocks()));
    // bookkeeping invariants survive
    EXPECT_NO_THROW(FactualLaw::from_parts(l.spectrum(), p, l.counts(), l.blocks(), l.open_block(), l.unblocked()));
  }
}

TEST(Merge, RejectsDifferentSpectra) {
  EXPECT_THROW(merge(FactualLaw::for_observable("a", 2), FactualLaw::for_observable("b", 2)), SpectrumMismatchError);
}

TEST(FromParts, RejectsBrokenInvariants) {
  LawParams p;
  p.block_size = 2;
  const auto spec = FactualLaw::for_observable("a", 2, p).spectrum();
  EXPECT_THROW(FactualLaw::from_parts(spec, p, {1, 1}, {{1, 0}}, {0, 0}), InvariantViolationError);
  EXPECT_THROW(FactualLaw::from_parts(spec, p, {3, 0}, {{1, 1}}, {1, 0}), InvariantViolationError);
  EXPECT_NO_THROW(FactualLaw::from_parts(spec, p, {2, 1}, {{1, 1}}, {1, 0}));
}

TEST(Labels, ParseRoundTrip) {
  const OutcomeLabel l{"spin:x", 12};
  EXPECT_EQ(OutcomeLabel::parse(l.str()), l);
}
