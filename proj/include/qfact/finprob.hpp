#pragma once

// Finite (epsilon, delta, N0)-probability laws built from coded outcomes.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qfact/error.hpp"

namespace qfact::finprob {

/// One point of an observable's spectrum: observable name + eigenvalue index.
struct OutcomeLabel {
  std::string observable;
  int index = 0;

  auto operator<=>(const OutcomeLabel&) const = default;

  /// "A:3"
  std::string str() const { return observable + ":" + std::to_string(index); }

  static OutcomeLabel parse(const std::string& s) {
    const auto pos = s.rfind(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == s.size())
      throw UnknownLabelError("malformed outcome label '" + s + "'");
    try {
      std::size_t used = 0;
      const int idx = std::stoi(s.substr(pos + 1), &used);
      if (used != s.size() - pos - 1) throw std::invalid_argument(s);
      return {s.substr(0, pos), idx};
    } catch (const std::logic_error&) {
      throw UnknownLabelError("malformed outcome label '" + s + "'");
    }
  }
};

struct LawParams {
  std::uint64_t block_size = 10000;  // N0
  double epsilon = 0.02;
  double delta = 0.05;

  bool operator==(const LawParams&) const = default;

  void validate() const {
    if (block_size == 0) throw InvalidArgumentError("block size N0 must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw InvalidArgumentError("epsilon must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0))
      throw InvalidArgumentError("delta must lie in (0,1)");
  }
};

using BlockCounts = std::vector<std::uint64_t>;

/// Relative-frequency law over a finite spectrum, with the trial stream
/// partitioned into consecutive blocks of N0 trials.
///
/// Counts are stored aligned with spectrum(). Complete blocks each hold
/// exactly N0 trials; the open block holds fewer. Trials that came from
/// merging two open blocks whose combined size reached N0 cannot be placed
/// in a block without knowing their order; they are kept in counts() but
/// tallied under unblocked() and never enter stability checks.
class FactualLaw {
 public:
  FactualLaw() = default;

  explicit FactualLaw(std::vector<OutcomeLabel> spectrum, LawParams params = {})
      : spectrum_(std::move(spectrum)),
        params_(params),
        counts_(spectrum_.size(), 0),
        open_(spectrum_.size(), 0) {
    params_.validate();
    if (spectrum_.empty()) throw InvalidArgumentError("empty spectrum");
    auto sorted = spectrum_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidArgumentError("duplicate label in spectrum");
  }

  /// Spectrum {name:0, ..., name:dim-1}.
  static FactualLaw for_observable(const std::string& name, std::size_t dim,
                                   LawParams params = {}) {
    std::vector<OutcomeLabel> spec;
    spec.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) spec.push_back({name, static_cast<int>(j)});
    return FactualLaw(std::move(spec), params);
  }

  /// Rebuilds a law from stored parts, checking every invariant.
  static FactualLaw from_parts(std::vector<OutcomeLabel> spectrum, LawParams params,
                               BlockCounts counts, std::vector<BlockCounts> blocks,
                               BlockCounts open_block, std::uint64_t unblocked = 0) {
    FactualLaw law(std::move(spectrum), params);
    const auto k = law.spectrum_.size();
    auto check_len = [k](const BlockCounts& c, const char* what) {
      if (c.size() != k)
        throw InvariantViolationError(std::string(what) + " length differs from spectrum");
    };
    check_len(counts, "counts");
    check_len(open_block, "open block");
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    BlockCounts in_blocks(k, 0);
    for (const auto& b : blocks) {
      check_len(b, "block");
      std::uint64_t s = 0;
      for (std::size_t i = 0; i < k; ++i) {
        s += b[i];
        in_blocks[i] += b[i];
      }
      if (s != params.block_size)
        throw InvariantViolationError("complete block does not hold N0 trials");
    }
    std::uint64_t open_size = 0;
    for (std::size_t i = 0; i < k; ++i) {
      open_size += open_block[i];
      in_blocks[i] += open_block[i];
      if (in_blocks[i] > counts[i])
        throw InvariantViolationError("block history exceeds label count");
    }
    if (open_size >= params.block_size)
      throw InvariantViolationError("open block is not partial");
    std::uint64_t blocked = open_size + blocks.size() * params.block_size;
    if (blocked + unblocked != total)
      throw InvariantViolationError("block history does not account for n_total");
    law.counts_ = std::move(counts);
    law.blocks_ = std::move(blocks);
    law.open_ = std::move(open_block);
    law.open_size_ = open_size;
    law.unblocked_ = unblocked;
    law.n_total_ = total;
    return law;
  }

  std::size_t index_of(const OutcomeLabel& label) const {
    auto it = std::find(spectrum_.begin(), spectrum_.end(), label);
    if (it == spectrum_.end())
      throw UnknownLabelError("outcome '" + label.str() + "' is not in the spectrum");
    return static_cast<std::size_t>(it - spectrum_.begin());
  }

  void record(const OutcomeLabel& label) { record_index(index_of(label)); }

  /// Records one outcome given its position in spectrum().
  void record_index(std::size_t i) {
    if (i >= spectrum_.size())
      throw UnknownLabelError("outcome index " + std::to_string(i) + " outside spectrum");
    ++counts_[i];
    ++n_total_;
    ++open_[i];
    if (++open_size_ == params_.block_size) {
      blocks_.push_back(open_);
      std::fill(open_.begin(), open_.end(), 0);
      open_size_ = 0;
    }
  }

  std::uint64_t count(const OutcomeLabel& label) const { return counts_[index_of(label)]; }

  const std::vector<OutcomeLabel>& spectrum() const noexcept { return spectrum_; }
  const BlockCounts& counts() const noexcept { return counts_; }
  std::uint64_t n_total() const noexcept { return n_total_; }
  const LawParams& params() const noexcept { return params_; }
  const std::vector<BlockCounts>& blocks() const noexcept { return blocks_; }
  const BlockCounts& open_block() const noexcept { return open_; }
  std::uint64_t open_block_size() const noexcept { return open_size_; }
  std::uint64_t unblocked() const noexcept { return unblocked_; }

  bool operator==(const FactualLaw&) const = default;

 private:
  friend FactualLaw merge(const FactualLaw& a, const FactualLaw& b);

  std::vector<OutcomeLabel> spectrum_;
  LawParams params_;
  BlockCounts counts_;
  std::uint64_t n_total_ = 0;
  std::vector<BlockCounts> blocks_;
  BlockCounts open_;
  std::uint64_t open_size_ = 0;
  std::uint64_t unblocked_ = 0;
};

inline FactualLaw accumulate(FactualLaw law, const OutcomeLabel& outcome) {
  law.record(outcome);
  return law;
}

/// counts / n_total, aligned with law.spectrum().
inline std::vector<double> frequencies(const FactualLaw& law) {
  if (law.n_total() == 0) throw EmptyLawError("frequencies of an empty law");
  const double n = static_cast<double>(law.n_total());
  std::vector<double> f;
  f.reserve(law.counts().size());
  for (auto c : law.counts()) f.push_back(static_cast<double>(c) / n);
  return f;
}

/// Adds counts and concatenates block histories (a's blocks first).
inline FactualLaw merge(const FactualLaw& a, const FactualLaw& b) {
  if (a.spectrum_ != b.spectrum_)
    throw SpectrumMismatchError("cannot merge laws over different spectra");
  if (a.params_ != b.params_)
    throw SpectrumMismatchError("cannot merge laws with different (epsilon, delta, N0)");
  FactualLaw out = a;
  for (std::size_t i = 0; i < out.counts_.size(); ++i) out.counts_[i] += b.counts_[i];
  out.n_total_ += b.n_total_;
  out.blocks_.insert(out.blocks_.end(), b.blocks_.begin(), b.blocks_.end());
  out.unblocked_ += b.unblocked_;
  if (a.open_size_ + b.open_size_ < a.params_.block_size) {
    for (std::size_t i = 0; i < out.open_.size(); ++i) out.open_[i] += b.open_[i];
    out.open_size_ += b.open_size_;
  } else {
    out.unblocked_ += a.open_size_ + b.open_size_;
    std::fill(out.open_.begin(), out.open_.end(), 0);
    out.open_size_ = 0;
  }
  return out;
}

struct StabilityVerdict {
  bool stable = false;
  std::map<OutcomeLabel, double> per_label_fraction_within_epsilon;
  double worst_deviation = 0.0;
  std::map<OutcomeLabel, double> pooled_frequencies;
  std::size_t complete_blocks = 0;
};

/// Block estimator of the meta-probability: for each label, the fraction of
/// complete blocks whose frequency lies within epsilon of the frequency
/// pooled over all complete blocks. Stable iff every fraction >= 1 - delta.
inline StabilityVerdict check_convergence(const FactualLaw& law) {
  const auto& blocks = law.blocks();
  if (blocks.size() < 2)
    throw InsufficientDataError("stability needs at least 2 complete blocks, have " +
                                std::to_string(blocks.size()));
  const auto& p = law.params();
  const std::size_t k = law.spectrum().size();
  const double n0 = static_cast<double>(p.block_size);
  const double nb = static_cast<double>(blocks.size());

  std::vector<double> pooled(k, 0.0);
  {
    std::vector<std::uint64_t> sum(k, 0);
    for (const auto& b : blocks)
      for (std::size_t i = 0; i < k; ++i) sum[i] += b[i];
    for (std::size_t i = 0; i < k; ++i)
      pooled[i] = static_cast<double>(sum[i]) / (nb * n0);
  }

  StabilityVerdict v;
  v.complete_blocks = blocks.size();
  v.stable = true;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t within = 0;
    for (const auto& b : blocks) {
      const double dev = std::abs(static_cast<double>(b[i]) / n0 - pooled[i]);
      v.worst_deviation = std::max(v.worst_deviation, dev);
      if (dev <= p.epsilon) ++within;
    }
    const double frac = static_cast<double>(within) / nb;
    const auto& label = law.spectrum()[i];
    v.per_label_fraction_within_epsilon[label] = frac;
    v.pooled_frequencies[label] = pooled[i];
    if (frac < 1.0 - p.delta) v.stable = false;
  }
  return v;
}

}  // namespace qfact::finprob
