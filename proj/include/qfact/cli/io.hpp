#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfact/error.hpp"
#include "qfact/finprob.hpp"
#include "qfact/histogram.hpp"
#include "qfact/hilbert.hpp"
#include "qfact/rng.hpp"

namespace qfact::cli {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; locale independent.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

/// JSON has no NaN/inf; they become null.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Minimal CSV builder: ',' separators, LF line endings.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }

  template <typename... T>
  Csv& row(const T&... cells) {
    std::vector<std::string> r{cell(cells)...};
    if (r.size() != cols_) throw InvalidArgumentError("CSV row has the wrong number of cells");
    row_strings(r);
    return *this;
  }

  const std::string& str() const noexcept { return out_; }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double x) { return fmt(x); }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I i) {
    return std::to_string(i);
  }

  void row_strings(const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i].find_first_of(",\"\n") != std::string::npos)
        throw InvalidArgumentError("CSV cell contains a separator: " + r[i]);
      out_ += (i ? "," : "") + r[i];
    }
    out_ += '\n';
  }

  std::size_t cols_;
  std::string out_;
};

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(',', start);
      cells.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double parse_double(const std::string& s) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw SchemaError("not a number: '" + s + "'");
  return x;
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw SchemaError("not a non-negative integer: '" + s + "'");
  return x;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// File names derived from user-chosen names keep [A-Za-z0-9._-] only.
inline std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-') ? c : '_';
  return out.empty() ? "_" : out;
}

// ---------------------------------------------------------------------------
// Complex numbers and matrices: [re, im], a bare real is accepted too.

inline hilbert::Complex to_complex(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw SchemaError(where + ": expected a complex number [re, im]");
}

inline json from_complex(hilbert::Complex z) { return json::array({num(z.real()), num(z.imag())}); }

inline hilbert::CVector to_cvector(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SchemaError(where + ": expected a non-empty array of complex numbers");
  hilbert::CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = to_complex(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

inline json from_cvector(const hilbert::CVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(from_complex(v(i)));
  return a;
}

/// Row-major array of rows.
inline hilbert::CMatrix to_cmatrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SchemaError(where + ": expected a non-empty array of rows");
  const auto n = j.size();
  const auto m = j[0].is_array() ? j[0].size() : 0;
  if (m == 0) throw SchemaError(where + ": rows must be non-empty arrays");
  hilbert::CMatrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != m) throw SchemaError(where + ": ragged matrix");
    for (std::size_t c = 0; c < m; ++c)
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          to_complex(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return a;
}

inline json from_cmatrix(const hilbert::CMatrix& a) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) rows.push_back(from_cvector(a.row(r).transpose()));
  return rows;
}

// ---------------------------------------------------------------------------
// Factual laws

inline json law_params_to_json(const finprob::LawParams& p) {
  return {{"block_size", p.block_size}, {"epsilon", p.epsilon}, {"delta", p.delta}};
}

inline json law_to_json(const finprob::FactualLaw& law) {
  json spec = json::array();
  for (const auto& l : law.spectrum()) spec.push_back(l.str());
  json freq = json::array();
  if (law.n_total() > 0)
    for (double f : finprob::frequencies(law)) freq.push_back(f);
  return {{"spectrum", spec},
          {"params", law_params_to_json(law.params())},
          {"n_total", law.n_total()},
          {"counts", law.counts()},
          {"frequencies", freq},
          {"blocks", law.blocks()},
          {"open_block", law.open_block()},
          {"unblocked", law.unblocked()}};
}

inline finprob::LawParams law_params_from_json(const json& j, finprob::LawParams p = {}) {
  try {
    if (j.contains("block_size")) p.block_size = j.at("block_size").get<std::uint64_t>();
    if (j.contains("epsilon")) p.epsilon = j.at("epsilon").get<double>();
    if (j.contains("delta")) p.delta = j.at("delta").get<double>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("law parameters: ") + e.what());
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw SchemaError(std::string("law parameters: ") + e.what());
  }
  return p;
}

inline finprob::FactualLaw law_from_json(const json& j) {
  try {
    std::vector<finprob::OutcomeLabel> spec;
    for (const auto& s : j.at("spectrum")) spec.push_back(finprob::OutcomeLabel::parse(s.get<std::string>()));
    const auto params = law_params_from_json(j.value("params", json::object()));
    const auto counts = j.at("counts").get<finprob::BlockCounts>();
    const auto blocks = j.value("blocks", std::vector<finprob::BlockCounts>{});
    const auto open = j.value("open_block", finprob::BlockCounts(spec.size(), 0));
    std::uint64_t unblocked = 0;
    if (j.contains("unblocked")) {
      unblocked = j.at("unblocked").get<std::uint64_t>();
    } else if (!j.contains("blocks")) {
      for (auto c : counts) unblocked += c;  // counts only: no block history
    }
    return finprob::FactualLaw::from_parts(std::move(spec), params, counts, blocks, open, unblocked);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("law: ") + e.what());
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("law: ") + e.what());
  }
}

/// label,count,frequency
inline std::string law_to_csv(const finprob::FactualLaw& law) {
  Csv csv({"label", "count", "frequency"});
  const auto f = law.n_total() > 0 ? finprob::frequencies(law) : std::vector<double>(law.spectrum().size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) csv.row(law.spectrum()[i].str(), law.counts()[i], f[i]);
  return csv.str();
}

/// Counts survive the round trip; the block history does not (it is kept in
/// the JSON form), so every trial comes back as unblocked.
inline finprob::FactualLaw law_from_csv(const std::string& text, finprob::LawParams params = {}) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"label", "count", "frequency"})
    throw SchemaError("law CSV: expected header label,count,frequency");
  std::vector<finprob::OutcomeLabel> spec;
  finprob::BlockCounts counts;
  std::uint64_t total = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3) throw SchemaError("law CSV: row " + std::to_string(r) + " needs 3 cells");
    spec.push_back(finprob::OutcomeLabel::parse(rows[r][0]));
    counts.push_back(parse_u64(rows[r][1]));
    total += counts.back();
  }
  const auto k = spec.size();
  return finprob::FactualLaw::from_parts(std::move(spec), params, counts, {}, finprob::BlockCounts(k, 0), total);
}

inline json verdict_to_json(const finprob::StabilityVerdict& v) {
  json frac = json::object(), pooled = json::object();
  for (const auto& [l, f] : v.per_label_fraction_within_epsilon) frac[l.str()] = f;
  for (const auto& [l, f] : v.pooled_frequencies) pooled[l.str()] = f;
  return {{"stable", v.stable},
          {"complete_blocks", v.complete_blocks},
          {"worst_deviation", v.worst_deviation},
          {"per_label_fraction_within_epsilon", frac},
          {"pooled_frequencies", pooled}};
}

/// bin_low,bin_high,mass[,extra columns]
inline std::string histogram_csv(const Histogram& h, const std::vector<std::pair<std::string, std::vector<double>>>& extra = {}) {
  std::vector<std::string> header{"bin_low", "bin_high", "mass"};
  for (const auto& e : extra) header.push_back(e.first);
  Csv csv(header);
  const auto m = h.mass();
  std::string out = csv.str();
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out += fmt(h.bin_low(i)) + "," + fmt(h.bin_high(i)) + "," + fmt(m[i]);
    for (const auto& e : extra) out += "," + fmt(e.second.at(i));
    out += '\n';
  }
  return out;
}

}  // namespace qfact::cli
