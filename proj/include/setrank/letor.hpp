#ifndef SETRANK_LETOR_HPP
#define SETRANK_LETOR_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "setrank/error.hpp"

namespace setrank {

inline constexpr int kMaxLabel = 4;

/// One parsed line of LETOR / SVMlight ranking data.
struct LetorLine {
  int label = 0;
  std::string qid;
  std::map<std::size_t, double> features;  // 1-based feature id -> value
  std::string comment;
};

/**
 * All documents retrieved for one query.
 *
 * `features` is row-major N x feature_count. `initial_ranks[r][i]` is the
 * 1-based position of document i in initial ranking r. `lines` holds each
 * document's 0-based position among the document lines of the source file
 * (blank lines do not count), which is how sidecar score files and score
 * output stay aligned with the data.
 */
struct QueryGroup {
  std::string qid;
  std::size_t feature_count = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> initial_ranks;
  std::vector<std::size_t> lines;

  std::size_t size() const noexcept { return labels.size(); }
  double feature(std::size_t doc, std::size_t f) const { return features[doc * feature_count + f]; }
  bool has_relevant() const {
    return std::any_of(labels.begin(), labels.end(), [](int y) { return y > 0; });
  }
};

struct Dataset {
  std::vector<QueryGroup> groups;
  std::size_t feature_count = 0;
  std::string split;

  std::size_t document_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
  std::size_t max_group_size() const {
    std::size_t n = 0;
    for (const auto& g : groups) n = std::max(n, g.size());
    return n;
  }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename Int>
inline bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses `<label> qid:<id> (<fid>:<val>)* (# comment)?`. `line_number` only
/// feeds error messages.
inline LetorLine parse_letor_line(std::string_view line, std::size_t line_number = 0) {
  LetorLine out;
  std::string_view body = line;
  if (auto hash = line.find('#'); hash != std::string_view::npos) {
    out.comment = std::string(detail::trim(line.substr(hash + 1)));
    body = line.substr(0, hash);
  }
  auto tokens = detail::split_ws(body);
  if (tokens.size() < 2) throw ParseError("expected '<label> qid:<id> ...'", line_number);

  if (!detail::parse_int(tokens[0], out.label)) {
    throw ParseError("invalid label '" + std::string(tokens[0]) + "'", line_number);
  }
  if (out.label < 0 || out.label > kMaxLabel) {
    throw ParseError("label " + std::to_string(out.label) + " outside 0.." +
                         std::to_string(kMaxLabel),
                     line_number);
  }
  if (tokens[1].substr(0, 4) != "qid:" || tokens[1].size() == 4) {
    throw ParseError("missing qid:<id> token", line_number);
  }
  out.qid = std::string(tokens[1].substr(4));

  for (std::size_t t = 2; t < tokens.size(); ++t) {
    const auto tok = tokens[t];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError("malformed feature token '" + std::string(tok) + "'", line_number);
    }
    long long fid = 0;
    double value = 0.0;
    if (!detail::parse_int(tok.substr(0, colon), fid)) {
      throw ParseError("malformed feature id in '" + std::string(tok) + "'", line_number);
    }
    if (fid < 1) {
      throw ParseError("feature id " + std::to_string(fid) + " must be >= 1", line_number);
    }
    if (!detail::parse_double(tok.substr(colon + 1), value)) {
      throw ParseError("malformed feature value in '" + std::string(tok) + "'", line_number);
    }
    if (!out.features.emplace(static_cast<std::size_t>(fid), value).second) {
      throw ParseError("duplicate feature id " + std::to_string(fid), line_number);
    }
  }
  return out;
}

/// Groups parsed lines by qid value (first-appearance order) and densifies
/// them to `expected_features` columns, or to the largest fid seen.
inline Dataset build_dataset(const std::vector<LetorLine>& lines,
                             std::optional<std::size_t> expected_features = std::nullopt,
                             std::string split = {}) {
  if (lines.empty()) throw DataError("dataset has no documents");
  std::size_t max_fid = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!lines[i].features.empty()) max_fid = std::max(max_fid, lines[i].features.rbegin()->first);
    if (expected_features && max_fid > *expected_features) {
      throw ParseError("feature id " + std::to_string(max_fid) + " exceeds expected count " +
                           std::to_string(*expected_features),
                       i + 1);
    }
  }
  Dataset ds;
  ds.split = std::move(split);
  ds.feature_count = expected_features.value_or(max_fid);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    auto [it, fresh] = index.emplace(l.qid, ds.groups.size());
    if (fresh) {
      QueryGroup g;
      g.qid = l.qid;
      g.feature_count = ds.feature_count;
      ds.groups.push_back(std::move(g));
    }
    auto& g = ds.groups[it->second];
    const std::size_t base = g.features.size();
    g.features.resize(base + ds.feature_count, 0.0);
    for (auto [fid, value] : l.features) g.features[base + fid - 1] = value;
    g.labels.push_back(l.label);
    g.lines.push_back(i);
  }
  return ds;
}

inline Dataset read_dataset(std::istream& in,
                            std::optional<std::size_t> expected_features = std::nullopt,
                            std::string split = {}) {
  std::vector<LetorLine> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    lines.push_back(parse_letor_line(line, number));
  }
  return build_dataset(lines, expected_features, std::move(split));
}

inline Dataset load_dataset(const std::string& path,
                            std::optional<std::size_t> expected_features = std::nullopt,
                            std::string split = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  try {
    return read_dataset(in, expected_features, std::move(split));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  std::vector<std::pair<std::size_t, std::pair<std::size_t, std::size_t>>> order;
  for (std::size_t g = 0; g < ds.groups.size(); ++g)
    for (std::size_t i = 0; i < ds.groups[g].size(); ++i)
      order.push_back({ds.groups[g].lines[i], {g, i}});
  std::sort(order.begin(), order.end());
  char buf[64];
  for (const auto& [line, gi] : order) {
    const auto& g = ds.groups[gi.first];
    out << g.labels[gi.second] << " qid:" << g.qid;
    for (std::size_t f = 0; f < g.feature_count; ++f) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, g.feature(gi.second, f));
      out << ' ' << (f + 1) << ':' << std::string_view(buf, p - buf);
    }
    out << '\n';
  }
}

/// Per-feature min-max transform fitted on a training split.
struct FeatureScaler {
  std::vector<double> shift;
  std::vector<double> scale;
  double clip_low = -1.0;
  double clip_high = 2.0;
};

inline FeatureScaler fit_scaler(const Dataset& train) {
  const std::size_t e = train.feature_count;
  std::vector<double> lo(e, INFINITY), hi(e, -INFINITY);
  for (const auto& g : train.groups)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t f = 0; f < e; ++f) {
        lo[f] = std::min(lo[f], g.feature(i, f));
        hi[f] = std::max(hi[f], g.feature(i, f));
      }
  FeatureScaler s;
  s.shift.resize(e);
  s.scale.resize(e);
  for (std::size_t f = 0; f < e; ++f) {
    if (!std::isfinite(lo[f])) lo[f] = hi[f] = 0.0;
    s.shift[f] = lo[f];
    const double range = hi[f] - lo[f];
    s.scale[f] = range > 0.0 ? range : 1.0;
  }
  return s;
}

inline Dataset apply_scaler(Dataset ds, const FeatureScaler& s) {
  if (s.shift.size() != ds.feature_count) {
    throw DimensionError("apply_scaler: scaler fitted on " + std::to_string(s.shift.size()) +
                         " features, dataset has " + std::to_string(ds.feature_count));
  }
  for (auto& g : ds.groups)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t f = 0; f < ds.feature_count; ++f) {
        double& x = g.features[i * ds.feature_count + f];
        x = std::clamp((x - s.shift[f]) / s.scale[f], s.clip_low, s.clip_high);
      }
  return ds;
}

/// 1-based rank positions by descending score; ties keep document order.
inline std::vector<std::size_t> ranks_from_scores(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
  return ranks;
}

inline bool is_rank_permutation(const std::vector<std::size_t>& ranks) {
  std::vector<bool> seen(ranks.size(), false);
  for (std::size_t r : ranks) {
    if (r < 1 || r > ranks.size() || seen[r - 1]) return false;
    seen[r - 1] = true;
  }
  return true;
}

/// Keeps the top `max_docs` documents of each group, ordered either by file
/// order (`by_ranking` empty) or by the given initial ranking. Kept documents
/// stay in their original relative order; every initial ranking is re-normalized
/// to 1..N'.
inline Dataset truncate_per_query(Dataset ds, std::size_t max_docs,
                                  std::optional<std::size_t> by_ranking = std::nullopt) {
  if (max_docs < 1) throw ContractError("truncate_per_query: max_docs must be >= 1");
  for (auto& g : ds.groups) {
    if (by_ranking && *by_ranking >= g.initial_ranks.size()) {
      throw DataError("truncate_per_query: query " + g.qid + " has no initial ranking " +
                      std::to_string(*by_ranking));
    }
    if (g.size() <= max_docs) continue;
    std::vector<std::size_t> keep(g.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (by_ranking) {
      const auto& r = g.initial_ranks[*by_ranking];
      std::stable_sort(keep.begin(), keep.end(),
                       [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
    }
    keep.resize(max_docs);
    std::sort(keep.begin(), keep.end());

    QueryGroup t;
    t.qid = g.qid;
    t.feature_count = g.feature_count;
    for (std::size_t i : keep) {
      t.features.insert(t.features.end(), g.features.begin() + i * g.feature_count,
                        g.features.begin() + (i + 1) * g.feature_count);
      t.labels.push_back(g.labels[i]);
      t.lines.push_back(g.lines[i]);
    }
    for (const auto& r : g.initial_ranks) {
      std::vector<double> neg;
      for (std::size_t i : keep) neg.push_back(-static_cast<double>(r[i]));
      t.initial_ranks.push_back(ranks_from_scores(neg));
    }
    g = std::move(t);
  }
  return ds;
}

/// Reads one score per line (a sidecar aligned with dataset line order).
inline std::vector<double> read_scores(std::istream& in) {
  std::vector<double> scores;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(text, v)) {
      throw ParseError("invalid score '" + line + "'", number);
    }
    scores.push_back(v);
  }
  return scores;
}

inline std::vector<double> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file '" + path + "'");
  try {
    return read_scores(in);
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

/// Adds one initial ranking to every group from per-line scores.
inline Dataset attach_initial_ranking(Dataset ds, const std::vector<double>& scores) {
  if (scores.size() != ds.document_count()) {
    throw DataError("initial scores: " + std::to_string(scores.size()) + " values for " +
                    std::to_string(ds.document_count()) + " documents");
  }
  for (auto& g : ds.groups) {
    std::vector<double> s;
    s.reserve(g.size());
    for (std::size_t line : g.lines) {
      if (line >= scores.size()) throw DataError("initial scores: line index out of range");
      s.push_back(scores[line]);
    }
    g.initial_ranks.push_back(ranks_from_scores(s));
  }
  return ds;
}

/// Same documents reordered: document i of the result is document perm[i] of `g`.
inline QueryGroup permute_group(const QueryGroup& g, const std::vector<std::size_t>& perm) {
  if (perm.size() != g.size()) throw DimensionError("permute_group: permutation size mismatch");
  QueryGroup out;
  out.qid = g.qid;
  out.feature_count = g.feature_count;
  out.initial_ranks.resize(g.initial_ranks.size());
  for (std::size_t src : perm) {
    out.features.insert(out.features.end(), g.features.begin() + src * g.feature_count,
                        g.features.begin() + (src + 1) * g.feature_count);
    out.labels.push_back(g.labels[src]);
    out.lines.push_back(g.lines.empty() ? src : g.lines[src]);
    for (std::size_t r = 0; r < g.initial_ranks.size(); ++r)
      out.initial_ranks[r].push_back(g.initial_ranks[r][src]);
  }
  return out;
}

}  // namespace setrank

#endif  // SETRANK_LETOR_HPP
