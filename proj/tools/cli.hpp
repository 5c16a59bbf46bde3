// Command implementations for the `setrank` binary. Kept in a header so the
// test suite can drive commands in-process.
#ifndef SETRANK_TOOLS_CLI_HPP
#define SETRANK_TOOLS_CLI_HPP

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "setrank/checkpoint.hpp"
#include "setrank/config.hpp"
#include "setrank/experiments.hpp"
#include "setrank/letor.hpp"
#include "setrank/metrics.hpp"
#include "setrank/model.hpp"
#include "setrank/selfcheck.hpp"
#include "setrank/training.hpp"

namespace setrank::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Bad invocation: missing required input, conflicting flags.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(parse(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_same_v<T, std::string>) s += v[i];
    else if constexpr (std::is_same_v<T, double>) s += shortest(v[i]);
    else if constexpr (std::is_same_v<T, BlockKind>) s += to_string(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

/// Everything a command needs, from a key=value file plus flag overrides.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  bool ordinal_explicit = false;

  std::string data = "files";  // or "synthetic"
  std::string train_path, valid_path, test_path, out_dir, scaler_path;
  std::vector<std::string> checkpoints;
  std::vector<std::string> init_scores;  // SPLIT:PATH or PATH
  std::size_t max_docs = 0;              // 0 keeps every document
  bool scale_features = false;

  std::uint64_t synth_seed = 1;
  std::size_t synth_train_queries = 500;
  std::size_t synth_valid_queries = 100;
  std::size_t synth_test_queries = 100;
  std::size_t synth_docs = 20;
  std::size_t synth_features = 10;
  std::vector<double> synth_ranking_noise;  // one initial ranking per entry

  std::vector<std::size_t> pair_counts{0, 5, 10, 20};
  std::size_t repeats = 1;

  std::vector<BlockKind> kinds{BlockKind::msab, BlockKind::imsab};
  std::vector<std::size_t> train_sizes{10};
  std::vector<std::size_t> test_sizes{40};
  std::vector<std::uint64_t> seeds{1};

  /// Applies one key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& v) {
    using namespace config_value;
    if (key == "use_ordinal") ordinal_explicit = true;
    if (set_model_config(model, key, v) || set_train_config(train, key, v)) return;
    if (key == "data") {
      if (v != "files" && v != "synthetic") throw ConfigError("data: expected files or synthetic");
      data = v;
    } else if (key == "train") train_path = v;
    else if (key == "valid") valid_path = v;
    else if (key == "test") test_path = v;
    else if (key == "out_dir") out_dir = v;
    else if (key == "scaler") scaler_path = v;
    else if (key == "checkpoint") checkpoints = split_list(v);
    else if (key == "init_scores") init_scores = split_list(v);
    else if (key == "max_docs") max_docs = to_size(key, v);
    else if (key == "scale_features") scale_features = to_bool(key, v);
    else if (key == "synth_seed") synth_seed = to_u64(key, v);
    else if (key == "synth_train_queries") synth_train_queries = to_size(key, v);
    else if (key == "synth_valid_queries") synth_valid_queries = to_size(key, v);
    else if (key == "synth_test_queries") synth_test_queries = to_size(key, v);
    else if (key == "synth_docs") synth_docs = to_size(key, v);
    else if (key == "synth_features") synth_features = to_size(key, v);
    else if (key == "synth_ranking_noise") synth_ranking_noise = parse_list<double>(key, v, to_double);
    else if (key == "pair_counts") pair_counts = parse_list<std::size_t>(key, v, to_size);
    else if (key == "repeats") repeats = to_size(key, v);
    else if (key == "kinds")
      kinds = parse_list<BlockKind>(key, v, [](const std::string&, const std::string& s) { return parse_block_kind(s); });
    else if (key == "train_sizes") train_sizes = parse_list<std::size_t>(key, v, to_size);
    else if (key == "test_sizes") test_sizes = parse_list<std::size_t>(key, v, to_size);
    else if (key == "seeds") seeds = parse_list<std::uint64_t>(key, v, to_u64);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  /// Resolved snapshot; feeding it back through --config replays the run.
  std::vector<std::pair<std::string, std::string>> entries() const {
    using config_value::from_bool;
    auto out = model_config_entries(model);
    for (auto& e : train_config_entries(train)) out.push_back(e);
    std::vector<std::pair<std::string, std::string>> run{
        {"data", data},
        {"train", train_path},
        {"valid", valid_path},
        {"test", test_path},
        {"out_dir", out_dir},
        {"scaler", scaler_path},
        {"checkpoint", join(checkpoints)},
        {"init_scores", join(init_scores)},
        {"max_docs", std::to_string(max_docs)},
        {"scale_features", from_bool(scale_features)},
        {"synth_seed", std::to_string(synth_seed)},
        {"synth_train_queries", std::to_string(synth_train_queries)},
        {"synth_valid_queries", std::to_string(synth_valid_queries)},
        {"synth_test_queries", std::to_string(synth_test_queries)},
        {"synth_docs", std::to_string(synth_docs)},
        {"synth_features", std::to_string(synth_features)},
        {"synth_ranking_noise", join(synth_ranking_noise)},
        {"pair_counts", join(pair_counts)},
        {"repeats", std::to_string(repeats)},
        {"kinds", join(kinds)},
        {"train_sizes", join(train_sizes)},
        {"test_sizes", join(test_sizes)},
        {"seeds", join(seeds)},
    };
    out.insert(out.end(), run.begin(), run.end());
    return out;
  }
};

inline void write_snapshot(const RunConfig& rc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# resolved configuration\n";
  for (const auto& [k, v] : rc.entries()) out << k << " = " << v << '\n';
}

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

/// Init-score files for one split, in source order.
inline std::vector<std::string> scores_for(const RunConfig& rc, const std::string& split,
                                           bool bare_allowed) {
  std::vector<std::string> out;
  for (const auto& spec : rc.init_scores) {
    const auto colon = spec.find(':');
    const std::string prefix = colon == std::string::npos ? "" : spec.substr(0, colon);
    if (prefix == "train" || prefix == "valid" || prefix == "test") {
      if (prefix == split) out.push_back(spec.substr(colon + 1));
    } else if (bare_allowed) {
      out.push_back(spec);
    } else {
      throw UsageError("--init-scores '" + spec + "' needs a train:, valid: or test: prefix here");
    }
  }
  return out;
}

inline SynthOptions synth_options(const RunConfig& rc, Split split, std::size_t docs) {
  SynthOptions o;
  o.queries = split == Split::train   ? rc.synth_train_queries
              : split == Split::valid ? rc.synth_valid_queries
                                      : rc.synth_test_queries;
  o.docs_per_query = docs;
  o.features = rc.synth_features;
  o.ranking_noise = rc.synth_ranking_noise;
  o.qid_prefix = split == Split::train ? "train" : split == Split::valid ? "valid" : "test";
  return o;
}

inline std::uint64_t synth_split_seed(std::uint64_t seed, Split split, std::size_t docs) {
  return seed * 1000003ULL + docs * 10 + static_cast<std::uint64_t>(split);
}

inline SynthData synth_split(const RunConfig& rc, Split split, std::size_t docs, std::uint64_t seed) {
  return synth_generate(synth_options(rc, split, docs), synth_split_seed(seed, split, docs));
}

inline const char* split_name(Split s) {
  return s == Split::train ? "train" : s == Split::valid ? "valid" : "test";
}

/// Loads one split with its initial rankings, truncated to max_docs.
inline Dataset load_split(const RunConfig& rc, Split split, bool bare_scores = false) {
  const std::string name = split_name(split);
  Dataset ds;
  if (rc.data == "synthetic") {
    ds = synth_split(rc, split, rc.synth_docs, rc.synth_seed).dataset;
  } else {
    const std::string& path =
        split == Split::train ? rc.train_path : split == Split::valid ? rc.valid_path : rc.test_path;
    if (path.empty()) throw UsageError("missing --" + name + " dataset");
    ds = load_dataset(path, rc.model.input_dim ? std::optional<std::size_t>(rc.model.input_dim) : std::nullopt, name);
    for (const auto& file : scores_for(rc, name, bare_scores))
      ds = attach_initial_ranking(std::move(ds), load_scores(file));
  }
  ds.split = name;
  if (rc.max_docs > 0) {
    const bool ranked = !ds.groups.empty() && !ds.groups.front().initial_ranks.empty();
    ds = truncate_per_query(std::move(ds), rc.max_docs, ranked ? std::optional<std::size_t>(0) : std::nullopt);
  }
  return ds;
}

inline std::size_t ranking_sources_of(const Dataset& ds) {
  std::size_t n = ds.groups.empty() ? 0 : ds.groups.front().initial_ranks.size();
  for (const auto& g : ds.groups) n = std::min(n, g.initial_ranks.size());
  return n;
}

/// Fills in data-dependent model settings and checks ordinal usage.
inline void resolve_model(RunConfig& rc, const Dataset& train, bool no_ordinal) {
  auto& m = rc.model;
  if (m.input_dim == 0) m.input_dim = train.feature_count;
  if (m.input_dim != train.feature_count) {
    throw DimensionError("input_dim " + std::to_string(m.input_dim) + " but training data has " +
                         std::to_string(train.feature_count) + " features");
  }
  const std::size_t sources = ranking_sources_of(train);
  if (no_ordinal) {
    m.use_ordinal = false;
  } else if (!rc.ordinal_explicit) {
    m.use_ordinal = sources > 0;
  }
  if (m.use_ordinal) {
    if (sources == 0) throw ConfigError("use_ordinal needs initial rankings (--init-scores)");
    if (m.ranking_sources == 0) m.ranking_sources = sources;
    if (m.ranking_sources > sources) {
      throw ConfigError("ranking_sources " + std::to_string(m.ranking_sources) + " but only " +
                        std::to_string(sources) + " initial rankings were given");
    }
    if (m.n_max == 0) m.n_max = 2 * train.max_group_size();
  } else {
    m.ranking_sources = 0;
    m.n_max = 0;
  }
  m.validate();
}

inline Dataset maybe_scale(const RunConfig& rc, Dataset ds) {
  if (rc.scaler_path.empty()) return ds;
  return apply_scaler(std::move(ds), load_scaler(rc.scaler_path));
}

inline fs::path require_out_dir(const RunConfig& rc) {
  if (rc.out_dir.empty()) throw UsageError("missing --out-dir");
  fs::create_directories(rc.out_dir);
  return rc.out_dir;
}

inline Model load_model(const RunConfig& rc) {
  if (rc.checkpoints.size() != 1) throw UsageError("expected exactly one --checkpoint");
  return load_checkpoint(rc.checkpoints.front());
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline std::string log_header() { return "epoch,mean_loss,valid_ndcg10,seconds"; }

inline std::string log_row(const EpochRecord& e) {
  return std::to_string(e.epoch) + "," + shortest(e.mean_loss) + "," + shortest(e.valid_ndcg) +
         "," + fixed(e.seconds, 3);
}

inline int cmd_train(RunConfig rc, bool no_ordinal, std::ostream& out) {
  const fs::path dir = require_out_dir(rc);
  Dataset train = load_split(rc, Split::train);
  Dataset valid = load_split(rc, Split::valid);
  resolve_model(rc, train, no_ordinal);
  if (rc.scale_features) {
    const FeatureScaler s = fit_scaler(train);
    rc.scaler_path = (dir / "scaler.txt").string();
    save_scaler(s, rc.scaler_path);
    train = apply_scaler(std::move(train), s);
    valid = apply_scaler(std::move(valid), s);
  } else {
    train = maybe_scale(rc, std::move(train));
    valid = maybe_scale(rc, std::move(valid));
  }
  if (rc.model.use_ordinal && ranking_sources_of(valid) < rc.model.ranking_sources) {
    throw DataError("validation split carries fewer initial rankings than the training split");
  }
  rc.checkpoints = {(dir / "model.ckpt").string()};
  write_snapshot(rc, dir / "config.resolved.txt");

  std::ofstream log(dir / "train_log.csv");
  if (!log) throw DataError("cannot write " + (dir / "train_log.csv").string());
  log << log_header() << '\n';
  auto result = train_loop(train, valid, rc.train, rc.model, [&](const EpochRecord& e) {
    log << log_row(e) << '\n' << std::flush;
    out << "epoch " << e.epoch << "  loss " << fixed(e.mean_loss, 5) << "  valid ndcg@10 "
        << fixed(e.valid_ndcg, 5) << '\n';
  });
  save_checkpoint(result.model, rc.checkpoints.front());
  out << "best epoch " << result.report.best_epoch << "  valid ndcg@10 "
      << fixed(result.report.best_valid_ndcg, 5) << '\n';
  if (result.report.skipped_queries) {
    out << "skipped " << result.report.skipped_queries << " training queries without relevant documents\n";
  }
  out << "wrote " << rc.checkpoints.front() << '\n';
  return kOk;
}

inline Dataset load_eval_split(const RunConfig& rc, const Model& m) {
  Dataset ds = maybe_scale(rc, load_split(rc, Split::test, true));
  if (ds.feature_count != m.config.input_dim) {
    throw DimensionError("dataset has " + std::to_string(ds.feature_count) +
                         " features, checkpoint expects " + std::to_string(m.config.input_dim));
  }
  return ds;
}

inline int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const Model m = load_model(rc);
  const Dataset ds = load_eval_split(rc, m);
  const MetricReport r = evaluate(m, ds);
  std::ostringstream csv;
  csv << "metric,value\n";
  for (std::size_t i = 0; i < r.ks.size(); ++i)
    csv << "ndcg@" << r.ks[i] << ',' << fixed(r.means[i], 6) << '\n';
  csv << "queries," << r.query_count() << '\n' << "excluded," << r.excluded.size() << '\n';
  out << csv.str();
  if (!rc.out_dir.empty()) {
    fs::create_directories(rc.out_dir);
    std::ofstream f(fs::path(rc.out_dir) / "metrics.csv");
    f << csv.str();
  }
  return kOk;
}

inline int cmd_score(const RunConfig& rc, std::ostream& out) {
  if (rc.max_docs > 0) throw UsageError("score keeps every document; --max-docs is not allowed");
  const Model m = load_model(rc);
  const Dataset ds = load_eval_split(rc, m);
  std::vector<double> by_line(ds.document_count());
  for (const auto& g : ds.groups) {
    const auto s = score(g, m);
    for (std::size_t i = 0; i < g.size(); ++i) by_line.at(g.lines[i]) = s[i];
  }
  std::ostringstream text;
  char buf[64];
  for (double v : by_line) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    text << buf << '\n';
  }
  if (rc.out_dir.empty()) {
    out << text.str();
  } else {
    fs::create_directories(rc.out_dir);
    std::ofstream f(fs::path(rc.out_dir) / "scores.txt");
    f << text.str();
    out << "wrote " << (fs::path(rc.out_dir) / "scores.txt").string() << '\n';
  }
  return kOk;
}

inline int cmd_perturb_sweep(const RunConfig& rc, std::ostream& out) {
  if (rc.checkpoints.empty()) throw UsageError("perturb-sweep needs at least one --checkpoint");
  std::vector<Model> models;
  std::vector<std::string> names;
  for (const auto& path : rc.checkpoints) {
    models.push_back(load_checkpoint(path));
    std::string name = fs::path(path).stem().string();
    if (name == "model" || std::find(names.begin(), names.end(), name) != names.end())
      name = fs::path(path).parent_path().filename().string() + "/" + name;
    names.push_back(name);
  }
  const Dataset test = load_eval_split(rc, models.front());
  std::vector<std::pair<std::string, const Model*>> entries;
  for (std::size_t i = 0; i < models.size(); ++i) entries.push_back({names[i], &models[i]});
  PerturbationSpec spec{rc.pair_counts, rc.train.seed, rc.repeats};
  std::ostringstream csv;
  csv << "pairs,model,ndcg10\n";
  for (const auto& row : robustness_sweep(entries, test, spec))
    csv << row.pairs << ',' << row.model << ',' << fixed(row.ndcg10, 6) << '\n';
  out << csv.str();
  if (!rc.out_dir.empty()) {
    fs::create_directories(rc.out_dir);
    std::ofstream(fs::path(rc.out_dir) / "sweep.csv") << csv.str();
  }
  return kOk;
}

inline int cmd_size_grid(RunConfig rc, bool no_ordinal, std::ostream& out) {
  SizedData data;
  std::optional<Dataset> files[3];
  if (rc.data == "synthetic") {
    data = [&rc](Split s, std::size_t n, std::uint64_t seed) {
      return synth_split(rc, s, n, rc.synth_seed * 7919 + seed).dataset;
    };
  } else {
    RunConfig full = rc;
    full.max_docs = 0;
    for (Split s : {Split::train, Split::valid, Split::test})
      files[static_cast<int>(s)] = maybe_scale(rc, load_split(full, s, false));
    data = [&files](Split s, std::size_t n, std::uint64_t) {
      const Dataset& ds = *files[static_cast<int>(s)];
      const bool ranked = !ds.groups.empty() && !ds.groups.front().initial_ranks.empty();
      return truncate_per_query(ds, n, ranked ? std::optional<std::size_t>(0) : std::nullopt);
    };
  }
  {
    const Dataset probe = data(Split::train, rc.train_sizes.front(), rc.seeds.front());
    RunConfig tmp = rc;
    resolve_model(tmp, probe, no_ordinal);
    rc.model = tmp.model;
    std::size_t largest = 0;
    for (std::size_t n : rc.train_sizes) largest = std::max(largest, n);
    for (std::size_t n : rc.test_sizes) largest = std::max(largest, n);
    if (rc.model.use_ordinal) rc.model.n_max = std::max(rc.model.n_max, largest);
  }
  SizeGridSpec spec{rc.kinds, rc.train_sizes, rc.test_sizes, rc.seeds};
  const auto rows = size_adaptation_experiment(spec, rc.model, rc.train, data);
  std::ostringstream csv;
  csv << "block,n_train,n_test,ndcg10,std,delta\n";
  for (const auto& r : rows) {
    csv << to_string(r.kind) << ',' << r.train_size << ',' << r.test_size << ',' << fixed(r.ndcg10, 6)
        << ',' << fixed(r.stddev, 6) << ',' << fixed(r.delta, 6) << '\n';
  }
  out << csv.str();
  if (!rc.out_dir.empty()) {
    fs::create_directories(rc.out_dir);
    std::ofstream(fs::path(rc.out_dir) / "size_grid.csv") << csv.str();
    write_snapshot(rc, fs::path(rc.out_dir) / "config.resolved.txt");
  }
  return kOk;
}

inline int cmd_synth(const RunConfig& rc, std::ostream& out) {
  const fs::path dir = require_out_dir(rc);
  for (Split s : {Split::train, Split::valid, Split::test}) {
    const SynthData d = synth_split(rc, s, rc.synth_docs, rc.synth_seed);
    const std::string name = split_name(s);
    {
      std::ofstream f(dir / (name + ".txt"));
      write_dataset(f, d.dataset);
    }
    for (std::size_t r = 0; r < d.initial_scores.size(); ++r) {
      std::ofstream f(dir / (name + ".init" + std::to_string(r) + ".txt"));
      for (double v : d.initial_scores[r]) f << shortest(v) << '\n';
    }
    out << "wrote " << (dir / (name + ".txt")).string() << " (" << d.dataset.groups.size()
        << " queries)\n";
  }
  return kOk;
}

inline int cmd_selfcheck(const RunConfig& rc, std::ostream& out) {
  bool ok = true;
  auto report = [&](const PropertyResult& r) {
    ok &= r.passed();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s  %-28s max %.3e  tol %.0e  (%zu trials)\n",
                  r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.value, r.tolerance, r.trials);
    out << buf;
  };
  for (BlockKind kind : {BlockKind::msab, BlockKind::imsab}) {
    for (bool ordinal : {false, true}) {
      ModelConfig c;
      c.input_dim = 6;
      c.embed_dim = 16;
      c.heads = 4;
      c.blocks = 2;
      c.block_kind = kind;
      c.induced = 5;
      c.use_ordinal = ordinal;
      c.ranking_sources = ordinal ? 2 : 0;
      c.n_max = ordinal ? 50 : 0;
      report(equivariance_check(c, 25, 50, rc.train.seed));
    }
  }
  for (BlockKind kind : {BlockKind::msab, BlockKind::imsab}) {
    ModelConfig c;
    c.input_dim = 3;
    c.embed_dim = 8;
    c.heads = 2;
    c.blocks = 6;
    c.block_kind = kind;
    c.induced = 3;
    c.use_ordinal = true;
    c.ranking_sources = 1;
    c.n_max = 8;
    report(gradient_check(c, 2, 4, 50, rc.train.seed));
  }
  out << (ok ? "selfcheck passed\n" : "selfcheck FAILED\n");
  return ok ? kOk : kNumeric;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::string train, valid, test, out_dir, block, scaler;
  std::vector<std::string> checkpoints, init_scores;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_docs;
  bool no_ordinal = false;
};

inline RunConfig resolve(const Flags& f) {
  RunConfig rc;
  if (!f.config.empty())
    for (const auto& [k, v] : load_key_values(f.config)) rc.set(k, v);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    rc.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!f.train.empty()) rc.train_path = f.train;
  if (!f.valid.empty()) rc.valid_path = f.valid;
  if (!f.test.empty()) rc.test_path = f.test;
  if (!f.out_dir.empty()) rc.out_dir = f.out_dir;
  if (!f.scaler.empty()) rc.scaler_path = f.scaler;
  if (!f.checkpoints.empty()) rc.checkpoints = f.checkpoints;
  if (!f.init_scores.empty()) rc.init_scores = f.init_scores;
  if (!f.block.empty()) {
    rc.model.block_kind = parse_block_kind(f.block);
    rc.kinds = {rc.model.block_kind};
  }
  if (f.seed) {
    rc.train.seed = *f.seed;
    rc.seeds = {*f.seed};
  }
  if (f.max_docs) rc.max_docs = *f.max_docs;
  if (f.no_ordinal) {
    rc.model.use_ordinal = false;
    rc.ordinal_explicit = true;
  }
  return rc;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SetRank: permutation-invariant listwise ranking with self-attention"};
  app.name("setrank");
  app.require_subcommand(1);
  Flags flags;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value configuration file");
    sub->add_option("--set", flags.sets, "override one config key (key=value), repeatable");
    sub->add_option("--train", flags.train, "training data (LETOR text)");
    sub->add_option("--valid", flags.valid, "validation data");
    sub->add_option("--test", flags.test, "evaluation data");
    sub->add_option("--checkpoint", flags.checkpoints, "model checkpoint, repeatable for perturb-sweep");
    sub->add_option("--out-dir", flags.out_dir, "output directory");
    sub->add_option("--seed", flags.seed, "run seed");
    sub->add_option("--max-docs", flags.max_docs, "keep at most this many documents per query");
    sub->add_option("--init-scores", flags.init_scores,
                    "initial ranking scores, SPLIT:PATH or PATH, repeatable (one per ranking source)");
    sub->add_option("--block", flags.block, "encoder block kind")->check(CLI::IsMember({"msab", "imsab"}));
    sub->add_option("--scaler", flags.scaler, "feature scaler written by train");
    sub->add_flag("--no-ordinal", flags.no_ordinal, "ignore initial rankings");
    return sub;
  };
  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {
      {"train", "train a model and write checkpoint, log and resolved config"},
      {"eval", "NDCG@{1,3,5,10} of a checkpoint on --test"},
      {"score", "one score per document line of --test"},
      {"perturb-sweep", "NDCG@10 under reversed pairs in the initial rankings"},
      {"size-grid", "train at one list size, test at others"},
      {"selfcheck", "equivariance and gradient properties on random models"},
      {"synth", "write the synthetic cross-document task as LETOR files"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : cmds) subs[c.name] = common(app.add_subcommand(c.name, c.help));

  std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig rc = resolve(flags);
    if (subs["train"]->parsed()) return cmd_train(rc, flags.no_ordinal, out);
    if (subs["eval"]->parsed()) return cmd_eval(rc, out);
    if (subs["score"]->parsed()) return cmd_score(rc, out);
    if (subs["perturb-sweep"]->parsed()) return cmd_perturb_sweep(rc, out);
    if (subs["size-grid"]->parsed()) return cmd_size_grid(rc, flags.no_ordinal, out);
    if (subs["selfcheck"]->parsed()) return cmd_selfcheck(rc, out);
    if (subs["synth"]->parsed()) return cmd_synth(rc, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ContractError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace setrank::cli

#endif  // SETRANK_TOOLS_CLI_HPP
