#ifndef SETRANK_CONFIG_HPP
#define SETRANK_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "setrank/error.hpp"
#include "setrank/model.hpp"
#include "setrank/training.hpp"

namespace setrank {

/// Text form of a double that reads back bit-exact.
inline std::string exact_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  std::string s(buf, p);
  if (s.front() == '-') return "-0x" + s.substr(1);
  return "0x" + s;
}

inline double parse_exact_double(std::string_view s) {
  double v = 0.0;
  bool neg = false;
  if (!s.empty() && s.front() == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("invalid hex float '" + std::string(s) + "'");
  }
  return neg ? -v : v;
}

namespace config_value {

inline std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  if (v.find("0x") != std::string::npos || v.find("0X") != std::string::npos) {
    return parse_exact_double(v);
  }
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string from_bool(bool b) { return b ? "true" : "false"; }

}  // namespace config_value

/// Model hyperparameters as ordered key/value pairs (checkpoint header and
/// config snapshots).
inline std::vector<std::pair<std::string, std::string>> model_config_entries(const ModelConfig& c) {
  using config_value::from_bool;
  return {
      {"input_dim", std::to_string(c.input_dim)},
      {"embed_dim", std::to_string(c.embed_dim)},
      {"heads", std::to_string(c.heads)},
      {"blocks", std::to_string(c.blocks)},
      {"block", to_string(c.block_kind)},
      {"induced", std::to_string(c.induced)},
      {"use_ordinal", from_bool(c.use_ordinal)},
      {"ranking_sources", std::to_string(c.ranking_sources)},
      {"n_max", std::to_string(c.n_max)},
      {"rff_layers", std::to_string(c.rff_layers)},
      {"output_projection", from_bool(c.output_projection)},
      {"layer_norm_eps", exact_double(c.layer_norm_eps)},
  };
}

/// Returns false when `key` is not a model key.
inline bool set_model_config(ModelConfig& c, const std::string& key, const std::string& v) {
  using namespace config_value;
  if (key == "input_dim") c.input_dim = to_size(key, v);
  else if (key == "embed_dim") c.embed_dim = to_size(key, v);
  else if (key == "heads") c.heads = to_size(key, v);
  else if (key == "blocks") c.blocks = to_size(key, v);
  else if (key == "block") c.block_kind = parse_block_kind(v);
  else if (key == "induced") c.induced = to_size(key, v);
  else if (key == "use_ordinal") c.use_ordinal = to_bool(key, v);
  else if (key == "ranking_sources") c.ranking_sources = to_size(key, v);
  else if (key == "n_max") c.n_max = to_size(key, v);
  else if (key == "rff_layers") c.rff_layers = to_size(key, v);
  else if (key == "output_projection") c.output_projection = to_bool(key, v);
  else if (key == "layer_norm_eps") c.layer_norm_eps = to_double(key, v);
  else return false;
  return true;
}

inline std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& t) {
  return {
      {"epochs", std::to_string(t.epochs)},
      {"learning_rate", exact_double(t.learning_rate)},
      {"seed", std::to_string(t.seed)},
      {"patience", std::to_string(t.patience)},
      {"sample_offsets", config_value::from_bool(t.sample_offsets)},
  };
}

inline bool set_train_config(TrainConfig& t, const std::string& key, const std::string& v) {
  using namespace config_value;
  if (key == "epochs") t.epochs = to_size(key, v);
  else if (key == "learning_rate") t.learning_rate = to_double(key, v);
  else if (key == "seed") t.seed = to_u64(key, v);
  else if (key == "patience") t.patience = to_size(key, v);
  else if (key == "sample_offsets") t.sample_offsets = to_bool(key, v);
  else return false;
  return true;
}

/// Parses `key = value` lines in file order; `#` starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in,
                                                                         const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_key_values(in, path);
}

}  // namespace setrank

#endif  // SETRANK_CONFIG_HPP
