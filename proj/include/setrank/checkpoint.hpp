#ifndef SETRANK_CHECKPOINT_HPP
#define SETRANK_CHECKPOINT_HPP

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "setrank/config.hpp"
#include "setrank/error.hpp"
#include "setrank/letor.hpp"
#include "setrank/model.hpp"

namespace setrank {

inline constexpr const char* kCheckpointMagic = "setrank-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/*
 * Checkpoint layout (plain text, one item per line):
 *
 *   setrank-checkpoint 1
 *   <key> <value>            model configuration, see model_config_entries()
 *   ...
 *   parameters <count>
 *   tensor <name> <rows> <cols>
 *   <cols hex floats>        one line per row
 *   ...
 *   end
 *
 * Values are C99 hex floats, so a save/load round trip is bit-exact. Tensors
 * appear in for_each_parameter() order.
 */
inline void write_checkpoint(std::ostream& out, const Model& m) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  for (const auto& [k, v] : model_config_entries(m.config)) out << k << ' ' << v << '\n';
  std::size_t count = 0;
  for_each_parameter(m.params, [&](const std::string&, const Tensor&) { ++count; });
  out << "parameters " << count << '\n';
  for_each_parameter(m.params, [&](const std::string& name, const Tensor& t) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t i = 0; i < t.rows(); ++i) {
      for (std::size_t j = 0; j < t.cols(); ++j) {
        if (j) out << ' ';
        out << exact_double(t(i, j));
      }
      out << '\n';
    }
  });
  out << "end\n";
}

inline Model read_checkpoint(std::istream& in) {
  auto fail = [](const std::string& what) -> CheckpointError {
    return CheckpointError("checkpoint: " + what);
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) throw fail("not a setrank checkpoint");
  if (version != kCheckpointVersion) throw fail("unsupported version " + std::to_string(version));

  ModelConfig config;
  std::size_t count = 0;
  std::string key;
  while (true) {
    std::string value;
    if (!(in >> key >> value)) throw fail("truncated header");
    if (key == "parameters") {
      count = config_value::to_size(key, value);
      break;
    }
    try {
      if (!set_model_config(config, key, value)) throw fail("unknown header key '" + key + "'");
    } catch (const ConfigError& e) {
      throw fail(e.what());
    }
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw fail(e.what());
  }

  Model model = make_model(config, 0);
  std::vector<std::pair<std::string, Tensor>> expected;
  for_each_parameter(model.params,
                     [&](const std::string& n, const Tensor& t) { expected.emplace_back(n, t); });
  if (count != expected.size()) {
    throw fail("configuration implies " + std::to_string(expected.size()) + " tensors, file has " +
               std::to_string(count));
  }
  for (auto& [name, tensor] : expected) {
    std::string tag, got;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tag >> got >> rows >> cols) || tag != "tensor") throw fail("truncated at " + name);
    if (got != name) throw fail("expected tensor " + name + ", found " + got);
    if (rows != tensor.rows() || cols != tensor.cols()) {
      throw fail("tensor " + name + " has shape " + std::to_string(rows) + "x" +
                 std::to_string(cols) + ", configuration expects " + detail::shape_str(tensor));
    }
    std::string token;
    for (double& v : tensor.values()) {
      if (!(in >> token)) throw fail("truncated in tensor " + name);
      try {
        v = parse_exact_double(token);
      } catch (const ConfigError&) {
        throw fail("bad value '" + token + "' in tensor " + name);
      }
    }
  }
  std::string tail;
  if (!(in >> tail) || tail != "end") throw fail("missing end marker");
  return model;
}

inline void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, m);
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

// Feature scaler sidecar: "setrank-scaler 1", "features <E0>", "clip <lo> <hi>",
// then one "<shift> <scale>" line per feature, all hex floats.
inline void write_scaler(std::ostream& out, const FeatureScaler& s) {
  out << "setrank-scaler 1\nfeatures " << s.shift.size() << "\nclip " << exact_double(s.clip_low)
      << ' ' << exact_double(s.clip_high) << '\n';
  for (std::size_t f = 0; f < s.shift.size(); ++f)
    out << exact_double(s.shift[f]) << ' ' << exact_double(s.scale[f]) << '\n';
}

inline FeatureScaler read_scaler(std::istream& in) {
  auto fail = [](const std::string& what) { return DataError("scaler: " + what); };
  std::string magic, tag, lo, hi;
  int version = 0;
  std::size_t n = 0;
  if (!(in >> magic >> version) || magic != "setrank-scaler" || version != 1) throw fail("bad header");
  if (!(in >> tag >> n) || tag != "features") throw fail("missing feature count");
  if (!(in >> tag >> lo >> hi) || tag != "clip") throw fail("missing clip range");
  FeatureScaler s;
  try {
    s.clip_low = parse_exact_double(lo);
    s.clip_high = parse_exact_double(hi);
    for (std::size_t f = 0; f < n; ++f) {
      std::string a, b;
      if (!(in >> a >> b)) throw fail("truncated at feature " + std::to_string(f + 1));
      s.shift.push_back(parse_exact_double(a));
      s.scale.push_back(parse_exact_double(b));
      if (!(s.scale.back() > 0.0)) throw fail("non-positive scale");
    }
  } catch (const ConfigError& e) {
    throw fail(e.what());
  }
  return s;
}

inline void save_scaler(const FeatureScaler& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write scaler '" + path + "'");
  write_scaler(out, s);
}

inline FeatureScaler load_scaler(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scaler '" + path + "'");
  return read_scaler(in);
}

}  // namespace setrank

#endif  // SETRANK_CHECKPOINT_HPP
