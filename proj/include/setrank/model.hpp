#ifndef SETRANK_MODEL_HPP
#define SETRANK_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "setrank/error.hpp"
#include "setrank/letor.hpp"
#include "setrank/random.hpp"
#include "setrank/tensor.hpp"

namespace setrank {

enum class BlockKind { msab, imsab };

inline std::string to_string(BlockKind kind) { return kind == BlockKind::msab ? "msab" : "imsab"; }

inline BlockKind parse_block_kind(const std::string& s) {
  if (s == "msab") return BlockKind::msab;
  if (s == "imsab") return BlockKind::imsab;
  throw ConfigError("unknown block kind '" + s + "' (expected msab or imsab)");
}

struct ModelConfig {
  std::size_t input_dim = 0;  // raw feature count of the data
  std::size_t embed_dim = 256;
  std::size_t heads = 8;
  std::size_t blocks = 6;
  BlockKind block_kind = BlockKind::msab;
  std::size_t induced = 20;  // inducing points, IMSAB only
  bool use_ordinal = false;
  std::size_t ranking_sources = 0;
  std::size_t n_max = 0;  // ordinal table length
  std::size_t rff_layers = 1;  // affine E->E + ReLU layers inside each block
  bool output_projection = false;  // W^O after the head concat
  double layer_norm_eps = 1e-6;

  std::size_t head_dim() const { return embed_dim / heads; }

  void validate() const {
    if (input_dim == 0) throw ConfigError("model: input_dim must be >= 1");
    if (embed_dim == 0 || heads == 0) throw ConfigError("model: embed_dim and heads must be >= 1");
    if (embed_dim % heads != 0) {
      throw ConfigError("model: embed_dim " + std::to_string(embed_dim) +
                        " not divisible by heads " + std::to_string(heads));
    }
    if (block_kind == BlockKind::imsab && induced == 0) {
      throw ConfigError("model: induced must be >= 1 for imsab blocks");
    }
    if (use_ordinal && (ranking_sources == 0 || n_max == 0)) {
      throw ConfigError("model: ordinal embeddings need ranking_sources >= 1 and n_max >= 1");
    }
    if (!(layer_norm_eps > 0.0)) throw ConfigError("model: layer_norm_eps must be positive");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct Affine {
  Tensor weight;
  Tensor bias;
};

struct Norm {
  Tensor gain;
  Tensor bias;
};

/// Weights of one multi-head attention block: per-head projections
/// (E x E/h each), the row-wise feed-forward layers and two layer norms.
struct MabParams {
  std::vector<Tensor> query;
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  Tensor output;  // defined only with output_projection
  std::vector<Affine> feedforward;
  Norm norm1;
  Norm norm2;
};

/// `attend` is MAB(X,X,X) for MSAB and MAB(X,H,H) for IMSAB; IMSAB also holds
/// H = MAB(I,X,X) in `induce` and the inducing points I.
struct BlockParams {
  MabParams attend;
  MabParams induce;
  Tensor inducing;
};

struct ModelParams {
  Affine input;
  std::vector<BlockParams> blocks;
  std::vector<Tensor> ordinal;
  Affine head;
};

namespace detail {

template <typename Fn>
void visit_mab(const std::string& prefix, const MabParams& m, Fn&& fn) {
  for (std::size_t i = 0; i < m.query.size(); ++i) fn(prefix + ".query" + std::to_string(i), m.query[i]);
  for (std::size_t i = 0; i < m.key.size(); ++i) fn(prefix + ".key" + std::to_string(i), m.key[i]);
  for (std::size_t i = 0; i < m.value.size(); ++i) fn(prefix + ".value" + std::to_string(i), m.value[i]);
  if (m.output.defined()) fn(prefix + ".output", m.output);
  for (std::size_t i = 0; i < m.feedforward.size(); ++i) {
    fn(prefix + ".ffn" + std::to_string(i) + ".weight", m.feedforward[i].weight);
    fn(prefix + ".ffn" + std::to_string(i) + ".bias", m.feedforward[i].bias);
  }
  fn(prefix + ".norm1.gain", m.norm1.gain);
  fn(prefix + ".norm1.bias", m.norm1.bias);
  fn(prefix + ".norm2.gain", m.norm2.gain);
  fn(prefix + ".norm2.bias", m.norm2.bias);
}

}  // namespace detail

/// Calls fn(name, tensor) for every parameter in a fixed order. The order and
/// names define the checkpoint layout.
template <typename Fn>
void for_each_parameter(const ModelParams& p, Fn&& fn) {
  fn(std::string("input.weight"), p.input.weight);
  fn(std::string("input.bias"), p.input.bias);
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b);
    const auto& blk = p.blocks[b];
    if (blk.inducing.defined()) {
      fn(prefix + ".inducing", blk.inducing);
      detail::visit_mab(prefix + ".induce", blk.induce, fn);
    }
    detail::visit_mab(prefix + ".attend", blk.attend, fn);
  }
  for (std::size_t r = 0; r < p.ordinal.size(); ++r) fn("ordinal" + std::to_string(r), p.ordinal[r]);
  fn(std::string("head.weight"), p.head.weight);
  fn(std::string("head.bias"), p.head.bias);
}

inline std::vector<Tensor> parameter_list(const ModelParams& p) {
  std::vector<Tensor> out;
  for_each_parameter(p, [&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

/// Closed-form parameter count for a configuration.
inline std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t e = c.embed_dim;
  const std::size_t mab = 3 * e * e + (c.output_projection ? e * e : 0) +
                          c.rff_layers * (e * e + e) + 4 * e;
  std::size_t block = mab;
  if (c.block_kind == BlockKind::imsab) block += mab + c.induced * e;
  std::size_t total = c.input_dim * e + e + c.blocks * block + e + 1;
  if (c.use_ordinal) total += c.ranking_sources * c.n_max * e;
  return total;
}

struct Model {
  ModelConfig config;
  ModelParams params;

  std::vector<Tensor> parameters() const { return parameter_list(params); }

  /// Deep copy of every parameter.
  Model clone() const {
    Model m{config, params};
    auto copy = [](Tensor& t) {
      if (t.defined()) t = t.clone();
    };
    copy(m.params.input.weight);
    copy(m.params.input.bias);
    for (auto& b : m.params.blocks) {
      for (MabParams* mp : {&b.attend, &b.induce}) {
        for (auto& t : mp->query) copy(t);
        for (auto& t : mp->key) copy(t);
        for (auto& t : mp->value) copy(t);
        copy(mp->output);
        for (auto& a : mp->feedforward) {
          copy(a.weight);
          copy(a.bias);
        }
        copy(mp->norm1.gain);
        copy(mp->norm1.bias);
        copy(mp->norm2.gain);
        copy(mp->norm2.bias);
      }
      copy(b.inducing);
    }
    for (auto& t : m.params.ordinal) copy(t);
    copy(m.params.head.weight);
    copy(m.params.head.bias);
    return m;
  }
};

namespace detail {

inline Tensor parameter(std::size_t rows, std::size_t cols, double fill = 0.0) {
  Tensor t(rows, cols, fill);
  t.set_requires_grad(true);
  return t;
}

inline Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t = parameter(fan_in, fan_out);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t = parameter(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

inline MabParams make_mab(const ModelConfig& c, Rng& rng) {
  const std::size_t e = c.embed_dim, d = c.head_dim();
  MabParams m;
  for (std::size_t h = 0; h < c.heads; ++h) {
    m.query.push_back(xavier(e, d, rng));
    m.key.push_back(xavier(e, d, rng));
    m.value.push_back(xavier(e, d, rng));
  }
  if (c.output_projection) m.output = xavier(e, e, rng);
  for (std::size_t l = 0; l < c.rff_layers; ++l)
    m.feedforward.push_back({xavier(e, e, rng), parameter(1, e)});
  m.norm1 = {parameter(1, e, 1.0), parameter(1, e)};
  m.norm2 = {parameter(1, e, 1.0), parameter(1, e)};
  return m;
}

}  // namespace detail

/// Fresh parameters: Xavier-uniform weights, zero biases, unit layer-norm
/// gains, inducing points and ordinal tables ~ N(0, 1/E).
inline Model make_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t e = config.embed_dim;
  const double small = 1.0 / std::sqrt(static_cast<double>(e));
  Model m;
  m.config = config;
  m.params.input = {detail::xavier(config.input_dim, e, rng), detail::parameter(1, e)};
  for (std::size_t b = 0; b < config.blocks; ++b) {
    BlockParams blk;
    if (config.block_kind == BlockKind::imsab) {
      blk.inducing = detail::gaussian(config.induced, e, small, rng);
      blk.induce = detail::make_mab(config, rng);
    }
    blk.attend = detail::make_mab(config, rng);
    m.params.blocks.push_back(std::move(blk));
  }
  if (config.use_ordinal) {
    for (std::size_t r = 0; r < config.ranking_sources; ++r)
      m.params.ordinal.push_back(detail::gaussian(config.n_max, e, small, rng));
  }
  m.params.head = {detail::xavier(e, 1, rng), detail::parameter(1, 1)};
  return m;
}

inline Model make_model(const ModelConfig& config, std::uint64_t seed) {
  Rng rng = substream(seed, "init");
  return make_model(config, rng);
}

/// softmax(Q K^T / sqrt(w)) V with w the shared column width of Q and K.
inline Tensor attention(Graph& g, Tensor q, Tensor k, Tensor v) {
  if (q.cols() != k.cols() || k.cols() != v.cols()) {
    throw DimensionError("attention: widths differ (Q " + detail::shape_str(q) + ", K " +
                         detail::shape_str(k) + ", V " + detail::shape_str(v) + ")");
  }
  if (k.rows() != v.rows()) throw DimensionError("attention: K and V row counts differ");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor weights = row_softmax(g, scale(g, matmul_nt(g, q, k), inv_sqrt));
  return matmul(g, weights, v);
}

/// Concatenation of per-head attention over projected inputs; output is
/// N_q x E. Each head scales its logits by the head width.
inline Tensor multihead(Graph& g, Tensor q, Tensor k, Tensor v, const MabParams& p) {
  const std::size_t heads = p.query.size();
  if (heads == 0 || p.key.size() != heads || p.value.size() != heads) {
    throw DimensionError("multihead: need matching query/key/value projections per head");
  }
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    outs.push_back(attention(g, matmul(g, q, p.query[h]), matmul(g, k, p.key[h]),
                             matmul(g, v, p.value[h])));
  }
  Tensor cat = heads == 1 ? outs.front() : concat_cols(g, outs);
  if (p.output.defined()) cat = matmul(g, cat, p.output);
  if (cat.cols() != q.cols()) {
    throw DimensionError("multihead: output width " + std::to_string(cat.cols()) +
                         " differs from query width " + std::to_string(q.cols()));
  }
  return cat;
}

inline Tensor row_feedforward(Graph& g, Tensor x, const std::vector<Affine>& layers) {
  for (const auto& a : layers) x = relu(g, affine(g, x, a.weight, a.bias));
  return x;
}

/// B = LayerNorm(Q + Multihead(Q,K,V)); LayerNorm(B + rFF(B)).
inline Tensor mab(Graph& g, Tensor q, Tensor k, Tensor v, const MabParams& p, double eps) {
  Tensor b = layer_norm(g, add(g, q, multihead(g, q, k, v, p)), p.norm1.gain, p.norm1.bias, eps);
  return layer_norm(g, add(g, b, row_feedforward(g, b, p.feedforward)), p.norm2.gain,
                    p.norm2.bias, eps);
}

inline Tensor msab(Graph& g, Tensor x, const BlockParams& p, double eps) {
  return mab(g, x, x, x, p.attend, eps);
}

/// MAB(X, H, H) with H = MAB(I, X, X). `induced` receives H when non-null.
inline Tensor imsab(Graph& g, Tensor x, const BlockParams& p, double eps,
                    Tensor* induced = nullptr) {
  if (!p.inducing.defined()) throw DimensionError("imsab: block has no inducing points");
  Tensor h = mab(g, p.inducing, x, x, p.induce, eps);
  if (induced) *induced = h;
  return mab(g, x, h, h, p.attend, eps);
}

inline Tensor encode(Graph& g, Tensor x, const Model& m) {
  for (const auto& blk : m.params.blocks) {
    x = m.config.block_kind == BlockKind::msab ? msab(g, x, blk, m.config.layer_norm_eps)
                                               : imsab(g, x, blk, m.config.layer_norm_eps);
  }
  return x;
}

inline Tensor feature_tensor(const QueryGroup& group) {
  return Tensor(group.size(), group.feature_count, group.features);
}

/**
 * X0 = ReLU(features W + b) plus, per ranking source, the ordinal-table row at
 * position rank + start - 1 (all 1-based). Inference uses start = 1; training
 * samples it.
 */
inline Tensor represent_documents(Graph& g, const QueryGroup& group, const Model& m,
                                  std::size_t start = 1) {
  const auto& c = m.config;
  if (group.size() == 0) throw DataError("query " + group.qid + " has no documents");
  if (group.feature_count != c.input_dim) {
    throw DimensionError("query " + group.qid + " has " + std::to_string(group.feature_count) +
                         " features, model expects " + std::to_string(c.input_dim));
  }
  Tensor x = relu(g, affine(g, feature_tensor(group), m.params.input.weight, m.params.input.bias));
  if (!c.use_ordinal) return x;
  if (start < 1) throw ContractError("represent_documents: ordinal start is 1-based");
  if (group.initial_ranks.size() < c.ranking_sources) {
    throw DataError("query " + group.qid + " carries " +
                    std::to_string(group.initial_ranks.size()) + " initial rankings, model needs " +
                    std::to_string(c.ranking_sources));
  }
  for (std::size_t r = 0; r < c.ranking_sources; ++r) {
    std::vector<std::size_t> rows;
    rows.reserve(group.size());
    for (std::size_t rank : group.initial_ranks[r]) {
      const std::size_t position = rank + start - 1;
      if (rank < 1 || position > c.n_max) {
        throw DataError("query " + group.qid + ": ordinal position " + std::to_string(position) +
                        " outside table of " + std::to_string(c.n_max));
      }
      rows.push_back(position - 1);
    }
    x = add(g, x, gather_rows(g, m.params.ordinal[r], std::move(rows)));
  }
  return x;
}

/// Scores as an N x 1 tensor on `g`.
inline Tensor forward_scores(Graph& g, const QueryGroup& group, const Model& m,
                             std::size_t start = 1) {
  Tensor x = encode(g, represent_documents(g, group, m, start), m);
  return affine(g, x, m.params.head.weight, m.params.head.bias);
}

inline std::vector<double> score(const QueryGroup& group, const Model& m, std::size_t start = 1) {
  Graph g(false);
  Tensor s = forward_scores(g, group, m, start);
  return {s.values().begin(), s.values().end()};
}

/// 1-based document ids by descending score; ties keep input order.
inline std::vector<std::size_t> rank(const std::vector<double>& scores) {
  for (double s : scores)
    if (std::isnan(s)) throw NumericError("rank: NaN score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (auto& i : order) ++i;
  return order;
}

}  // namespace setrank

#endif  // SETRANK_MODEL_HPP
