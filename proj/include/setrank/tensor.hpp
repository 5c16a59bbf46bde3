#ifndef SETRANK_TENSOR_HPP
#define SETRANK_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "setrank/error.hpp"

namespace setrank {

/**
 * Dense row-major matrix of doubles with an optional gradient buffer.
 *
 * A Tensor is a reference handle: copies share storage, which is what lets a
 * Graph hold on to parameters and intermediates. Use clone() for a deep copy.
 */
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : s_(std::make_shared<Storage>()) {
    s_->rows = rows;
    s_->cols = cols;
    s_->value.assign(rows * cols, fill);
  }

  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
      : s_(std::make_shared<Storage>()) {
    if (values.size() != rows * cols) {
      throw DimensionError("tensor: " + std::to_string(values.size()) +
                           " values for shape " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
    s_->rows = rows;
    s_->cols = cols;
    s_->value = std::move(values);
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("tensor: ragged initializer");
      v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(v));
  }

  bool defined() const noexcept { return static_cast<bool>(s_); }
  std::size_t rows() const noexcept { return s_->rows; }
  std::size_t cols() const noexcept { return s_->cols; }
  std::size_t size() const noexcept { return s_->value.size(); }

  double operator()(std::size_t i, std::size_t j) const { return s_->value[i * s_->cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return s_->value[i * s_->cols + j]; }
  double item() const {
    if (size() != 1) throw ContractError("tensor: item() on non-scalar");
    return s_->value[0];
  }

  std::span<double> values() noexcept { return s_->value; }
  std::span<const double> values() const noexcept { return s_->value; }

  bool requires_grad() const noexcept { return s_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    s_->requires_grad = on;
    return *this;
  }

  bool has_grad() const noexcept { return !s_->grad.empty(); }
  /// Gradient buffer, allocated (zeroed) on first access.
  std::span<double> grad() {
    if (s_->grad.size() != s_->value.size()) s_->grad.assign(s_->value.size(), 0.0);
    return s_->grad;
  }
  std::span<const double> grad() const {
    if (s_->grad.size() != s_->value.size()) s_->grad.assign(s_->value.size(), 0.0);
    return s_->grad;
  }
  void zero_grad() {
    if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
  }

  Tensor clone() const {
    Tensor t(rows(), cols(), s_->value);
    t.s_->requires_grad = s_->requires_grad;
    return t;
  }

  bool all_finite() const noexcept {
    for (double x : s_->value)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool same_storage(const Tensor& other) const noexcept { return s_ == other.s_; }

 private:
  struct Storage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    mutable std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/**
 * Tape of operations recorded during one forward pass.
 *
 * Graphs are rebuilt for every forward pass. A graph constructed with
 * record=false evaluates ops without keeping backward closures (inference).
 */
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Registers `output` as produced from `inputs`. Only records when some input
  /// needs a gradient; the output then needs one too.
  bool track(std::initializer_list<Tensor> inputs, Tensor& output) {
    return track(std::vector<Tensor>(inputs), output);
  }
  bool track(const std::vector<Tensor>& inputs, Tensor& output) {
    if (!record_) return false;
    for (const auto& in : inputs) {
      if (in.requires_grad()) {
        output.set_requires_grad(true);
        return true;
      }
    }
    return false;
  }
  void record(Tensor output, std::function<void()> backward_rule) {
    nodes_.push_back({std::move(output), std::move(backward_rule)});
  }

  /// Reverse sweep from a scalar loss. Leaf gradients accumulate; gradients of
  /// recorded intermediates are reset first so repeated sweeps stay additive.
  void backward(Tensor loss) {
    if (!loss.defined() || loss.size() != 1) {
      throw ContractError("backward: loss must be a 1x1 tensor");
    }
    for (auto& node : nodes_) {
      node.output.grad();
      node.output.zero_grad();
    }
    if (!loss.requires_grad()) return;
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_rule();
  }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_rule;
  };
  bool record_;
  std::vector<Node> nodes_;
};

namespace kernel {

// C (n x m) += A (n x k) * B (k x m)
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C (n x m) += A (n x k) * B^T, B is (m x k)
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * m + j] += acc;
    }
  }
}

// C (n x m) += A^T * B, A is (k x n), B is (k x m)
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                    std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * n;
    const double* bp = b + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double api = ap[i];
      double* ci = c + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace kernel

namespace detail {

inline std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

}  // namespace detail

inline Tensor matmul(Graph& g, Tensor a, Tensor b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" + detail::shape_str(a) + " * " +
                         detail::shape_str(b) + ")");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(n, m);
  kernel::gemm_nn(a.values().data(), b.values().data(), out.values().data(), n, k, m);
  if (g.track({a, b}, out)) {
    g.record(out, [a, b, out, n, k, m]() mutable {
      const double* go = out.grad().data();
      if (a.requires_grad()) kernel::gemm_nt(go, b.values().data(), a.grad().data(), n, m, k);
      if (b.requires_grad()) kernel::gemm_tn(a.values().data(), go, b.grad().data(), k, n, m);
    });
  }
  return out;
}

/// a * b^T without materializing the transpose.
inline Tensor matmul_nt(Graph& g, Tensor a, Tensor b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: widths differ (" + detail::shape_str(a) + " vs " +
                         detail::shape_str(b) + ")");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor out(n, m);
  kernel::gemm_nt(a.values().data(), b.values().data(), out.values().data(), n, k, m);
  if (g.track({a, b}, out)) {
    g.record(out, [a, b, out, n, k, m]() mutable {
      const double* go = out.grad().data();
      if (a.requires_grad()) kernel::gemm_nn(go, b.values().data(), a.grad().data(), n, m, k);
      if (b.requires_grad()) kernel::gemm_tn(go, a.values().data(), b.grad().data(), m, n, k);
    });
  }
  return out;
}

inline Tensor transpose(Graph& g, Tensor a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = a(i, j);
  if (g.track({a}, out)) {
    g.record(out, [a, out, r, c]() mutable {
      auto ga = a.grad();
      auto go = out.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
    });
  }
  return out;
}

inline Tensor add(Graph& g, Tensor a, Tensor b) {
  detail::require_same_shape("add", a, b);
  Tensor out(a.rows(), a.cols());
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  if (g.track({a, b}, out)) {
    g.record(out, [a, b, out]() mutable {
      auto go = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return out;
}

/// x + bias with bias (1 x C) broadcast over rows.
inline Tensor add_row(Graph& g, Tensor x, Tensor bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_row: bias " + detail::shape_str(bias) + " for input " +
                         detail::shape_str(x));
  }
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = x(i, j) + bias(0, j);
  if (g.track({x, bias}, out)) {
    g.record(out, [x, bias, out, r, c]() mutable {
      auto go = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += go[i * c + j];
      }
    });
  }
  return out;
}

/// x * W + b, b broadcast over rows.
inline Tensor affine(Graph& g, Tensor x, Tensor weight, Tensor bias) {
  if (x.cols() != weight.rows()) {
    throw DimensionError("affine: input " + detail::shape_str(x) + " for weight " +
                         detail::shape_str(weight));
  }
  return add_row(g, matmul(g, x, weight), bias);
}

inline Tensor relu(Graph& g, Tensor x) {
  Tensor out(x.rows(), x.cols());
  auto xv = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (g.track({x}, out)) {
    g.record(out, [x, out]() mutable {
      auto xv = x.values();
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i)
        if (xv[i] > 0.0) gx[i] += go[i];
    });
  }
  return out;
}

inline Tensor scale(Graph& g, Tensor x, double factor) {
  Tensor out(x.rows(), x.cols());
  auto xv = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * factor;
  if (g.track({x}, out)) {
    g.record(out, [x, out, factor]() mutable {
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * factor;
    });
  }
  return out;
}

/// Softmax over each row, computed with per-row max subtraction.
inline Tensor row_softmax(Graph& g, Tensor x) {
  if (!x.all_finite()) throw NumericError("row_softmax: non-finite input");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(x(i, j) - mx);
      out(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= total;
  }
  if (g.track({x}, out)) {
    g.record(out, [x, out, r, c]() mutable {
      auto y = out.values();
      auto go = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += go[i * c + j] * y[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          gx[i * c + j] += y[i * c + j] * (go[i * c + j] - dot);
      }
    });
  }
  return out;
}

/// Per-row normalization to zero mean / unit (population) variance, then
/// gain * xhat + bias with gain and bias of shape 1 x E.
inline Tensor layer_norm(Graph& g, Tensor x, Tensor gain, Tensor bias, double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(c));
  }
  Tensor out(r, c);
  std::vector<double> xhat(r * c);
  std::vector<double> inv_sigma(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_sigma[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x(i, j) - mean) * inv_sigma[i];
      xhat[i * c + j] = h;
      out(i, j) = h * gain(0, j) + bias(0, j);
    }
  }
  if (g.track({x, gain, bias}, out)) {
    g.record(out, [x, gain, bias, out, r, c, xhat = std::move(xhat),
                   inv_sigma = std::move(inv_sigma)]() mutable {
      auto go = out.grad();
      if (gain.requires_grad()) {
        auto gg = gain.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gg[j] += go[i * c + j] * xhat[i * c + j];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[j] += go[i * c + j];
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i) {
          double mean_d = 0.0, mean_dh = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = go[i * c + j] * gain(0, j);
            mean_d += d;
            mean_dh += d * xhat[i * c + j];
          }
          mean_d *= inv_c;
          mean_dh *= inv_c;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = go[i * c + j] * gain(0, j);
            gx[i * c + j] += inv_sigma[i] * (d - mean_d - xhat[i * c + j] * mean_dh);
          }
        }
      }
    });
  }
  return out;
}

/// Column concatenation, parts in argument order.
inline Tensor concat_cols(Graph& g, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
  }
  Tensor out(r, total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, offset + j) = p(i, j);
    offset += p.cols();
  }
  if (g.track(parts, out)) {
    g.record(out, [parts = std::vector<Tensor>(parts), out, r, total]() mutable {
      auto go = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j)
              gp[i * p.cols() + j] += go[i * total + offset + j];
        }
        offset += p.cols();
      }
    });
  }
  return out;
}

/// Rows table[indices[i]] stacked in order; backward scatter-adds.
inline Tensor gather_rows(Graph& g, Tensor table, std::vector<std::size_t> indices) {
  const std::size_t c = table.cols();
  for (std::size_t idx : indices) {
    if (idx >= table.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(idx) + " outside table of " +
                           std::to_string(table.rows()) + " rows");
    }
  }
  Tensor out(indices.size(), c);
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = table(indices[i], j);
  if (g.track({table}, out)) {
    g.record(out, [table, out, c, indices = std::move(indices)]() mutable {
      auto go = out.grad();
      auto gt = table.grad();
      for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) gt[indices[i] * c + j] += go[i * c + j];
    });
  }
  return out;
}

/// Sum of all entries as a 1x1 tensor.
inline Tensor sum(Graph& g, Tensor x) {
  Tensor out(1, 1);
  double total = 0.0;
  for (double v : x.values()) total += v;
  out(0, 0) = total;
  if (g.track({x}, out)) {
    g.record(out, [x, out]() mutable {
      const double go = out.grad()[0];
      for (double& gx : x.grad()) gx += go;
    });
  }
  return out;
}

/// Elementwise product.
inline Tensor hadamard(Graph& g, Tensor a, Tensor b) {
  detail::require_same_shape("hadamard", a, b);
  Tensor out(a.rows(), a.cols());
  auto av = a.values();
  auto bv = b.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  if (g.track({a, b}, out)) {
    g.record(out, [a, b, out]() mutable {
      auto go = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto av = a.values();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
      }
    });
  }
  return out;
}

}  // namespace setrank

#endif  // SETRANK_TENSOR_HPP
