#ifndef SETRANK_ADAM_HPP
#define SETRANK_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamOptions opts) : options(opts) {
    for (const auto& p : params) {
      first_moment.emplace_back(p.size(), 0.0);
      second_moment.emplace_back(p.size(), 0.0);
    }
  }
};

/// One bias-corrected Adam update using each parameter's accumulated gradient.
/// Throws NumericError, leaving parameters and state untouched, if any
/// gradient is non-finite. Parameters without a gradient buffer count as zero.
inline void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (state.first_moment[t].size() != params[t].size()) {
      throw DimensionError("adam_step: moment shape mismatch for parameter " +
                           std::to_string(t));
    }
    if (!params[t].has_grad()) continue;
    for (double g : params[t].grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(t));
      }
    }
  }

  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].values();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    const bool has = params[p].has_grad();
    std::span<const double> grad;
    if (has) grad = params[p].grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace setrank

#endif  // SETRANK_ADAM_HPP
