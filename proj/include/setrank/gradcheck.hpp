#ifndef SETRANK_GRADCHECK_HPP
#define SETRANK_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "setrank/random.hpp"
#include "setrank/tensor.hpp"

namespace setrank {

struct FiniteDiffOptions {
  double step = 1e-5;
  /// Number of coordinates to probe; 0 probes every coordinate.
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator. Exact-zero gradients
  /// (e.g. a bias shared by every score under a softmax) then compare on
  /// absolute error instead of amplifying rounding noise.
  double denominator_floor = 1e-6;
};

struct FiniteDiffResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/**
 * Compares reverse-mode gradients of `loss_fn` against central differences.
 *
 * `loss_fn` builds the computation on the graph it is handed and returns a
 * 1x1 loss. It is called once with a recording graph and twice per probed
 * coordinate with a non-recording one. The parameters' gradients are
 * overwritten.
 */
inline FiniteDiffResult finite_diff_check(const std::function<Tensor(Graph&)>& loss_fn,
                                          std::vector<Tensor> params,
                                          FiniteDiffOptions options = {}) {
  if (!(options.step > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.grad();
    p.zero_grad();
  }
  {
    Graph g;
    Tensor loss = loss_fn(g);
    g.backward(loss);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i) coords.emplace_back(t, i);
  if (options.samples != 0 && options.samples < coords.size()) {
    Rng rng = substream(options.seed, "finite-diff");
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.samples);
  }

  auto evaluate = [&]() {
    Graph g(false);
    return loss_fn(g).item();
  };

  FiniteDiffResult result;
  result.coordinates = coords.size();
  for (auto [t, i] : coords) {
    auto values = params[t].values();
    const double original = values[i];
    values[i] = original + options.step;
    const double up = evaluate();
    values[i] = original - options.step;
    const double down = evaluate();
    values[i] = original;
    const double numeric = (up - down) / (2.0 * options.step);
    const double analytic = params[t].grad()[i];
    const double err =
        std::abs(analytic - numeric) /
        std::max(std::abs(analytic) + std::abs(numeric), options.denominator_floor);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

inline double finite_diff_check(const std::function<Tensor(Graph&)>& loss_fn, Tensor param,
                                double step = 1e-5) {
  return finite_diff_check(loss_fn, std::vector<Tensor>{param}, {step, 0, 0, 1e-6}).max_relative_error;
}

}  // namespace setrank

#endif  // SETRANK_GRADCHECK_HPP
