#include <cmath>

#include "lmforge/errors.hpp"
#include "lmforge/tensor.hpp"

namespace lmforge {

void zero_grads(std::span<const Tensor> params) {
  for (Tensor p : params) p.zero_grad();
}

double clip_grad_norm(std::span<const Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor p : params)
      if (p.has_grad())
        for (double& g : p.mutable_grad()) g *= factor;
  }
  return norm;
}

void optimizer_step(OptimizerState& state, std::span<const Tensor> params) {
  if (!(state.learning_rate > 0.0)) throw ContractError("optimizer: learning rate must be positive");
  for (const Tensor& p : params)
    if (!p.has_grad()) throw ContractError("optimizer: parameter " + shape_to_string(p.shape()) + " has no gradient");

  if (state.kind == OptimizerKind::adam) {
    if (state.first_moment.empty()) {
      for (const Tensor& p : params) {
        state.first_moment.emplace_back(p.numel(), 0.0);
        state.second_moment.emplace_back(p.numel(), 0.0);
      }
    }
    if (state.first_moment.size() != params.size())
      throw ContractError("optimizer: parameter set changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (state.first_moment[i].size() != params[i].numel())
        throw ContractError("optimizer: moment shape does not match parameter");
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto v = p.mutable_values();
    auto g = p.mutable_grad();
    if (state.kind == OptimizerKind::sgd) {
      for (std::size_t j = 0; j < v.size(); ++j) v[j] -= state.learning_rate * g[j];
    } else {
      auto& m1 = state.first_moment[i];
      auto& m2 = state.second_moment[i];
      for (std::size_t j = 0; j < v.size(); ++j) {
        m1[j] = state.beta1 * m1[j] + (1.0 - state.beta1) * g[j];
        m2[j] = state.beta2 * m2[j] + (1.0 - state.beta2) * g[j] * g[j];
        const double mhat = m1[j] / c1;
        const double vhat = m2[j] / c2;
        v[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
      }
    }
    for (double& gj : g) gj = 0.0;
  }
}

}  // namespace lmforge
