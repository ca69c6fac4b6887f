#include "fedmood/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace fedmood {

std::string opt_kind_name(OptKind kind) {
  return kind == OptKind::kRmsProp ? "rmsprop" : "sgd";
}

OptKind opt_kind_from_name(const std::string& name) {
  if (name == "rmsprop") return OptKind::kRmsProp;
  if (name == "sgd") return OptKind::kSgd;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void optimizer_step_flat(OptimizerState& state, Vec& flat_params,
                         std::span<const double> gradient) {
  if (flat_params.size() != gradient.size()) {
    throw std::invalid_argument("optimizer_step: param/gradient size mismatch");
  }
  const double lr = state.config.learning_rate;
  if (state.config.kind == OptKind::kSgd) {
    for (std::size_t i = 0; i < flat_params.size(); ++i) {
      flat_params[i] -= lr * gradient[i];
    }
    return;
  }
  if (state.accum.empty()) state.accum.assign(flat_params.size(), 0.0);
  if (state.accum.size() != flat_params.size()) {
    throw std::invalid_argument("optimizer_step: accumulator size mismatch");
  }
  const double rho = state.config.rho;
  const double eps = state.config.epsilon;
  for (std::size_t i = 0; i < flat_params.size(); ++i) {
    const double g = gradient[i];
    const double a = rho * state.accum[i] + (1.0 - rho) * g * g;
    state.accum[i] = a;
    flat_params[i] -= lr * g / (std::sqrt(a) + eps);
  }
}

void optimizer_step(OptimizerState& state, ModelParams& params,
                    std::span<const double> gradient) {
  thread_local Vec flat;  // scratch; one step runs per thread at a time
  params.flatten_into(flat);
  optimizer_step_flat(state, flat, gradient);
  params.unflatten(flat);
}

}  // namespace fedmood
