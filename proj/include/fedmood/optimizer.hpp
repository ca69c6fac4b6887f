#pragma once

#include <span>
#include <string>

#include "fedmood/model.hpp"

namespace fedmood {

enum class OptKind { kRmsProp, kSgd };

std::string opt_kind_name(OptKind kind);
OptKind opt_kind_from_name(const std::string& name);

struct OptimizerConfig {
  OptKind kind = OptKind::kRmsProp;
  double learning_rate = 0.001;
  double rho = 0.9;      // RMSProp decay
  double epsilon = 1e-8; // RMSProp stabilizer
};

// Per-trainer state.  Constructed fresh at every communication round / model
// handoff: only parameters travel between parties, never optimizer state.
struct OptimizerState {
  OptimizerConfig config;
  Vec accum;  // RMSProp squared-gradient accumulator, flat, lazily sized

  explicit OptimizerState(const OptimizerConfig& cfg) : config(cfg) {}
};

// SGD:     w -= lr * g
// RMSProp: a = rho*a + (1-rho)*g^2;  w -= lr * g / (sqrt(a) + eps)
void optimizer_step(OptimizerState& state, ModelParams& params,
                    std::span<const double> gradient);

// Flat-vector core used by the above; exposed for tests.
void optimizer_step_flat(OptimizerState& state, Vec& flat_params,
                         std::span<const double> gradient);

}  // namespace fedmood
