#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedmood/fusion.hpp"
#include "fedmood/gru.hpp"
#include "fedmood/rng.hpp"

namespace fedmood {

enum class ModelKind { kDnn, kDfm, kDmvm };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::kDnn;
  int encoding_dim = 8;  // d_k, per view
  int classes = 2;
  int dnn_hidden = 8;
  int fm_factors = 4;
  int mvm_factors = 4;
};

// Full model: one GRU per view plus one fusion head.
//
// Flatten order (fixed; tests and optimizers depend on it):
//   per view in canonical order (alpha, special, accel):
//     Wz, Wr, Wh, Uz, Ur, Uh (row-major), bz, br, bh
//   then the head:
//     DNN:  W1, W2 (row-major)
//     DFM:  per class: U_c (row-major), W_c
//     DMVM: per class, per view: U_c^(v) (row-major)
struct ModelParams {
  ModelConfig config;
  std::vector<GruParams> encoders;  // size kViewCount
  HeadParams head;

  std::size_t param_count() const;
  Vec flatten() const;
  void flatten_into(Vec& out) const;
  void unflatten(std::span<const double> flat);
};

// All-zero parameters with the right shapes.
ModelParams make_zero_model(const ModelConfig& config);

// Sets every parameter to zero in place (shapes preserved).
void zero_params(ModelParams& params);

// Weights ~ uniform(-a, a) with a = sqrt(1/rows) per matrix (recorded config;
// the source recurrent nets use a = sqrt(1/hidden_dim), which this rule
// reproduces).  Biases are zero and consume no draws.  Matrices are drawn in
// flatten order, elements row-major, so init is reproducible from (seed,
// stream) alone.
ModelParams init_model(const ModelConfig& config, RngStream& rng);

}  // namespace fedmood
