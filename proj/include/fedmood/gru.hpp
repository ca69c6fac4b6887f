#pragma once

#include <string>

#include "fedmood/linalg.hpp"

namespace fedmood {

// The three keyboard-session views, in canonical order.
enum class ViewId { kAlphanumeric = 0, kSpecial = 1, kAccelerometer = 2 };

constexpr int kViewCount = 3;
constexpr int kAlphaFeatures = 4;    // key hold time, gap since previous, dx, dy
constexpr int kSpecialFeatures = 6;  // one-hot special-key category
constexpr int kAccelFeatures = 3;    // x, y, z acceleration

int view_feature_dim(ViewId view);
std::string view_name(ViewId view);

// One view's per-step feature sequence, stored step-major and flat.
struct ViewSequence {
  ViewId view_id = ViewId::kAlphanumeric;
  int feature_dim = 0;
  int step_count = 0;
  Vec values;  // step_count * feature_dim

  const double* step(int t) const {
    return values.data() + static_cast<std::size_t>(t) * feature_dim;
  }
  double* step(int t) {
    return values.data() + static_cast<std::size_t>(t) * feature_dim;
  }
};

// Gated recurrent unit, one per view:
//   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   hcand_t = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)
//   h_t = (1 - z_t) * h_{t-1} + z_t * hcand_t,   h_0 = 0
// The session encoding k is h_T.
struct GruParams {
  int input_dim = 0;
  int hidden_dim = 0;
  DenseMatrix wz, wr, wh;  // hidden x input
  DenseMatrix uz, ur, uh;  // hidden x hidden
  Vec bz, br, bh;          // hidden

  GruParams() = default;
  GruParams(int input, int hidden);
  std::size_t param_count() const;
};

// Forward activations kept for backprop.  Reused across samples: resize() is
// cheap once capacity is established.
struct GruCache {
  int steps = 0;
  int hidden = 0;
  Vec h;            // (steps + 1) * hidden, h[0] = 0
  Vec z, r, hcand;  // steps * hidden
  Vec rh;           // steps * hidden, r_t * h_{t-1}

  const double* hidden_at(int t) const {  // h_t, t in [0, steps]
    return h.data() + static_cast<std::size_t>(t) * hidden;
  }
  // Session encoding k = h_T.
  const double* encoding() const { return hidden_at(steps); }
};

// Runs the recurrence over seq; fills cache (including the encoding h_T).
void gru_forward(const GruParams& params, const ViewSequence& seq, GruCache& cache);

// Convenience for tests: returns k as a Vec.
Vec gru_encode(const GruParams& params, const ViewSequence& seq);

// Backpropagates d(loss)/d(k) through the recurrence recorded in cache,
// accumulating parameter gradients into `grad` (caller controls zeroing).
void gru_backward(const GruParams& params, const ViewSequence& seq,
                  const GruCache& cache, const double* dk, GruParams& grad);

}  // namespace fedmood
