#pragma once

#include <span>
#include <variant>
#include <vector>

#include "fedmood/linalg.hpp"

namespace fedmood {

// Fusion heads map the per-view session encodings k^(1..V) to class logits.
// All three treat the encodings jointly (late fusion); they differ in how
// feature interactions are modeled.

// Plain feed-forward head:
//   p = relu(W1 [k;1]),  logits = W2 p,  k = concat of all view encodings.
struct DnnHeadParams {
  int hidden_units = 0;
  int classes = 0;
  DenseMatrix w1;  // hidden x (sum d_v + 1)
  DenseMatrix w2;  // classes x hidden
};

// Factorization head over the concatenated encoding.  Per class c:
//   p_c = U_c k            (factor_units x d, no bias column)
//   logit_c = sum_f p_c[f]^2 + W_c^T [k;1]
// This is the exact published form (sum over the squared projection plus a
// linear term), kept verbatim rather than swapped for the classical
// pairwise-interaction expansion.
struct FmHeadParams {
  int factor_units = 0;
  int classes = 0;
  std::vector<DenseMatrix> u;  // per class: factor_units x d
  std::vector<Vec> w;          // per class: d + 1
};

// Multi-view factorization head.  Per class c and view v:
//   p_c^(v) = U_c^(v) [k^(v);1]     (factor_units x (d_v + 1))
//   logit_c = sum_f prod_v p_c^(v)[f]
// Equivalent to a rank-factorized weight over all cross-view index tuples;
// mvm_brute_force evaluates that unfactorized sum directly as an oracle.
struct MvmHeadParams {
  int factor_units = 0;
  int classes = 0;
  int views = 0;
  std::vector<DenseMatrix> u;  // [c * views + v]: factor_units x (d_v + 1)
};

struct DnnCache {
  Vec kcat;  // concatenated encodings (no bias element)
  Vec p;     // relu output
  std::vector<int> view_dims;
};

struct FmCache {
  Vec kcat;
  std::vector<Vec> p;  // per class
  std::vector<int> view_dims;
};

struct MvmCache {
  std::vector<Vec> kt;  // per view: [k;1]
  std::vector<Vec> p;   // [c * views + v]
};

Vec dnn_forward(const DnnHeadParams& params, const std::vector<Vec>& ks, DnnCache& cache);
Vec fm_forward(const FmHeadParams& params, const std::vector<Vec>& ks, FmCache& cache);
Vec mvm_forward(const MvmHeadParams& params, const std::vector<Vec>& ks, MvmCache& cache);

// Unfactorized MVM evaluation over all (d_1+1)x...x(d_V+1) index tuples with
// weights w(i_1..i_V) = sum_f prod_v U^(v)[f][i_v].  Throws if the tuple count
// exceeds 1e6.  Oracle only; never on a training path.
Vec mvm_brute_force(const MvmHeadParams& params, const std::vector<Vec>& ks);

// Backward passes accumulate parameter gradients into `grad` and per-view
// encoding gradients into `dks` (sized like ks; caller controls zeroing).
void dnn_backward(const DnnHeadParams& params, const DnnCache& cache,
                  std::span<const double> dlogits, DnnHeadParams& grad,
                  std::vector<Vec>& dks);
void fm_backward(const FmHeadParams& params, const FmCache& cache,
                 std::span<const double> dlogits, FmHeadParams& grad,
                 std::vector<Vec>& dks);
void mvm_backward(const MvmHeadParams& params, const MvmCache& cache,
                  std::span<const double> dlogits, MvmHeadParams& grad,
                  std::vector<Vec>& dks);

using HeadParams = std::variant<DnnHeadParams, FmHeadParams, MvmHeadParams>;
using HeadCache = std::variant<DnnCache, FmCache, MvmCache>;

Vec head_forward(const HeadParams& params, const std::vector<Vec>& ks, HeadCache& cache);
void head_backward(const HeadParams& params, const HeadCache& cache,
                   std::span<const double> dlogits, HeadParams& grad,
                   std::vector<Vec>& dks);

}  // namespace fedmood
