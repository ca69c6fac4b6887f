#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedmood {

using Vec = std::vector<double>;

// Row-major dense matrix of doubles.  All model parameters and gradients use
// this layout so flattening is a straight memcpy of `data`.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  Vec data;  // rows * cols, row-major

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
};

// y = W x, optionally treating x as [x;1] (bias folded into W's last column).
// Requires W.cols == x.size() (+1 with bias).
Vec affine(const DenseMatrix& w, std::span<const double> x, bool append_bias_one);

// y += W x  (no bias).  Sizes must already agree; hot path, no checks.
void matvec_accum(const DenseMatrix& w, const double* x, double* y);
// y += W^T a.
void matvec_t_accum(const DenseMatrix& w, const double* a, double* y);
// A += a x^T  (outer product accumulate; A is rows=|a|, cols=|x|).
void outer_accum(DenseMatrix& a_mat, const double* a, const double* x);

enum class Activation { kRelu, kSigmoid, kTanh };

Vec activate(std::span<const double> x, Activation kind);
double activate_scalar(double x, Activation kind);

// Elementwise out[i] = sigmoid(a[i]) / tanh(a[i]).  On glibc/x86-64 builds
// with AVX these dispatch full vector lanes to libmvec (<= 4 ulp, bitwise
// deterministic for a fixed build); remaining elements use scalar libm.
// The recurrent-step hot loop calls these once per gate instead of libm once
// per unit.
void vec_sigmoid(const double* a, double* out, int n);
void vec_tanh(const double* a, double* out, int n);

// Derivative expressed through the activated value y = act(x):
//   relu: y > 0 ? 1 : 0   sigmoid: y(1-y)   tanh: 1-y^2
double activation_grad_from_output(double y, Activation kind);

struct SoftmaxCeResult {
  double loss = 0.0;
  Vec dlogits;  // softmax(z) - onehot(label)
};

// Numerically stable log-sum-exp form; `label` indexes logits.
SoftmaxCeResult softmax_cross_entropy(std::span<const double> logits, int label);

}  // namespace fedmood
