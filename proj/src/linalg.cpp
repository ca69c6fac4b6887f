#include "fedmood/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

// Vector transcendentals: glibc's libmvec provides exp/tanh over full AVX
// registers (x86-64 vector ABI, pulled in by the libm linker script).  Only
// referenced when the target arch guarantees the instructions exist.
#if defined(__GLIBC__) && (defined(__AVX512F__) || defined(__AVX2__))
#include <immintrin.h>
#if defined(__AVX512F__)
extern "C" __m512d _ZGVeN8v_exp(__m512d);
extern "C" __m512d _ZGVeN8v_tanh(__m512d);
#define FEDMOOD_VEC_MATH_8 1
#else
extern "C" __m256d _ZGVdN4v_exp(__m256d);
extern "C" __m256d _ZGVdN4v_tanh(__m256d);
#define FEDMOOD_VEC_MATH_4 1
#endif
#endif

namespace fedmood {

Vec affine(const DenseMatrix& w, std::span<const double> x, bool append_bias_one) {
  const int expected = static_cast<int>(x.size()) + (append_bias_one ? 1 : 0);
  if (w.cols != expected) {
    throw std::invalid_argument("affine: W has " + std::to_string(w.cols) +
                                " cols, input provides " + std::to_string(expected));
  }
  Vec y(static_cast<std::size_t>(w.rows), 0.0);
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < w.rows; ++i) {
    const double* wr = w.row(i);
    double sum = append_bias_one ? wr[n] : 0.0;
    for (int j = 0; j < n; ++j) sum += wr[j] * x[j];
    y[i] = sum;
  }
  return y;
}

void matvec_accum(const DenseMatrix& w, const double* x, double* y) {
  const int rows = w.rows, cols = w.cols;
  for (int i = 0; i < rows; ++i) {
    const double* wr = w.data.data() + static_cast<std::size_t>(i) * cols;
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += wr[j] * x[j];
    y[i] += sum;
  }
}

void matvec_t_accum(const DenseMatrix& w, const double* a, double* y) {
  const int rows = w.rows, cols = w.cols;
  for (int i = 0; i < rows; ++i) {
    const double* wr = w.data.data() + static_cast<std::size_t>(i) * cols;
    const double ai = a[i];
    for (int j = 0; j < cols; ++j) y[j] += wr[j] * ai;
  }
}

void outer_accum(DenseMatrix& a_mat, const double* a, const double* x) {
  const int rows = a_mat.rows, cols = a_mat.cols;
  for (int i = 0; i < rows; ++i) {
    double* ar = a_mat.data.data() + static_cast<std::size_t>(i) * cols;
    const double ai = a[i];
    for (int j = 0; j < cols; ++j) ar[j] += ai * x[j];
  }
}

double activate_scalar(double x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::kTanh:
      return std::tanh(x);
  }
  return 0.0;
}

Vec activate(std::span<const double> x, Activation kind) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate_scalar(x[i], kind);
  return y;
}

void vec_sigmoid(const double* a, double* out, int n) {
  int i = 0;
#if defined(FEDMOOD_VEC_MATH_8)
  const __m512d one = _mm512_set1_pd(1.0);
  for (; i + 8 <= n; i += 8) {
    const __m512d v = _mm512_loadu_pd(a + i);
    const __m512d e = _ZGVeN8v_exp(_mm512_sub_pd(_mm512_setzero_pd(), v));
    _mm512_storeu_pd(out + i, _mm512_div_pd(one, _mm512_add_pd(one, e)));
  }
#elif defined(FEDMOOD_VEC_MATH_4)
  const __m256d one = _mm256_set1_pd(1.0);
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    const __m256d e = _ZGVdN4v_exp(_mm256_sub_pd(_mm256_setzero_pd(), v));
    _mm256_storeu_pd(out + i, _mm256_div_pd(one, _mm256_add_pd(one, e)));
  }
#endif
  for (; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
}

void vec_tanh(const double* a, double* out, int n) {
  int i = 0;
#if defined(FEDMOOD_VEC_MATH_8)
  for (; i + 8 <= n; i += 8) {
    _mm512_storeu_pd(out + i, _ZGVeN8v_tanh(_mm512_loadu_pd(a + i)));
  }
#elif defined(FEDMOOD_VEC_MATH_4)
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _ZGVdN4v_tanh(_mm256_loadu_pd(a + i)));
  }
#endif
  for (; i < n; ++i) out[i] = std::tanh(a[i]);
}

double activation_grad_from_output(double y, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    case Activation::kTanh:
      return 1.0 - y * y;
  }
  return 0.0;
}

SoftmaxCeResult softmax_cross_entropy(std::span<const double> logits, int label) {
  if (logits.empty()) throw std::invalid_argument("softmax_cross_entropy: empty logits");
  if (label < 0 || label >= static_cast<int>(logits.size())) {
    throw std::invalid_argument("softmax_cross_entropy: label out of range");
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  SoftmaxCeResult out;
  out.dlogits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::exp(logits[i] - zmax);
    out.dlogits[i] = e;
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (double& v : out.dlogits) v *= inv;
  out.dlogits[static_cast<std::size_t>(label)] -= 1.0;
  out.loss = std::log(sum) - (logits[static_cast<std::size_t>(label)] - zmax);
  return out;
}

}  // namespace fedmood
