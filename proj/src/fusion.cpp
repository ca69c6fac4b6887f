#include "fedmood/fusion.hpp"

#include <stdexcept>

namespace fedmood {

namespace {

void concat_views(const std::vector<Vec>& ks, Vec& kcat, std::vector<int>& dims) {
  kcat.clear();
  dims.clear();
  for (const Vec& k : ks) {
    dims.push_back(static_cast<int>(k.size()));
    kcat.insert(kcat.end(), k.begin(), k.end());
  }
}

// scatter a gradient on the concatenated encoding back to per-view slices
void split_dkcat(const Vec& dkcat, const std::vector<int>& dims, std::vector<Vec>& dks) {
  std::size_t off = 0;
  for (std::size_t v = 0; v < dims.size(); ++v) {
    for (int j = 0; j < dims[v]; ++j) dks[v][j] += dkcat[off + j];
    off += static_cast<std::size_t>(dims[v]);
  }
}

}  // namespace

Vec dnn_forward(const DnnHeadParams& params, const std::vector<Vec>& ks, DnnCache& cache) {
  concat_views(ks, cache.kcat, cache.view_dims);
  Vec a1 = affine(params.w1, cache.kcat, /*append_bias_one=*/true);
  cache.p = activate(a1, Activation::kRelu);
  return affine(params.w2, cache.p, /*append_bias_one=*/false);
}

void dnn_backward(const DnnHeadParams& params, const DnnCache& cache,
                  std::span<const double> dlogits, DnnHeadParams& grad,
                  std::vector<Vec>& dks) {
  const int hidden = params.hidden_units;
  outer_accum(grad.w2, dlogits.data(), cache.p.data());
  Vec dp(hidden, 0.0);
  matvec_t_accum(params.w2, dlogits.data(), dp.data());
  for (int i = 0; i < hidden; ++i) dp[i] *= activation_grad_from_output(cache.p[i], Activation::kRelu);

  const int d = static_cast<int>(cache.kcat.size());
  // w1's last column multiplies the constant 1
  for (int i = 0; i < hidden; ++i) {
    double* gr = grad.w1.row(i);
    const double da = dp[i];
    for (int j = 0; j < d; ++j) gr[j] += da * cache.kcat[j];
    gr[d] += da;
  }
  Vec dkcat(d, 0.0);
  for (int i = 0; i < hidden; ++i) {
    const double* wr = params.w1.row(i);
    const double da = dp[i];
    for (int j = 0; j < d; ++j) dkcat[j] += wr[j] * da;
  }
  split_dkcat(dkcat, cache.view_dims, dks);
}

Vec fm_forward(const FmHeadParams& params, const std::vector<Vec>& ks, FmCache& cache) {
  concat_views(ks, cache.kcat, cache.view_dims);
  if (cache.p.size() != static_cast<std::size_t>(params.classes)) {
    cache.p.resize(params.classes);
  }
  Vec logits(params.classes, 0.0);
  for (int c = 0; c < params.classes; ++c) {
    cache.p[c] = affine(params.u[c], cache.kcat, /*append_bias_one=*/false);
    double quad = 0.0;
    for (double v : cache.p[c]) quad += v * v;
    const Vec& wc = params.w[c];
    double lin = wc.back();
    for (std::size_t j = 0; j < cache.kcat.size(); ++j) lin += wc[j] * cache.kcat[j];
    logits[c] = quad + lin;
  }
  return logits;
}

void fm_backward(const FmHeadParams& params, const FmCache& cache,
                 std::span<const double> dlogits, FmHeadParams& grad,
                 std::vector<Vec>& dks) {
  const int d = static_cast<int>(cache.kcat.size());
  Vec dkcat(d, 0.0);
  for (int c = 0; c < params.classes; ++c) {
    const double dl = dlogits[c];
    const Vec& pc = cache.p[c];
    // quadratic term: d(sum p^2)/dp = 2p
    for (int f = 0; f < params.factor_units; ++f) {
      const double dpf = dl * 2.0 * pc[f];
      double* gr = grad.u[c].row(f);
      const double* ur = params.u[c].row(f);
      for (int j = 0; j < d; ++j) {
        gr[j] += dpf * cache.kcat[j];
        dkcat[j] += dpf * ur[j];
      }
    }
    // linear term with bias element
    Vec& gw = grad.w[c];
    const Vec& wc = params.w[c];
    for (int j = 0; j < d; ++j) {
      gw[j] += dl * cache.kcat[j];
      dkcat[j] += dl * wc[j];
    }
    gw[d] += dl;
  }
  split_dkcat(dkcat, cache.view_dims, dks);
}

Vec mvm_forward(const MvmHeadParams& params, const std::vector<Vec>& ks, MvmCache& cache) {
  const int views = params.views;
  if (static_cast<int>(ks.size()) != views) {
    throw std::invalid_argument("mvm_forward: expected " + std::to_string(views) + " views");
  }
  if (cache.kt.size() != static_cast<std::size_t>(views)) cache.kt.resize(views);
  for (int v = 0; v < views; ++v) {
    cache.kt[v].assign(ks[v].begin(), ks[v].end());
    cache.kt[v].push_back(1.0);
  }
  if (cache.p.size() != static_cast<std::size_t>(params.classes) * views) {
    cache.p.resize(static_cast<std::size_t>(params.classes) * views);
  }
  Vec logits(params.classes, 0.0);
  for (int c = 0; c < params.classes; ++c) {
    for (int v = 0; v < views; ++v) {
      cache.p[static_cast<std::size_t>(c) * views + v] =
          affine(params.u[static_cast<std::size_t>(c) * views + v], cache.kt[v],
                 /*append_bias_one=*/false);
    }
    double sum = 0.0;
    for (int f = 0; f < params.factor_units; ++f) {
      double prod = 1.0;
      for (int v = 0; v < views; ++v) {
        prod *= cache.p[static_cast<std::size_t>(c) * views + v][f];
      }
      sum += prod;
    }
    logits[c] = sum;
  }
  return logits;
}

void mvm_backward(const MvmHeadParams& params, const MvmCache& cache,
                  std::span<const double> dlogits, MvmHeadParams& grad,
                  std::vector<Vec>& dks) {
  const int views = params.views;
  for (int c = 0; c < params.classes; ++c) {
    const double dl = dlogits[c];
    for (int f = 0; f < params.factor_units; ++f) {
      for (int v = 0; v < views; ++v) {
        // product over the other views, computed directly so zeros are safe
        double outer = 1.0;
        for (int u = 0; u < views; ++u) {
          if (u != v) outer *= cache.p[static_cast<std::size_t>(c) * views + u][f];
        }
        const double dpf = dl * outer;
        const Vec& ktv = cache.kt[v];
        const int dv1 = static_cast<int>(ktv.size());
        double* gr = grad.u[static_cast<std::size_t>(c) * views + v].row(f);
        const double* ur = params.u[static_cast<std::size_t>(c) * views + v].row(f);
        for (int j = 0; j < dv1; ++j) gr[j] += dpf * ktv[j];
        for (int j = 0; j < dv1 - 1; ++j) dks[v][j] += dpf * ur[j];
      }
    }
  }
}

Vec mvm_brute_force(const MvmHeadParams& params, const std::vector<Vec>& ks) {
  const int views = params.views;
  if (static_cast<int>(ks.size()) != views) {
    throw std::invalid_argument("mvm_brute_force: expected " + std::to_string(views) + " views");
  }
  std::vector<Vec> kt(views);
  double combos = 1.0;
  for (int v = 0; v < views; ++v) {
    kt[v] = ks[v];
    kt[v].push_back(1.0);
    combos *= static_cast<double>(kt[v].size());
  }
  if (combos > 1e6) {
    throw std::runtime_error("mvm_brute_force: tuple count " + std::to_string(combos) +
                             " exceeds 1e6");
  }
  Vec logits(params.classes, 0.0);
  std::vector<int> idx(views, 0);
  for (int c = 0; c < params.classes; ++c) {
    std::fill(idx.begin(), idx.end(), 0);
    double total = 0.0;
    for (;;) {
      // weight of this index tuple under the rank factorization
      double w = 0.0;
      for (int f = 0; f < params.factor_units; ++f) {
        double prod = 1.0;
        for (int v = 0; v < views; ++v) {
          prod *= params.u[static_cast<std::size_t>(c) * views + v].at(f, idx[v]);
        }
        w += prod;
      }
      double kprod = 1.0;
      for (int v = 0; v < views; ++v) kprod *= kt[v][idx[v]];
      total += w * kprod;

      int v = views - 1;
      while (v >= 0 && ++idx[v] == static_cast<int>(kt[v].size())) {
        idx[v] = 0;
        --v;
      }
      if (v < 0) break;
    }
    logits[c] = total;
  }
  return logits;
}

Vec head_forward(const HeadParams& params, const std::vector<Vec>& ks, HeadCache& cache) {
  // keep the existing alternative alive so its buffers are reused across calls
  if (const auto* dnn = std::get_if<DnnHeadParams>(&params)) {
    if (!std::holds_alternative<DnnCache>(cache)) cache.emplace<DnnCache>();
    return dnn_forward(*dnn, ks, std::get<DnnCache>(cache));
  }
  if (const auto* fm = std::get_if<FmHeadParams>(&params)) {
    if (!std::holds_alternative<FmCache>(cache)) cache.emplace<FmCache>();
    return fm_forward(*fm, ks, std::get<FmCache>(cache));
  }
  const auto& mvm = std::get<MvmHeadParams>(params);
  if (!std::holds_alternative<MvmCache>(cache)) cache.emplace<MvmCache>();
  return mvm_forward(mvm, ks, std::get<MvmCache>(cache));
}

void head_backward(const HeadParams& params, const HeadCache& cache,
                   std::span<const double> dlogits, HeadParams& grad,
                   std::vector<Vec>& dks) {
  if (const auto* dnn = std::get_if<DnnHeadParams>(&params)) {
    dnn_backward(*dnn, std::get<DnnCache>(cache), dlogits, std::get<DnnHeadParams>(grad), dks);
    return;
  }
  if (const auto* fm = std::get_if<FmHeadParams>(&params)) {
    fm_backward(*fm, std::get<FmCache>(cache), dlogits, std::get<FmHeadParams>(grad), dks);
    return;
  }
  mvm_backward(std::get<MvmHeadParams>(params), std::get<MvmCache>(cache), dlogits,
               std::get<MvmHeadParams>(grad), dks);
}

}  // namespace fedmood
