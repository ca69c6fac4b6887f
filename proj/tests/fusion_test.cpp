#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedmood/fusion.hpp"
#include "fedmood/rng.hpp"

using namespace fedmood;

// Frozen logits below come from an independent reference implementation of
// each head evaluated on the same hand-picked parameters.

namespace {

void fill_uniform(Vec& v, RngStream& rng) {
  for (double& x : v) x = rng.uniform(-0.6, 0.6);
}

std::vector<Vec> random_ks(const std::vector<int>& dims, RngStream& rng) {
  std::vector<Vec> ks;
  for (int d : dims) {
    Vec k(d);
    fill_uniform(k, rng);
    ks.push_back(std::move(k));
  }
  return ks;
}

}  // namespace

TEST_CASE("feed-forward head matches the reference forward pass") {
  DnnHeadParams p;
  p.hidden_units = 3;
  p.classes = 2;
  p.w1 = DenseMatrix(3, 5);
  p.w1.data = {0.2, -0.1, 0.4, 0.05, 0.1, -0.3, 0.25, 0.15, -0.2, 0.0,
               0.5, 0.5,  -0.5, 0.1,  -0.05};
  p.w2 = DenseMatrix(2, 3);
  p.w2.data = {1.0, -0.5, 0.25, -0.75, 0.3, 0.6};

  const std::vector<Vec> ks = {{0.5, -0.25}, {0.1, 0.8}};
  DnnCache cache;
  const Vec logits = dnn_forward(p, ks, cache);

  REQUIRE(cache.p.size() == 3);
  CHECK(cache.p[0] == doctest::Approx(0.30500000000000005).epsilon(1e-15));
  CHECK(cache.p[1] == doctest::Approx(0.0).epsilon(1e-15));  // relu clamps
  CHECK(cache.p[2] == doctest::Approx(0.10500000000000002).epsilon(1e-15));
  REQUIRE(logits.size() == 2);
  CHECK(logits[0] == doctest::Approx(0.33125000000000004).epsilon(1e-15));
  CHECK(logits[1] == doctest::Approx(-0.16575000000000001).epsilon(1e-15));
  CHECK(cache.kcat == Vec{0.5, -0.25, 0.1, 0.8});
}

TEST_CASE("factorization head matches the reference forward pass") {
  FmHeadParams p;
  p.factor_units = 2;
  p.classes = 2;
  p.u.assign(2, DenseMatrix(2, 3));
  p.u[0].data = {0.2, -0.4, 0.1, 0.3, 0.2, -0.5};
  p.u[1].data = {-0.1, 0.25, 0.35, 0.4, -0.3, 0.15};
  p.w = {{0.1, -0.2, 0.3, 0.05}, {-0.25, 0.15, 0.0, 0.4}};

  const std::vector<Vec> ks = {{0.5, -0.25}, {0.1}};
  FmCache cache;
  const Vec logits = fm_forward(p, ks, cache);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0] == doctest::Approx(0.2266).epsilon(1e-15));
  CHECK(logits[1] == doctest::Approx(0.32760625000000004).epsilon(1e-15));
}

TEST_CASE("multi-view head: factorized and brute-force evaluations agree") {
  MvmHeadParams p;
  p.factor_units = 2;
  p.classes = 2;
  p.views = 2;
  p.u.assign(4, DenseMatrix(2, 3));
  p.u[0].data = {0.2, -0.1, 0.3, 0.4, 0.1, -0.2};    // class 0, view 0
  p.u[1].data = {-0.3, 0.2, 0.1, 0.25, -0.15, 0.5};  // class 0, view 1
  p.u[2].data = {0.1, 0.35, -0.4, -0.2, 0.3, 0.15};  // class 1, view 0
  p.u[3].data = {0.45, -0.25, 0.2, 0.1, 0.2, -0.3};  // class 1, view 1

  const std::vector<Vec> ks = {{0.5, -0.25}, {0.1, 0.8}};
  MvmCache cache;
  const Vec fact = mvm_forward(p, ks, cache);
  REQUIRE(fact.size() == 2);
  CHECK(fact[0] == doctest::Approx(0.087625000000000022).epsilon(1e-14));
  CHECK(fact[1] == doctest::Approx(-0.016437500000000004).epsilon(1e-14));

  const Vec brute = mvm_brute_force(p, ks);
  CHECK(brute[0] == doctest::Approx(0.087625000000000008).epsilon(1e-14));
  CHECK(brute[1] == doctest::Approx(-0.016437499999999994).epsilon(1e-14));
  for (int c = 0; c < 2; ++c)
    CHECK(fact[c] == doctest::Approx(brute[c]).epsilon(1e-12));
}

TEST_CASE("factorized vs brute-force agreement holds on random instances") {
  RngStream rng(77, 21);
  for (int trial = 0; trial < 5; ++trial) {
    MvmHeadParams p;
    p.factor_units = 1 + static_cast<int>(rng.uniform_index(3));
    p.classes = 2;
    p.views = 3;
    const std::vector<int> dims = {2, 3, 2};
    for (int c = 0; c < p.classes; ++c)
      for (int v = 0; v < p.views; ++v) {
        DenseMatrix u(p.factor_units, dims[v] + 1);
        fill_uniform(u.data, rng);
        p.u.push_back(std::move(u));
      }
    const std::vector<Vec> ks = random_ks(dims, rng);
    MvmCache cache;
    const Vec fact = mvm_forward(p, ks, cache);
    const Vec brute = mvm_brute_force(p, ks);
    REQUIRE(fact.size() == brute.size());
    for (std::size_t c = 0; c < fact.size(); ++c)
      CHECK(fact[c] == doctest::Approx(brute[c]).epsilon(1e-10));
  }
}

// Directional finite-difference check of each head's backward pass, with the
// loss L = sum_c g_c * logit_c for a fixed random g (so dlogits = g).
namespace {

template <typename Params, typename Cache, typename Fwd, typename Bwd>
void check_head_gradients(Params& p, std::vector<double*> flat_params,
                          std::vector<double*> flat_grads, const std::vector<Vec>& ks,
                          Fwd fwd, Bwd bwd, RngStream& rng) {
  Cache cache;
  const Vec logits = fwd(p, ks, cache);
  Vec g(logits.size());
  for (double& v : g) v = rng.uniform(-1.0, 1.0);

  Params grad = p;  // same shape; zero it
  for (double* gp : flat_grads) *gp = 0.0;
  std::vector<Vec> dks;
  for (const Vec& k : ks) dks.emplace_back(k.size(), 0.0);
  bwd(p, cache, g, grad, dks);

  REQUIRE(flat_params.size() == flat_grads.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat_params.size(); i += 7) {  // spot-check every 7th
    const double orig = *flat_params[i];
    *flat_params[i] = orig + h;
    Cache cp;
    const Vec lp = fwd(p, ks, cp);
    *flat_params[i] = orig - h;
    Cache cm;
    const Vec lm = fwd(p, ks, cm);
    *flat_params[i] = orig;
    double num = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) num += g[c] * (lp[c] - lm[c]) / (2.0 * h);
    CHECK(*flat_grads[i] == doctest::Approx(num).epsilon(1e-5));
  }

  // Encoding gradients by the same scheme.
  std::vector<Vec> ks_mut = ks;
  for (std::size_t v = 0; v < ks.size(); ++v)
    for (std::size_t j = 0; j < ks[v].size(); ++j) {
      const double orig = ks_mut[v][j];
      ks_mut[v][j] = orig + h;
      Cache cp;
      const Vec lp = fwd(p, ks_mut, cp);
      ks_mut[v][j] = orig - h;
      Cache cm;
      const Vec lm = fwd(p, ks_mut, cm);
      ks_mut[v][j] = orig;
      double num = 0.0;
      for (std::size_t c = 0; c < g.size(); ++c) num += g[c] * (lp[c] - lm[c]) / (2.0 * h);
      CHECK(dks[v][j] == doctest::Approx(num).epsilon(1e-5));
    }
}

std::vector<double*> dnn_flat(DnnHeadParams& p) {
  std::vector<double*> out;
  for (double& v : p.w1.data) out.push_back(&v);
  for (double& v : p.w2.data) out.push_back(&v);
  return out;
}

std::vector<double*> fm_flat(FmHeadParams& p) {
  std::vector<double*> out;
  for (DenseMatrix& m : p.u)
    for (double& v : m.data) out.push_back(&v);
  for (Vec& w : p.w)
    for (double& v : w) out.push_back(&v);
  return out;
}

std::vector<double*> mvm_flat(MvmHeadParams& p) {
  std::vector<double*> out;
  for (DenseMatrix& m : p.u)
    for (double& v : m.data) out.push_back(&v);
  return out;
}

}  // namespace

TEST_CASE("feed-forward head backward matches finite differences") {
  RngStream rng(101, 22);
  DnnHeadParams p;
  p.hidden_units = 4;
  p.classes = 2;
  p.w1 = DenseMatrix(4, 6);  // dims 2+3 + bias
  p.w2 = DenseMatrix(2, 4);
  fill_uniform(p.w1.data, rng);
  fill_uniform(p.w2.data, rng);
  const std::vector<Vec> ks = random_ks({2, 3}, rng);
  DnnHeadParams grad = p;
  check_head_gradients<DnnHeadParams, DnnCache>(
      p, dnn_flat(p), dnn_flat(grad), ks,
      [](const DnnHeadParams& q, const std::vector<Vec>& k, DnnCache& c) {
        return dnn_forward(q, k, c);
      },
      [&grad](const DnnHeadParams& q, const DnnCache& c, const Vec& g, DnnHeadParams&,
              std::vector<Vec>& dks) { dnn_backward(q, c, g, grad, dks); },
      rng);
}

TEST_CASE("factorization head backward matches finite differences") {
  RngStream rng(102, 23);
  FmHeadParams p;
  p.factor_units = 3;
  p.classes = 2;
  p.u.assign(2, DenseMatrix(3, 5));  // dims 2+3
  for (DenseMatrix& m : p.u) fill_uniform(m.data, rng);
  p.w.assign(2, Vec(6, 0.0));
  for (Vec& w : p.w) fill_uniform(w, rng);
  const std::vector<Vec> ks = random_ks({2, 3}, rng);
  FmHeadParams grad = p;
  check_head_gradients<FmHeadParams, FmCache>(
      p, fm_flat(p), fm_flat(grad), ks,
      [](const FmHeadParams& q, const std::vector<Vec>& k, FmCache& c) {
        return fm_forward(q, k, c);
      },
      [&grad](const FmHeadParams& q, const FmCache& c, const Vec& g, FmHeadParams&,
              std::vector<Vec>& dks) { fm_backward(q, c, g, grad, dks); },
      rng);
}

TEST_CASE("multi-view head backward matches finite differences") {
  RngStream rng(103, 24);
  MvmHeadParams p;
  p.factor_units = 3;
  p.classes = 2;
  p.views = 2;
  p.u = {DenseMatrix(3, 3), DenseMatrix(3, 4), DenseMatrix(3, 3), DenseMatrix(3, 4)};
  for (DenseMatrix& m : p.u) fill_uniform(m.data, rng);
  const std::vector<Vec> ks = random_ks({2, 3}, rng);
  MvmHeadParams grad = p;
  check_head_gradients<MvmHeadParams, MvmCache>(
      p, mvm_flat(p), mvm_flat(grad), ks,
      [](const MvmHeadParams& q, const std::vector<Vec>& k, MvmCache& c) {
        return mvm_forward(q, k, c);
      },
      [&grad](const MvmHeadParams& q, const MvmCache& c, const Vec& g, MvmHeadParams&,
              std::vector<Vec>& dks) { mvm_backward(q, c, g, grad, dks); },
      rng);
}

TEST_CASE("variant dispatch routes to the right head") {
  DnnHeadParams p;
  p.hidden_units = 3;
  p.classes = 2;
  p.w1 = DenseMatrix(3, 5);
  p.w1.data = {0.2, -0.1, 0.4, 0.05, 0.1, -0.3, 0.25, 0.15, -0.2, 0.0,
               0.5, 0.5,  -0.5, 0.1,  -0.05};
  p.w2 = DenseMatrix(2, 3);
  p.w2.data = {1.0, -0.5, 0.25, -0.75, 0.3, 0.6};
  const HeadParams hp = p;
  HeadCache hc;
  const Vec logits = head_forward(hp, {{0.5, -0.25}, {0.1, 0.8}}, hc);
  CHECK(logits[0] == doctest::Approx(0.33125000000000004).epsilon(1e-15));
  CHECK(logits[1] == doctest::Approx(-0.16575000000000001).epsilon(1e-15));
}
