#include "fedmood/gru.hpp"

#include <cmath>
#include <stdexcept>

namespace fedmood {

int view_feature_dim(ViewId view) {
  switch (view) {
    case ViewId::kAlphanumeric: return kAlphaFeatures;
    case ViewId::kSpecial: return kSpecialFeatures;
    case ViewId::kAccelerometer: return kAccelFeatures;
  }
  return 0;
}

std::string view_name(ViewId view) {
  switch (view) {
    case ViewId::kAlphanumeric: return "alpha";
    case ViewId::kSpecial: return "special";
    case ViewId::kAccelerometer: return "accel";
  }
  return "?";
}

GruParams::GruParams(int input, int hidden)
    : input_dim(input),
      hidden_dim(hidden),
      wz(hidden, input), wr(hidden, input), wh(hidden, input),
      uz(hidden, hidden), ur(hidden, hidden), uh(hidden, hidden),
      bz(hidden, 0.0), br(hidden, 0.0), bh(hidden, 0.0) {}

std::size_t GruParams::param_count() const {
  return 3 * wz.size() + 3 * uz.size() + 3 * bz.size();
}

void gru_forward(const GruParams& p, const ViewSequence& seq, GruCache& cache) {
  if (seq.feature_dim != p.input_dim) {
    throw std::invalid_argument("gru_forward: sequence feature_dim " +
                                std::to_string(seq.feature_dim) + " != input_dim " +
                                std::to_string(p.input_dim));
  }
  const int steps = seq.step_count;
  const int hid = p.hidden_dim;
  const int in = p.input_dim;
  cache.steps = steps;
  cache.hidden = hid;
  cache.h.assign(static_cast<std::size_t>(steps + 1) * hid, 0.0);
  cache.z.resize(static_cast<std::size_t>(steps) * hid);
  cache.r.resize(static_cast<std::size_t>(steps) * hid);
  cache.hcand.resize(static_cast<std::size_t>(steps) * hid);
  cache.rh.resize(static_cast<std::size_t>(steps) * hid);

  // gate pre-activations for the whole step, so each activation runs as one
  // vector-math call instead of libm once per unit (the former hot spot)
  thread_local Vec pre;
  pre.resize(2 * static_cast<std::size_t>(hid));
  double* az = pre.data();
  double* ar = az + hid;

  for (int t = 0; t < steps; ++t) {
    const double* xt = seq.step(t);
    const double* hprev = cache.h.data() + static_cast<std::size_t>(t) * hid;
    double* zt = cache.z.data() + static_cast<std::size_t>(t) * hid;
    double* rt = cache.r.data() + static_cast<std::size_t>(t) * hid;
    double* rht = cache.rh.data() + static_cast<std::size_t>(t) * hid;
    double* hct = cache.hcand.data() + static_cast<std::size_t>(t) * hid;
    double* ht = cache.h.data() + static_cast<std::size_t>(t + 1) * hid;

    // update and reset gates share the x/h loads
    for (int i = 0; i < hid; ++i) {
      const double* wzr = p.wz.row(i);
      const double* wrr = p.wr.row(i);
      double sz = p.bz[i], sr = p.br[i];
      for (int j = 0; j < in; ++j) {
        sz += wzr[j] * xt[j];
        sr += wrr[j] * xt[j];
      }
      const double* uzr = p.uz.row(i);
      const double* urr = p.ur.row(i);
      for (int j = 0; j < hid; ++j) {
        sz += uzr[j] * hprev[j];
        sr += urr[j] * hprev[j];
      }
      az[i] = sz;
      ar[i] = sr;
    }
    vec_sigmoid(az, zt, hid);
    vec_sigmoid(ar, rt, hid);
    for (int j = 0; j < hid; ++j) rht[j] = rt[j] * hprev[j];
    for (int i = 0; i < hid; ++i) {
      const double* whr = p.wh.row(i);
      double ah = p.bh[i];
      for (int j = 0; j < in; ++j) ah += whr[j] * xt[j];
      const double* uhr = p.uh.row(i);
      for (int j = 0; j < hid; ++j) ah += uhr[j] * rht[j];
      az[i] = ah;  // reuse the scratch row
    }
    vec_tanh(az, hct, hid);
    for (int i = 0; i < hid; ++i) {
      ht[i] = (1.0 - zt[i]) * hprev[i] + zt[i] * hct[i];
    }
  }
}

Vec gru_encode(const GruParams& params, const ViewSequence& seq) {
  GruCache cache;
  gru_forward(params, seq, cache);
  return Vec(cache.encoding(), cache.encoding() + params.hidden_dim);
}

void gru_backward(const GruParams& p, const ViewSequence& seq, const GruCache& cache,
                  const double* dk, GruParams& grad) {
  const int steps = cache.steps;
  const int hid = p.hidden_dim;
  const int in = p.input_dim;

  // dh carries d(loss)/d(h_t) while walking t = T..1.  Scratch buffers are
  // thread-local so the per-sample hot path performs no allocations.
  thread_local Vec dh, dhprev, daz, dar, dah, drh;
  dh.assign(dk, dk + hid);
  dhprev.resize(hid);
  daz.resize(hid);
  dar.resize(hid);
  dah.resize(hid);
  drh.resize(hid);

  for (int t = steps - 1; t >= 0; --t) {
    const double* xt = seq.step(t);
    const double* hprev = cache.h.data() + static_cast<std::size_t>(t) * hid;
    const double* zt = cache.z.data() + static_cast<std::size_t>(t) * hid;
    const double* rt = cache.r.data() + static_cast<std::size_t>(t) * hid;
    const double* rht = cache.rh.data() + static_cast<std::size_t>(t) * hid;
    const double* hct = cache.hcand.data() + static_cast<std::size_t>(t) * hid;

    for (int i = 0; i < hid; ++i) {
      const double dz = dh[i] * (hct[i] - hprev[i]);
      const double dhc = dh[i] * zt[i];
      dhprev[i] = dh[i] * (1.0 - zt[i]);
      daz[i] = dz * zt[i] * (1.0 - zt[i]);
      dah[i] = dhc * (1.0 - hct[i] * hct[i]);
    }
    // candidate path: gradients and the route back through the reset gate
    std::fill(drh.begin(), drh.end(), 0.0);
    matvec_t_accum(p.uh, dah.data(), drh.data());
    for (int i = 0; i < hid; ++i) {
      const double dr = drh[i] * hprev[i];
      dar[i] = dr * rt[i] * (1.0 - rt[i]);
      dhprev[i] += drh[i] * rt[i];
    }
    // dhprev += Uz^T daz + Ur^T dar, two rows per pass
    for (int i = 0; i < hid; ++i) {
      const double ai = daz[i], bi = dar[i];
      const double* uzr = p.uz.row(i);
      const double* urr = p.ur.row(i);
      for (int j = 0; j < hid; ++j) dhprev[j] += uzr[j] * ai + urr[j] * bi;
    }

    // parameter gradients, fused so each da*[i] is loaded once
    for (int i = 0; i < hid; ++i) {
      const double ai = daz[i], bi = dar[i], ci = dah[i];
      double* gwz = grad.wz.row(i);
      double* gwr = grad.wr.row(i);
      double* gwh = grad.wh.row(i);
      for (int j = 0; j < in; ++j) {
        const double xj = xt[j];
        gwz[j] += ai * xj;
        gwr[j] += bi * xj;
        gwh[j] += ci * xj;
      }
      double* guz = grad.uz.row(i);
      double* gur = grad.ur.row(i);
      double* guh = grad.uh.row(i);
      for (int j = 0; j < hid; ++j) {
        guz[j] += ai * hprev[j];
        gur[j] += bi * hprev[j];
        guh[j] += ci * rht[j];
      }
      grad.bz[i] += ai;
      grad.br[i] += bi;
      grad.bh[i] += ci;
    }
    dh.swap(dhprev);
  }
  (void)in;
}

}  // namespace fedmood
