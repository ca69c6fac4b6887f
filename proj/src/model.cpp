#include "fedmood/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedmood {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDnn: return "dnn";
    case ModelKind::kDfm: return "dfm";
    case ModelKind::kDmvm: return "dmvm";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "dnn") return ModelKind::kDnn;
  if (name == "dfm") return ModelKind::kDfm;
  if (name == "dmvm") return ModelKind::kDmvm;
  throw std::invalid_argument("unknown model kind: " + name);
}

namespace {

HeadParams make_head(const ModelConfig& cfg) {
  const int d = kViewCount * cfg.encoding_dim;
  switch (cfg.kind) {
    case ModelKind::kDnn: {
      DnnHeadParams head;
      head.hidden_units = cfg.dnn_hidden;
      head.classes = cfg.classes;
      head.w1 = DenseMatrix(cfg.dnn_hidden, d + 1);
      head.w2 = DenseMatrix(cfg.classes, cfg.dnn_hidden);
      return head;
    }
    case ModelKind::kDfm: {
      FmHeadParams head;
      head.factor_units = cfg.fm_factors;
      head.classes = cfg.classes;
      for (int c = 0; c < cfg.classes; ++c) {
        head.u.emplace_back(cfg.fm_factors, d);
        head.w.emplace_back(static_cast<std::size_t>(d) + 1, 0.0);
      }
      return head;
    }
    case ModelKind::kDmvm: {
      MvmHeadParams head;
      head.factor_units = cfg.mvm_factors;
      head.classes = cfg.classes;
      head.views = kViewCount;
      for (int c = 0; c < cfg.classes; ++c) {
        for (int v = 0; v < kViewCount; ++v) {
          head.u.emplace_back(cfg.mvm_factors, cfg.encoding_dim + 1);
        }
      }
      return head;
    }
  }
  throw std::logic_error("make_head: bad kind");
}

template <typename Fn>
void for_each_chunk(ModelParams& m, Fn&& fn) {
  for (GruParams& g : m.encoders) {
    fn(g.wz.data); fn(g.wr.data); fn(g.wh.data);
    fn(g.uz.data); fn(g.ur.data); fn(g.uh.data);
    fn(g.bz); fn(g.br); fn(g.bh);
  }
  if (auto* dnn = std::get_if<DnnHeadParams>(&m.head)) {
    fn(dnn->w1.data);
    fn(dnn->w2.data);
  } else if (auto* fm = std::get_if<FmHeadParams>(&m.head)) {
    for (int c = 0; c < fm->classes; ++c) {
      fn(fm->u[c].data);
      fn(fm->w[c]);
    }
  } else {
    auto& mvm = std::get<MvmHeadParams>(m.head);
    for (auto& u : mvm.u) fn(u.data);
  }
}

template <typename Fn>
void for_each_chunk(const ModelParams& m, Fn&& fn) {
  for_each_chunk(const_cast<ModelParams&>(m), [&fn](auto& v) { fn(const_cast<const Vec&>(v)); });
}

}  // namespace

std::size_t ModelParams::param_count() const {
  std::size_t n = 0;
  for_each_chunk(*this, [&n](const Vec& v) { n += v.size(); });
  return n;
}

void ModelParams::flatten_into(Vec& out) const {
  out.clear();
  out.reserve(param_count());
  for_each_chunk(*this, [&out](const Vec& v) { out.insert(out.end(), v.begin(), v.end()); });
}

Vec ModelParams::flatten() const {
  Vec out;
  flatten_into(out);
  return out;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw std::invalid_argument("unflatten: size " + std::to_string(flat.size()) +
                                " != param_count " + std::to_string(param_count()));
  }
  std::size_t off = 0;
  for_each_chunk(*this, [&](Vec& v) {
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  });
}

ModelParams make_zero_model(const ModelConfig& config) {
  ModelParams m;
  m.config = config;
  for (int v = 0; v < kViewCount; ++v) {
    m.encoders.emplace_back(view_feature_dim(static_cast<ViewId>(v)), config.encoding_dim);
  }
  m.head = make_head(config);
  return m;
}

void zero_params(ModelParams& params) {
  for_each_chunk(params, [](Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
}

namespace {

void fill_uniform(DenseMatrix& mat, RngStream& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(mat.rows));
  for (double& v : mat.data) v = rng.uniform(-a, a);
}

void fill_uniform(Vec& vec, RngStream& rng) {
  // vectors are 1-row matrices under the per-matrix amplitude rule
  for (double& v : vec) v = rng.uniform(-1.0, 1.0);
}

}  // namespace

ModelParams init_model(const ModelConfig& config, RngStream& rng) {
  ModelParams m = make_zero_model(config);
  for (GruParams& g : m.encoders) {
    fill_uniform(g.wz, rng);
    fill_uniform(g.wr, rng);
    fill_uniform(g.wh, rng);
    fill_uniform(g.uz, rng);
    fill_uniform(g.ur, rng);
    fill_uniform(g.uh, rng);
    // biases stay zero, no draws
  }
  if (auto* dnn = std::get_if<DnnHeadParams>(&m.head)) {
    fill_uniform(dnn->w1, rng);
    fill_uniform(dnn->w2, rng);
  } else if (auto* fm = std::get_if<FmHeadParams>(&m.head)) {
    for (int c = 0; c < fm->classes; ++c) {
      fill_uniform(fm->u[c], rng);
      fill_uniform(fm->w[c], rng);
    }
  } else {
    auto& mvm = std::get<MvmHeadParams>(m.head);
    for (auto& u : mvm.u) fill_uniform(u, rng);
  }
  return m;
}

}  // namespace fedmood
