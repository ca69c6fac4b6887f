#include "fedmood/trainer.hpp"

#include <numeric>
#include <stdexcept>

namespace fedmood {

namespace {

void ensure_workspace(const ModelParams& params, ModelWorkspace& ws) {
  if (ws.ks.size() != static_cast<std::size_t>(kViewCount)) {
    ws.gru_caches.resize(kViewCount);
    ws.ks.resize(kViewCount);
    ws.dks.resize(kViewCount);
  }
  for (int v = 0; v < kViewCount; ++v) {
    ws.ks[v].resize(params.config.encoding_dim);
    ws.dks[v].resize(params.config.encoding_dim);
  }
}

void ensure_grad_accumulator(const ModelParams& params, ModelWorkspace& ws) {
  if (!ws.grad_ready || ws.grad.param_count() != params.param_count() ||
      ws.grad.config.kind != params.config.kind) {
    ws.grad = make_zero_model(params.config);
    ws.grad_ready = true;
  } else {
    zero_params(ws.grad);
  }
}

}  // namespace

void draw_dropout_masks(const ModelConfig& config, double fraction, RngStream& rng,
                        std::vector<Vec>& masks) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("dropout fraction must be in [0,1)");
  }
  masks.resize(kViewCount);
  const double keep_scale = 1.0 / (1.0 - fraction);
  for (int v = 0; v < kViewCount; ++v) {
    masks[v].resize(config.encoding_dim);
    for (double& m : masks[v]) {
      m = rng.uniform() < fraction ? 0.0 : keep_scale;
    }
  }
}

void clear_dropout_masks(std::vector<Vec>& masks) { masks.clear(); }

ForwardResult model_forward_loss(const ModelParams& params, const SessionSample& sample,
                                 bool train_mode, ModelWorkspace& ws) {
  ensure_workspace(params, ws);
  for (int v = 0; v < kViewCount; ++v) {
    const ViewSequence& seq = sample.view(v);
    if (seq.step_count == 0) {
      throw std::runtime_error("model_forward_loss: empty " +
                               view_name(static_cast<ViewId>(v)) + " view for user " +
                               std::to_string(sample.user_id));
    }
    gru_forward(params.encoders[v], seq, ws.gru_caches[v]);
    const double* enc = ws.gru_caches[v].encoding();
    ws.ks[v].assign(enc, enc + params.config.encoding_dim);
  }
  if (train_mode && !ws.dropout_masks.empty()) {
    for (int v = 0; v < kViewCount; ++v) {
      for (int i = 0; i < params.config.encoding_dim; ++i) {
        ws.ks[v][i] *= ws.dropout_masks[v][i];
      }
    }
  }
  Vec logits = head_forward(params.head, ws.ks, ws.head_cache);
  const auto ce = softmax_cross_entropy(logits, sample.label);
  return ForwardResult{ce.loss, std::move(logits)};
}

ForwardResult model_forward_loss(const ModelParams& params, const SessionSample& sample) {
  ModelWorkspace ws;
  return model_forward_loss(params, sample, /*train_mode=*/false, ws);
}

Vec compute_gradient(const ModelParams& params,
                     std::span<const SessionSample* const> batch, bool train_mode,
                     double dropout, RngStream* rng, ModelWorkspace& ws,
                     double* mean_loss) {
  if (batch.empty()) throw std::invalid_argument("compute_gradient: empty batch");
  ensure_workspace(params, ws);
  ensure_grad_accumulator(params, ws);

  const bool use_dropout = train_mode && dropout > 0.0;
  if (use_dropout) {
    if (rng == nullptr) {
      throw std::invalid_argument("compute_gradient: dropout needs an rng");
    }
    draw_dropout_masks(params.config, dropout, *rng, ws.dropout_masks);
  } else {
    clear_dropout_masks(ws.dropout_masks);
  }

  double loss_sum = 0.0;
  for (const SessionSample* sample : batch) {
    ForwardResult fr = model_forward_loss(params, *sample, train_mode, ws);
    loss_sum += fr.loss;
    const auto ce = softmax_cross_entropy(fr.logits, sample->label);

    for (int v = 0; v < kViewCount; ++v) {
      std::fill(ws.dks[v].begin(), ws.dks[v].end(), 0.0);
    }
    head_backward(params.head, ws.head_cache, ce.dlogits, ws.grad.head, ws.dks);
    if (use_dropout) {
      for (int v = 0; v < kViewCount; ++v) {
        for (int i = 0; i < params.config.encoding_dim; ++i) {
          ws.dks[v][i] *= ws.dropout_masks[v][i];
        }
      }
    }
    for (int v = 0; v < kViewCount; ++v) {
      gru_backward(params.encoders[v], sample->view(v), ws.gru_caches[v],
                   ws.dks[v].data(), ws.grad.encoders[v]);
    }
  }

  ws.grad.flatten_into(ws.flat);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : ws.flat) g *= inv;
  if (mean_loss != nullptr) *mean_loss = loss_sum * inv;
  return ws.flat;
}

LocalTrainResult train_epochs(const PartyDataset& data, const ModelParams& start,
                              int epochs, const TrainConfig& train, OptimizerState& state,
                              RngStream& rng,
                              const std::function<void(int, const ModelParams&, double)>& per_epoch) {
  if (epochs < 1) throw std::invalid_argument("train_epochs: epochs must be >= 1");
  if (train.batch_size < 1) throw std::invalid_argument("train_epochs: batch_size must be >= 1");
  if (data.samples.empty()) throw std::invalid_argument("train_epochs: empty dataset");

  LocalTrainResult result{start, 0.0};
  ModelWorkspace ws;
  const int n = data.n();
  std::vector<int> order(n);
  std::vector<const SessionSample*> batch;
  batch.reserve(std::min(n, train.batch_size));

  double loss_sum = 0.0;
  std::size_t seen = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    // Shuffle a fresh identity permutation each epoch (not the previous
    // epoch's order): the trajectory of R*E epochs is then identical whether
    // it is run as one call or as R chained E-epoch calls on one stream,
    // which is what makes single-party weight averaging, isolated training,
    // and pooled training coincide exactly.
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    double epoch_loss_sum = 0.0;
    for (int begin = 0; begin < n; begin += train.batch_size) {
      const int end = std::min(n, begin + train.batch_size);
      batch.clear();
      for (int i = begin; i < end; ++i) batch.push_back(&data.samples[order[i]]);
      double batch_loss = 0.0;
      const Vec grad = compute_gradient(result.params, batch, /*train_mode=*/true,
                                        train.dropout, &rng, ws, &batch_loss);
      optimizer_step(state, result.params, grad);
      epoch_loss_sum += batch_loss * static_cast<double>(end - begin);
    }
    loss_sum += epoch_loss_sum;
    seen += static_cast<std::size_t>(n);
    if (per_epoch) per_epoch(epoch, result.params, epoch_loss_sum / n);
  }
  result.mean_loss = loss_sum / static_cast<double>(seen);
  return result;
}

LocalTrainResult local_training(const PartyDataset& party, const ModelParams& global_params,
                                const TrainConfig& train, const OptimizerConfig& opt,
                                RngStream& rng) {
  if (train.local_epochs < 1) {
    throw std::invalid_argument("local_training: local_epochs must be >= 1");
  }
  OptimizerState state(opt);  // fresh every call: state never crosses rounds
  return train_epochs(party, global_params, train.local_epochs, train, state, rng);
}

Vec finite_diff_gradient(const ModelParams& params,
                         std::span<const SessionSample* const> batch, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h must be > 0");
  if (batch.empty()) throw std::invalid_argument("finite_diff_gradient: empty batch");

  ModelWorkspace ws;
  ModelParams probe = params;
  Vec flat = params.flatten();
  Vec grad(flat.size(), 0.0);

  auto batch_loss = [&](const ModelParams& p) {
    double sum = 0.0;
    for (const SessionSample* s : batch) {
      sum += model_forward_loss(p, *s, /*train_mode=*/false, ws).loss;
    }
    return sum / static_cast<double>(batch.size());
  };

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + h;
    probe.unflatten(flat);
    const double up = batch_loss(probe);
    flat[i] = saved - h;
    probe.unflatten(flat);
    const double down = batch_loss(probe);
    flat[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace fedmood
