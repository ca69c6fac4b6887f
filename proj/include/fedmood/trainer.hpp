#pragma once

#include <functional>
#include <span>

#include "fedmood/data.hpp"
#include "fedmood/model.hpp"
#include "fedmood/optimizer.hpp"

namespace fedmood {

struct TrainConfig {
  int local_epochs = 1;   // E
  int batch_size = 256;   // M; the last short minibatch is kept
  double dropout = 0.0;   // inverted dropout on the encodings at head input
};

// Forward caches reused across samples to keep allocations out of the hot
// loop.  One per training/eval context.
struct ModelWorkspace {
  std::vector<GruCache> gru_caches;
  HeadCache head_cache;
  std::vector<Vec> ks;
  std::vector<Vec> dks;
  std::vector<Vec> dropout_masks;  // empty when inactive
  ModelParams grad;                // gradient accumulator, model-shaped
  Vec flat;                        // scratch for flattened gradients
  bool grad_ready = false;
};

struct ForwardResult {
  double loss = 0.0;
  Vec logits;
};

// Encoders -> (masked) encodings -> head -> softmax cross-entropy.
// In train mode with dropout > 0, per-view masks are taken from
// ws.dropout_masks (drawn per batch by compute_gradient); callers outside a
// batch context draw masks themselves via draw_dropout_masks.
ForwardResult model_forward_loss(const ModelParams& params, const SessionSample& sample,
                                 bool train_mode, ModelWorkspace& ws);

// Convenience without a persistent workspace (tests, evaluation).
ForwardResult model_forward_loss(const ModelParams& params, const SessionSample& sample);

// Inverted dropout: each encoding element is zeroed with probability
// `fraction`, survivors scaled by 1/(1-fraction); one mask per view per batch.
void draw_dropout_masks(const ModelConfig& config, double fraction, RngStream& rng,
                        std::vector<Vec>& masks);
void clear_dropout_masks(std::vector<Vec>& masks);

// Mean gradient over the batch (flattened), plus the mean loss.  In train
// mode with dropout > 0, draws one set of per-view masks from rng for the
// whole batch.  `rng` may be null when no draws are needed.
Vec compute_gradient(const ModelParams& params,
                     std::span<const SessionSample* const> batch, bool train_mode,
                     double dropout, RngStream* rng, ModelWorkspace& ws,
                     double* mean_loss = nullptr);

struct LocalTrainResult {
  ModelParams params;
  double mean_loss = 0.0;  // per-sample mean over everything processed
};

// Algorithm: copy the incoming global params; for each of E epochs shuffle
// the party's samples with the party rng, walk M-sized minibatches (last one
// may be short), one optimizer step per batch.  Optimizer state is created
// fresh here — state never crosses a round boundary.
LocalTrainResult local_training(const PartyDataset& party, const ModelParams& global_params,
                                const TrainConfig& train, const OptimizerConfig& opt,
                                RngStream& rng);

// Same loop with caller-owned optimizer state and an optional per-epoch hook;
// used by the centralized protocols that train continuously while logging.
LocalTrainResult train_epochs(const PartyDataset& data, const ModelParams& start,
                              int epochs, const TrainConfig& train, OptimizerState& state,
                              RngStream& rng,
                              const std::function<void(int epoch, const ModelParams&, double loss)>& per_epoch = {});

// Central finite differences over the flattened parameters, dropout disabled.
// h must be > 0.  Oracle only.
Vec finite_diff_gradient(const ModelParams& params,
                         std::span<const SessionSample* const> batch, double h);

}  // namespace fedmood
