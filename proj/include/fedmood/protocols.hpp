#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedmood/data.hpp"
#include "fedmood/metrics.hpp"
#include "fedmood/trainer.hpp"

namespace fedmood {

enum class Protocol { kLocal, kCds, kFedAvg, kFedSgd, kIil, kCiil };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

enum class ParticipationKind { kFull, kFixedSubset, kRandomSubset };

struct Participation {
  ParticipationKind kind = ParticipationKind::kFull;
  std::vector<int> fixed_ids;  // for kFixedSubset
};

struct FederatedConfig {
  int rounds = 1;
  Participation participation;
  TrainConfig train;
  OptimizerConfig optimizer;
  // Log/evaluate every this many rounds (epochs for the centralized
  // protocols); <= 0 means final point only.  The final point always logs.
  int eval_every = 1;
  std::uint64_t seed = 1;
  int threads = 1;                // parties trained concurrently per round
  std::vector<int> visit_order;   // IIL/CIIL; empty = ascending party_id
};

struct RoundLog {
  int round = 0;  // communication round, or epoch for cds/local
  std::string protocol;
  std::vector<double> party_loss;  // per participating party, ascending party_id
  double train_loss = 0.0;         // sample-weighted mean over participants
  double val_accuracy = 0.0;
  double val_fscore = 0.0;
  double seconds = 0.0;  // wall clock for the round
};

struct ProtocolResult {
  ModelParams params;
  std::vector<RoundLog> logs;
};

// n_k/n weights used by aggregate and the gradient combine, closed so the
// last weight absorbs rounding: the sum is 1 within one ulp.
std::vector<double> aggregation_weights(const std::vector<int>& sizes);

// n_k/n-weighted parameter average over the given models; n sums over exactly
// these (selected) models.  Computed as x0 + sum_i w_i * (x_i - x0) so that
// aggregating identical models returns them bit-exactly.
ModelParams aggregate(const std::vector<ModelParams>& models, const std::vector<int>& sizes);

// Federated averaging: per round, select parties, broadcast the global model,
// run local_training on each selected party, aggregate weighted by n_k.
// Per-party RNG streams are keyed by party_id and persist across rounds.
ProtocolResult run_fedavg(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                          const ModelParams& init, std::span<const SessionSample> eval_set);

// One full-batch gradient per party per round; the server applies
// w <- w - lr * sum_k (n_k/n) g_k.
ProtocolResult run_fedsgd(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                          const ModelParams& init, std::span<const SessionSample> eval_set);

// Centralized pooled training (parties upload their data): one continuous run
// of rounds*E epochs, pooled in ascending party_id order, shuffled with the
// smallest party's stream.  Logs per epoch.
ProtocolResult run_cds(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                       const ModelParams& init, std::span<const SessionSample> eval_set);

// Sequential model handoff in visit order, one local_training per visit.
// IIL makes a single pass; CIIL repeats the pass `rounds` times.  Optimizer
// state resets at every handoff; per-party streams persist across cycles.
ProtocolResult run_iil(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                       const ModelParams& init, std::span<const SessionSample> eval_set);
ProtocolResult run_ciil(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                        const ModelParams& init, std::span<const SessionSample> eval_set);

// Isolated training: each party runs the full epoch budget (rounds*E) on its
// own data, never communicating.  One result per party, ascending party_id;
// the conventional summary is the unweighted mean of per-party accuracies.
std::vector<ProtocolResult> run_local(const std::vector<PartyDataset>& parties,
                                      const FederatedConfig& cfg, const ModelParams& init,
                                      std::span<const SessionSample> eval_set);

}  // namespace fedmood
