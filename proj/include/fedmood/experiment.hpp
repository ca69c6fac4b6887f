#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedmood/protocols.hpp"

namespace fedmood {

// Everything a single run needs.  Defaults follow the recorded parameter
// configuration: dnn 400 rounds x 15 epochs, dfm 300 x 20, dmvm 400 x 15,
// batch 256, lr 0.001, dropout 0.1.  rounds/local_epochs <= 0 means "resolve
// the per-model default".
struct ExperimentConfig {
  ModelKind model = ModelKind::kDnn;
  Protocol protocol = Protocol::kFedAvg;
  int rounds = 0;
  int local_epochs = 0;
  int batch_size = 256;
  double learning_rate = 0.001;
  double dropout = 0.1;
  OptKind optimizer = OptKind::kRmsProp;

  int parties = 4;
  int per_party = 1500;
  bool noniid = false;

  int encoding_dim = 8;  // d_k
  int dnn_hidden = 8;
  int fm_factors = 4;
  int mvm_factors = 4;

  std::uint64_t seed = 1;
  int eval_every = 25;
  int threads = 1;
  bool wall_clock_csv = false;  // default writes seconds as 0.000 so reruns
                                // are byte-identical

  std::string dataset_path;
  std::string output_csv;
  std::string report_path;
};

void resolve_defaults(ExperimentConfig& cfg);

ExperimentConfig config_from_json_file(const std::string& path);

struct ExperimentResult {
  double final_accuracy = 0.0;
  double final_fscore = 0.0;
  double final_train_loss = 0.0;
  double wall_seconds = 0.0;
  std::vector<RoundLog> logs;  // for local: mean across parties per point
};

// Full pipeline on an already loaded corpus: filter -> split -> partition ->
// init -> protocol.  Writes nothing.
ExperimentResult run_experiment_on(const ExperimentConfig& cfg,
                                   const std::vector<SessionSample>& corpus,
                                   const std::vector<UserProfile>& profiles);

// Loads cfg.dataset_path, runs, and writes metrics CSV / report JSON when the
// paths are set.  Returns the result.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// CSV header: round,protocol,model,parties,per_party,seed,train_loss,
// val_accuracy,val_fscore,seconds
void write_metrics_csv(const std::string& path, const ExperimentConfig& cfg,
                       const std::vector<RoundLog>& logs);
void write_report_json(const std::string& path, const ExperimentConfig& cfg,
                       const ExperimentResult& result);

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = false;
};

// Finite-difference sweep for one head kind: `instances` random tiny models
// and 2-sample batches, h = 1e-5, pass iff max relative error <= 1e-4.
// corrupt_gradient perturbs one analytic-gradient coordinate (negative
// control for the checker itself).
GradCheckReport run_gradcheck(ModelKind kind, std::uint64_t seed, int instances,
                              bool corrupt_gradient = false);

// Random tiny model + samples for checks and unit tests (not the corpus
// generator; features are plain uniforms).
ModelParams random_tiny_model(ModelKind kind, RngStream& rng);
SessionSample random_tiny_sample(RngStream& rng, int label);

}  // namespace fedmood
