#include "fedmood/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace fedmood {

void resolve_defaults(ExperimentConfig& cfg) {
  // recorded per-model budgets: dnn 400x15, dfm 300x20, dmvm 400x15
  if (cfg.rounds <= 0) cfg.rounds = cfg.model == ModelKind::kDfm ? 300 : 400;
  if (cfg.local_epochs <= 0) cfg.local_epochs = cfg.model == ModelKind::kDfm ? 20 : 15;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config: " + path + ": expected a JSON object");

  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "model") cfg.model = model_kind_from_name(value.get<std::string>());
      else if (key == "protocol") cfg.protocol = protocol_from_name(value.get<std::string>());
      else if (key == "rounds") cfg.rounds = value.get<int>();
      else if (key == "local_epochs") cfg.local_epochs = value.get<int>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
      else if (key == "dropout") cfg.dropout = value.get<double>();
      else if (key == "optimizer") cfg.optimizer = opt_kind_from_name(value.get<std::string>());
      else if (key == "parties") cfg.parties = value.get<int>();
      else if (key == "per_party") cfg.per_party = value.get<int>();
      else if (key == "noniid") cfg.noniid = value.get<bool>();
      else if (key == "encoding_dim") cfg.encoding_dim = value.get<int>();
      else if (key == "dnn_hidden") cfg.dnn_hidden = value.get<int>();
      else if (key == "fm_factors") cfg.fm_factors = value.get<int>();
      else if (key == "mvm_factors") cfg.mvm_factors = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "eval_every") cfg.eval_every = value.get<int>();
      else if (key == "threads") cfg.threads = value.get<int>();
      else if (key == "wall_clock_csv") cfg.wall_clock_csv = value.get<bool>();
      else if (key == "dataset_path") cfg.dataset_path = value.get<std::string>();
      else if (key == "output_csv") cfg.output_csv = value.get<std::string>();
      else if (key == "report_path") cfg.report_path = value.get<std::string>();
      else throw std::runtime_error("unknown key");
    } catch (const std::exception& e) {
      throw std::runtime_error("config: " + path + ": key \"" + key + "\": " + e.what());
    }
  }
  return cfg;
}

namespace {

ModelConfig model_config_of(const ExperimentConfig& cfg) {
  ModelConfig mc;
  mc.kind = cfg.model;
  mc.encoding_dim = cfg.encoding_dim;
  mc.classes = 2;
  mc.dnn_hidden = cfg.dnn_hidden;
  mc.fm_factors = cfg.fm_factors;
  mc.mvm_factors = cfg.mvm_factors;
  return mc;
}

FederatedConfig federated_config_of(const ExperimentConfig& cfg) {
  FederatedConfig fc;
  fc.rounds = cfg.rounds;
  fc.participation.kind = ParticipationKind::kFull;
  fc.train.local_epochs = cfg.local_epochs;
  fc.train.batch_size = cfg.batch_size;
  fc.train.dropout = cfg.dropout;
  fc.optimizer.kind = cfg.optimizer;
  fc.optimizer.learning_rate = cfg.learning_rate;
  fc.eval_every = cfg.eval_every;
  fc.seed = cfg.seed;
  fc.threads = cfg.threads;
  return fc;
}

// Local runs are summarized as the unweighted mean across parties at each
// shared eval point (all parties share the same epoch schedule).
std::vector<RoundLog> merge_local_logs(const std::vector<ProtocolResult>& results) {
  if (results.empty()) return {};
  const std::size_t points = results[0].logs.size();
  for (const ProtocolResult& r : results) {
    if (r.logs.size() != points) {
      throw std::logic_error("local protocol: parties logged different eval points");
    }
  }
  std::vector<RoundLog> merged;
  merged.reserve(points);
  const double k = static_cast<double>(results.size());
  for (std::size_t j = 0; j < points; ++j) {
    RoundLog log;
    log.round = results[0].logs[j].round;
    log.protocol = results[0].logs[j].protocol;
    for (const ProtocolResult& r : results) {
      const RoundLog& pl = r.logs[j];
      log.party_loss.push_back(pl.train_loss);
      log.train_loss += pl.train_loss / k;
      log.val_accuracy += pl.val_accuracy / k;
      log.val_fscore += pl.val_fscore / k;
      log.seconds += pl.seconds;  // total cost across parties for this point
    }
    merged.push_back(std::move(log));
  }
  return merged;
}

}  // namespace

ExperimentResult run_experiment_on(const ExperimentConfig& raw,
                                   const std::vector<SessionSample>& corpus,
                                   const std::vector<UserProfile>& profiles) {
  ExperimentConfig cfg = raw;
  resolve_defaults(cfg);
  if (cfg.noniid && cfg.parties != 4) {
    throw std::invalid_argument(
        "the user-level (non-IID) partition defines exactly 4 hospitals; rerun with "
        "--parties 4 or without --noniid");
  }

  const std::vector<SessionSample> filtered = filter_sessions(corpus);
  if (filtered.empty()) {
    throw std::runtime_error("no sessions survive the 10..100 keypress filter");
  }
  const DatasetSplit split = split_train_val(filtered);

  const std::vector<PartyDataset> parties =
      cfg.noniid ? partition_noniid(split.train, profiles)
                 : partition_iid(split.train, cfg.parties, cfg.per_party, cfg.seed);

  RngStream init_rng(cfg.seed, RngStream::kInitStream);
  const ModelParams init = init_model(model_config_of(cfg), init_rng);
  const FederatedConfig fc = federated_config_of(cfg);

  ExperimentResult result;
  const auto t0 = std::chrono::steady_clock::now();
  switch (cfg.protocol) {
    case Protocol::kLocal:
      result.logs = merge_local_logs(run_local(parties, fc, init, split.validation));
      break;
    case Protocol::kCds:
      result.logs = run_cds(parties, fc, init, split.validation).logs;
      break;
    case Protocol::kFedAvg:
      result.logs = run_fedavg(parties, fc, init, split.validation).logs;
      break;
    case Protocol::kFedSgd:
      result.logs = run_fedsgd(parties, fc, init, split.validation).logs;
      break;
    case Protocol::kIil:
      result.logs = run_iil(parties, fc, init, split.validation).logs;
      break;
    case Protocol::kCiil:
      result.logs = run_ciil(parties, fc, init, split.validation).logs;
      break;
  }
  result.wall_seconds = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - t0).count();

  if (!result.logs.empty()) {
    const RoundLog& last = result.logs.back();
    result.final_accuracy = last.val_accuracy;
    result.final_fscore = last.val_fscore;
    result.final_train_loss = last.train_loss;
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.dataset_path.empty()) {
    throw std::invalid_argument("run: a dataset path is required (--data)");
  }
  const std::vector<SessionSample> corpus = load_dataset(cfg.dataset_path);
  if (corpus.empty()) throw std::runtime_error("run: dataset " + cfg.dataset_path + " is empty");

  // rebuild the user roster from the corpus; the user-level partition needs
  // only (user_id, group)
  std::vector<UserProfile> profiles;
  std::set<int> seen;
  for (const SessionSample& s : corpus) {
    if (seen.insert(s.user_id).second) {
      UserProfile p;
      p.user_id = s.user_id;
      p.group = s.group;
      profiles.push_back(p);
    }
  }

  const ExperimentResult result = run_experiment_on(cfg, corpus, profiles);
  if (!cfg.output_csv.empty()) write_metrics_csv(cfg.output_csv, cfg, result.logs);
  if (!cfg.report_path.empty()) write_report_json(cfg.report_path, cfg, result);
  return result;
}

void write_metrics_csv(const std::string& path, const ExperimentConfig& raw,
                       const std::vector<RoundLog>& logs) {
  ExperimentConfig cfg = raw;
  resolve_defaults(cfg);
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "round,protocol,model,parties,per_party,seed,train_loss,val_accuracy,val_fscore,seconds\n";
  const int per_party = cfg.noniid ? 0 : cfg.per_party;  // user-level: no fixed size
  char buf[160];
  for (const RoundLog& log : logs) {
    // seconds default to 0.000 so identical configs produce byte-identical
    // files; --wall-clock-csv opts into real timings
    const double seconds = cfg.wall_clock_csv ? log.seconds : 0.0;
    std::snprintf(buf, sizeof buf, "%d,%s,%s,%d,%d,%llu,%.6f,%.6f,%.6f,%.3f\n", log.round,
                  log.protocol.c_str(), model_kind_name(cfg.model).c_str(), cfg.parties,
                  per_party, static_cast<unsigned long long>(cfg.seed), log.train_loss,
                  log.val_accuracy, log.val_fscore, seconds);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_report_json(const std::string& path, const ExperimentConfig& raw,
                       const ExperimentResult& result) {
  ExperimentConfig cfg = raw;
  resolve_defaults(cfg);
  nlohmann::json j;
  j["config"] = {
      {"model", model_kind_name(cfg.model)},
      {"protocol", protocol_name(cfg.protocol)},
      {"rounds", cfg.rounds},
      {"local_epochs", cfg.local_epochs},
      {"batch_size", cfg.batch_size},
      {"learning_rate", cfg.learning_rate},
      {"dropout", cfg.dropout},
      {"optimizer", opt_kind_name(cfg.optimizer)},
      {"parties", cfg.parties},
      {"per_party", cfg.per_party},
      {"noniid", cfg.noniid},
      {"encoding_dim", cfg.encoding_dim},
      {"dnn_hidden", cfg.dnn_hidden},
      {"fm_factors", cfg.fm_factors},
      {"mvm_factors", cfg.mvm_factors},
      {"seed", cfg.seed},
      {"eval_every", cfg.eval_every},
      {"dataset", cfg.dataset_path},
  };
  j["final"] = {
      {"accuracy", result.final_accuracy},
      {"f_score", result.final_fscore},
      {"train_loss", result.final_train_loss},
      {"wall_seconds", result.wall_seconds},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

ModelParams random_tiny_model(ModelKind kind, RngStream& rng) {
  ModelConfig mc;
  mc.kind = kind;
  mc.encoding_dim = 4;
  mc.classes = 2;
  mc.dnn_hidden = 3;
  mc.fm_factors = 2;
  mc.mvm_factors = 2;
  return init_model(mc, rng);
}

SessionSample random_tiny_sample(RngStream& rng, int label) {
  SessionSample s;
  s.user_id = 0;
  s.group = label == 0 ? UserGroup::kNormal : UserGroup::kBipolar1;
  s.hdrs_score = label == 0 ? 3 : 12;
  s.label = label_for_hdrs(s.hdrs_score);

  auto fill_view = [&rng](ViewSequence& seq, ViewId id, int steps) {
    seq.view_id = id;
    seq.feature_dim = view_feature_dim(id);
    seq.step_count = steps;
    seq.values.resize(static_cast<std::size_t>(steps) * seq.feature_dim);
    for (double& v : seq.values) v = rng.uniform(-1.0, 1.0);
  };
  fill_view(s.alpha, ViewId::kAlphanumeric, 2 + static_cast<int>(rng.uniform_index(4)));
  fill_view(s.special, ViewId::kSpecial, 1 + static_cast<int>(rng.uniform_index(3)));
  fill_view(s.accel, ViewId::kAccelerometer, 2 + static_cast<int>(rng.uniform_index(4)));

  // the special view is categorical in real data: one-hot each step
  std::fill(s.special.values.begin(), s.special.values.end(), 0.0);
  for (int t = 0; t < s.special.step_count; ++t) {
    s.special.step(t)[rng.uniform_index(kSpecialFeatures)] = 1.0;
  }
  return s;
}

GradCheckReport run_gradcheck(ModelKind kind, std::uint64_t seed, int instances,
                              bool corrupt_gradient) {
  if (instances < 1) throw std::invalid_argument("gradcheck: instances must be >= 1");
  RngStream rng(seed, RngStream::kGradCheckStream);
  GradCheckReport report;
  ModelWorkspace ws;
  for (int i = 0; i < instances; ++i) {
    const ModelParams params = random_tiny_model(kind, rng);
    const SessionSample a = random_tiny_sample(rng, 0);
    const SessionSample b = random_tiny_sample(rng, 1);
    const SessionSample* batch[2] = {&a, &b};

    Vec analytic = compute_gradient(params, batch, /*train_mode=*/true, /*dropout=*/0.0,
                                    /*rng=*/nullptr, ws);
    if (corrupt_gradient) analytic[0] += 1e-2;
    const Vec numeric = finite_diff_gradient(params, batch, 1e-5);

    for (std::size_t jj = 0; jj < analytic.size(); ++jj) {
      const double denom = std::max({std::fabs(analytic[jj]), std::fabs(numeric[jj]), 1e-4});
      const double rel = std::fabs(analytic[jj] - numeric[jj]) / denom;
      report.max_rel_error = std::max(report.max_rel_error, rel);
    }
  }
  report.passed = report.max_rel_error <= 1e-4;
  return report;
}

}  // namespace fedmood
