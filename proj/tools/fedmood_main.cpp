// fedmood: deterministic simulator for federated mood classification from
// keystroke dynamics.  Subcommands: generate, partition, run, gradcheck,
// sweep.  Every stochastic step derives from --seed, so any command repeated
// with the same arguments reproduces its outputs byte for byte.

#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedmood/data.hpp"
#include "fedmood/experiment.hpp"

namespace {

using namespace fedmood;

void print_corpus_summary(const std::vector<SessionSample>& samples) {
  std::set<int> users;
  std::map<UserGroup, int> group_sessions;
  long long positive = 0;
  for (const SessionSample& s : samples) {
    users.insert(s.user_id);
    ++group_sessions[s.group];
    positive += s.label;
  }
  std::printf("users: %zu\n", users.size());
  std::printf("samples: %zu\n", samples.size());
  for (const auto& [group, n] : group_sessions) {
    std::printf("  %s sessions: %d\n", group_name(group).c_str(), n);
  }
  std::printf("label balance: %lld positive / %zu (%.3f)\n", positive, samples.size(),
              samples.empty() ? 0.0 : static_cast<double>(positive) / samples.size());
}

void cmd_generate(const GeneratorConfig& gen, std::uint64_t seed, const std::string& out) {
  const std::vector<UserProfile> profiles = make_cohort(gen, seed);
  const std::vector<SessionSample> samples = generate_synthetic(profiles, gen, seed);
  save_dataset(samples, out);
  std::printf("wrote %s\n", out.c_str());
  print_corpus_summary(samples);
}

void cmd_partition(const std::string& data, int parties, int per_party, bool noniid,
                   std::uint64_t seed, const std::string& prefix) {
  const std::vector<SessionSample> corpus = load_dataset(data);
  const std::vector<SessionSample> filtered = filter_sessions(corpus);
  const DatasetSplit split = split_train_val(filtered);

  std::vector<PartyDataset> parts;
  if (noniid) {
    if (parties != 4) {
      throw std::invalid_argument(
          "the user-level (non-IID) partition defines exactly 4 hospitals; rerun with "
          "--parties 4 or without --noniid");
    }
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
    parts = partition_noniid(split.train, profiles);
  } else {
    parts = partition_iid(split.train, parties, per_party, seed);
  }

  std::printf("train pool: %zu sessions, validation: %zu sessions\n", split.train.size(),
              split.validation.size());
  for (const PartyDataset& p : parts) {
    const std::string path = prefix + std::to_string(p.party_id) + ".jsonl";
    save_dataset(p.samples, path);
    long long positive = 0;
    std::set<int> users;
    for (const SessionSample& s : p.samples) {
      positive += s.label;
      users.insert(s.user_id);
    }
    std::printf("party %d: %d sessions, %zu users, %.3f positive -> %s\n", p.party_id, p.n(),
                users.size(), p.n() ? static_cast<double>(positive) / p.n() : 0.0, path.c_str());
  }
}

void print_run_summary(const ExperimentConfig& cfg, const ExperimentResult& result) {
  std::printf("%s / %s: final accuracy %.4f, f-score %.4f, train loss %.4f (%.1f s)\n",
              protocol_name(cfg.protocol).c_str(), model_kind_name(cfg.model).c_str(),
              result.final_accuracy, result.final_fscore, result.final_train_loss,
              result.wall_seconds);
  if (!cfg.output_csv.empty()) std::printf("metrics: %s\n", cfg.output_csv.c_str());
  if (!cfg.report_path.empty()) std::printf("report: %s\n", cfg.report_path.c_str());
}

int cmd_gradcheck(const std::vector<std::string>& kinds, std::uint64_t seed, int instances,
                  bool corrupt) {
  bool all_passed = true;
  for (const std::string& name : kinds) {
    const GradCheckReport report =
        run_gradcheck(model_kind_from_name(name), seed, instances, corrupt);
    std::printf("%s: max relative error %.3e (%s)\n", name.c_str(), report.max_rel_error,
                report.passed ? "pass" : "FAIL");
    all_passed = all_passed && report.passed;
  }
  return all_passed ? 0 : 1;
}

struct SweepRun {
  ExperimentConfig cfg;
  ExperimentResult result;
};

void cmd_sweep(const ExperimentConfig& base, const std::string& grid,
               const std::string& out_dir, int seeds) {
  const std::vector<SessionSample> corpus = load_dataset(base.dataset_path);
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

  std::vector<ExperimentConfig> grid_cfgs;
  if (grid == "parties") {
    // scaling grid: federated averaging as the roster grows
    for (int parties : {4, 8, 12, 16, 24}) {
      ExperimentConfig cfg = base;
      cfg.protocol = Protocol::kFedAvg;
      cfg.parties = parties;
      cfg.per_party = base.per_party;
      grid_cfgs.push_back(cfg);
    }
  } else if (grid == "size") {
    // data-scarcity grid: isolated vs federated vs pooled at 8 parties
    for (int per_party : {100, 500, 1000}) {
      for (Protocol protocol : {Protocol::kLocal, Protocol::kFedAvg, Protocol::kCds}) {
        ExperimentConfig cfg = base;
        cfg.protocol = protocol;
        cfg.parties = 8;
        cfg.per_party = per_party;
        grid_cfgs.push_back(cfg);
      }
    }
  } else {
    throw std::invalid_argument("unknown grid \"" + grid + "\" (use parties or size)");
  }

  std::vector<SweepRun> runs;
  for (const ExperimentConfig& grid_cfg : grid_cfgs) {
    for (int s = 0; s < seeds; ++s) {
      ExperimentConfig cfg = grid_cfg;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      SweepRun run;
      run.cfg = cfg;
      run.result = run_experiment_on(cfg, corpus, profiles);
      if (!out_dir.empty()) {
        char name[128];
        std::snprintf(name, sizeof name, "/sweep_%s_%s_p%d_n%d_s%llu.csv",
                      protocol_name(cfg.protocol).c_str(), model_kind_name(cfg.model).c_str(),
                      cfg.parties, cfg.per_party, static_cast<unsigned long long>(cfg.seed));
        write_metrics_csv(out_dir + name, cfg, run.result.logs);
      }
      std::printf("%-7s %-4s parties=%-3d per_party=%-5d seed=%llu  accuracy=%.4f f=%.4f\n",
                  protocol_name(cfg.protocol).c_str(), model_kind_name(cfg.model).c_str(),
                  cfg.parties, cfg.per_party, static_cast<unsigned long long>(cfg.seed),
                  run.result.final_accuracy, run.result.final_fscore);
      runs.push_back(std::move(run));
    }
  }

  if (seeds > 1) {
    std::printf("--- means over %d seeds ---\n", seeds);
    for (std::size_t i = 0; i < runs.size(); i += seeds) {
      double acc = 0.0, f = 0.0;
      for (int s = 0; s < seeds; ++s) {
        acc += runs[i + s].result.final_accuracy / seeds;
        f += runs[i + s].result.final_fscore / seeds;
      }
      const ExperimentConfig& cfg = runs[i].cfg;
      std::printf("%-7s %-4s parties=%-3d per_party=%-5d  accuracy=%.4f f=%.4f\n",
                  protocol_name(cfg.protocol).c_str(), model_kind_name(cfg.model).c_str(),
                  cfg.parties, cfg.per_party, acc, f);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic federated mood-classification simulator"};
  app.require_subcommand(1);

  // --- generate ------------------------------------------------------------
  auto* generate = app.add_subcommand("generate", "write a synthetic session corpus (JSONL)");
  GeneratorConfig gen;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  generate->add_option("--out", gen_out, "output JSONL path")->required();
  generate->add_option("--seed", gen_seed, "master seed");
  generate->add_option("--users", gen.users, "cohort size (default 20)");
  generate->add_option("--sessions", gen.sessions_per_user, "sessions per user (default 748)");
  generate->add_option("--session-spread", gen.session_count_spread,
                       "fractional spread of per-user session counts (default 0)");
  generate->add_option("--keypress-min", gen.keypress_min, "min keypresses per session");
  generate->add_option("--keypress-max", gen.keypress_max, "max keypresses per session");
  generate->add_option("--accel-cap", gen.accel_step_cap,
                       "max accelerometer readings per session");
  generate->add_option("--user-sigma", gen.user_sigma, "per-user lognormal sigma");
  generate->add_option("--session-sigma", gen.session_sigma, "per-session lognormal sigma");
  generate->add_option("--step-noise", gen.step_noise, "per-step relative interval noise");
  generate->callback([&] { cmd_generate(gen, gen_seed, gen_out); });

  // --- partition -----------------------------------------------------------
  auto* partition =
      app.add_subcommand("partition", "split a corpus into per-party files (JSONL)");
  std::string part_data, part_prefix = "party_";
  int part_parties = 4, part_per_party = 1500;
  bool part_noniid = false;
  std::uint64_t part_seed = 1;
  partition->add_option("--data", part_data, "corpus JSONL path")->required();
  partition->add_option("--parties", part_parties, "number of parties (default 4)");
  partition->add_option("--per-party", part_per_party, "samples per party for IID (default 1500)");
  partition->add_flag("--noniid", part_noniid, "user-level 4-hospital partition");
  partition->add_option("--seed", part_seed, "master seed");
  partition->add_option("--out-prefix", part_prefix, "output path prefix (default party_)");
  partition->callback([&] {
    cmd_partition(part_data, part_parties, part_per_party, part_noniid, part_seed, part_prefix);
  });

  // --- run -------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "train one protocol and emit metrics");
  std::string run_config, run_model = "dnn", run_protocol = "fedavg", run_optimizer = "rmsprop";
  std::string run_data, run_csv, run_report;
  int run_rounds = 0, run_epochs = 0, run_batch = 256, run_parties = 4, run_per_party = 1500;
  int run_encoding = 8, run_hidden = 8, run_fm = 4, run_mvm = 4, run_eval_every = 25,
      run_threads = 1;
  double run_lr = 0.001, run_dropout = 0.1;
  bool run_noniid = false, run_wall = false;
  std::uint64_t run_seed = 1;
  run->add_option("--config", run_config, "JSON config file (flags override it)");
  auto* o_model = run->add_option("--model", run_model, "dnn | dfm | dmvm");
  auto* o_protocol =
      run->add_option("--protocol", run_protocol, "local | cds | fedavg | fedsgd | iil | ciil");
  auto* o_rounds = run->add_option("--rounds", run_rounds, "communication rounds (0 = default)");
  auto* o_epochs = run->add_option("--epochs", run_epochs, "local epochs E (0 = default)");
  auto* o_batch = run->add_option("--batch", run_batch, "minibatch size (default 256)");
  auto* o_lr = run->add_option("--lr", run_lr, "learning rate (default 0.001)");
  auto* o_dropout = run->add_option("--dropout", run_dropout, "encoding dropout (default 0.1)");
  auto* o_optimizer = run->add_option("--optimizer", run_optimizer, "rmsprop | sgd");
  auto* o_parties = run->add_option("--parties", run_parties, "number of parties (default 4)");
  auto* o_per_party =
      run->add_option("--per-party", run_per_party, "IID samples per party (default 1500)");
  auto* o_noniid = run->add_flag("--noniid", run_noniid, "user-level 4-hospital partition");
  auto* o_encoding = run->add_option("--encoding-dim", run_encoding, "per-view encoding size");
  auto* o_hidden = run->add_option("--dnn-hidden", run_hidden, "dnn head hidden units");
  auto* o_fm = run->add_option("--fm-factors", run_fm, "fm head factors");
  auto* o_mvm = run->add_option("--mvm-factors", run_mvm, "mvm head factors");
  auto* o_seed = run->add_option("--seed", run_seed, "master seed");
  auto* o_eval = run->add_option("--eval-every", run_eval_every,
                                 "evaluate every N rounds/epochs; 0 = final only");
  auto* o_threads = run->add_option("--threads", run_threads, "parties trained concurrently");
  auto* o_wall = run->add_flag("--wall-clock-csv", run_wall,
                               "write real timings into the CSV instead of 0.000");
  auto* o_data = run->add_option("--data", run_data, "corpus JSONL path");
  auto* o_csv = run->add_option("--csv", run_csv, "metrics CSV output path");
  auto* o_report = run->add_option("--report", run_report, "report JSON output path");
  run->callback([&] {
    ExperimentConfig cfg;
    if (!run_config.empty()) cfg = config_from_json_file(run_config);
    if (o_model->count()) cfg.model = model_kind_from_name(run_model);
    if (o_protocol->count()) cfg.protocol = protocol_from_name(run_protocol);
    if (o_rounds->count()) cfg.rounds = run_rounds;
    if (o_epochs->count()) cfg.local_epochs = run_epochs;
    if (o_batch->count()) cfg.batch_size = run_batch;
    if (o_lr->count()) cfg.learning_rate = run_lr;
    if (o_dropout->count()) cfg.dropout = run_dropout;
    if (o_optimizer->count()) cfg.optimizer = opt_kind_from_name(run_optimizer);
    if (o_parties->count()) cfg.parties = run_parties;
    if (o_per_party->count()) cfg.per_party = run_per_party;
    if (o_noniid->count()) cfg.noniid = run_noniid;
    if (o_encoding->count()) cfg.encoding_dim = run_encoding;
    if (o_hidden->count()) cfg.dnn_hidden = run_hidden;
    if (o_fm->count()) cfg.fm_factors = run_fm;
    if (o_mvm->count()) cfg.mvm_factors = run_mvm;
    if (o_seed->count()) cfg.seed = run_seed;
    if (o_eval->count()) cfg.eval_every = run_eval_every;
    if (o_threads->count()) cfg.threads = run_threads;
    if (o_wall->count()) cfg.wall_clock_csv = run_wall;
    if (o_data->count()) cfg.dataset_path = run_data;
    if (o_csv->count()) cfg.output_csv = run_csv;
    if (o_report->count()) cfg.report_path = run_report;
    resolve_defaults(cfg);
    const ExperimentResult result = run_experiment(cfg);
    print_run_summary(cfg, result);
  });

  // --- gradcheck -------------------------------------------------------------
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
  std::string gc_model;
  std::uint64_t gc_seed = 1;
  int gc_instances = 10;
  bool gc_corrupt = false;
  int gc_status = 0;
  gradcheck->add_option("--model", gc_model, "dnn | dfm | dmvm (default: all three)");
  gradcheck->add_option("--seed", gc_seed, "master seed");
  gradcheck->add_option("--instances", gc_instances, "random instances per head (default 10)");
  gradcheck->add_flag("--corrupt", gc_corrupt,
                      "perturb one analytic coordinate (negative control; must FAIL)");
  gradcheck->callback([&] {
    const std::vector<std::string> kinds =
        gc_model.empty() ? std::vector<std::string>{"dnn", "dfm", "dmvm"}
                         : std::vector<std::string>{gc_model};
    gc_status = cmd_gradcheck(kinds, gc_seed, gc_instances, gc_corrupt);
  });

  // --- sweep -----------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "run a benchmark grid and print the summary table");
  ExperimentConfig sweep_base;
  sweep_base.rounds = 100;
  sweep_base.local_epochs = 5;
  sweep_base.eval_every = 0;  // final point only
  std::string sweep_grid = "size", sweep_dir;
  int sweep_seeds = 1;
  sweep->add_option("--data", sweep_base.dataset_path, "corpus JSONL path")->required();
  sweep->add_option("--grid", sweep_grid,
                    "parties (roster scaling) | size (per-party data scaling); default size");
  sweep->add_option("--model", sweep_base.model, "dnn | dfm | dmvm")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, ModelKind>{{"dnn", ModelKind::kDnn},
                                           {"dfm", ModelKind::kDfm},
                                           {"dmvm", ModelKind::kDmvm}}));
  sweep->add_option("--rounds", sweep_base.rounds, "rounds per run (default 100)");
  sweep->add_option("--epochs", sweep_base.local_epochs, "local epochs per round (default 5)");
  sweep->add_option("--per-party", sweep_base.per_party,
                    "per-party size for the parties grid (default 1500)");
  sweep->add_option("--seed", sweep_base.seed, "first seed");
  sweep->add_option("--seeds", sweep_seeds, "seeds per configuration (default 1)");
  sweep->add_option("--out-dir", sweep_dir, "directory for per-run metrics CSVs");
  sweep->callback([&] { cmd_sweep(sweep_base, sweep_grid, sweep_dir, sweep_seeds); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return gc_status;
}
