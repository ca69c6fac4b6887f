#include "fedmood/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <iostream>
#include <map>
#include <stdexcept>

namespace fedmood {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// Parties sorted ascending by party_id: the documented deterministic order for
// selection, training, and summation.
std::vector<const PartyDataset*> sorted_parties(const std::vector<PartyDataset>& parties) {
  if (parties.empty()) throw std::invalid_argument("protocol: no parties");
  std::vector<const PartyDataset*> sorted;
  sorted.reserve(parties.size());
  for (const PartyDataset& p : parties) {
    if (p.samples.empty()) {
      throw std::invalid_argument("protocol: party " + std::to_string(p.party_id) + " is empty");
    }
    sorted.push_back(&p);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const PartyDataset* a, const PartyDataset* b) { return a->party_id < b->party_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->party_id == sorted[i - 1]->party_id) {
      throw std::invalid_argument("protocol: duplicate party_id " +
                                  std::to_string(sorted[i]->party_id));
    }
  }
  return sorted;
}

std::map<int, RngStream> party_streams(const std::vector<const PartyDataset*>& parties,
                                       std::uint64_t seed) {
  std::map<int, RngStream> streams;
  for (const PartyDataset* p : parties) {
    streams.emplace(p->party_id,
                    RngStream(seed, RngStream::kPartyStreamBase +
                                        static_cast<std::uint64_t>(p->party_id)));
  }
  return streams;
}

// Selection per policy.  RandomSubset picks a uniform size t in [1, K] and
// then a uniform t-subset, both from the server stream; the chosen parties
// are returned ascending by party_id.
std::vector<const PartyDataset*> select_parties(const std::vector<const PartyDataset*>& sorted,
                                                const Participation& policy,
                                                RngStream& server_rng) {
  switch (policy.kind) {
    case ParticipationKind::kFull:
      return sorted;
    case ParticipationKind::kFixedSubset: {
      std::vector<const PartyDataset*> out;
      for (const PartyDataset* p : sorted) {
        if (std::find(policy.fixed_ids.begin(), policy.fixed_ids.end(), p->party_id) !=
            policy.fixed_ids.end()) {
          out.push_back(p);
        }
      }
      return out;
    }
    case ParticipationKind::kRandomSubset: {
      const int k = static_cast<int>(sorted.size());
      const int t = 1 + static_cast<int>(server_rng.uniform_index(static_cast<std::size_t>(k)));
      std::vector<int> order(sorted.size());
      for (int i = 0; i < k; ++i) order[i] = i;
      server_rng.shuffle(order);
      order.resize(t);
      std::sort(order.begin(), order.end());
      std::vector<const PartyDataset*> out;
      out.reserve(t);
      for (int i : order) out.push_back(sorted[i]);
      return out;
    }
  }
  return {};
}

bool should_log(int step, int total, int eval_every) {
  if (step == total) return true;  // the final point always logs
  return eval_every > 0 && step % eval_every == 0;
}

// Validation metrics into the log; an empty eval set leaves them at zero.
void eval_into(RoundLog& log, const ModelParams& params,
               std::span<const SessionSample> eval_set) {
  if (eval_set.empty()) return;
  const EvalResult r = evaluate_model(params, eval_set);
  log.val_accuracy = r.accuracy;
  log.val_fscore = r.f_score;
}

double sample_weighted_mean(const std::vector<double>& losses, const std::vector<int>& sizes) {
  double num = 0.0;
  long long den = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    num += losses[i] * sizes[i];
    den += sizes[i];
  }
  return den == 0 ? 0.0 : num / static_cast<double>(den);
}

// Runs fn(0..n-1), at most `threads` concurrently.  Tasks must write only to
// their own slots.
template <typename Fn>
void run_batched(int n, int threads, Fn&& fn) {
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  for (int start = 0; start < n; start += threads) {
    const int stop = std::min(n, start + threads);
    std::vector<std::future<void>> futures;
    futures.reserve(stop - start);
    for (int i = start; i < stop; ++i) {
      futures.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : futures) f.get();
  }
}

void check_config(const FederatedConfig& cfg) {
  if (cfg.rounds < 1) throw std::invalid_argument("protocol: rounds must be >= 1");
  if (cfg.train.local_epochs < 1) {
    throw std::invalid_argument("protocol: local_epochs must be >= 1");
  }
}

}  // namespace

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kLocal: return "local";
    case Protocol::kCds: return "cds";
    case Protocol::kFedAvg: return "fedavg";
    case Protocol::kFedSgd: return "fedsgd";
    case Protocol::kIil: return "iil";
    case Protocol::kCiil: return "ciil";
  }
  return "?";
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "local") return Protocol::kLocal;
  if (name == "cds") return Protocol::kCds;
  if (name == "fedavg") return Protocol::kFedAvg;
  if (name == "fedsgd") return Protocol::kFedSgd;
  if (name == "iil") return Protocol::kIil;
  if (name == "ciil") return Protocol::kCiil;
  throw std::invalid_argument("unknown protocol: " + name);
}

std::vector<double> aggregation_weights(const std::vector<int>& sizes) {
  if (sizes.empty()) throw std::invalid_argument("aggregation_weights: no sizes");
  long long n = 0;
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("aggregation_weights: sizes must be positive");
    n += s;
  }
  std::vector<double> w(sizes.size());
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    w[i] = static_cast<double>(sizes[i]) / static_cast<double>(n);
    partial += w[i];
  }
  w.back() = 1.0 - partial;  // closure: the sum is 1 within one ulp
  return w;
}

ModelParams aggregate(const std::vector<ModelParams>& models, const std::vector<int>& sizes) {
  if (models.empty()) throw std::invalid_argument("aggregate: no models");
  if (models.size() != sizes.size()) {
    throw std::invalid_argument("aggregate: models/sizes length mismatch");
  }
  const std::size_t dim = models[0].param_count();
  for (const ModelParams& m : models) {
    if (m.param_count() != dim) throw std::invalid_argument("aggregate: model shape mismatch");
  }
  const std::vector<double> w = aggregation_weights(sizes);

  // x0 + sum_i w_i (x_i - x0): the i = 0 term is exactly zero, identical
  // models aggregate to themselves bit-exactly, and a single model passes
  // through unchanged.
  Vec base = models[0].flatten();
  Vec acc = base;
  Vec flat;
  for (std::size_t i = 1; i < models.size(); ++i) {
    models[i].flatten_into(flat);
    const double wi = w[i];
    for (std::size_t j = 0; j < dim; ++j) acc[j] += wi * (flat[j] - base[j]);
  }
  ModelParams out = models[0];
  out.unflatten(acc);
  return out;
}

ProtocolResult run_fedavg(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                          const ModelParams& init, std::span<const SessionSample> eval_set) {
  check_config(cfg);
  const auto sorted = sorted_parties(parties);
  auto streams = party_streams(sorted, cfg.seed);
  RngStream server_rng(cfg.seed, RngStream::kServerStream);

  ProtocolResult result;
  result.params = init;
  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto t0 = Clock::now();
    const auto selected = select_parties(sorted, cfg.participation, server_rng);
    if (selected.empty()) {
      std::cerr << "fedavg: round " << round << ": selection is empty, skipping\n";
      continue;
    }
    std::vector<ModelParams> locals(selected.size());
    std::vector<double> losses(selected.size());
    std::vector<int> sizes(selected.size());
    run_batched(static_cast<int>(selected.size()), cfg.threads, [&](int i) {
      const PartyDataset& party = *selected[i];
      LocalTrainResult local = local_training(party, result.params, cfg.train, cfg.optimizer,
                                              streams.at(party.party_id));
      locals[i] = std::move(local.params);
      losses[i] = local.mean_loss;
      sizes[i] = party.n();
    });
    result.params = aggregate(locals, sizes);
    const double seconds = elapsed_seconds(t0);

    if (should_log(round, cfg.rounds, cfg.eval_every)) {
      RoundLog log;
      log.round = round;
      log.protocol = protocol_name(Protocol::kFedAvg);
      log.party_loss = losses;
      log.train_loss = sample_weighted_mean(losses, sizes);
      log.seconds = seconds;
      eval_into(log, result.params, eval_set);
      result.logs.push_back(std::move(log));
    }
  }
  return result;
}

ProtocolResult run_fedsgd(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                          const ModelParams& init, std::span<const SessionSample> eval_set) {
  check_config(cfg);
  const auto sorted = sorted_parties(parties);
  auto streams = party_streams(sorted, cfg.seed);
  RngStream server_rng(cfg.seed, RngStream::kServerStream);

  // full-batch sample pointers, built once per party
  std::map<int, std::vector<const SessionSample*>> batches;
  for (const PartyDataset* p : sorted) {
    auto& ptrs = batches[p->party_id];
    ptrs.reserve(p->samples.size());
    for (const SessionSample& s : p->samples) ptrs.push_back(&s);
  }

  ProtocolResult result;
  result.params = init;
  Vec flat = init.flatten();
  Vec combined(flat.size());
  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto t0 = Clock::now();
    const auto selected = select_parties(sorted, cfg.participation, server_rng);
    if (selected.empty()) {
      std::cerr << "fedsgd: round " << round << ": selection is empty, skipping\n";
      continue;
    }
    std::vector<Vec> grads(selected.size());
    std::vector<double> losses(selected.size());
    std::vector<int> sizes(selected.size());
    run_batched(static_cast<int>(selected.size()), cfg.threads, [&](int i) {
      const PartyDataset& party = *selected[i];
      ModelWorkspace ws;
      grads[i] = compute_gradient(result.params, batches.at(party.party_id),
                                  /*train_mode=*/true, cfg.train.dropout,
                                  &streams.at(party.party_id), ws, &losses[i]);
      sizes[i] = party.n();
    });

    // server step: w <- w - lr * sum_k (n_k/n) g_k, plain gradient descent
    // whatever optimizer the parties would use locally
    const std::vector<double> w = aggregation_weights(sizes);
    std::fill(combined.begin(), combined.end(), 0.0);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const double wi = w[i];
      for (std::size_t j = 0; j < combined.size(); ++j) combined[j] += wi * grads[i][j];
    }
    for (std::size_t j = 0; j < flat.size(); ++j) {
      flat[j] -= cfg.optimizer.learning_rate * combined[j];
    }
    result.params.unflatten(flat);
    const double seconds = elapsed_seconds(t0);

    if (should_log(round, cfg.rounds, cfg.eval_every)) {
      RoundLog log;
      log.round = round;
      log.protocol = protocol_name(Protocol::kFedSgd);
      log.party_loss = losses;
      log.train_loss = sample_weighted_mean(losses, sizes);
      log.seconds = seconds;
      eval_into(log, result.params, eval_set);
      result.logs.push_back(std::move(log));
    }
  }
  return result;
}

ProtocolResult run_cds(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                       const ModelParams& init, std::span<const SessionSample> eval_set) {
  check_config(cfg);
  const auto sorted = sorted_parties(parties);

  // parties upload everything: pool ascending by party_id, then train one
  // continuous run of rounds * E epochs with the smallest party's stream
  PartyDataset pool;
  pool.party_id = sorted.front()->party_id;
  for (const PartyDataset* p : sorted) {
    pool.samples.insert(pool.samples.end(), p->samples.begin(), p->samples.end());
  }
  RngStream rng(cfg.seed,
                RngStream::kPartyStreamBase + static_cast<std::uint64_t>(pool.party_id));
  OptimizerState state(cfg.optimizer);
  const int total_epochs = cfg.rounds * cfg.train.local_epochs;

  ProtocolResult result;
  auto last = Clock::now();
  LocalTrainResult trained = train_epochs(
      pool, init, total_epochs, cfg.train, state, rng,
      [&](int epoch, const ModelParams& params, double loss) {
        const double seconds = elapsed_seconds(last);
        last = Clock::now();
        if (!should_log(epoch, total_epochs, cfg.eval_every)) return;
        RoundLog log;
        log.round = epoch;
        log.protocol = protocol_name(Protocol::kCds);
        log.party_loss = {loss};
        log.train_loss = loss;
        log.seconds = seconds;
        eval_into(log, params, eval_set);
        result.logs.push_back(std::move(log));
      });
  result.params = std::move(trained.params);
  return result;
}

namespace {

ProtocolResult run_handoff(Protocol which, const std::vector<PartyDataset>& parties,
                           const FederatedConfig& cfg, const ModelParams& init,
                           std::span<const SessionSample> eval_set) {
  check_config(cfg);
  const auto sorted = sorted_parties(parties);
  auto streams = party_streams(sorted, cfg.seed);

  std::vector<const PartyDataset*> order;
  if (cfg.visit_order.empty()) {
    order = sorted;
  } else {
    for (int id : cfg.visit_order) {
      const auto it = std::find_if(sorted.begin(), sorted.end(),
                                   [id](const PartyDataset* p) { return p->party_id == id; });
      if (it == sorted.end()) {
        throw std::invalid_argument("visit_order references unknown party " + std::to_string(id));
      }
      order.push_back(*it);
    }
  }

  const int cycles = which == Protocol::kIil ? 1 : cfg.rounds;
  const int total_visits = cycles * static_cast<int>(order.size());

  ProtocolResult result;
  result.params = init;
  int visit = 0;
  for (int cycle = 0; cycle < cycles; ++cycle) {
    for (const PartyDataset* party : order) {
      ++visit;
      const auto t0 = Clock::now();
      // local_training builds fresh optimizer state: it resets at each handoff
      LocalTrainResult local = local_training(*party, result.params, cfg.train, cfg.optimizer,
                                              streams.at(party->party_id));
      result.params = std::move(local.params);
      const double seconds = elapsed_seconds(t0);

      if (should_log(visit, total_visits, cfg.eval_every)) {
        RoundLog log;
        log.round = visit;
        log.protocol = protocol_name(which);
        log.party_loss = {local.mean_loss};
        log.train_loss = local.mean_loss;
        log.seconds = seconds;
        eval_into(log, result.params, eval_set);
        result.logs.push_back(std::move(log));
      }
    }
  }
  return result;
}

}  // namespace

ProtocolResult run_iil(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                       const ModelParams& init, std::span<const SessionSample> eval_set) {
  return run_handoff(Protocol::kIil, parties, cfg, init, eval_set);
}

ProtocolResult run_ciil(const std::vector<PartyDataset>& parties, const FederatedConfig& cfg,
                        const ModelParams& init, std::span<const SessionSample> eval_set) {
  return run_handoff(Protocol::kCiil, parties, cfg, init, eval_set);
}

std::vector<ProtocolResult> run_local(const std::vector<PartyDataset>& parties,
                                      const FederatedConfig& cfg, const ModelParams& init,
                                      std::span<const SessionSample> eval_set) {
  check_config(cfg);
  const auto sorted = sorted_parties(parties);
  const int total_epochs = cfg.rounds * cfg.train.local_epochs;

  std::vector<ProtocolResult> results(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const PartyDataset& party = *sorted[i];
    RngStream rng(cfg.seed,
                  RngStream::kPartyStreamBase + static_cast<std::uint64_t>(party.party_id));
    OptimizerState state(cfg.optimizer);
    ProtocolResult& result = results[i];
    auto last = Clock::now();
    LocalTrainResult trained = train_epochs(
        party, init, total_epochs, cfg.train, state, rng,
        [&](int epoch, const ModelParams& params, double loss) {
          const double seconds = elapsed_seconds(last);
          last = Clock::now();
          if (!should_log(epoch, total_epochs, cfg.eval_every)) return;
          RoundLog log;
          log.round = epoch;
          log.protocol = protocol_name(Protocol::kLocal);
          log.party_loss = {loss};
          log.train_loss = loss;
          log.seconds = seconds;
          eval_into(log, params, eval_set);
          result.logs.push_back(std::move(log));
        });
    result.params = std::move(trained.params);
  }
  return results;
}

}  // namespace fedmood
