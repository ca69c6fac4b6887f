#include "fedmood/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace fedmood {

namespace {

// Special-key category mix: autocorrect, backspace, space, suggestion,
// keyboard-switch, other.  Depressed groups correct themselves more often.
constexpr double kSpecialBase[6] = {0.08, 0.20, 0.45, 0.07, 0.05, 0.15};
constexpr double kBackspaceGroupShift = 0.05;

}  // namespace

std::string group_name(UserGroup group) {
  switch (group) {
    case UserGroup::kNormal: return "normal";
    case UserGroup::kBipolar1: return "bd1";
    case UserGroup::kBipolar2: return "bd2";
  }
  return "?";
}

UserGroup group_from_name(const std::string& name) {
  if (name == "normal") return UserGroup::kNormal;
  if (name == "bd1") return UserGroup::kBipolar1;
  if (name == "bd2") return UserGroup::kBipolar2;
  throw std::invalid_argument("unknown group: " + name);
}

int label_for_hdrs(int hdrs_score) { return hdrs_score >= 8 ? 1 : 0; }

std::vector<UserProfile> make_cohort(const GeneratorConfig& config, std::uint64_t seed) {
  RngStream rng(seed, RngStream::kGeneratorStream);
  std::vector<UserProfile> profiles;
  profiles.reserve(config.users);
  for (int u = 0; u < config.users; ++u) {
    UserProfile p;
    p.user_id = u;
    // round-robin for the first 18 users, normal after: 8/6/6 at the default
    // cohort size of 20, and 2/1/1 at 4
    p.group = u < 18 ? static_cast<UserGroup>(u % 3) : UserGroup::kNormal;
    const int g = static_cast<int>(p.group);
    p.interkey_mean = config.interkey_mean[g] * std::exp(rng.normal(0.0, config.user_sigma));
    p.key_hold_mean = config.key_hold_mean[g] * std::exp(rng.normal(0.0, 0.5 * config.user_sigma));
    p.accel_jitter = config.accel_jitter[g] * std::exp(rng.normal(0.0, config.user_sigma));
    p.hdrs_mean = config.hdrs_mean[g];
    p.session_count = config.sessions_per_user;
    if (config.session_count_spread > 0.0) {
      const double factor =
          1.0 + rng.uniform(-config.session_count_spread, config.session_count_spread);
      p.session_count = std::max(5, static_cast<int>(std::lround(
                                        config.sessions_per_user * factor)));
    }
    profiles.push_back(p);
  }
  return profiles;
}

namespace {

SessionSample generate_session(const UserProfile& user, const GeneratorConfig& cfg,
                               RngStream& rng) {
  SessionSample s;
  s.user_id = user.user_id;
  s.group = user.group;

  const int kc = cfg.keypress_min +
                 static_cast<int>(rng.uniform_index(cfg.keypress_max - cfg.keypress_min + 1));
  const double session_factor = std::exp(rng.normal(0.0, cfg.session_sigma));
  const double jitter_factor = std::exp(rng.normal(0.0, cfg.session_sigma));
  const double interkey = user.interkey_mean * session_factor;
  const double jitter = user.accel_jitter * jitter_factor;

  s.hdrs_score = std::min(rng.poisson(user.hdrs_mean), cfg.hdrs_max);
  s.label = label_for_hdrs(s.hdrs_score);

  // alphanumeric view: hold time, gap since previous key, dx, dy per press
  s.alpha.view_id = ViewId::kAlphanumeric;
  s.alpha.feature_dim = kAlphaFeatures;
  s.alpha.step_count = kc;
  s.alpha.values.resize(static_cast<std::size_t>(kc) * kAlphaFeatures);
  double duration = 0.0;
  for (int t = 0; t < kc; ++t) {
    double* step = s.alpha.step(t);
    const double hold = std::max(0.01, rng.normal(user.key_hold_mean, 0.25 * user.key_hold_mean));
    const double gap =
        t == 0 ? 0.0 : std::max(0.005, rng.normal(interkey, cfg.step_noise * interkey));
    step[0] = hold;
    step[1] = gap;
    step[2] = rng.normal(0.0, 1.0);
    step[3] = rng.normal(0.0, 1.0);
    duration += hold + gap;
  }

  // special-character view: one-hot category per special keypress
  const int group_idx = static_cast<int>(user.group);
  double weights[6];
  double wsum = 0.0;
  for (int c = 0; c < 6; ++c) {
    weights[c] = kSpecialBase[c];
    if (c == 1) weights[c] += kBackspaceGroupShift * group_idx;  // backspace
    wsum += weights[c];
  }
  const int special_steps =
      std::max(1, static_cast<int>(std::lround(kc * 0.12 * std::exp(rng.normal(0.0, 0.3)))));
  s.special.view_id = ViewId::kSpecial;
  s.special.feature_dim = kSpecialFeatures;
  s.special.step_count = special_steps;
  s.special.values.assign(static_cast<std::size_t>(special_steps) * kSpecialFeatures, 0.0);
  for (int t = 0; t < special_steps; ++t) {
    const double pick = rng.uniform() * wsum;
    double cum = 0.0;
    int cat = 5;
    for (int c = 0; c < 6; ++c) {
      cum += weights[c];
      if (pick < cum) {
        cat = c;
        break;
      }
    }
    s.special.step(t)[cat] = 1.0;
  }

  // accelerometer view: one reading per 60 ms of session, denser than keys
  int accel_steps = static_cast<int>(std::ceil(duration / cfg.accel_period));
  accel_steps = std::min(cfg.accel_step_cap, std::max(accel_steps, kc));
  s.accel.view_id = ViewId::kAccelerometer;
  s.accel.feature_dim = kAccelFeatures;
  s.accel.step_count = accel_steps;
  s.accel.values.resize(static_cast<std::size_t>(accel_steps) * kAccelFeatures);
  const double ox = rng.normal(0.0, 0.3);
  const double oy = rng.normal(0.0, 0.3);
  for (int t = 0; t < accel_steps; ++t) {
    double* step = s.accel.step(t);
    step[0] = ox + jitter * rng.normal(0.0, 1.0);
    step[1] = oy + jitter * rng.normal(0.0, 1.0);
    step[2] = 9.81 + jitter * rng.normal(0.0, 1.0);
  }
  return s;
}

}  // namespace

std::vector<SessionSample> generate_synthetic(const std::vector<UserProfile>& profiles,
                                              const GeneratorConfig& config,
                                              std::uint64_t seed) {
  if (config.keypress_min < 1 || config.keypress_max < config.keypress_min) {
    throw std::invalid_argument("generate_synthetic: bad keypress bounds");
  }
  if (config.accel_step_cap < config.keypress_max) {
    throw std::invalid_argument(
        "generate_synthetic: accel_step_cap must be >= keypress_max so accelerometer "
        "sequences stay at least as long as keypress sequences");
  }
  std::vector<SessionSample> samples;
  for (const UserProfile& user : profiles) {
    if (user.session_count < 5) {
      throw std::invalid_argument("generate_synthetic: user " + std::to_string(user.user_id) +
                                  " has fewer than 5 sessions");
    }
    // per-user stream: corpora stay reproducible user-by-user
    RngStream rng(seed, RngStream::kUserStreamBase + static_cast<std::uint64_t>(user.user_id));
    for (int i = 0; i < user.session_count; ++i) {
      samples.push_back(generate_session(user, config, rng));
    }
  }
  return samples;
}

std::vector<SessionSample> filter_sessions(const std::vector<SessionSample>& samples) {
  std::vector<SessionSample> kept;
  kept.reserve(samples.size());
  for (const SessionSample& s : samples) {
    if (s.keypress_count() >= 10 && s.keypress_count() <= 100) kept.push_back(s);
  }
  return kept;
}

DatasetSplit split_train_val(const std::vector<SessionSample>& samples) {
  std::map<int, int> counts;
  for (const SessionSample& s : samples) ++counts[s.user_id];
  for (const auto& [user, n] : counts) {
    if (n < 5) {
      throw std::runtime_error("split_train_val: user " + std::to_string(user) +
                               " has only " + std::to_string(n) + " sessions (minimum 5)");
    }
  }
  std::map<int, int> train_quota;
  for (const auto& [user, n] : counts) {
    train_quota[user] = static_cast<int>(std::floor(0.8 * n));
  }
  DatasetSplit split;
  std::map<int, int> seen;
  for (const SessionSample& s : samples) {
    // chronology is generation order per user
    const int pos = seen[s.user_id]++;
    if (pos < train_quota[s.user_id]) {
      split.train.push_back(s);
    } else {
      split.validation.push_back(s);
    }
  }
  return split;
}

std::vector<PartyDataset> partition_iid(const std::vector<SessionSample>& train,
                                        int n_parties, int per_party, std::uint64_t seed) {
  if (n_parties < 1 || per_party < 1) {
    throw std::invalid_argument("partition_iid: n_parties and per_party must be >= 1");
  }
  if (train.empty()) throw std::invalid_argument("partition_iid: empty pool");

  RngStream rng(seed, RngStream::kPartitionStream);

  // pool indices by group, in pool order
  std::vector<std::vector<int>> group_pool(3);
  for (int i = 0; i < static_cast<int>(train.size()); ++i) {
    group_pool[static_cast<int>(train[i].group)].push_back(i);
  }

  // per-party group targets via largest remainder, so every party mirrors the
  // pool's group mix and the targets sum to per_party exactly
  const double total = static_cast<double>(train.size());
  int targets[3];
  {
    double frac[3];
    int base_sum = 0;
    for (int g = 0; g < 3; ++g) {
      const double exact = per_party * static_cast<double>(group_pool[g].size()) / total;
      targets[g] = static_cast<int>(std::floor(exact));
      frac[g] = exact - targets[g];
      base_sum += targets[g];
    }
    int remaining = per_party - base_sum;
    while (remaining > 0) {
      int best = 0;
      for (int g = 1; g < 3; ++g) {
        if (frac[g] > frac[best]) best = g;
      }
      ++targets[best];
      frac[best] = -1.0;
      --remaining;
    }
  }

  // per-group shuffled queues; an exhausted queue refills with a fresh
  // shuffled pass (replaceable sampling once demand exceeds the pool)
  std::vector<std::vector<int>> queue(3);
  std::vector<std::size_t> pos(3, 0);
  for (int g = 0; g < 3; ++g) {
    queue[g] = group_pool[g];
    rng.shuffle(queue[g]);
  }
  auto draw = [&](int g) -> int {
    if (queue[g].empty()) {
      throw std::runtime_error("partition_iid: pool has no samples of group " +
                               group_name(static_cast<UserGroup>(g)));
    }
    if (pos[g] == queue[g].size()) {
      queue[g] = group_pool[g];
      rng.shuffle(queue[g]);
      pos[g] = 0;
    }
    return queue[g][pos[g]++];
  };

  std::vector<PartyDataset> parties;
  parties.reserve(n_parties);
  for (int p = 0; p < n_parties; ++p) {
    PartyDataset party;
    party.party_id = p;
    party.samples.reserve(per_party);
    for (int g = 0; g < 3; ++g) {
      for (int i = 0; i < targets[g]; ++i) {
        if (group_pool[g].empty() && targets[g] > 0) {
          throw std::runtime_error("partition_iid: group " +
                                   group_name(static_cast<UserGroup>(g)) +
                                   " missing from pool but has a positive target");
        }
        party.samples.push_back(train[draw(g)]);
      }
    }
    parties.push_back(std::move(party));
  }
  return parties;
}

std::vector<PartyDataset> partition_noniid(const std::vector<SessionSample>& train,
                                           const std::vector<UserProfile>& profiles) {
  std::vector<int> by_group[3];
  for (const UserProfile& p : profiles) {
    by_group[static_cast<int>(p.group)].push_back(p.user_id);
  }
  for (auto& ids : by_group) std::sort(ids.begin(), ids.end());
  if (by_group[0].size() < 8 || by_group[1].size() < 4 || by_group[2].size() < 4) {
    throw std::runtime_error(
        "partition_noniid: need >= 8 normal, >= 4 bipolar-I, >= 4 bipolar-II users (have " +
        std::to_string(by_group[0].size()) + "/" + std::to_string(by_group[1].size()) + "/" +
        std::to_string(by_group[2].size()) + ")");
  }

  // hospital j: normals 2j, 2j+1, bipolar-I j, bipolar-II j; later users in
  // each group stay unassigned (the 8/6/6 cohort leaves 2 bd1 + 2 bd2 out)
  std::map<int, int> party_of_user;
  for (int j = 0; j < 4; ++j) {
    party_of_user[by_group[0][2 * j]] = j;
    party_of_user[by_group[0][2 * j + 1]] = j;
    party_of_user[by_group[1][j]] = j;
    party_of_user[by_group[2][j]] = j;
  }

  std::vector<PartyDataset> parties(4);
  for (int j = 0; j < 4; ++j) parties[j].party_id = j;
  for (const SessionSample& s : train) {
    const auto it = party_of_user.find(s.user_id);
    if (it != party_of_user.end()) parties[it->second].samples.push_back(s);
  }
  for (const PartyDataset& p : parties) {
    if (p.samples.empty()) {
      throw std::runtime_error("partition_noniid: hospital " + std::to_string(p.party_id) +
                               " received no sessions");
    }
  }
  return parties;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_view(std::string& out, const ViewSequence& seq) {
  out.push_back('[');
  for (int t = 0; t < seq.step_count; ++t) {
    if (t) out.push_back(',');
    out.push_back('[');
    const double* step = seq.step(t);
    for (int f = 0; f < seq.feature_dim; ++f) {
      if (f) out.push_back(',');
      append_double(out, step[f]);
    }
    out.push_back(']');
  }
  out.push_back(']');
}

ViewSequence view_from_json(const nlohmann::json& arr, ViewId id) {
  ViewSequence seq;
  seq.view_id = id;
  seq.feature_dim = view_feature_dim(id);
  if (!arr.is_array() || arr.empty()) {
    throw std::runtime_error(view_name(id) + " view must be a nonempty array");
  }
  seq.step_count = static_cast<int>(arr.size());
  seq.values.reserve(static_cast<std::size_t>(seq.step_count) * seq.feature_dim);
  for (const auto& step : arr) {
    if (!step.is_array() || static_cast<int>(step.size()) != seq.feature_dim) {
      throw std::runtime_error(view_name(id) + " view step must have " +
                               std::to_string(seq.feature_dim) + " features");
    }
    for (const auto& v : step) seq.values.push_back(v.get<double>());
  }
  return seq;
}

}  // namespace

void save_dataset(const std::vector<SessionSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  std::string line;
  for (const SessionSample& s : samples) {
    line.clear();
    line += "{\"user_id\":" + std::to_string(s.user_id);
    line += ",\"group\":\"" + group_name(s.group) + "\"";
    line += ",\"hdrs\":" + std::to_string(s.hdrs_score);
    line += ",\"label\":" + std::to_string(s.label);
    line += ",\"alpha\":";
    append_view(line, s.alpha);
    line += ",\"special\":";
    append_view(line, s.special);
    line += ",\"accel\":";
    append_view(line, s.accel);
    line += "}\n";
    out << line;
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

std::vector<SessionSample> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::vector<SessionSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      SessionSample s;
      s.user_id = j.at("user_id").get<int>();
      s.group = group_from_name(j.at("group").get<std::string>());
      s.hdrs_score = j.at("hdrs").get<int>();
      s.label = j.at("label").get<int>();
      if (s.label != label_for_hdrs(s.hdrs_score)) {
        throw std::runtime_error("label does not match hdrs score");
      }
      s.alpha = view_from_json(j.at("alpha"), ViewId::kAlphanumeric);
      s.special = view_from_json(j.at("special"), ViewId::kSpecial);
      s.accel = view_from_json(j.at("accel"), ViewId::kAccelerometer);
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error("load_dataset: " + path + " line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

}  // namespace fedmood
