#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmood/gru.hpp"
#include "fedmood/rng.hpp"

namespace fedmood {

enum class UserGroup { kNormal = 0, kBipolar1 = 1, kBipolar2 = 2 };

std::string group_name(UserGroup group);
UserGroup group_from_name(const std::string& name);

// One typing session: a burst of keypresses delimited by >5 s idle gaps,
// observed through three views.  The clinical score attached to the session
// defines the binary label: positive iff hdrs_score >= 8.
struct SessionSample {
  int user_id = 0;
  UserGroup group = UserGroup::kNormal;
  int hdrs_score = 0;
  int label = 0;
  ViewSequence alpha;    // 4 features/step: hold time, gap, dx, dy
  ViewSequence special;  // 6-dim one-hot/step
  ViewSequence accel;    // 3 features/step: x, y, z

  int keypress_count() const { return alpha.step_count; }
  const ViewSequence& view(int v) const {
    return v == 0 ? alpha : (v == 1 ? special : accel);
  }
};

int label_for_hdrs(int hdrs_score);  // 1 iff score >= 8

// User-level generative parameters.  Group-level means are perturbed per user
// so users are distinguishable clusters, which is what makes user-level
// (non-IID) partitions genuinely harder than session-level (IID) ones.
struct UserProfile {
  int user_id = 0;
  UserGroup group = UserGroup::kNormal;
  double key_hold_mean = 0.08;    // seconds
  double interkey_mean = 0.25;    // seconds
  double accel_jitter = 0.6;      // m/s^2 noise scale
  double hdrs_mean = 3.0;         // Poisson mean of the per-session score
  int session_count = 748;
};

struct GeneratorConfig {
  int users = 20;
  int sessions_per_user = 748;
  double session_count_spread = 0.0;  // fraction; >0 makes per-user counts differ
  int keypress_min = 10;
  int keypress_max = 100;
  int accel_step_cap = 100;           // accelerometer samples every 60 ms, capped
  double accel_period = 0.06;         // seconds between accelerometer readings

  // group-conditional means, indexed by UserGroup: normal, bipolar-I, bipolar-II
  double interkey_mean[3] = {0.25, 0.45, 0.38};
  double key_hold_mean[3] = {0.08, 0.11, 0.10};
  double accel_jitter[3] = {0.6, 1.3, 1.0};
  double hdrs_mean[3] = {3.0, 14.0, 10.0};
  int hdrs_max = 30;

  // heterogeneity knobs (lognormal sigmas / relative noise)
  double user_sigma = 0.35;     // per-user offset on interval & jitter
  double session_sigma = 0.45;  // per-session offset
  double step_noise = 0.35;     // per-step relative noise on intervals
};

// Default 20-user cohort: 8 normal, 6 bipolar-I, 6 bipolar-II.  Groups are
// assigned round-robin (normal, bd1, bd2) for the first 18 users, normal
// beyond, which yields 8/6/6 at 20 users and 2/1/1 at 4.
std::vector<UserProfile> make_cohort(const GeneratorConfig& config, std::uint64_t seed);

// Deterministic synthetic corpus: per user, session_count sessions in
// chronological generation order.  Uses one RNG stream per user so output is
// independent of any outer iteration details.
std::vector<SessionSample> generate_synthetic(const std::vector<UserProfile>& profiles,
                                              const GeneratorConfig& config,
                                              std::uint64_t seed);

// Keeps sessions with 10 <= keypress_count <= 100.
std::vector<SessionSample> filter_sessions(const std::vector<SessionSample>& samples);

struct DatasetSplit {
  std::vector<SessionSample> train;
  std::vector<SessionSample> validation;
};

// Per-user chronological split: first floor(0.8*n) sessions to train, rest to
// validation.  Users must have >= 5 sessions.
DatasetSplit split_train_val(const std::vector<SessionSample>& samples);

struct PartyDataset {
  int party_id = 0;
  std::vector<SessionSample> samples;
  int n() const { return static_cast<int>(samples.size()); }
};

// Stratified-by-group sampling so each party mirrors the pool's group (and
// hence label) proportions.  Parties draw without replacement until the pool
// is exhausted, then a fresh reshuffled pass begins (replaceable sampling).
std::vector<PartyDataset> partition_iid(const std::vector<SessionSample>& train,
                                        int n_parties, int per_party, std::uint64_t seed);

// User-level hospital partition: 4 parties, each exactly 2 normal + 1
// bipolar-I + 1 bipolar-II user (users taken in id order within group; with
// the default 8/6/6 cohort, 2 bd1 and 2 bd2 users stay unassigned).
std::vector<PartyDataset> partition_noniid(const std::vector<SessionSample>& train,
                                           const std::vector<UserProfile>& profiles);

// JSON Lines, one session per line, UTF-8, LF endings:
// {"user_id":int,"group":"normal|bd1|bd2","hdrs":int,"label":0|1,
//  "alpha":[[4 floats]...],"special":[[6 ints]...],"accel":[[3 floats]...]}
void save_dataset(const std::vector<SessionSample>& samples, const std::string& path);
std::vector<SessionSample> load_dataset(const std::string& path);

}  // namespace fedmood
