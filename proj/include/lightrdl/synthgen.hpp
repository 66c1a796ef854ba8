#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lightrdl/relational_store.hpp"
#include "lightrdl/task.hpp"

namespace lightrdl {

/// A users / products / transactions star. Each user has a log-AR(1) activity
/// latent; `temporal_signal` is its persistence, so at 0 the per-tick rates are
/// independent given the user's static features.
struct SynthConfig {
  int n_users = 200;
  int n_products = 50;
  int n_timestamps = 60;
  double tx_per_tick = 60.0;  // expected transactions per tick over all users
  double temporal_signal = 0.9;
  double latent_scale = 1.0;   // stationary std-dev of the log-rate latent
  double static_signal = 0.6;  // weight of the user's `tenure` feature in the log base rate
  Timestamp horizon = 2;
  Timestamp first_seed = 0;
  Timestamp seed_stride = 1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthData {
  RelationalDatabase db;
  TaskSpec churn;  // users: 1 iff no transaction in (t, t + horizon]
  TaskSpec sales;  // products: transaction count in (t, t + horizon]
};

inline constexpr TableId kSynthUsers = 0;
inline constexpr TableId kSynthProducts = 1;
inline constexpr TableId kSynthTransactions = 2;

SynthData generate(const SynthConfig& cfg);

/// Seed times t = first_seed + k * stride with t + horizon <= last tick.
std::vector<Timestamp> synth_seed_times(const SynthConfig& cfg);

struct TimeSplit {
  std::vector<Timestamp> train, val, test;
};

/// The trailing n_train + n_val + n_test seed times, in chronological order: train
/// first, test last. Throws std::invalid_argument when the task has too few.
TimeSplit split_times(const TaskSpec& task, std::size_t n_train, std::size_t n_val, std::size_t n_test);

}  // namespace lightrdl
