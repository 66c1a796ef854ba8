#include "lightrdl/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lightrdl {

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synth config: " + what); };
  if (n_users < 1 || n_products < 1 || n_timestamps < 1) fail("counts must be >= 1");
  if (!(tx_per_tick > 0.0)) fail("tx_per_tick must be > 0");
  if (!(temporal_signal >= 0.0 && temporal_signal <= 1.0)) fail("temporal_signal must lie in [0, 1]");
  if (!(latent_scale >= 0.0)) fail("latent_scale must be >= 0");
  if (!std::isfinite(static_signal)) fail("static_signal must be finite");
  if (horizon < 1) fail("horizon must be >= 1");
  if (first_seed < 0) fail("first_seed must be >= 0");
  if (seed_stride < 1) fail("seed_stride must be >= 1");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"n_users", n_users},         {"n_products", n_products},   {"n_timestamps", n_timestamps},
          {"tx_per_tick", tx_per_tick}, {"temporal_signal", temporal_signal}, {"latent_scale", latent_scale},
          {"static_signal", static_signal},
          {"horizon", horizon},         {"first_seed", first_seed},   {"seed_stride", seed_stride},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_users") c.n_users = value.get<int>();
    else if (key == "n_products") c.n_products = value.get<int>();
    else if (key == "n_timestamps") c.n_timestamps = value.get<int>();
    else if (key == "tx_per_tick") c.tx_per_tick = value.get<double>();
    else if (key == "temporal_signal") c.temporal_signal = value.get<double>();
    else if (key == "latent_scale") c.latent_scale = value.get<double>();
    else if (key == "static_signal") c.static_signal = value.get<double>();
    else if (key == "horizon") c.horizon = value.get<Timestamp>();
    else if (key == "first_seed") c.first_seed = value.get<Timestamp>();
    else if (key == "seed_stride") c.seed_stride = value.get<Timestamp>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("synth config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

std::vector<Timestamp> synth_seed_times(const SynthConfig& cfg) {
  std::vector<Timestamp> out;
  const Timestamp last = cfg.n_timestamps - 1;
  for (Timestamp t = cfg.first_seed; t + cfg.horizon <= last; t += cfg.seed_stride) out.push_back(t);
  return out;
}

namespace {

// Advances a stationary AR(1) latent with persistence rho and marginal std-dev sigma.
void ar_step(std::vector<double>& latent, double rho, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const double innovation = sigma * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (double& a : latent) a = rho * a + innovation * noise(rng);
}

}  // namespace

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n_users = static_cast<std::size_t>(cfg.n_users);
  const auto n_products = static_cast<std::size_t>(cfg.n_products);
  const double rho = cfg.temporal_signal;
  const double sigma = cfg.latent_scale;

  Table users{{"users", "id", "", {"age", "tenure", "region_score"}, {}, true}, {}};
  std::vector<double> user_base(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    const double age = normal(rng), tenure = normal(rng), region = normal(rng);
    user_base[u] = cfg.static_signal * tenure;
    users.rows.push_back({static_cast<PrimaryKey>(u + 1), {0, 0, 0}, {age, tenure, region}, kStaticTimestamp});
  }
  Table products{{"products", "id", "", {"price", "popularity"}, {}, true}, {}};
  std::vector<double> product_base(n_products), price(n_products);
  for (std::size_t p = 0; p < n_products; ++p) {
    price[p] = normal(rng);
    const double popularity = normal(rng);
    product_base[p] = 0.7 * popularity;
    products.rows.push_back({static_cast<PrimaryKey>(p + 1), {0, 0, 0}, {price[p], popularity}, kStaticTimestamp});
  }

  // Scale user rates so the expected total per tick matches tx_per_tick.
  double base_mass = 0.0;
  for (double b : user_base) base_mass += std::exp(b);
  const double scale = cfg.tx_per_tick / base_mass * std::exp(-0.5 * sigma * sigma);

  std::vector<double> user_latent(n_users), product_latent(n_products);
  for (double& a : user_latent) a = sigma * normal(rng);
  for (double& a : product_latent) a = sigma * normal(rng);

  Table tx{{"transactions", "id", "t", {"amount", "channel"}, {{"user_id", kSynthUsers}, {"product_id", kSynthProducts}},
            false},
           {}};
  std::bernoulli_distribution channel(0.3);
  std::vector<double> weights(n_products);
  PrimaryKey next_pk = 1;
  for (Timestamp t = 0; t < cfg.n_timestamps; ++t) {
    if (t > 0) {
      ar_step(user_latent, rho, sigma, rng);
      ar_step(product_latent, rho, sigma, rng);
    }
    for (std::size_t p = 0; p < n_products; ++p) weights[p] = std::exp(product_base[p] + product_latent[p]);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (std::size_t u = 0; u < n_users; ++u) {
      std::poisson_distribution<int> emit(scale * std::exp(user_base[u] + user_latent[u]));
      const int k = emit(rng);
      for (int i = 0; i < k; ++i) {
        const std::size_t p = pick(rng);
        const double amount = std::exp(0.3 * price[p] + 0.4 * normal(rng));
        tx.rows.push_back({next_pk++,
                           {static_cast<PrimaryKey>(u + 1), static_cast<PrimaryKey>(p + 1), 0},
                           {amount, channel(rng) ? 1.0 : 0.0},
                           t});
      }
    }
  }

  SynthData out;
  out.db = RelationalDatabase({std::move(users), std::move(products), std::move(tx)});

  // Per-tick counts for label computation.
  const auto n_ticks = static_cast<std::size_t>(cfg.n_timestamps);
  std::vector<std::vector<int>> user_counts(n_users, std::vector<int>(n_ticks, 0));
  std::vector<std::vector<int>> product_counts(n_products, std::vector<int>(n_ticks, 0));
  for (const EntityRow& row : out.db.table(kSynthTransactions).rows) {
    const auto t = static_cast<std::size_t>(row.timestamp);
    ++user_counts[static_cast<std::size_t>(row.fks[kSynthUsers] - 1)][t];
    ++product_counts[static_cast<std::size_t>(row.fks[kSynthProducts] - 1)][t];
  }
  auto window_sum = [&](const std::vector<int>& counts, Timestamp t) {
    int s = 0;
    for (Timestamp k = t + 1; k <= t + cfg.horizon; ++k) s += counts[static_cast<std::size_t>(k)];
    return s;
  };

  out.churn = {"user-churn", kSynthUsers, TaskKind::kBinaryClassification, synth_seed_times(cfg), cfg.horizon, {}};
  out.sales = {"item-sales", kSynthProducts, TaskKind::kRegression, out.churn.seed_times, cfg.horizon, {}};
  for (Timestamp t : out.churn.seed_times) {
    for (std::size_t u = 0; u < n_users; ++u)
      out.churn.labels[{t, static_cast<PrimaryKey>(u + 1)}] = window_sum(user_counts[u], t) == 0 ? 1.0 : 0.0;
    for (std::size_t p = 0; p < n_products; ++p)
      out.sales.labels[{t, static_cast<PrimaryKey>(p + 1)}] = window_sum(product_counts[p], t);
  }
  return out;
}

TimeSplit split_times(const TaskSpec& task, std::size_t n_train, std::size_t n_val, std::size_t n_test) {
  std::vector<Timestamp> times = task.seed_times;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const std::size_t need = n_train + n_val + n_test;
  if (n_train == 0 || need > times.size())
    throw std::invalid_argument("task '" + task.name + "' has " + std::to_string(times.size()) +
                                " seed times, split needs " + std::to_string(need) + " (with at least one train)");
  TimeSplit split;
  auto it = times.end() - static_cast<std::ptrdiff_t>(need);
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  split.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  split.test.assign(it, times.end());
  return split;
}

}  // namespace lightrdl
