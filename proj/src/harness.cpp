#include "nlps/harness.hpp"

#include "nlps/random.hpp"
#include "nlps/store.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace nlps::harness {

using agents::PolicyKind;
using agents::PolicySpec;
using envs::EnvSpec;

bool TrialRecord::same_outcome(const TrialRecord& o) const {
  return env == o.env && policy == o.policy && horizon == o.horizon && seed == o.seed &&
         steps == o.steps && regret == o.regret && cumulative_reward == o.cumulative_reward;
}

PolicySpec resolve_policy(const PolicySpec& spec, const EnvSpec& env, std::int64_t horizon) {
  PolicySpec out = spec;
  if (spec.kind != PolicyKind::dlinucb && spec.kind != PolicyKind::swlinucb) return out;
  if (!envs::is_linear(env.problem))
    throw std::invalid_argument(std::string(agents::to_string(spec.kind)) +
                                " needs a linear problem, got " +
                                std::string(envs::to_string(env.problem)));
  out.baseline.noise_std = env.noise_std;
  if (!out.baseline.gamma || !out.baseline.window) {
    const auto tuning =
        agents::tune_linear(envs::variation_budget(env, horizon), env.dim, horizon);
    if (!out.baseline.gamma) out.baseline.gamma = tuning.gamma;
    if (!out.baseline.window) out.baseline.window = tuning.window;
  }
  return out;
}

void run_interaction(envs::Environment& env, agents::Policy& policy,
                     const envs::StepOutcome& initial, std::int64_t horizon, TrialRecord& out) {
  if (horizon < 2) throw std::invalid_argument("horizon: T must be >= 2");
  if (const auto limit = env.max_time(); limit && *limit < horizon)
    throw std::runtime_error("dataset exhausted: the environment supports at most " +
                             std::to_string(*limit) + " steps, T = " + std::to_string(horizon));
  out.steps.clear();
  out.regret.clear();
  out.steps.reserve(static_cast<std::size_t>(horizon - 1));
  out.regret.reserve(static_cast<std::size_t>(horizon - 1));
  out.cumulative_reward = 0.0;

  policy.start(initial);
  double regret = 0.0;
  for (std::int64_t t = 2; t <= horizon; ++t) {
    const std::size_t action = policy.choose();
    StepRecord step;
    step.action = action;
    step.best_expected = env.best_expected();
    step.chosen_expected = env.expected_reward(action);
    auto outcome = env.step(action);
    step.reward = outcome.reward;
    policy.observe(outcome);

    regret += step.best_expected - step.chosen_expected;
    out.cumulative_reward += step.reward;
    out.regret.push_back(regret);
    out.steps.push_back(step);
  }
}

TrialRecord run_trial(const EnvSpec& env_spec, const PolicySpec& policy_spec,
                      std::int64_t horizon, std::uint64_t seed, const envs::Datasets& data) {
  const auto start = std::chrono::steady_clock::now();
  if (horizon < 2) throw std::invalid_argument("horizon: T must be >= 2");
  env_spec.validate();

  TrialRecord record;
  record.env = env_spec;
  record.policy = resolve_policy(policy_spec, env_spec, horizon);
  record.horizon = horizon;
  record.seed = seed;

  const auto loaded = envs::load_datasets(env_spec, data);
  auto [env, initial] = envs::env_reset(env_spec, derive_seed(seed, stream::environment), loaded);
  auto policy = agents::make_policy(record.policy, agents::ProblemShape::of(*env),
                                    derive_seed(seed, stream::policy));
  run_interaction(*env, *policy, initial, horizon, record);

  record.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

namespace {

// Distinct stream ranges keep the two seed families apart.
constexpr std::uint64_t kSearchStreams = 0x5EA5C4ULL << 32;
constexpr std::uint64_t kEvaluationStreams = 0xE7A1ULL << 32;

std::vector<std::uint64_t> seed_family(std::uint64_t base, std::size_t n, std::uint64_t offset) {
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = derive_seed(base, offset + i);
  return seeds;
}

}  // namespace

std::vector<std::uint64_t> search_seeds(std::uint64_t base, std::size_t n) {
  return seed_family(base, n, kSearchStreams);
}

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, std::size_t n) {
  return seed_family(base, n, kEvaluationStreams);
}

// --- grids -----------------------------------------------------------------

ProblemGroup group_of(envs::Problem p) {
  return envs::is_contextual(p) ? ProblemGroup::contextual : ProblemGroup::non_contextual;
}

std::string_view to_string(ProblemGroup g) {
  return g == ProblemGroup::contextual ? "contextual" : "non_contextual";
}

std::optional<ProblemGroup> group_from_string(std::string_view name) {
  if (name == "contextual") return ProblemGroup::contextual;
  if (name == "non_contextual") return ProblemGroup::non_contextual;
  return std::nullopt;
}

std::vector<PolicySpec> neural_grid(PolicyKind kind, ProblemGroup group) {
  if (!agents::is_neural(kind)) throw std::invalid_argument("neural_grid: not a neural policy");
  const bool ctx = group == ProblemGroup::contextual;
  const std::vector<double> rates{0.001, 0.01, 0.1};
  const std::vector<int> epochs{16, 64};
  const std::vector<int> intervals{32, 128};
  const std::vector<double> noise{0.1, 0.3};
  const std::vector<double> prior{0.5, 1.0};
  const std::vector<std::size_t> widths = ctx ? std::vector<std::size_t>{32, 64}
                                              : std::vector<std::size_t>{16, 32};
  const bool ff = kind == PolicyKind::fnlps;
  const std::vector<std::size_t> orders = ff ? std::vector<std::size_t>{1, 4}
                                             : std::vector<std::size_t>{1};
  const std::vector<std::size_t> sinusoids =
      !ff ? std::vector<std::size_t>{1}
          : (ctx ? std::vector<std::size_t>{2, 4, 8} : std::vector<std::size_t>{1, 2, 4});

  const PolicySpec base = default_policy(kind, group);
  std::vector<PolicySpec> grid;
  for (double eta : rates)
    for (int e : epochs)
      for (int q : intervals)
        for (double s2 : noise)
          for (double t2 : prior)
            for (std::size_t u : widths)
              for (std::size_t n : orders)
                for (std::size_t d : sinusoids) {
                  PolicySpec s = base;
                  s.neural.learning_rate = eta;
                  s.neural.epochs = e;
                  s.neural.interval = q;
                  s.neural.noise_variance = s2;
                  s.neural.prior_variance = t2;
                  s.neural.units = {u, u, u};
                  s.neural.order = n;
                  s.neural.sinusoidal_units = d;
                  grid.push_back(s);
                }
  return grid;
}

std::vector<PolicySpec> ducb_grid() {
  std::vector<PolicySpec> grid;
  for (double g : {0.8, 0.85, 0.9, 0.925, 0.95, 0.97, 0.98, 0.99, 0.995, 0.999}) {
    PolicySpec s = default_policy(PolicyKind::ducb, ProblemGroup::non_contextual);
    s.baseline.gamma = g;
    grid.push_back(s);
  }
  return grid;
}

std::vector<PolicySpec> swucb_grid() {
  std::vector<PolicySpec> grid;
  for (std::size_t w : {5, 10, 25, 50, 75, 100, 150, 200, 250, 300}) {
    PolicySpec s = default_policy(PolicyKind::swucb, ProblemGroup::non_contextual);
    s.baseline.window = w;
    grid.push_back(s);
  }
  return grid;
}

std::vector<PolicySpec> standard_grid(PolicyKind kind, ProblemGroup group) {
  switch (kind) {
    case PolicyKind::fnlps:
    case PolicyKind::rnlps:
      return neural_grid(kind, group);
    case PolicyKind::ducb:
      return ducb_grid();
    case PolicyKind::swucb:
      return swucb_grid();
    default:
      return {default_policy(kind, group)};
  }
}

PolicySpec default_policy(PolicyKind kind, ProblemGroup group) {
  PolicySpec s;
  s.kind = kind;
  auto& n = s.neural;
  const bool ctx = group == ProblemGroup::contextual;
  n.units = {32, 32, 32};
  n.interval = 32;
  n.order = 1;
  n.l2 = 0.001;
  if (kind == PolicyKind::fnlps) {
    n.learning_rate = ctx ? 0.01 : 0.1;
    n.epochs = ctx ? 64 : 16;
    n.noise_variance = 0.1;
    n.prior_variance = 1.0;
    n.sinusoidal_units = ctx ? 2 : 1;
  } else {
    n.learning_rate = ctx ? 0.001 : 0.01;
    n.epochs = ctx ? 64 : 16;
    n.noise_variance = ctx ? 0.3 : 0.1;
    n.prior_variance = 0.5;
    n.sinusoidal_units = 1;
  }
  if (kind == PolicyKind::ducb) s.baseline.gamma = 0.95;
  if (kind == PolicyKind::swucb) s.baseline.window = 50;
  return s;
}

// --- grid search -------------------------------------------------------------

std::vector<std::vector<CellOutcome>> run_cells(const std::vector<PolicySpec>& settings,
                                                const EnvSpec& env,
                                                const std::vector<std::uint64_t>& seeds,
                                                std::int64_t horizon, std::size_t workers,
                                                ResultStore* store, const envs::Datasets& data,
                                                std::size_t setting_offset) {
  std::vector<std::vector<CellOutcome>> out(settings.size(),
                                            std::vector<CellOutcome>(seeds.size()));
  const std::size_t total = settings.size() * seeds.size();
  if (total == 0) return out;

  // Shared read-only datasets, loaded once.
  const auto loaded = envs::load_datasets(env, data);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t s = i / seeds.size();
      const std::size_t k = i % seeds.size();
      CellOutcome& cell = out[s][k];
      const CellKey key{setting_offset + s, seeds[k]};
      try {
        const bool cached = store && store->has(key);
        TrialRecord rec = cached ? store->read(key)
                                 : run_trial(env, settings[s], horizon, seeds[k], loaded);
        if (store && !cached) store->write(key, rec);
        cell.ok = true;
        cell.cumulative_reward = rec.cumulative_reward;
        cell.final_regret = rec.final_regret();
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, total);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace {

double mean_of(const std::vector<CellOutcome>& cells, bool& failed) {
  failed = false;
  double sum = 0.0;
  for (const auto& c : cells) {
    if (!c.ok) failed = true;
    sum += c.cumulative_reward;
  }
  if (failed || cells.empty()) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(cells.size());
}

}  // namespace

GridResult grid_search(const std::vector<PolicySpec>& grid, const EnvSpec& env,
                       const GridOptions& options) {
  if (grid.empty()) throw std::invalid_argument("grid: needs at least one setting");
  if (options.trials == 0) throw std::invalid_argument("trials: must be >= 1");

  GridResult result;
  result.env = env;
  result.horizon = options.horizon;
  result.seeds = search_seeds(options.base_seed, options.trials);
  result.settings = grid;

  std::vector<PolicySpec> all = grid;
  if (options.include_random) all.push_back(default_policy(PolicyKind::random, group_of(env.problem)));

  auto cells = run_cells(all, env, result.seeds, options.horizon, options.workers, options.store,
                         options.data);

  if (options.include_random) {
    bool failed = false;
    const double m = mean_of(cells.back(), failed);
    if (failed) throw std::runtime_error("random policy failed: " + cells.back().front().error);
    result.random_mean = m;
    cells.pop_back();
  }
  result.cells = std::move(cells);

  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    bool failed = false;
    result.mean_reward.push_back(mean_of(result.cells[s], failed));
    result.failed.push_back(failed);
    if (!failed && (!best || result.mean_reward[s] > result.mean_reward[*best])) best = s;
  }
  if (!best) throw std::runtime_error("grid: every setting failed");
  result.best = *best;

  if (result.random_mean) {
    const double top = result.mean_reward[result.best];
    for (std::size_t s = 0; s < grid.size(); ++s) {
      double score = std::numeric_limits<double>::quiet_NaN();
      if (!result.failed[s]) {
        try {
          score = normalized_score(result.mean_reward[s], *result.random_mean, top);
        } catch (const std::domain_error&) {
        }
      }
      result.normalized.push_back(score);
    }
  }
  return result;
}

std::vector<std::size_t> GridResult::sensitivity_order() const {
  std::vector<std::size_t> order(mean_reward.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (failed[a] != failed[b]) return !failed[a];
    if (failed[a]) return false;
    return mean_reward[a] > mean_reward[b];
  });
  return order;
}

double normalized_score(double m, double m_minus, double m_plus) {
  const double denom = m_plus - m_minus;
  if (denom == 0.0 || !std::isfinite(denom))
    throw std::domain_error("normalized score: best and random means coincide");
  return (m - m_minus) / denom;
}

DefaultSelection select_defaults(const std::vector<GridResult>& problems) {
  if (problems.empty()) throw std::invalid_argument("select_defaults: no problems");
  const auto& settings = problems.front().settings;
  DefaultSelection sel;
  sel.mean_scores.assign(settings.size(), 0.0);
  for (const auto& p : problems) {
    if (p.settings != settings)
      throw std::invalid_argument("select_defaults: problems were searched over different grids");
    if (p.normalized.size() != settings.size())
      throw std::invalid_argument("select_defaults: missing normalized scores for " +
                                  std::string(envs::to_string(p.env.problem)));
    for (std::size_t s = 0; s < settings.size(); ++s) sel.mean_scores[s] += p.normalized[s];
  }
  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    sel.mean_scores[s] /= static_cast<double>(problems.size());
    if (std::isnan(sel.mean_scores[s])) continue;
    if (!best || sel.mean_scores[s] > sel.mean_scores[*best]) best = s;
  }
  if (!best) throw std::runtime_error("select_defaults: no setting has scores on every problem");
  sel.best = *best;
  return sel;
}

// --- aggregation -------------------------------------------------------------

namespace {

double quantile7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

AggregateCurve aggregate(const std::vector<std::vector<double>>& curves, std::size_t resamples,
                         double level, std::uint64_t seed) {
  if (curves.size() < 2) throw std::invalid_argument("aggregate: needs at least two trials");
  if (resamples == 0) throw std::invalid_argument("aggregate: resamples must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("aggregate: level in (0, 1)");
  const std::size_t n = curves.size();
  const std::size_t len = curves.front().size();
  for (const auto& c : curves)
    if (c.size() != len) throw std::invalid_argument("aggregate: mismatched curve lengths");

  AggregateCurve out;
  out.trials = n;
  out.resamples = resamples;
  out.level = level;
  out.seed = seed;
  out.mean.assign(len, 0.0);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < len; ++i) out.mean[i] += c[i];
  for (auto& m : out.mean) m /= static_cast<double>(n);

  // means[i][b]: mean of resample b at step i.
  std::vector<std::vector<double>> means(len, std::vector<double>(resamples, 0.0));
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& j : idx) j = pick(rng);
    for (std::size_t i = 0; i < len; ++i) {
      double sum = 0.0;
      for (std::size_t j : idx) sum += curves[j][i];
      means[i][b] = sum / static_cast<double>(n);
    }
  }

  const double alpha = (1.0 - level) / 2.0;
  out.lower.resize(len);
  out.upper.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    auto& col = means[i];
    std::sort(col.begin(), col.end());
    out.lower[i] = std::min(quantile7(col, alpha), out.mean[i]);
    out.upper[i] = std::max(quantile7(col, 1.0 - alpha), out.mean[i]);
  }
  return out;
}

AggregateCurve aggregate(const std::vector<TrialRecord>& trials, std::size_t resamples,
                         double level, std::uint64_t seed) {
  std::vector<std::vector<double>> curves;
  curves.reserve(trials.size());
  for (const auto& t : trials) curves.push_back(t.regret);
  return aggregate(curves, resamples, level, seed);
}

}  // namespace nlps::harness
