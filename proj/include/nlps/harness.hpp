#pragma once

// Trial execution, grid search, default-hyperparameter selection and
// bootstrap aggregation of regret curves.

#include "nlps/agents.hpp"
#include "nlps/envs.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nlps::harness {

class ResultStore;

struct StepRecord {
  std::size_t action = 0;
  double reward = 0.0;
  double best_expected = 0.0;
  double chosen_expected = 0.0;

  bool operator==(const StepRecord&) const = default;
};

struct TrialRecord {
  envs::EnvSpec env;
  agents::PolicySpec policy;
  std::int64_t horizon = 0;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;  // t = 2..T
  std::vector<double> regret;     // cumulative pseudo-regret after each step
  double cumulative_reward = 0.0;
  double duration_seconds = 0.0;

  double final_regret() const { return regret.empty() ? 0.0 : regret.back(); }
  // Everything except wall-clock duration.
  bool same_outcome(const TrialRecord& other) const;
};

// Fills in what a policy derives from its problem: the reward-noise level for
// the linear confidence widths, and discount/window from the variation budget
// when not given explicitly.
agents::PolicySpec resolve_policy(const agents::PolicySpec& spec, const envs::EnvSpec& env,
                                  std::int64_t horizon);

// Runs t = 2..T on an environment already at t = 1.
void run_interaction(envs::Environment& env, agents::Policy& policy,
                     const envs::StepOutcome& initial, std::int64_t horizon, TrialRecord& out);

TrialRecord run_trial(const envs::EnvSpec& env, const agents::PolicySpec& policy,
                      std::int64_t horizon, std::uint64_t seed, const envs::Datasets& data = {});

// Disjoint seed families for hyperparameter search and definitive evaluation.
std::vector<std::uint64_t> search_seeds(std::uint64_t base, std::size_t n);
std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, std::size_t n);

// --- grids -----------------------------------------------------------------

enum class ProblemGroup { non_contextual, contextual };

ProblemGroup group_of(envs::Problem p);
std::string_view to_string(ProblemGroup g);
std::optional<ProblemGroup> group_from_string(std::string_view name);

// Full candidate grids for the neural-linear policies (576 feedforward,
// 96 recurrent settings per group).
std::vector<agents::PolicySpec> neural_grid(agents::PolicyKind kind, ProblemGroup group);
std::vector<agents::PolicySpec> ducb_grid();
std::vector<agents::PolicySpec> swucb_grid();
// Grid for any policy kind; random and the linear baselines have one setting.
std::vector<agents::PolicySpec> standard_grid(agents::PolicyKind kind, ProblemGroup group);

// Default hyperparameters per policy and problem group.
agents::PolicySpec default_policy(agents::PolicyKind kind, ProblemGroup group);

// --- grid search -------------------------------------------------------------

struct CellOutcome {
  bool ok = false;
  double cumulative_reward = 0.0;
  double final_regret = 0.0;
  std::string error;
};

struct GridOptions {
  std::size_t trials = 5;
  std::int64_t horizon = 600;
  std::uint64_t base_seed = 1;
  std::size_t workers = 1;
  bool include_random = true;  // also run the random policy on the same seeds
  ResultStore* store = nullptr;
  envs::Datasets data;
};

struct GridResult {
  envs::EnvSpec env;
  std::int64_t horizon = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<agents::PolicySpec> settings;
  std::vector<std::vector<CellOutcome>> cells;  // [setting][trial]
  std::vector<double> mean_reward;              // NaN for failed settings
  std::vector<bool> failed;
  std::optional<double> random_mean;            // m_-
  std::size_t best = 0;
  std::vector<double> normalized;               // empty without random_mean

  // Setting indices sorted by mean reward, highest first (failed settings last).
  std::vector<std::size_t> sensitivity_order() const;
};

// Mean cumulative reward over all trials of every setting; best is the first
// maximum in grid order. Failed settings are recorded, never dropped.
GridResult grid_search(const std::vector<agents::PolicySpec>& grid, const envs::EnvSpec& env,
                       const GridOptions& options);

// Runs (setting, seed) cells in parallel, skipping cells already in `store`.
// Returns outcomes indexed [setting][seed].
std::vector<std::vector<CellOutcome>> run_cells(const std::vector<agents::PolicySpec>& settings,
                                                const envs::EnvSpec& env,
                                                const std::vector<std::uint64_t>& seeds,
                                                std::int64_t horizon, std::size_t workers,
                                                ResultStore* store, const envs::Datasets& data,
                                                std::size_t setting_offset = 0);

// (m - m_minus) / (m_plus - m_minus); throws std::domain_error when the
// denominator vanishes.
double normalized_score(double m, double m_minus, double m_plus);

struct DefaultSelection {
  std::size_t best = 0;
  std::vector<double> mean_scores;  // per setting, averaged across problems
};

// Every result must share the same settings in the same order and carry a
// random-policy mean.
DefaultSelection select_defaults(const std::vector<GridResult>& problems);

// --- aggregation -------------------------------------------------------------

struct AggregateCurve {
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t trials = 0;
  std::size_t resamples = 0;
  double level = 0.95;
  std::uint64_t seed = 0;

  bool operator==(const AggregateCurve&) const = default;
};

// Percentile bootstrap over trials at every step. Resample b draws n trial
// indices uniformly with replacement from Rng(seed), in order b = 0..B-1.
// Band endpoints are the type-7 quantiles at (1 -/+ level) / 2, widened if
// needed so lower <= mean <= upper.
AggregateCurve aggregate(const std::vector<std::vector<double>>& curves,
                         std::size_t resamples = 1000, double level = 0.95,
                         std::uint64_t seed = 0);
AggregateCurve aggregate(const std::vector<TrialRecord>& trials, std::size_t resamples = 1000,
                         double level = 0.95, std::uint64_t seed = 0);

}  // namespace nlps::harness
