// Command-line front end: run, grid, defaults, aggregate, plot, list-envs.

#include "nlps/config.hpp"
#include "nlps/harness.hpp"
#include "nlps/plot.hpp"
#include "nlps/random.hpp"
#include "nlps/store.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlps::config::ConfigError;
using nlps::config::ExperimentConfig;
using nlps::config::json;
namespace harness = nlps::harness;

namespace {

constexpr const char* kGridFile = "grid_result.json";
constexpr const char* kAggregateFile = "aggregate.json";

struct CommonFlags {
  std::string config;
  std::optional<std::string> env;
  std::optional<std::string> policy;
  std::optional<std::int64_t> steps;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("config", f.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--env", f.env, "environment name (replaces the config's env)");
  cmd->add_option("--policy", f.policy, "policy tag (replaces the config's policy)");
  cmd->add_option("--steps", f.steps, "trial length T");
  cmd->add_option("--trials", f.trials, "number of trials (per setting for grids)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "parallel trials (0 = all cores)");
}

std::string output_root() {
  const char* root = std::getenv("NLPS_OUTPUT_ROOT");
  return root && *root ? root : "results";
}

// Merges flags over the config file and applies per-command defaults for T:
// grid searches run `search` steps; definitive non-contextual runs double it.
ExperimentConfig resolve(const CommonFlags& f, bool search, const std::string& command) {
  json j = json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", f.config + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  }
  if (f.env) j["env"] = json{{"name", *f.env}};
  if (f.policy) j["policy"] = json{{"name", *f.policy}};
  if (f.steps) j["steps"] = *f.steps;
  if (f.trials) j["trials"] = *f.trials;
  if (f.seed) j["seed"] = *f.seed;
  if (f.out) j["out"] = *f.out;
  if (f.workers) j["workers"] = *f.workers;
  if (!j.contains("env")) throw ConfigError("env", "missing (give a config file or --env)");
  if (!j.contains("policy")) throw ConfigError("policy", "missing (give a config file or --policy)");

  const bool steps_given = j.contains("steps");
  ExperimentConfig c = nlps::config::parse_experiment(j);
  if (!steps_given) {
    const bool ctx = nlps::envs::is_contextual(c.env.problem);
    c.steps = ctx ? 960 : (search ? 600 : 1200);
  }
  if (c.out.empty())
    c.out = (fs::path(output_root()) /
             (command + "_" + std::string(nlps::envs::to_string(c.env.problem)) + "_" +
              std::string(nlps::agents::to_string(c.policy.kind)) + "_s" +
              std::to_string(c.seed)))
                .string();
  return c;
}

json seeds_json(const std::vector<std::uint64_t>& seeds) {
  json a = json::array();
  for (auto s : seeds) a.push_back(s);
  return a;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

int cmd_run(const CommonFlags& flags) {
  const ExperimentConfig c = resolve(flags, false, "run");
  const auto seeds = harness::evaluation_seeds(c.seed, c.trials);

  json experiment;
  experiment["command"] = "run";
  experiment["env"] = nlps::config::to_json(c.env);
  experiment["policy"] = nlps::config::to_json(c.policy);
  experiment["steps"] = c.steps;
  experiment["trials"] = c.trials;
  experiment["seed"] = c.seed;
  experiment["seeds"] = seeds_json(seeds);
  harness::ResultStore store(c.out, experiment);

  std::size_t done = 0;
  for (auto s : seeds) done += store.has({0, s});
  if (done == seeds.size()) {
    std::cout << "all " << done << " trials already complete in " << c.out << "\n";
  } else if (done > 0) {
    std::cout << "resuming: " << done << " of " << seeds.size() << " trials already complete\n";
  }
  const auto data = nlps::envs::load_datasets(c.env);
  const auto cells = harness::run_cells({c.policy}, c.env, seeds, c.steps, c.workers, &store, data);

  std::vector<double> regrets;
  int failures = 0;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const auto& cell = cells[0][k];
    if (!cell.ok) {
      std::cerr << "trial seed " << seeds[k] << " failed: " << cell.error << "\n";
      ++failures;
      continue;
    }
    regrets.push_back(cell.final_regret);
    std::cout << "seed " << seeds[k] << "  final regret " << cell.final_regret
              << "  cumulative reward " << cell.cumulative_reward << "\n";
  }
  if (!regrets.empty())
    std::cout << nlps::agents::to_string(c.policy.kind) << " on "
              << nlps::envs::to_string(c.env.problem) << ": mean final regret " << mean(regrets)
              << " over " << regrets.size() << " trials (T = " << c.steps << ")\n";
  std::cout << "records in " << (fs::path(c.out) / "trials").string() << "\n";
  return failures ? 1 : 0;
}

std::vector<nlps::agents::PolicySpec> grid_settings(const ExperimentConfig& c) {
  const auto group = harness::group_of(c.env.problem);
  if (!c.grid || c.grid->is_string()) return harness::standard_grid(c.policy.kind, group);
  std::vector<nlps::agents::PolicySpec> settings;
  std::size_t i = 0;
  for (const auto& entry : *c.grid) {
    json merged = c.policy_source;
    for (const auto& [k, v] : entry.items()) merged[k] = v;
    settings.push_back(
        nlps::config::policy_from_json(merged, group, "grid[" + std::to_string(i++) + "]"));
  }
  if (settings.empty()) throw ConfigError("grid", "empty grid");
  return settings;
}

int cmd_grid(const CommonFlags& flags, bool dry_run) {
  const ExperimentConfig c = resolve(flags, true, "grid");
  const auto settings = grid_settings(c);
  std::cout << settings.size() << " settings x " << c.trials << " trials on "
            << nlps::envs::to_string(c.env.problem) << " (T = " << c.steps << ")\n";
  if (dry_run) return 0;

  json experiment;
  experiment["command"] = "grid";
  experiment["env"] = nlps::config::to_json(c.env);
  json list = json::array();
  for (const auto& s : settings) list.push_back(nlps::config::to_json(s));
  experiment["settings"] = std::move(list);
  experiment["steps"] = c.steps;
  experiment["trials"] = c.trials;
  experiment["seed"] = c.seed;
  experiment["seeds"] = seeds_json(harness::search_seeds(c.seed, c.trials));
  experiment["include_random"] = c.include_random;
  harness::ResultStore store(c.out, experiment);

  harness::GridOptions opt;
  opt.trials = c.trials;
  opt.horizon = c.steps;
  opt.base_seed = c.seed;
  opt.workers = c.workers;
  opt.include_random = c.include_random;
  opt.store = &store;
  opt.data = nlps::envs::load_datasets(c.env);
  const auto result = harness::grid_search(settings, c.env, opt);
  harness::save_grid_result(fs::path(c.out) / kGridFile, result);

  std::cout << "best setting #" << result.best << ": "
            << nlps::config::to_json(result.settings[result.best]).dump() << "\n";
  if (result.random_mean) std::cout << "random policy mean reward " << *result.random_mean << "\n";
  std::cout << "rank,setting,mean_reward" << (result.normalized.empty() ? "" : ",normalized")
            << "\n";
  std::size_t rank = 1;
  for (auto s : result.sensitivity_order()) {
    std::cout << rank++ << "," << s << ",";
    if (result.failed[s]) {
      std::cout << "failed";
    } else {
      std::cout << result.mean_reward[s];
      if (!result.normalized.empty()) std::cout << "," << result.normalized[s];
    }
    std::cout << "\n";
  }
  std::size_t failed = 0;
  for (bool f : result.failed) failed += f;
  if (failed) std::cerr << failed << " settings failed; see " << kGridFile << "\n";
  return 0;
}

fs::path grid_file(const std::string& p) {
  const fs::path path(p);
  return fs::is_directory(path) ? path / kGridFile : path;
}

int cmd_defaults(const std::vector<std::string>& inputs, const std::string& group_name) {
  const auto group = harness::group_from_string(group_name);
  if (!group) throw ConfigError("group", "expected contextual or non_contextual");
  std::vector<harness::GridResult> results;
  for (const auto& in : inputs) {
    auto r = harness::load_grid_result(grid_file(in));
    if (harness::group_of(r.env.problem) != *group)
      throw ConfigError("group", std::string(nlps::envs::to_string(r.env.problem)) +
                                     " is not in the " + group_name + " group");
    results.push_back(std::move(r));
  }
  const auto sel = harness::select_defaults(results);
  std::cout << "default setting #" << sel.best << " (mean normalized score "
            << sel.mean_scores[sel.best] << "):\n"
            << nlps::config::to_json(results.front().settings[sel.best]).dump(2) << "\n";
  return 0;
}

std::vector<harness::TrialRecord> load_run(const fs::path& dir, std::size_t setting) {
  const auto store = harness::ResultStore::open(dir);
  auto trials = store.load_setting(setting);
  if (trials.size() < 2)
    throw std::runtime_error(dir.string() + ": need at least two completed trials, found " +
                             std::to_string(trials.size()));
  return trials;
}

std::uint64_t bootstrap_seed(const fs::path& dir) {
  const auto store = harness::ResultStore::open(dir);
  const auto& e = store.experiment();
  const std::uint64_t master = e.contains("seed") ? e.at("seed").get<std::uint64_t>() : 0;
  return nlps::derive_seed(master, nlps::stream::bootstrap);
}

harness::AggregateCurve aggregate_dir(const fs::path& dir, std::size_t setting,
                                      std::size_t resamples, double level,
                                      std::optional<std::uint64_t> seed) {
  const auto trials = load_run(dir, setting);
  auto curve = harness::aggregate(trials, resamples, level, seed ? *seed : bootstrap_seed(dir));
  harness::save_aggregate(dir / kAggregateFile, curve);
  return curve;
}

int cmd_aggregate(const std::vector<std::string>& dirs, std::size_t setting, std::size_t resamples,
                  double level, std::optional<std::uint64_t> seed) {
  for (const auto& d : dirs) {
    const auto curve = aggregate_dir(d, setting, resamples, level, seed);
    const std::size_t last = curve.mean.size() - 1;
    std::cout << d << ": " << curve.trials << " trials, final regret " << curve.mean[last] << " ["
              << curve.lower[last] << ", " << curve.upper[last] << "] at " << curve.level * 100
              << "%\n";
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& out,
             const std::string& title) {
  std::vector<nlps::plot::NamedCurve> curves;
  std::map<std::string, int> seen;
  for (const auto& d : dirs) {
    const fs::path dir(d);
    const auto store = harness::ResultStore::open(dir);
    std::string label = "policy";
    const auto& e = store.experiment();
    if (e.contains("policy") && e.at("policy").contains("name"))
      label = e.at("policy").at("name").get<std::string>();
    if (int n = seen[label]++; n > 0) label += "_" + std::to_string(n + 1);
    const fs::path agg = dir / kAggregateFile;
    auto curve = fs::exists(agg) ? harness::load_aggregate(agg)
                                 : aggregate_dir(dir, 0, 1000, 0.95, std::nullopt);
    curves.push_back({label, std::move(curve)});
  }
  nlps::plot::write_plot(out, curves, title);
  std::cout << "wrote " << out << ".csv and " << out << ".svg\n";
  return 0;
}

int cmd_list_envs() {
  for (auto p : nlps::envs::all_problems()) {
    const auto s = nlps::envs::EnvSpec::defaults(p);
    std::cout << nlps::envs::to_string(p) << "  ("
              << harness::to_string(harness::group_of(p)) << ", K = " << s.arms;
    if (nlps::envs::is_linear(p)) std::cout << ", d = " << s.dim;
    std::cout << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-linear posterior sampling for non-stationary bandits"};
  app.require_subcommand(1);

  CommonFlags run_flags, grid_flags;
  auto* run = app.add_subcommand("run", "run definitive trials of one policy");
  add_common(run, run_flags);

  bool dry_run = false;
  auto* grid = app.add_subcommand("grid", "hyperparameter grid search");
  add_common(grid, grid_flags);
  grid->add_flag("--dry-run", dry_run, "print the number of settings and exit");

  std::vector<std::string> default_inputs;
  std::string group = "non_contextual";
  auto* defaults = app.add_subcommand("defaults", "select default settings across grid results");
  defaults->add_option("results", default_inputs, "grid output directories or files")->required();
  defaults->add_option("--group", group, "contextual or non_contextual");

  std::vector<std::string> agg_dirs;
  std::size_t setting = 0, resamples = 1000;
  double level = 0.95;
  std::optional<std::uint64_t> agg_seed;
  auto* agg = app.add_subcommand("aggregate", "bootstrap regret bands for run directories");
  agg->add_option("dirs", agg_dirs, "run output directories")->required();
  agg->add_option("--setting", setting, "setting index within the store");
  agg->add_option("--resamples", resamples, "bootstrap resamples");
  agg->add_option("--level", level, "confidence level");
  agg->add_option("--seed", agg_seed, "bootstrap seed (default: derived from the run seed)");

  std::vector<std::string> plot_dirs;
  std::string plot_out = "regret", title = "Cumulative regret";
  auto* plot = app.add_subcommand("plot", "export regret curves as CSV and SVG");
  plot->add_option("dirs", plot_dirs, "run output directories")->required();
  plot->add_option("--out", plot_out, "output prefix for .csv and .svg");
  plot->add_option("--title", title, "chart title");

  auto* list = app.add_subcommand("list-envs", "list the available environments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*grid) return cmd_grid(grid_flags, dry_run);
    if (*defaults) return cmd_defaults(default_inputs, group);
    if (*agg) return cmd_aggregate(agg_dirs, setting, resamples, level, agg_seed);
    if (*plot) return cmd_plot(plot_dirs, plot_out, title);
    if (*list) return cmd_list_envs();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
