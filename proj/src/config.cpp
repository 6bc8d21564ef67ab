#include "nlps/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

namespace nlps::config {

using agents::PolicyKind;
using agents::PolicySpec;
using envs::EnvSpec;

namespace {

// Reads fields of one JSON object and rejects any key left unread.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_, "expected an object");
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  const json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  bool get(const std::string& key, double& out) {
    const json* v = find(key);
    if (!v) return false;
    if (v->is_null()) {
      out = std::numeric_limits<double>::quiet_NaN();
      return true;
    }
    if (!v->is_number()) throw ConfigError(path(key), "expected a number");
    out = v->get<double>();
    return true;
  }

  template <class Int>
    requires std::is_integral_v<Int>
  bool get(const std::string& key, Int& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v->is_number_unsigned()) {
        out = static_cast<Int>(v->get<std::uint64_t>());
        return true;
      }
      throw ConfigError(path(key), "expected a non-negative integer");
    } else {
      out = static_cast<Int>(v->get<std::int64_t>());
      return true;
    }
  }

  bool get(const std::string& key, bool& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
    out = v->get<bool>();
    return true;
  }

  bool get(const std::string& key, std::string& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_string()) throw ConfigError(path(key), "expected a string");
    out = v->get<std::string>();
    return true;
  }

  template <class T>
  bool get(const std::string& key, std::optional<T>& out) {
    const json* v = j_.contains(key) ? &j_.at(key) : nullptr;
    if (!v) return false;
    if (v->is_null()) {
      used_.insert(key);
      out.reset();
      return true;
    }
    T value{};
    get(key, value);
    out = value;
    return true;
  }

  bool get(const std::string& key, std::vector<double>& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_array()) throw ConfigError(path(key), "expected an array of numbers");
    out.clear();
    for (const auto& x : *v) {
      if (x.is_null()) {
        out.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      if (!x.is_number()) throw ConfigError(path(key), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return true;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(path(key), "unknown key");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

template <class F>
void checked(const std::string& where, F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    // Validation messages start with the field name.
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    if (colon != std::string::npos && msg.find(' ') > colon)
      throw ConfigError(where + "." + msg.substr(0, colon), msg.substr(colon + 2));
    throw ConfigError(where, msg);
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

std::string problem_list() {
  std::string names;
  for (auto p : envs::all_problems()) names += (names.empty() ? "" : ", ") + std::string(envs::to_string(p));
  return names;
}

envs::Problem problem_of(const json& j, const std::string& where) {
  const json* name = j.is_string() ? &j : (j.is_object() && j.contains("name") ? &j.at("name") : nullptr);
  const std::string key = j.is_string() ? where : where + ".name";
  if (!name) throw ConfigError(key, "missing environment name");
  if (!name->is_string()) throw ConfigError(key, "expected a string");
  const auto p = envs::problem_from_string(name->get<std::string>());
  if (!p)
    throw ConfigError(key, "unknown environment '" + name->get<std::string>() + "' (known: " +
                               problem_list() + ")");
  return *p;
}

}  // namespace

json to_json(const EnvSpec& s) {
  json j;
  j["name"] = std::string(envs::to_string(s.problem));
  j["arms"] = s.arms;
  j["half_period"] = s.half_period;
  j["frequency"] = s.frequency;
  j["dim"] = s.dim;
  j["noise_std"] = s.noise_std;
  j["base_mean"] = s.base_mean;
  j["best_mean"] = s.best_mean;
  j["initial_means"] = number_array(s.initial_means);
  j["digits_images"] = s.digits_images;
  j["digits_labels"] = s.digits_labels;
  j["wall_following_path"] = s.wall_following_path;
  return j;
}

EnvSpec env_from_json(const json& j, const std::string& where) {
  EnvSpec s = EnvSpec::defaults(problem_of(j, where));
  if (j.is_object()) {
    Fields f(j, where);
    std::string name;
    f.get("name", name);
    f.get("arms", s.arms);
    f.get("half_period", s.half_period);
    f.get("frequency", s.frequency);
    f.get("dim", s.dim);
    f.get("noise_std", s.noise_std);
    f.get("base_mean", s.base_mean);
    f.get("best_mean", s.best_mean);
    f.get("initial_means", s.initial_means);
    f.get("digits_images", s.digits_images);
    f.get("digits_labels", s.digits_labels);
    f.get("wall_following_path", s.wall_following_path);
    f.finish();
  }
  checked(where, [&] { s.validate(); });
  return s;
}

json to_json(const PolicySpec& s) {
  json j;
  j["name"] = std::string(agents::to_string(s.kind));
  const auto& n = s.neural;
  j["learning_rate"] = n.learning_rate;
  j["epochs"] = n.epochs;
  j["interval"] = n.interval;
  j["noise_variance"] = n.noise_variance;
  j["prior_variance"] = n.prior_variance;
  j["units"] = json::array({n.units[0], n.units[1], n.units[2]});
  j["order"] = n.order;
  j["sinusoidal_units"] = n.sinusoidal_units;
  j["l2"] = n.l2;
  const auto& b = s.baseline;
  j["gamma"] = b.gamma ? json(*b.gamma) : json(nullptr);
  j["window"] = b.window ? json(*b.window) : json(nullptr);
  j["xi"] = b.xi;
  j["reward_bound"] = b.reward_bound;
  j["ridge"] = b.ridge;
  j["beta"] = b.beta ? json(*b.beta) : json(nullptr);
  j["delta"] = b.delta;
  j["noise_std"] = b.noise_std;
  j["param_bound"] = b.param_bound;
  j["vector_bound"] = b.vector_bound;
  return j;
}

PolicySpec policy_from_json(const json& j, harness::ProblemGroup group, const std::string& where) {
  const json* name = j.is_string() ? &j : (j.is_object() && j.contains("name") ? &j.at("name") : nullptr);
  const std::string key = j.is_string() ? where : where + ".name";
  if (!name) throw ConfigError(key, "missing policy name");
  if (!name->is_string()) throw ConfigError(key, "expected a string");
  const auto kind = agents::policy_from_string(name->get<std::string>());
  if (!kind)
    throw ConfigError(key, "unknown policy '" + name->get<std::string>() +
                               "' (known: random, fnlps, rnlps, ducb, swucb, dlinucb, swlinucb)");

  PolicySpec s = harness::default_policy(*kind, group);
  if (j.is_object()) {
    Fields f(j, where);
    std::string ignored;
    f.get("name", ignored);
    auto& n = s.neural;
    f.get("learning_rate", n.learning_rate);
    f.get("epochs", n.epochs);
    f.get("interval", n.interval);
    f.get("noise_variance", n.noise_variance);
    f.get("prior_variance", n.prior_variance);
    if (const json* u = f.find("units")) {
      if (u->is_number_unsigned()) {
        const auto w = u->get<std::size_t>();
        n.units = {w, w, w};
      } else if (u->is_array() && u->size() == 3 &&
                 std::all_of(u->begin(), u->end(), [](const json& x) { return x.is_number_unsigned(); })) {
        for (std::size_t i = 0; i < 3; ++i) n.units[i] = (*u)[i].get<std::size_t>();
      } else {
        throw ConfigError(f.path("units"), "expected a width or three layer widths");
      }
    }
    f.get("order", n.order);
    f.get("sinusoidal_units", n.sinusoidal_units);
    f.get("l2", n.l2);
    auto& b = s.baseline;
    f.get("gamma", b.gamma);
    f.get("window", b.window);
    f.get("xi", b.xi);
    f.get("reward_bound", b.reward_bound);
    f.get("ridge", b.ridge);
    f.get("beta", b.beta);
    f.get("delta", b.delta);
    f.get("noise_std", b.noise_std);
    f.get("param_bound", b.param_bound);
    f.get("vector_bound", b.vector_bound);
    f.finish();
  }
  if (agents::is_neural(s.kind)) checked(where, [&] { s.neural.validate(); });
  if (s.baseline.gamma && !(*s.baseline.gamma > 0.0 && *s.baseline.gamma <= 1.0))
    throw ConfigError(where + ".gamma", "must be in (0, 1]");
  if (s.baseline.window && *s.baseline.window < 1)
    throw ConfigError(where + ".window", "must be >= 1");
  return s;
}

json to_json(const harness::AggregateCurve& c) {
  json j;
  j["trials"] = c.trials;
  j["resamples"] = c.resamples;
  j["level"] = c.level;
  j["seed"] = c.seed;
  j["mean"] = number_array(c.mean);
  j["lower"] = number_array(c.lower);
  j["upper"] = number_array(c.upper);
  return j;
}

harness::AggregateCurve aggregate_from_json(const json& j) {
  harness::AggregateCurve c;
  Fields f(j, "aggregate");
  f.get("trials", c.trials);
  f.get("resamples", c.resamples);
  f.get("level", c.level);
  f.get("seed", c.seed);
  f.get("mean", c.mean);
  f.get("lower", c.lower);
  f.get("upper", c.upper);
  f.finish();
  if (c.lower.size() != c.mean.size() || c.upper.size() != c.mean.size())
    throw ConfigError("aggregate", "mean, lower and upper differ in length");
  return c;
}

json to_json(const harness::GridResult& r) {
  json j;
  j["env"] = to_json(r.env);
  j["horizon"] = r.horizon;
  j["seeds"] = r.seeds;
  json settings = json::array();
  for (const auto& s : r.settings) settings.push_back(to_json(s));
  j["settings"] = std::move(settings);
  json cells = json::array();
  for (const auto& row : r.cells) {
    json jr = json::array();
    for (const auto& c : row) {
      json jc;
      jc["ok"] = c.ok;
      jc["cumulative_reward"] = c.cumulative_reward;
      jc["final_regret"] = c.final_regret;
      jc["error"] = c.error;
      jr.push_back(std::move(jc));
    }
    cells.push_back(std::move(jr));
  }
  j["cells"] = std::move(cells);
  j["mean_reward"] = number_array(r.mean_reward);
  json failed = json::array();
  for (bool b : r.failed) failed.push_back(b);
  j["failed"] = std::move(failed);
  j["random_mean"] = r.random_mean ? json(*r.random_mean) : json(nullptr);
  j["best"] = r.best;
  j["normalized"] = number_array(r.normalized);
  return j;
}

harness::GridResult grid_result_from_json(const json& j) {
  harness::GridResult r;
  Fields f(j, "grid_result");
  const json* env = f.find("env");
  if (!env) throw ConfigError("grid_result.env", "missing");
  r.env = env_from_json(*env, "grid_result.env");
  const auto group = harness::group_of(r.env.problem);
  f.get("horizon", r.horizon);
  if (const json* seeds = f.find("seeds")) {
    if (!seeds->is_array()) throw ConfigError("grid_result.seeds", "expected an array");
    for (const auto& s : *seeds) r.seeds.push_back(s.get<std::uint64_t>());
  }
  if (const json* settings = f.find("settings")) {
    std::size_t i = 0;
    for (const auto& s : *settings)
      r.settings.push_back(
          policy_from_json(s, group, "grid_result.settings[" + std::to_string(i++) + "]"));
  }
  if (const json* cells = f.find("cells")) {
    for (const auto& row : *cells) {
      std::vector<harness::CellOutcome> out;
      for (const auto& c : row) {
        harness::CellOutcome o;
        Fields cf(c, "grid_result.cells");
        cf.get("ok", o.ok);
        cf.get("cumulative_reward", o.cumulative_reward);
        cf.get("final_regret", o.final_regret);
        cf.get("error", o.error);
        cf.finish();
        out.push_back(std::move(o));
      }
      r.cells.push_back(std::move(out));
    }
  }
  f.get("mean_reward", r.mean_reward);
  if (const json* failed = f.find("failed"))
    for (const auto& b : *failed) r.failed.push_back(b.get<bool>());
  f.get("random_mean", r.random_mean);
  f.get("best", r.best);
  f.get("normalized", r.normalized);
  f.finish();
  if (r.mean_reward.size() != r.settings.size() || r.failed.size() != r.settings.size() ||
      r.cells.size() != r.settings.size())
    throw ConfigError("grid_result", "per-setting arrays differ in length");
  return r;
}

ExperimentConfig parse_experiment(const json& j) {
  ExperimentConfig c;
  Fields f(j, "");
  const json* env = f.find("env");
  if (!env) throw ConfigError("env", "missing");
  c.env = env_from_json(*env, "env");
  const auto group = harness::group_of(c.env.problem);
  const json* policy = f.find("policy");
  if (!policy) throw ConfigError("policy", "missing");
  c.policy = policy_from_json(*policy, group, "policy");
  c.policy_source = policy->is_string() ? json{{"name", *policy}} : *policy;
  f.get("steps", c.steps);
  f.get("trials", c.trials);
  f.get("seed", c.seed);
  f.get("out", c.out);
  f.get("workers", c.workers);
  f.get("include_random", c.include_random);
  if (const json* grid = f.find("grid")) {
    if (grid->is_string()) {
      if (grid->get<std::string>() != "standard")
        throw ConfigError("grid", "expected \"standard\" or a list of policy settings");
    } else if (grid->is_array()) {
      std::size_t i = 0;
      for (const auto& g : *grid) {
        if (!g.is_object()) throw ConfigError("grid[" + std::to_string(i) + "]", "expected an object");
        ++i;
      }
    } else {
      throw ConfigError("grid", "expected \"standard\" or a list of policy settings");
    }
    c.grid = *grid;
  }
  f.finish();
  if (c.steps < 2) throw ConfigError("steps", "must be >= 2");
  if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["env"] = to_json(c.env);
  j["policy"] = to_json(c.policy);
  j["steps"] = c.steps;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["workers"] = c.workers;
  if (c.grid) j["grid"] = *c.grid;
  j["include_random"] = c.include_random;
  return j;
}

}  // namespace nlps::config
