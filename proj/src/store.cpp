#include "nlps/store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nlps::harness {

namespace fs = std::filesystem;
using config::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kTrialDir = "trials";

[[noreturn]] void corrupt(const std::string& origin, const std::string& what) {
  throw std::runtime_error("corrupt file " + origin + ": " + what);
}

void check_version(const json& j, const std::string& origin) {
  if (!j.is_object() || !j.contains("schema_version"))
    corrupt(origin, "missing schema_version");
  const auto& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
    throw std::runtime_error("schema version mismatch in " + origin + ": found " + v.dump() +
                             ", expected " + std::to_string(kSchemaVersion));
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the envelope keys and checks the kind tag.
json unwrap(json j, const std::string& kind, const std::string& origin) {
  check_version(j, origin);
  if (!j.contains("kind") || j.at("kind") != kind) corrupt(origin, "expected a " + kind);
  j.erase("schema_version");
  j.erase("kind");
  return j;
}

json wrap(const json& body, const std::string& kind) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j;
}

}  // namespace

std::string CellKey::filename() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%05zu_%016llx.jsonl", setting,
                static_cast<unsigned long long>(seed));
  return buf;
}

std::string serialize_trial(const TrialRecord& r, std::size_t setting) {
  json head;
  head["schema_version"] = kSchemaVersion;
  head["kind"] = "trial";
  head["setting"] = setting;
  head["env"] = config::to_json(r.env);
  head["policy"] = config::to_json(r.policy);
  head["horizon"] = r.horizon;
  head["seed"] = r.seed;
  head["steps"] = r.steps.size();
  head["cumulative_reward"] = r.cumulative_reward;
  head["final_regret"] = r.final_regret();
  head["duration_seconds"] = r.duration_seconds;

  std::string text = head.dump() + "\n";
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    json line;
    line["t"] = static_cast<std::int64_t>(i) + 2;
    line["action"] = s.action;
    line["reward"] = s.reward;
    line["best_expected"] = s.best_expected;
    line["chosen_expected"] = s.chosen_expected;
    line["regret"] = r.regret.at(i);
    text += line.dump();
    text += '\n';
  }
  return text;
}

TrialRecord parse_trial(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) corrupt(origin, "empty record");
  json head;
  try {
    head = json::parse(line);
  } catch (const json::parse_error& e) {
    corrupt(origin, e.what());
  }
  check_version(head, origin);

  TrialRecord r;
  std::size_t count = 0;
  try {
    if (head.at("kind") != "trial") corrupt(origin, "not a trial record");
    r.env = config::env_from_json(head.at("env"), "env");
    r.policy = config::policy_from_json(head.at("policy"), group_of(r.env.problem), "policy");
    r.horizon = head.at("horizon").get<std::int64_t>();
    r.seed = head.at("seed").get<std::uint64_t>();
    count = head.at("steps").get<std::size_t>();
    r.cumulative_reward = head.at("cumulative_reward").get<double>();
    r.duration_seconds = head.at("duration_seconds").get<double>();
  } catch (const json::exception& e) {
    corrupt(origin, e.what());
  }

  r.steps.reserve(count);
  r.regret.reserve(count);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.at("t").get<std::int64_t>() != static_cast<std::int64_t>(r.steps.size()) + 2)
        corrupt(origin, "steps out of order");
      StepRecord s;
      s.action = j.at("action").get<std::size_t>();
      s.reward = j.at("reward").get<double>();
      s.best_expected = j.at("best_expected").get<double>();
      s.chosen_expected = j.at("chosen_expected").get<double>();
      r.steps.push_back(s);
      r.regret.push_back(j.at("regret").get<double>());
    } catch (const json::exception& e) {
      corrupt(origin, e.what());
    }
  }
  if (r.steps.size() != count) corrupt(origin, "truncated record");
  return r;
}

ResultStore::ResultStore(fs::path dir, json experiment)
    : dir_(std::move(dir)), experiment_(std::move(experiment)) {
  const fs::path manifest = dir_ / kManifest;
  if (fs::exists(manifest)) {
    json m = load_json(manifest);
    check_version(m, manifest.string());
    if (!m.contains("experiment") || m.at("experiment") != experiment_)
      throw std::runtime_error(dir_.string() +
                               " holds a different experiment; choose another output directory");
  } else {
    fs::create_directories(dir_ / kTrialDir);
    json m;
    m["schema_version"] = kSchemaVersion;
    m["experiment"] = experiment_;
    save_json(manifest, m);
  }
  fs::create_directories(dir_ / kTrialDir);
}

ResultStore ResultStore::open(const fs::path& dir) {
  const fs::path manifest = dir / kManifest;
  if (!fs::exists(manifest)) throw std::runtime_error("no result store at " + dir.string());
  json m = load_json(manifest);
  check_version(m, manifest.string());
  ResultStore s;
  s.dir_ = dir;
  s.experiment_ = m.at("experiment");
  return s;
}

fs::path ResultStore::trial_path(const CellKey& key) const {
  return dir_ / kTrialDir / key.filename();
}

bool ResultStore::has(const CellKey& key) const { return fs::exists(trial_path(key)); }

void ResultStore::write(const CellKey& key, const TrialRecord& record) {
  const std::string text = serialize_trial(record, key.setting);
  std::lock_guard lock(*write_mutex_);
  write_atomic(trial_path(key), text);
}

TrialRecord ResultStore::read(const CellKey& key) const {
  const fs::path p = trial_path(key);
  return parse_trial(read_text(p), p.string());
}

std::vector<CellKey> ResultStore::cells() const {
  std::vector<CellKey> keys;
  const fs::path dir = dir_ / kTrialDir;
  if (!fs::exists(dir)) return keys;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::size_t setting = 0;
    unsigned long long seed = 0;
    char tail[16] = {};
    if (std::sscanf(name.c_str(), "s%zu_%llx.%15s", &setting, &seed, tail) == 3 &&
        std::string(tail) == "jsonl")
      keys.push_back({setting, static_cast<std::uint64_t>(seed)});
  }
  std::sort(keys.begin(), keys.end(), [](const CellKey& a, const CellKey& b) {
    return a.setting != b.setting ? a.setting < b.setting : a.seed < b.seed;
  });
  return keys;
}

std::vector<TrialRecord> ResultStore::load_all() const {
  std::vector<TrialRecord> out;
  for (const auto& k : cells()) out.push_back(read(k));
  return out;
}

std::vector<TrialRecord> ResultStore::load_setting(std::size_t setting) const {
  std::vector<TrialRecord> out;
  for (const auto& k : cells())
    if (k.setting == setting) out.push_back(read(k));
  return out;
}

void save_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

json load_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    corrupt(path.string(), e.what());
  }
}

void save_grid_result(const fs::path& path, const GridResult& result) {
  save_json(path, wrap(config::to_json(result), "grid_result"));
}

GridResult load_grid_result(const fs::path& path) {
  return config::grid_result_from_json(unwrap(load_json(path), "grid_result", path.string()));
}

void save_aggregate(const fs::path& path, const AggregateCurve& curve) {
  save_json(path, wrap(config::to_json(curve), "aggregate"));
}

AggregateCurve load_aggregate(const fs::path& path) {
  return config::aggregate_from_json(unwrap(load_json(path), "aggregate", path.string()));
}

}  // namespace nlps::harness
