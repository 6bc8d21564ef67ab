#pragma once

// On-disk result store. One directory per experiment:
//
//   manifest.json          schema version + experiment description
//   trials/<cell>.jsonl    one file per (setting, seed): a header line, then
//                          one line per step with a fixed field order
//
// Record files are written to a temporary name and renamed into place, so a
// file either holds a complete trial or does not exist; an interrupted run
// resumes by skipping cells whose file is present.

#include "nlps/config.hpp"
#include "nlps/harness.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace nlps::harness {

inline constexpr int kSchemaVersion = 1;

struct CellKey {
  std::size_t setting = 0;
  std::uint64_t seed = 0;

  std::string filename() const;
  bool operator==(const CellKey&) const = default;
};

std::string serialize_trial(const TrialRecord& record, std::size_t setting);
TrialRecord parse_trial(const std::string& text, const std::string& origin = "<memory>");

class ResultStore {
 public:
  // Creates the directory and manifest, or opens an existing store. Throws if
  // the existing manifest has another schema version or experiment.
  ResultStore(std::filesystem::path dir, config::json experiment);
  // Opens an existing store, taking the experiment from its manifest.
  static ResultStore open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const config::json& experiment() const { return experiment_; }

  bool has(const CellKey& key) const;
  void write(const CellKey& key, const TrialRecord& record);
  TrialRecord read(const CellKey& key) const;
  std::vector<CellKey> cells() const;
  std::vector<TrialRecord> load_all() const;
  std::vector<TrialRecord> load_setting(std::size_t setting) const;

 private:
  ResultStore() = default;
  std::filesystem::path trial_path(const CellKey& key) const;

  std::filesystem::path dir_;
  config::json experiment_;
  std::unique_ptr<std::mutex> write_mutex_ = std::make_unique<std::mutex>();
};

void save_json(const std::filesystem::path& path, const config::json& j);
config::json load_json(const std::filesystem::path& path);

void save_grid_result(const std::filesystem::path& path, const GridResult& result);
GridResult load_grid_result(const std::filesystem::path& path);
void save_aggregate(const std::filesystem::path& path, const AggregateCurve& curve);
AggregateCurve load_aggregate(const std::filesystem::path& path);

}  // namespace nlps::harness
