#pragma once

// Non-stationary bandit environments.
//
// Time convention: after reset the environment has emitted r_1 = 0 and x_1
// and time() == 1. At time t, expected_reward(a) is E[R_{t+1} | S_t, a] and
// step(a) draws R_{t+1}, advances the hidden state and emits X_{t+1}.
// Arms are indexed from 0.

#include "nlps/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nlps::envs {

enum class Problem {
  flipping_gaussian,
  flipping_bernoulli,
  sinusoidal_bernoulli,
  circular_markov_chain,
  stationary_bernoulli,
  flipping_digits,
  wall_following,
  flipping_vector,
  rotating_vector,
};

std::string_view to_string(Problem p);
std::optional<Problem> problem_from_string(std::string_view name);
const std::vector<Problem>& all_problems();
bool is_contextual(Problem p);
bool is_linear(Problem p);

struct EnvSpec {
  Problem problem = Problem::flipping_gaussian;
  std::size_t arms = 8;
  std::size_t half_period = 10;  // h; 0 never flips
  double frequency = 0.0;        // f
  std::size_t dim = 0;           // d for the vector problems
  double noise_std = 0.1;        // s
  double base_mean = 0.0;        // mu
  double best_mean = 1.0;        // mu*
  std::vector<double> initial_means;
  std::string digits_images;
  std::string digits_labels;
  std::string wall_following_path;

  static EnvSpec defaults(Problem p);
  void validate() const;

  bool operator==(const EnvSpec&) const = default;
};

struct StepOutcome {
  double reward = 0.0;
  Eigen::VectorXd observation;
};

struct DigitDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Eigen::VectorXd> images;  // pixels scaled to [0, 1]
  std::vector<int> labels;
};

struct WallFollowingDataset {
  std::vector<Eigen::VectorXd> readings;
  std::vector<std::size_t> arms;  // label index by first appearance
  std::vector<std::string> label_names;
};

inline constexpr std::size_t kDigitSubsetSize = 5000;
inline constexpr std::size_t kWallSensors = 24;
inline constexpr std::size_t kWallClasses = 4;

// IDX (big-endian) image and label files. Keeps the first `limit` images.
DigitDataset load_digits(const std::string& image_path, const std::string& label_path,
                         std::size_t limit = kDigitSubsetSize);
// Comma-separated rows of 24 sensor readings followed by a class label.
WallFollowingDataset load_wall_following(const std::string& path);

struct Datasets {
  std::shared_ptr<const DigitDataset> digits;
  std::shared_ptr<const WallFollowingDataset> wall;
};

// Loads the data files an EnvSpec names that are not already present.
Datasets load_datasets(const EnvSpec& spec, Datasets existing = {});

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::unique_ptr<Environment> clone() const = 0;

  std::size_t num_arms() const { return arms_; }
  std::size_t observation_dim() const { return static_cast<std::size_t>(observation_.size()); }
  // Per-arm vector size for contextual linear problems, 0 otherwise.
  std::size_t arm_vector_dim() const { return arm_dim_; }
  std::int64_t time() const { return t_; }
  const Eigen::VectorXd& observation() const { return observation_; }

  virtual double expected_reward(std::size_t action) const = 0;
  double best_expected() const;
  // Draws R_{t+1} for `action` without advancing the hidden state.
  virtual double draw_reward(std::size_t action) = 0;

  StepOutcome step(std::size_t action);

  // Largest number of steps a trial may take (data-backed problems only).
  virtual std::optional<std::int64_t> max_time() const { return std::nullopt; }

 protected:
  Environment(std::size_t arms, std::size_t arm_dim) : arms_(arms), arm_dim_(arm_dim) {}
  void check_action(std::size_t action) const;
  // Moves S_t to S_{t+1} given the chosen arm and sets the new observation.
  virtual void advance(std::size_t action) = 0;

  std::size_t arms_;
  std::size_t arm_dim_;
  std::int64_t t_ = 1;
  Eigen::VectorXd observation_;
};

// Builds the environment at t = 1 and returns it with the initial outcome
// (r_1 = 0, x_1). Data-backed problems need the matching dataset.
std::pair<std::unique_ptr<Environment>, StepOutcome> env_reset(const EnvSpec& spec,
                                                               std::uint64_t seed,
                                                               const Datasets& data = {});

// Mean of arm k (0-based) of the sinusoidal problem for the reward at time t.
double sinusoidal_mean(std::size_t k, std::int64_t t, std::size_t arms, double frequency);

// Whether rewards at time t fall in a flipped block of length h.
bool flipped(std::int64_t t, std::size_t half_period);

// Total drift sum_{t=1}^{T-1} ||w_{t+1} - w_t|| of the vector problems.
double variation_budget(const EnvSpec& spec, std::int64_t horizon);

}  // namespace nlps::envs
