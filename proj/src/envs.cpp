#include "nlps/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace nlps::envs {

using Eigen::VectorXd;

namespace {

struct ProblemName {
  Problem problem;
  std::string_view name;
};

constexpr ProblemName kNames[] = {
    {Problem::flipping_gaussian, "flipping_gaussian"},
    {Problem::flipping_bernoulli, "flipping_bernoulli"},
    {Problem::sinusoidal_bernoulli, "sinusoidal_bernoulli"},
    {Problem::circular_markov_chain, "circular_markov_chain"},
    {Problem::stationary_bernoulli, "stationary_bernoulli"},
    {Problem::flipping_digits, "flipping_digits"},
    {Problem::wall_following, "wall_following"},
    {Problem::flipping_vector, "flipping_vector"},
    {Problem::rotating_vector, "rotating_vector"},
};

constexpr std::uint64_t kStructureStream = 11;
constexpr std::uint64_t kNoiseStream = 12;

std::vector<double> flipping_means() { return {0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9}; }

double draw_gaussian(Rng& rng, double mean, double stddev) {
  std::normal_distribution<double> normal(mean, stddev);
  return normal(rng);
}

double draw_bernoulli(Rng& rng, double p) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p ? 1.0 : 0.0;
}

VectorXd random_unit_vector(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

// Flipping Gaussian / Bernoulli and the stationary Bernoulli variant.
class FlippingEnv final : public Environment {
 public:
  FlippingEnv(const EnvSpec& spec, std::uint64_t seed)
      : Environment(spec.arms, 0),
        bernoulli_(spec.problem != Problem::flipping_gaussian),
        half_period_(spec.problem == Problem::stationary_bernoulli ? 0 : spec.half_period),
        noise_std_(spec.noise_std),
        noise_rng_(derive_seed(seed, kNoiseStream)) {
    Rng structure(derive_seed(seed, kStructureStream));
    means_ = spec.initial_means;
    std::shuffle(means_.begin(), means_.end(), structure);
    observation_.resize(0);
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<FlippingEnv>(*this);
  }

  double expected_reward(std::size_t action) const override {
    check_action(action);
    const double m = means_[action];
    if (!flipped(t_ + 1, half_period_)) return m;
    return bernoulli_ ? 1.0 - m : -m;
  }

  double draw_reward(std::size_t action) override {
    const double m = expected_reward(action);
    return bernoulli_ ? draw_bernoulli(noise_rng_, m) : draw_gaussian(noise_rng_, m, noise_std_);
  }

  const std::vector<double>& initial_means() const { return means_; }

 protected:
  void advance(std::size_t) override {}

 private:
  bool bernoulli_;
  std::size_t half_period_;
  double noise_std_;
  std::vector<double> means_;
  Rng noise_rng_;
};

class SinusoidalEnv final : public Environment {
 public:
  SinusoidalEnv(const EnvSpec& spec, std::uint64_t seed)
      : Environment(spec.arms, 0),
        frequency_(spec.frequency),
        noise_rng_(derive_seed(seed, kNoiseStream)) {
    observation_.resize(0);
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<SinusoidalEnv>(*this);
  }

  double expected_reward(std::size_t action) const override {
    check_action(action);
    return sinusoidal_mean(action, t_ + 1, arms_, frequency_);
  }

  double draw_reward(std::size_t action) override {
    return draw_bernoulli(noise_rng_, expected_reward(action));
  }

 protected:
  void advance(std::size_t) override {}

 private:
  double frequency_;
  Rng noise_rng_;
};

class CircularChainEnv final : public Environment {
 public:
  CircularChainEnv(const EnvSpec& spec, std::uint64_t seed)
      : Environment(spec.arms, 0),
        base_(spec.base_mean),
        best_mean_(spec.best_mean),
        noise_std_(spec.noise_std),
        noise_rng_(derive_seed(seed, kNoiseStream)) {
    Rng structure(derive_seed(seed, kStructureStream));
    best_ = std::uniform_int_distribution<std::size_t>(0, arms_ - 1)(structure);
    observation_.resize(0);
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<CircularChainEnv>(*this);
  }

  double expected_reward(std::size_t action) const override {
    check_action(action);
    return action == best_ ? best_mean_ : base_;
  }

  double draw_reward(std::size_t action) override {
    return draw_gaussian(noise_rng_, expected_reward(action), noise_std_);
  }

  std::size_t best_arm() const { return best_; }

 protected:
  void advance(std::size_t action) override {
    if (action == best_) best_ = (best_ + 1) % arms_;
  }

 private:
  double base_, best_mean_, noise_std_;
  std::size_t best_ = 0;
  Rng noise_rng_;
};

class DigitsEnv final : public Environment {
 public:
  DigitsEnv(const EnvSpec& spec, std::uint64_t seed, std::shared_ptr<const DigitDataset> data)
      : Environment(spec.arms, 0),
        data_(std::move(data)),
        half_period_(spec.half_period),
        base_(spec.base_mean),
        best_mean_(spec.best_mean),
        noise_std_(spec.noise_std),
        structure_rng_(derive_seed(seed, kStructureStream)),
        noise_rng_(derive_seed(seed, kNoiseStream)) {
    if (data_->images.empty()) throw std::invalid_argument("digit dataset is empty");
    draw_image();
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<DigitsEnv>(*this);
  }

  // Digit the arm is labeled with for rewards at time t.
  int label(std::size_t arm, std::int64_t t) const {
    const int a = static_cast<int>(arm);
    return flipped(t, half_period_) ? 9 - a : a;
  }

  double expected_reward(std::size_t action) const override {
    check_action(action);
    return label(action, t_ + 1) == data_->labels[current_] ? best_mean_ : base_;
  }

  double draw_reward(std::size_t action) override {
    return draw_gaussian(noise_rng_, expected_reward(action), noise_std_);
  }

 protected:
  void advance(std::size_t) override { draw_image(); }

 private:
  void draw_image() {
    current_ = std::uniform_int_distribution<std::size_t>(0, data_->images.size() - 1)(
        structure_rng_);
    observation_ = data_->images[current_];
  }

  std::shared_ptr<const DigitDataset> data_;
  std::size_t half_period_;
  double base_, best_mean_, noise_std_;
  std::size_t current_ = 0;
  Rng structure_rng_;
  Rng noise_rng_;
};

class WallFollowingEnv final : public Environment {
 public:
  WallFollowingEnv(const EnvSpec& spec, std::uint64_t seed,
                   std::shared_ptr<const WallFollowingDataset> data)
      : Environment(spec.arms, 0),
        data_(std::move(data)),
        base_(spec.base_mean),
        best_mean_(spec.best_mean),
        noise_std_(spec.noise_std),
        noise_rng_(derive_seed(seed, kNoiseStream)) {
    if (data_->readings.empty()) throw std::invalid_argument("wall-following dataset is empty");
    observation_ = data_->readings[0];
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<WallFollowingEnv>(*this);
  }

  double expected_reward(std::size_t action) const override {
    check_action(action);
    return data_->arms[cursor_] == action ? best_mean_ : base_;
  }

  double draw_reward(std::size_t action) override {
    return draw_gaussian(noise_rng_, expected_reward(action), noise_std_);
  }

  std::optional<std::int64_t> max_time() const override {
    return static_cast<std::int64_t>(data_->readings.size());
  }

 protected:
  void advance(std::size_t) override {
    if (cursor_ + 1 >= data_->readings.size())
      throw std::runtime_error("wall-following dataset exhausted at t=" + std::to_string(t_));
    ++cursor_;
    observation_ = data_->readings[cursor_];
  }

 private:
  std::shared_ptr<const WallFollowingDataset> data_;
  double base_, best_mean_, noise_std_;
  std::size_t cursor_ = 0;
  Rng noise_rng_;
};

// Flipping and rotating vector problems: K unit vectors fixed per trial,
// reassigned to arms by a fresh permutation every step.
class VectorEnv final : public Environment {
 public:
  VectorEnv(const EnvSpec& spec, std::uint64_t seed)
      : Environment(spec.arms, spec.dim),
        rotating_(spec.problem == Problem::rotating_vector),
        half_period_(spec.half_period),
        frequency_(spec.frequency),
        noise_std_(spec.noise_std),
        structure_rng_(derive_seed(seed, kStructureStream)),
        noise_rng_(derive_seed(seed, kNoiseStream)) {
    vectors_.resize(static_cast<Eigen::Index>(arms_), static_cast<Eigen::Index>(arm_dim_));
    for (std::size_t k = 0; k < arms_; ++k)
      vectors_.row(static_cast<Eigen::Index>(k)) =
          random_unit_vector(structure_rng_, arm_dim_).transpose();
    if (!rotating_) initial_w_ = random_unit_vector(structure_rng_, arm_dim_);
    assignment_.resize(arms_);
    std::iota(assignment_.begin(), assignment_.end(), std::size_t{0});
    observation_.resize(static_cast<Eigen::Index>(arms_ * arm_dim_));
    reassign();
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<VectorEnv>(*this);
  }

  VectorXd parameter(std::int64_t t) const {
    if (rotating_) {
      const double angle = 2.0 * std::numbers::pi * frequency_ * static_cast<double>(t);
      VectorXd w(2);
      w << std::cos(angle), std::sin(angle);
      return w;
    }
    return flipped(t, half_period_) ? VectorXd(-initial_w_) : initial_w_;
  }

  double expected_reward(std::size_t action) const override {
    check_action(action);
    const auto d = static_cast<Eigen::Index>(arm_dim_);
    return parameter(t_ + 1).dot(observation_.segment(static_cast<Eigen::Index>(action) * d, d));
  }

  double draw_reward(std::size_t action) override {
    return draw_gaussian(noise_rng_, expected_reward(action), noise_std_);
  }

 protected:
  void advance(std::size_t) override { reassign(); }

 private:
  void reassign() {
    std::shuffle(assignment_.begin(), assignment_.end(), structure_rng_);
    const auto d = static_cast<Eigen::Index>(arm_dim_);
    for (std::size_t k = 0; k < arms_; ++k)
      observation_.segment(static_cast<Eigen::Index>(k) * d, d) =
          vectors_.row(static_cast<Eigen::Index>(assignment_[k])).transpose();
  }

  bool rotating_;
  std::size_t half_period_;
  double frequency_;
  double noise_std_;
  Eigen::MatrixXd vectors_;
  VectorXd initial_w_;
  std::vector<std::size_t> assignment_;
  Rng structure_rng_;
  Rng noise_rng_;
};

}  // namespace

std::string_view to_string(Problem p) {
  for (const auto& n : kNames)
    if (n.problem == p) return n.name;
  return "unknown";
}

std::optional<Problem> problem_from_string(std::string_view name) {
  for (const auto& n : kNames)
    if (n.name == name) return n.problem;
  return std::nullopt;
}

const std::vector<Problem>& all_problems() {
  static const std::vector<Problem> all = [] {
    std::vector<Problem> v;
    for (const auto& n : kNames) v.push_back(n.problem);
    return v;
  }();
  return all;
}

bool is_contextual(Problem p) {
  return p == Problem::flipping_digits || p == Problem::wall_following ||
         p == Problem::flipping_vector || p == Problem::rotating_vector;
}

bool is_linear(Problem p) {
  return p == Problem::flipping_vector || p == Problem::rotating_vector;
}

EnvSpec EnvSpec::defaults(Problem p) {
  EnvSpec s;
  s.problem = p;
  switch (p) {
    case Problem::flipping_gaussian:
      s.arms = 8, s.half_period = 10, s.noise_std = 0.1, s.initial_means = flipping_means();
      break;
    case Problem::flipping_bernoulli:
      s.arms = 8, s.half_period = 10, s.noise_std = 0.0, s.initial_means = flipping_means();
      break;
    case Problem::stationary_bernoulli:
      s.arms = 8, s.half_period = 0, s.noise_std = 0.0, s.initial_means = flipping_means();
      break;
    case Problem::sinusoidal_bernoulli:
      s.arms = 5, s.half_period = 0, s.frequency = 1.0 / 32.0, s.noise_std = 0.0;
      break;
    case Problem::circular_markov_chain:
      s.arms = 8, s.half_period = 0, s.noise_std = 0.05;
      break;
    case Problem::flipping_digits:
      s.arms = 10, s.half_period = 64, s.noise_std = 0.05;
      break;
    case Problem::wall_following:
      s.arms = kWallClasses, s.half_period = 0, s.noise_std = 0.05;
      break;
    case Problem::flipping_vector:
      s.arms = 25, s.half_period = 64, s.dim = 50, s.noise_std = 0.05;
      break;
    case Problem::rotating_vector:
      s.arms = 25, s.half_period = 0, s.dim = 2, s.frequency = 1.0 / 32.0, s.noise_std = 0.05;
      break;
  }
  return s;
}

void EnvSpec::validate() const {
  if (arms < 2) throw std::invalid_argument("arms: need at least 2");
  const bool bernoulli = problem == Problem::flipping_bernoulli ||
                         problem == Problem::stationary_bernoulli ||
                         problem == Problem::sinusoidal_bernoulli;
  if (!bernoulli && !(noise_std > 0.0)) throw std::invalid_argument("noise_std: must be > 0");
  switch (problem) {
    case Problem::flipping_gaussian:
    case Problem::flipping_bernoulli:
    case Problem::stationary_bernoulli:
      if (initial_means.size() != arms)
        throw std::invalid_argument("initial_means: need one mean per arm");
      if (bernoulli)
        for (double m : initial_means)
          if (m < 0.0 || m > 1.0) throw std::invalid_argument("initial_means: outside [0,1]");
      break;
    case Problem::sinusoidal_bernoulli:
      if (!(frequency > 0.0)) throw std::invalid_argument("frequency: must be > 0");
      break;
    case Problem::circular_markov_chain:
      if (!(best_mean > base_mean)) throw std::invalid_argument("best_mean: must exceed base_mean");
      break;
    case Problem::flipping_digits:
      if (arms != 10) throw std::invalid_argument("arms: flipping digits has 10 arms");
      if (half_period == 0) throw std::invalid_argument("half_period: must be > 0");
      break;
    case Problem::wall_following:
      if (arms != kWallClasses) throw std::invalid_argument("arms: wall following has 4 arms");
      break;
    case Problem::flipping_vector:
      if (dim == 0) throw std::invalid_argument("dim: must be > 0");
      if (half_period == 0) throw std::invalid_argument("half_period: must be > 0");
      break;
    case Problem::rotating_vector:
      if (dim != 2) throw std::invalid_argument("dim: rotating vector is two-dimensional");
      if (!(frequency > 0.0)) throw std::invalid_argument("frequency: must be > 0");
      break;
  }
}

bool flipped(std::int64_t t, std::size_t half_period) {
  if (half_period == 0) return false;
  return ((t - 1) / static_cast<std::int64_t>(half_period)) % 2 == 1;
}

double sinusoidal_mean(std::size_t k, std::int64_t t, std::size_t arms, double frequency) {
  const double phase = 2.0 * std::numbers::pi * frequency * static_cast<double>(t) +
                       2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(arms);
  return std::clamp(0.5 + std::sin(phase) / 2.0, 0.0, 1.0);
}

double variation_budget(const EnvSpec& spec, std::int64_t horizon) {
  if (horizon < 2) return 0.0;
  switch (spec.problem) {
    case Problem::flipping_vector:
      return 2.0 * static_cast<double>((horizon - 1) / static_cast<std::int64_t>(spec.half_period));
    case Problem::rotating_vector:
      return static_cast<double>(horizon - 1) * 2.0 *
             std::abs(std::sin(std::numbers::pi * spec.frequency));
    default:
      throw std::invalid_argument("variation budget is defined for the vector problems only");
  }
}

double Environment::best_expected() const {
  double best = expected_reward(0);
  for (std::size_t a = 1; a < arms_; ++a) best = std::max(best, expected_reward(a));
  return best;
}

void Environment::check_action(std::size_t action) const {
  if (action >= arms_)
    throw std::out_of_range("action " + std::to_string(action) + " outside [0, " +
                            std::to_string(arms_) + ")");
}

StepOutcome Environment::step(std::size_t action) {
  check_action(action);
  StepOutcome out;
  out.reward = draw_reward(action);
  advance(action);
  ++t_;
  out.observation = observation_;
  return out;
}

Datasets load_datasets(const EnvSpec& spec, Datasets existing) {
  if (spec.problem == Problem::flipping_digits && !existing.digits) {
    if (spec.digits_images.empty() || spec.digits_labels.empty())
      throw std::runtime_error("flipping_digits needs digits_images and digits_labels paths");
    existing.digits =
        std::make_shared<const DigitDataset>(load_digits(spec.digits_images, spec.digits_labels));
  }
  if (spec.problem == Problem::wall_following && !existing.wall) {
    if (spec.wall_following_path.empty())
      throw std::runtime_error("wall_following needs wall_following_path");
    existing.wall =
        std::make_shared<const WallFollowingDataset>(load_wall_following(spec.wall_following_path));
  }
  return existing;
}

std::pair<std::unique_ptr<Environment>, StepOutcome> env_reset(const EnvSpec& spec,
                                                               std::uint64_t seed,
                                                               const Datasets& data) {
  spec.validate();
  std::unique_ptr<Environment> env;
  switch (spec.problem) {
    case Problem::flipping_gaussian:
    case Problem::flipping_bernoulli:
    case Problem::stationary_bernoulli:
      env = std::make_unique<FlippingEnv>(spec, seed);
      break;
    case Problem::sinusoidal_bernoulli:
      env = std::make_unique<SinusoidalEnv>(spec, seed);
      break;
    case Problem::circular_markov_chain:
      env = std::make_unique<CircularChainEnv>(spec, seed);
      break;
    case Problem::flipping_digits:
      if (!data.digits) throw std::runtime_error("missing dataset: flipping_digits needs digits");
      env = std::make_unique<DigitsEnv>(spec, seed, data.digits);
      break;
    case Problem::wall_following:
      if (!data.wall) throw std::runtime_error("missing dataset: wall_following needs readings");
      env = std::make_unique<WallFollowingEnv>(spec, seed, data.wall);
      break;
    case Problem::flipping_vector:
    case Problem::rotating_vector:
      env = std::make_unique<VectorEnv>(spec, seed);
      break;
  }
  StepOutcome initial{0.0, env->observation()};
  return {std::move(env), std::move(initial)};
}

}  // namespace nlps::envs
