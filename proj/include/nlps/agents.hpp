#pragma once

// Bandit policies: random, feedforward and recurrent neural-linear posterior
// sampling, and the discounted / sliding-window (Lin)UCB baselines.
//
// Every policy follows the same protocol: start() with the initial outcome
// (r_1, x_1), then strictly alternating choose() / observe(). When the
// history holds data up to time t-1, choose() returns a_t.

#include "nlps/blr.hpp"
#include "nlps/envs.hpp"
#include "nlps/nnet.hpp"
#include "nlps/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace nlps::agents {

struct ProblemShape {
  std::size_t arms = 0;
  std::size_t observation_dim = 0;
  std::size_t arm_vector_dim = 0;  // contextual linear problems only

  bool linear() const { return arm_vector_dim > 0; }
  static ProblemShape of(const envs::Environment& env);
};

// r_{1:t}, x_{1:t}, a_{2:t}. Times are 1-based as in the protocol.
class HistoryBuffer {
 public:
  void start(double reward, Eigen::VectorXd observation);
  void push(std::size_t action, double reward, Eigen::VectorXd observation);

  std::int64_t time() const { return static_cast<std::int64_t>(rewards_.size()); }
  double reward(std::int64_t t) const { return rewards_.at(static_cast<std::size_t>(t - 1)); }
  const Eigen::VectorXd& observation(std::int64_t t) const {
    return observations_.at(static_cast<std::size_t>(t - 1));
  }
  std::size_t action(std::int64_t t) const { return actions_.at(static_cast<std::size_t>(t - 2)); }

  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<std::size_t>& actions() const { return actions_; }
  std::size_t size_observations() const { return observations_.size(); }

 private:
  std::vector<double> rewards_;
  std::vector<Eigen::VectorXd> observations_;
  std::vector<std::size_t> actions_;
};

Eigen::VectorXd one_hot(std::size_t index, std::size_t size);
Eigen::VectorXd arm_vector(const Eigen::VectorXd& observation, std::size_t arm, std::size_t dim);

// Index of the largest score; ties go to the lowest index.
std::size_t argmax(const std::vector<double>& scores);

struct NeuralLinearConfig {
  double learning_rate = 0.01;        // eta
  int epochs = 16;                    // e; 0 freezes the network
  int interval = 32;                  // q
  double noise_variance = 0.1;        // sigma^2
  double prior_variance = 0.5;        // tau^2
  std::array<std::size_t, 3> units{32, 32, 32};
  std::size_t order = 1;              // n, feedforward only
  std::size_t sinusoidal_units = 1;   // D, feedforward only
  double l2 = 0.001;

  void validate() const;
  bool operator==(const NeuralLinearConfig&) const = default;
};

struct BaselineConfig {
  std::optional<double> gamma;        // D-UCB / D-LinUCB discount
  std::optional<std::size_t> window;  // SW-UCB / SW-LinUCB window
  double xi = 0.5;
  double reward_bound = 1.0;          // B
  double ridge = 1.0;                 // lambda_r
  std::optional<double> beta;         // overrides the confidence-width formula
  double delta = 0.01;
  double noise_std = 0.05;            // reward noise s used by the width formula
  double param_bound = 1.0;           // S >= ||w||
  double vector_bound = 1.0;          // L >= ||x||

  bool operator==(const BaselineConfig&) const = default;
};

// psi(h_{t-1}, a_t) without the time step, which feeds the sinusoidal layer.
// Non-linear problems: [x_{t-1}, onehot(a_t), n triplets (x_{t-k-1},
// onehot(a_{t-k}), r_{t-k})]. Linear problems: [x_{t-1,a_t}, n pairs
// (x_{t-k-1,a_{t-k}}, r_{t-k})]. Triplets before t = 2 are zero.
Eigen::VectorXd build_psi(const HistoryBuffer& history, std::size_t candidate, std::size_t order,
                          std::int64_t t, const ProblemShape& shape);
std::size_t psi_dim(const ProblemShape& shape, std::size_t order);

// Recurrent step input for time t: [r_{t-1}, x_{t-1}, onehot(a_t)], or
// [r_{t-1}, x_{t-1,a_t}] on linear problems.
Eigen::VectorXd recurrent_input(const HistoryBuffer& history, std::size_t candidate,
                                std::int64_t t, const ProblemShape& shape);
std::size_t recurrent_input_dim(const ProblemShape& shape);

class Policy {
 public:
  explicit Policy(ProblemShape shape);
  virtual ~Policy() = default;

  virtual std::string_view name() const = 0;

  void start(const envs::StepOutcome& initial);
  std::size_t choose();
  void observe(const envs::StepOutcome& outcome);

  const HistoryBuffer& history() const { return history_; }
  const ProblemShape& shape() const { return shape_; }
  std::int64_t time() const { return history_.time(); }

 protected:
  // Decide a_t for t = time() + 1.
  virtual std::size_t select() = 0;
  // The history now ends with (a_t, r_t, x_t).
  virtual void learn(std::size_t action) = 0;

  ProblemShape shape_;
  HistoryBuffer history_;

 private:
  bool started_ = false;
  std::optional<std::size_t> pending_;
};

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(ProblemShape shape, std::uint64_t seed);
  std::string_view name() const override { return "random"; }

 protected:
  std::size_t select() override;
  void learn(std::size_t) override {}

 private:
  Rng rng_;
};

class FeedforwardNeuralLinear final : public Policy {
 public:
  FeedforwardNeuralLinear(ProblemShape shape, NeuralLinearConfig config, std::uint64_t seed);
  std::string_view name() const override { return "fnlps"; }

  const nnet::ParamSet& params() const { return params_; }
  const blr::GaussianPosterior& posterior() const { return posterior_; }
  const nnet::FeedforwardSet& dataset() const { return data_; }
  const Eigen::MatrixXd& features() const { return features_; }
  std::size_t posterior_rows() const { return data_.size(); }
  std::int64_t adam_updates() const { return adam_updates_; }

  // Replace learning state, e.g. to pin a known network or posterior.
  void set_params(nnet::ParamSet params) { params_ = std::move(params); }
  void set_posterior(blr::GaussianPosterior post) { posterior_ = std::move(post); }

  // Scores w . z(psi(h, k)) for every arm under a given weight vector.
  std::vector<double> scores(const Eigen::VectorXd& w) const;

 protected:
  std::size_t select() override;
  void learn(std::size_t action) override;

 private:
  NeuralLinearConfig config_;
  blr::PriorSpec prior_;
  nnet::ParamSet params_;
  nnet::FeedforwardSet data_;
  Eigen::MatrixXd features_;
  blr::GaussianPosterior posterior_;
  std::int64_t adam_updates_ = 0;
  Rng rng_;
};

class RecurrentNeuralLinear final : public Policy {
 public:
  RecurrentNeuralLinear(ProblemShape shape, NeuralLinearConfig config, std::uint64_t seed);
  std::string_view name() const override { return "rnlps"; }

  const nnet::ParamSet& params() const { return params_; }
  const blr::GaussianPosterior& posterior() const { return posterior_; }
  const nnet::SequenceSet& sequence() const { return sequence_; }
  const Eigen::MatrixXd& features() const { return features_; }
  // State after consuming the step inputs for t' = 2..t.
  const nnet::RnnState& cached_state() const { return state_; }
  std::size_t posterior_rows() const { return sequence_.size(); }
  std::int64_t adam_updates() const { return adam_updates_; }

  void set_params(nnet::ParamSet params) { params_ = std::move(params); }
  void set_posterior(blr::GaussianPosterior post) { posterior_ = std::move(post); }

  std::vector<double> scores(const Eigen::VectorXd& w) const;

 protected:
  std::size_t select() override;
  void learn(std::size_t action) override;

 private:
  NeuralLinearConfig config_;
  blr::PriorSpec prior_;
  nnet::ParamSet params_;
  nnet::SequenceSet sequence_;
  nnet::RnnState state_;
  Eigen::MatrixXd features_;
  blr::GaussianPosterior posterior_;
  std::int64_t adam_updates_ = 0;
  Rng rng_;
};

// --- non-contextual baselines ---------------------------------------------

// Discounted play counts N_t(gamma, i) and reward sums, updated recursively.
struct DiscountedStats {
  double gamma = 0.9;
  Eigen::VectorXd counts;
  Eigen::VectorXd sums;

  DiscountedStats(std::size_t arms, double gamma);
  void update(std::size_t arm, double reward);
};

// Plays within the last `window` steps.
struct SlidingWindowStats {
  std::size_t window = 1;
  Eigen::VectorXd counts;
  Eigen::VectorXd sums;
  struct Play {
    std::int64_t time;
    std::size_t arm;
    double reward;
  };
  std::deque<Play> plays;

  SlidingWindowStats(std::size_t arms, std::size_t window);
  void update(std::int64_t t, std::size_t arm, double reward);
};

// Scores for choosing a_{t+1} from statistics collected up to time t.
// Arms without (windowed) plays score +infinity.
double ducb_score(const DiscountedStats& stats, std::size_t arm, std::int64_t t, double xi,
                  double bound);
double swucb_score(const SlidingWindowStats& stats, std::size_t arm, std::int64_t t, double xi,
                   double bound);

class DiscountedUcb final : public Policy {
 public:
  DiscountedUcb(ProblemShape shape, BaselineConfig config);
  std::string_view name() const override { return "ducb"; }
  const DiscountedStats& stats() const { return stats_; }

 protected:
  std::size_t select() override;
  void learn(std::size_t action) override;

 private:
  BaselineConfig config_;
  DiscountedStats stats_;
};

class SlidingWindowUcb final : public Policy {
 public:
  SlidingWindowUcb(ProblemShape shape, BaselineConfig config);
  std::string_view name() const override { return "swucb"; }
  const SlidingWindowStats& stats() const { return stats_; }

 protected:
  std::size_t select() override;
  void learn(std::size_t action) override;

 private:
  BaselineConfig config_;
  SlidingWindowStats stats_;
};

// --- linear baselines -------------------------------------------------------

// V = sum gamma^{t-s} x x^T + ridge I, Vtilde = sum gamma^{2(t-s)} x x^T + ridge I,
// b = sum gamma^{t-s} r x.
struct DiscountedLinearStats {
  double gamma = 1.0;
  double ridge = 1.0;
  Eigen::MatrixXd v;
  Eigen::MatrixXd v_tilde;
  Eigen::VectorXd b;
  std::int64_t plays = 0;

  DiscountedLinearStats(std::size_t dim, double gamma, double ridge);
  void update(const Eigen::VectorXd& x, double reward);
};

// Ridge statistics over the last `window` observations (window 0 = unbounded).
struct WindowLinearStats {
  std::size_t window = 0;
  double ridge = 1.0;
  std::size_t dim = 0;
  std::deque<std::pair<Eigen::VectorXd, double>> recent;

  WindowLinearStats(std::size_t dim, std::size_t window, double ridge);
  void update(const Eigen::VectorXd& x, double reward);
  Eigen::MatrixXd gram() const;    // V
  Eigen::VectorXd target() const;  // b
};

// Weighted-ridge estimate and factorization shared by all arms of one decision.
struct LinearUcbModel {
  Eigen::LLT<Eigen::MatrixXd> v_factor;
  Eigen::VectorXd theta;
  Eigen::MatrixXd v_tilde;  // empty for the sliding-window variant
};

LinearUcbModel prepare(const DiscountedLinearStats& stats);
LinearUcbModel prepare(const WindowLinearStats& stats);
double linucb_score(const LinearUcbModel& model, const Eigen::VectorXd& x, double beta);

double dlinucb_score(const DiscountedLinearStats& stats, const Eigen::VectorXd& x, double beta);
double swlinucb_score(const WindowLinearStats& stats, const Eigen::VectorXd& x, double beta);

// Confidence widths at level delta with noise s, ||w|| <= S, ||x|| <= L.
double dlinucb_beta(const BaselineConfig& c, std::size_t dim, double gamma, std::int64_t plays);
double swlinucb_beta(const BaselineConfig& c, std::size_t dim, std::size_t window,
                     std::int64_t plays);

struct LinearTuning {
  double gamma = 1.0;
  std::size_t window = 1;
};
// gamma = 1 - (B_T / (d T))^{2/3}, window = ceil((d T / B_T)^{2/3}).
LinearTuning tune_linear(double variation_budget, std::size_t dim, std::int64_t horizon);

class DiscountedLinUcb final : public Policy {
 public:
  DiscountedLinUcb(ProblemShape shape, BaselineConfig config);
  std::string_view name() const override { return "dlinucb"; }
  const DiscountedLinearStats& stats() const { return stats_; }

 protected:
  std::size_t select() override;
  void learn(std::size_t action) override;

 private:
  BaselineConfig config_;
  DiscountedLinearStats stats_;
};

class SlidingWindowLinUcb final : public Policy {
 public:
  SlidingWindowLinUcb(ProblemShape shape, BaselineConfig config);
  std::string_view name() const override { return "swlinucb"; }
  const WindowLinearStats& stats() const { return stats_; }

 protected:
  std::size_t select() override;
  void learn(std::size_t action) override;

 private:
  BaselineConfig config_;
  WindowLinearStats stats_;
};

// --- construction -----------------------------------------------------------

enum class PolicyKind { random, fnlps, rnlps, ducb, swucb, dlinucb, swlinucb };

std::string_view to_string(PolicyKind k);
std::optional<PolicyKind> policy_from_string(std::string_view name);
bool is_neural(PolicyKind k);

struct PolicySpec {
  PolicyKind kind = PolicyKind::random;
  NeuralLinearConfig neural;
  BaselineConfig baseline;

  bool operator==(const PolicySpec&) const = default;
};

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const ProblemShape& shape,
                                    std::uint64_t seed);

}  // namespace nlps::agents
