#include "nlps/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nlps::agents {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double require_gamma(const BaselineConfig& c) {
  if (!c.gamma) throw std::invalid_argument("gamma: discounted policies need a discount factor");
  if (!(*c.gamma > 0.0 && *c.gamma <= 1.0)) throw std::invalid_argument("gamma: must be in (0, 1]");
  return *c.gamma;
}

std::size_t require_window(const BaselineConfig& c) {
  if (!c.window) throw std::invalid_argument("window: sliding-window policies need a window");
  if (*c.window < 1) throw std::invalid_argument("window: must be >= 1");
  return *c.window;
}

}  // namespace

DiscountedStats::DiscountedStats(std::size_t arms, double g)
    : gamma(g),
      counts(VectorXd::Zero(static_cast<Eigen::Index>(arms))),
      sums(VectorXd::Zero(static_cast<Eigen::Index>(arms))) {}

void DiscountedStats::update(std::size_t arm, double reward) {
  counts *= gamma;
  sums *= gamma;
  counts(static_cast<Eigen::Index>(arm)) += 1.0;
  sums(static_cast<Eigen::Index>(arm)) += reward;
}

SlidingWindowStats::SlidingWindowStats(std::size_t arms, std::size_t w)
    : window(w),
      counts(VectorXd::Zero(static_cast<Eigen::Index>(arms))),
      sums(VectorXd::Zero(static_cast<Eigen::Index>(arms))) {}

void SlidingWindowStats::update(std::int64_t t, std::size_t arm, double reward) {
  plays.push_back({t, arm, reward});
  counts(static_cast<Eigen::Index>(arm)) += 1.0;
  sums(static_cast<Eigen::Index>(arm)) += reward;
  while (!plays.empty() && plays.front().time <= t - static_cast<std::int64_t>(window)) {
    const auto& old = plays.front();
    counts(static_cast<Eigen::Index>(old.arm)) -= 1.0;
    sums(static_cast<Eigen::Index>(old.arm)) -= old.reward;
    plays.pop_front();
  }
}

double ducb_score(const DiscountedStats& stats, std::size_t arm, std::int64_t, double xi,
                  double bound) {
  const double n = stats.counts(static_cast<Eigen::Index>(arm));
  if (n <= 0.0) return kInf;
  const double total = stats.counts.sum();
  const double mean = stats.sums(static_cast<Eigen::Index>(arm)) / n;
  return mean + 2.0 * bound * std::sqrt(xi * std::max(0.0, std::log(total)) / n);
}

double swucb_score(const SlidingWindowStats& stats, std::size_t arm, std::int64_t t, double xi,
                   double bound) {
  const double n = stats.counts(static_cast<Eigen::Index>(arm));
  // Removal by subtraction can leave round-off in place of an exact zero.
  if (n < 0.5) return kInf;
  const double horizon = static_cast<double>(std::min<std::int64_t>(t, stats.window));
  const double mean = stats.sums(static_cast<Eigen::Index>(arm)) / n;
  return mean + bound * std::sqrt(xi * std::log(horizon) / n);
}

DiscountedUcb::DiscountedUcb(ProblemShape shape, BaselineConfig config)
    : Policy(shape), config_(config), stats_(shape.arms, require_gamma(config)) {}

std::size_t DiscountedUcb::select() {
  std::vector<double> s(shape_.arms);
  for (std::size_t k = 0; k < shape_.arms; ++k)
    s[k] = ducb_score(stats_, k, time(), config_.xi, config_.reward_bound);
  return argmax(s);
}

void DiscountedUcb::learn(std::size_t action) { stats_.update(action, history_.reward(time())); }

SlidingWindowUcb::SlidingWindowUcb(ProblemShape shape, BaselineConfig config)
    : Policy(shape), config_(config), stats_(shape.arms, require_window(config)) {}

std::size_t SlidingWindowUcb::select() {
  std::vector<double> s(shape_.arms);
  for (std::size_t k = 0; k < shape_.arms; ++k)
    s[k] = swucb_score(stats_, k, time(), config_.xi, config_.reward_bound);
  return argmax(s);
}

void SlidingWindowUcb::learn(std::size_t action) {
  stats_.update(time(), action, history_.reward(time()));
}

DiscountedLinearStats::DiscountedLinearStats(std::size_t dim, double g, double r)
    : gamma(g), ridge(r) {
  const auto d = static_cast<Eigen::Index>(dim);
  v = ridge * MatrixXd::Identity(d, d);
  v_tilde = v;
  b = VectorXd::Zero(d);
}

void DiscountedLinearStats::update(const VectorXd& x, double reward) {
  const auto d = x.size();
  const MatrixXd outer = x * x.transpose();
  v = gamma * v + outer + ((1.0 - gamma) * ridge) * MatrixXd::Identity(d, d);
  v_tilde = (gamma * gamma) * v_tilde + outer +
            ((1.0 - gamma * gamma) * ridge) * MatrixXd::Identity(d, d);
  b = gamma * b + reward * x;
  ++plays;
}

WindowLinearStats::WindowLinearStats(std::size_t d, std::size_t w, double r)
    : window(w), ridge(r), dim(d) {}

void WindowLinearStats::update(const VectorXd& x, double reward) {
  recent.emplace_back(x, reward);
  if (window > 0 && recent.size() > window) recent.pop_front();
}

MatrixXd WindowLinearStats::gram() const {
  const auto d = static_cast<Eigen::Index>(dim);
  MatrixXd v = ridge * MatrixXd::Identity(d, d);
  for (const auto& [x, r] : recent) v.noalias() += x * x.transpose();
  return v;
}

VectorXd WindowLinearStats::target() const {
  VectorXd b = VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& [x, r] : recent) b += r * x;
  return b;
}

LinearUcbModel prepare(const DiscountedLinearStats& stats) {
  LinearUcbModel m{Eigen::LLT<MatrixXd>(stats.v), {}, stats.v_tilde};
  if (m.v_factor.info() != Eigen::Success)
    throw std::runtime_error("discounted design matrix is singular");
  m.theta = m.v_factor.solve(stats.b);
  return m;
}

LinearUcbModel prepare(const WindowLinearStats& stats) {
  LinearUcbModel m{Eigen::LLT<MatrixXd>(stats.gram()), {}, {}};
  if (m.v_factor.info() != Eigen::Success)
    throw std::runtime_error("windowed design matrix is singular");
  m.theta = m.v_factor.solve(stats.target());
  return m;
}

double linucb_score(const LinearUcbModel& m, const VectorXd& x, double beta) {
  const VectorXd vx = m.v_factor.solve(x);
  const double width = m.v_tilde.size() == 0 ? x.dot(vx) : vx.dot(m.v_tilde * vx);
  return m.theta.dot(x) + beta * std::sqrt(std::max(0.0, width));
}

double dlinucb_score(const DiscountedLinearStats& stats, const VectorXd& x, double beta) {
  return linucb_score(prepare(stats), x, beta);
}

double swlinucb_score(const WindowLinearStats& stats, const VectorXd& x, double beta) {
  return linucb_score(prepare(stats), x, beta);
}

double dlinucb_beta(const BaselineConfig& c, std::size_t dim, double gamma, std::int64_t plays) {
  if (c.beta) return *c.beta;
  const double n = static_cast<double>(plays);
  const double squared_weights =
      gamma == 1.0 ? n : (1.0 - std::pow(gamma, 2.0 * n)) / (1.0 - gamma * gamma);
  const double d = static_cast<double>(dim);
  return std::sqrt(c.ridge) * c.param_bound +
         c.noise_std * std::sqrt(2.0 * std::log(1.0 / c.delta) +
                                 d * std::log(1.0 + c.vector_bound * c.vector_bound *
                                                        squared_weights / (c.ridge * d)));
}

double swlinucb_beta(const BaselineConfig& c, std::size_t dim, std::size_t window,
                     std::int64_t plays) {
  if (c.beta) return *c.beta;
  const auto n = static_cast<double>(
      window == 0 ? plays : std::min<std::int64_t>(plays, static_cast<std::int64_t>(window)));
  const double d = static_cast<double>(dim);
  return c.noise_std *
             std::sqrt(d * std::log((1.0 + n * c.vector_bound * c.vector_bound / c.ridge) /
                                    c.delta)) +
         std::sqrt(c.ridge) * c.param_bound;
}

LinearTuning tune_linear(double budget, std::size_t dim, std::int64_t horizon) {
  const double dt = static_cast<double>(dim) * static_cast<double>(horizon);
  if (budget <= 0.0) return {1.0, static_cast<std::size_t>(std::max<std::int64_t>(horizon, 1))};
  LinearTuning t;
  t.gamma = 1.0 - std::pow(budget / dt, 2.0 / 3.0);
  t.window = static_cast<std::size_t>(std::ceil(std::pow(dt / budget, 2.0 / 3.0)));
  t.gamma = std::clamp(t.gamma, 1e-6, 1.0);
  t.window = std::max<std::size_t>(t.window, 1);
  return t;
}

namespace {

void require_linear(const ProblemShape& shape) {
  if (!shape.linear())
    throw std::invalid_argument("linear UCB policies need per-arm vectors (linear problems)");
}

}  // namespace

DiscountedLinUcb::DiscountedLinUcb(ProblemShape shape, BaselineConfig config)
    : Policy((require_linear(shape), shape)),
      config_(config),
      stats_(shape.arm_vector_dim, require_gamma(config), config.ridge) {
  if (!(config.ridge > 0.0)) throw std::invalid_argument("ridge: must be > 0");
}

std::size_t DiscountedLinUcb::select() {
  const auto model = prepare(stats_);
  const double beta = dlinucb_beta(config_, shape_.arm_vector_dim, stats_.gamma, stats_.plays);
  const auto& x = history_.observation(time());
  std::vector<double> s(shape_.arms);
  for (std::size_t k = 0; k < shape_.arms; ++k)
    s[k] = linucb_score(model, arm_vector(x, k, shape_.arm_vector_dim), beta);
  return argmax(s);
}

void DiscountedLinUcb::learn(std::size_t action) {
  const auto t = time();
  stats_.update(arm_vector(history_.observation(t - 1), action, shape_.arm_vector_dim),
                history_.reward(t));
}

SlidingWindowLinUcb::SlidingWindowLinUcb(ProblemShape shape, BaselineConfig config)
    : Policy((require_linear(shape), shape)),
      config_(config),
      stats_(shape.arm_vector_dim, require_window(config), config.ridge) {
  if (!(config.ridge > 0.0)) throw std::invalid_argument("ridge: must be > 0");
}

std::size_t SlidingWindowLinUcb::select() {
  const auto model = prepare(stats_);
  const auto plays = static_cast<std::int64_t>(stats_.recent.size());
  const double beta = swlinucb_beta(config_, shape_.arm_vector_dim, stats_.window, plays);
  const auto& x = history_.observation(time());
  std::vector<double> s(shape_.arms);
  for (std::size_t k = 0; k < shape_.arms; ++k)
    s[k] = linucb_score(model, arm_vector(x, k, shape_.arm_vector_dim), beta);
  return argmax(s);
}

void SlidingWindowLinUcb::learn(std::size_t action) {
  const auto t = time();
  stats_.update(arm_vector(history_.observation(t - 1), action, shape_.arm_vector_dim),
                history_.reward(t));
}

}  // namespace nlps::agents
