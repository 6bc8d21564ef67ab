#include "nlps/agents.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nlps::agents {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ProblemShape ProblemShape::of(const envs::Environment& env) {
  return {env.num_arms(), env.observation_dim(), env.arm_vector_dim()};
}

void HistoryBuffer::start(double reward, VectorXd observation) {
  rewards_.assign(1, reward);
  observations_.clear();
  observations_.push_back(std::move(observation));
  actions_.clear();
}

void HistoryBuffer::push(std::size_t action, double reward, VectorXd observation) {
  actions_.push_back(action);
  rewards_.push_back(reward);
  observations_.push_back(std::move(observation));
}

VectorXd one_hot(std::size_t index, std::size_t size) {
  VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(size));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return v;
}

VectorXd arm_vector(const VectorXd& observation, std::size_t arm, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return observation.segment(static_cast<Eigen::Index>(arm) * d, d);
}

std::size_t argmax(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("argmax of an empty score list");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

void NeuralLinearConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate: must be > 0");
  if (epochs < 0) throw std::invalid_argument("epochs: must be >= 0");
  if (interval < 1) throw std::invalid_argument("interval: must be >= 1");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise_variance: must be > 0");
  if (!(prior_variance > 0.0)) throw std::invalid_argument("prior_variance: must be > 0");
  for (auto u : units)
    if (u == 0) throw std::invalid_argument("units: every layer needs at least one unit");
  if (l2 < 0.0) throw std::invalid_argument("l2: must be >= 0");
}

std::size_t psi_dim(const ProblemShape& shape, std::size_t order) {
  if (shape.linear()) return shape.arm_vector_dim + order * (shape.arm_vector_dim + 1);
  const auto step = shape.observation_dim + shape.arms;
  return step + order * (step + 1);
}

VectorXd build_psi(const HistoryBuffer& h, std::size_t candidate, std::size_t order,
                   std::int64_t t, const ProblemShape& shape) {
  if (t < 2 || h.time() < t - 1) throw std::invalid_argument("build_psi: history too short");
  VectorXd psi = VectorXd::Zero(static_cast<Eigen::Index>(psi_dim(shape, order)));
  Eigen::Index pos = 0;
  auto put = [&](const VectorXd& v) {
    psi.segment(pos, v.size()) = v;
    pos += v.size();
  };
  const auto d = shape.arm_vector_dim;
  if (shape.linear()) {
    put(arm_vector(h.observation(t - 1), candidate, d));
  } else {
    put(h.observation(t - 1));
    put(one_hot(candidate, shape.arms));
  }
  const auto block = static_cast<Eigen::Index>(
      shape.linear() ? d + 1 : shape.observation_dim + shape.arms + 1);
  for (std::size_t k = 1; k <= order; ++k) {
    const std::int64_t s = t - static_cast<std::int64_t>(k);  // a_s, r_s, x_{s-1}
    if (s < 2) {
      pos += block;
      continue;
    }
    if (shape.linear()) {
      put(arm_vector(h.observation(s - 1), h.action(s), d));
    } else {
      put(h.observation(s - 1));
      put(one_hot(h.action(s), shape.arms));
    }
    psi(pos++) = h.reward(s);
  }
  return psi;
}

std::size_t recurrent_input_dim(const ProblemShape& shape) {
  return shape.linear() ? 1 + shape.arm_vector_dim : 1 + shape.observation_dim + shape.arms;
}

VectorXd recurrent_input(const HistoryBuffer& h, std::size_t candidate, std::int64_t t,
                         const ProblemShape& shape) {
  if (t < 2 || h.time() < t - 1) throw std::invalid_argument("recurrent_input: history too short");
  VectorXd in(static_cast<Eigen::Index>(recurrent_input_dim(shape)));
  in(0) = h.reward(t - 1);
  if (shape.linear()) {
    in.tail(static_cast<Eigen::Index>(shape.arm_vector_dim)) =
        arm_vector(h.observation(t - 1), candidate, shape.arm_vector_dim);
  } else {
    const auto obs = static_cast<Eigen::Index>(shape.observation_dim);
    in.segment(1, obs) = h.observation(t - 1);
    in.tail(static_cast<Eigen::Index>(shape.arms)) = one_hot(candidate, shape.arms);
  }
  return in;
}

Policy::Policy(ProblemShape shape) : shape_(shape) {
  if (shape_.arms < 1) throw std::invalid_argument("policy needs at least one arm");
}

void Policy::start(const envs::StepOutcome& initial) {
  history_.start(initial.reward, initial.observation);
  started_ = true;
  pending_.reset();
}

std::size_t Policy::choose() {
  if (!started_) throw std::logic_error("choose called before start");
  if (pending_) throw std::logic_error("choose called twice without observe");
  const std::size_t a = select();
  if (a >= shape_.arms) throw std::logic_error("policy selected an arm out of range");
  pending_ = a;
  return a;
}

void Policy::observe(const envs::StepOutcome& outcome) {
  if (!pending_) throw std::logic_error("observe called without a preceding choose");
  const std::size_t a = *pending_;
  pending_.reset();
  history_.push(a, outcome.reward, outcome.observation);
  learn(a);
}

RandomPolicy::RandomPolicy(ProblemShape shape, std::uint64_t seed)
    : Policy(shape), rng_(seed) {}

std::size_t RandomPolicy::select() {
  return std::uniform_int_distribution<std::size_t>(0, shape_.arms - 1)(rng_);
}

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSampleStream = 2;

blr::PriorSpec make_prior(const NeuralLinearConfig& c) {
  blr::PriorSpec p;
  p.dim = c.units[2];
  p.prior_variance = c.prior_variance;
  p.noise_variance = c.noise_variance;
  return p;
}

nnet::ArchitectureSpec feedforward_arch(const ProblemShape& shape, const NeuralLinearConfig& c) {
  return {nnet::Kind::feedforward, psi_dim(shape, c.order), c.units[0], c.units[1], c.units[2],
          c.sinusoidal_units};
}

nnet::ArchitectureSpec recurrent_arch(const ProblemShape& shape, const NeuralLinearConfig& c) {
  return {nnet::Kind::recurrent, recurrent_input_dim(shape), c.units[0], c.units[1], c.units[2],
          0};
}

bool training_due(const NeuralLinearConfig& c, std::int64_t t) {
  return c.epochs > 0 && t % c.interval == 0;
}

template <typename Data>
std::int64_t train(nnet::ParamSet& params, const Data& data, const NeuralLinearConfig& c) {
  for (int e = 0; e < c.epochs; ++e) {
    const auto lg = nnet::loss_and_gradient(params, data, c.l2);
    nnet::adam_step(params, lg.gradient, c.learning_rate);
  }
  return c.epochs;
}

void append_column(MatrixXd& m, const VectorXd& col) {
  const auto n = m.cols();
  m.conservativeResize(col.size(), n + 1);
  m.col(n) = col;
}

}  // namespace

FeedforwardNeuralLinear::FeedforwardNeuralLinear(ProblemShape shape, NeuralLinearConfig config,
                                                 std::uint64_t seed)
    : Policy(shape),
      config_((config.validate(), config)),
      prior_(make_prior(config_)),
      params_(nnet::init_params(feedforward_arch(shape, config_), derive_seed(seed, kInitStream))),
      features_(static_cast<Eigen::Index>(config_.units[2]), 0),
      posterior_(blr::posterior_fit(prior_, MatrixXd(0, 0), VectorXd(0))),
      rng_(derive_seed(seed, kSampleStream)) {}

std::vector<double> FeedforwardNeuralLinear::scores(const VectorXd& w) const {
  const std::int64_t t = time() + 1;
  std::vector<double> s(shape_.arms);
  for (std::size_t k = 0; k < shape_.arms; ++k) {
    const auto out = nnet::ff_forward(params_, static_cast<double>(t),
                                      build_psi(history_, k, config_.order, t, shape_));
    s[k] = blr::predict(w, out.features);
  }
  return s;
}

std::size_t FeedforwardNeuralLinear::select() {
  return argmax(scores(blr::posterior_sample(posterior_, rng_)));
}

void FeedforwardNeuralLinear::learn(std::size_t action) {
  const std::int64_t t = time();
  const VectorXd psi = build_psi(history_, action, config_.order, t, shape_);
  data_.append(static_cast<double>(t), psi, history_.reward(t));
  if (training_due(config_, t)) {
    adam_updates_ += train(params_, data_, config_);
    features_ = nnet::ff_forward_batch(params_, data_.times, data_.inputs).features;
  } else {
    append_column(features_, nnet::ff_forward(params_, static_cast<double>(t), psi).features);
  }
  posterior_ = blr::posterior_fit(prior_, features_.transpose(), data_.targets);
}

RecurrentNeuralLinear::RecurrentNeuralLinear(ProblemShape shape, NeuralLinearConfig config,
                                             std::uint64_t seed)
    : Policy(shape),
      config_((config.validate(), config)),
      prior_(make_prior(config_)),
      params_(nnet::init_params(recurrent_arch(shape, config_), derive_seed(seed, kInitStream))),
      state_(nnet::RnnState::zeros(config_.units[1])),
      features_(static_cast<Eigen::Index>(config_.units[2]), 0),
      posterior_(blr::posterior_fit(prior_, MatrixXd(0, 0), VectorXd(0))),
      rng_(derive_seed(seed, kSampleStream)) {}

std::vector<double> RecurrentNeuralLinear::scores(const VectorXd& w) const {
  const std::int64_t t = time() + 1;
  std::vector<double> s(shape_.arms);
  for (std::size_t k = 0; k < shape_.arms; ++k) {
    const auto out = nnet::rnn_step(params_, state_, recurrent_input(history_, k, t, shape_));
    s[k] = blr::predict(w, out.features);
  }
  return s;
}

std::size_t RecurrentNeuralLinear::select() {
  return argmax(scores(blr::posterior_sample(posterior_, rng_)));
}

void RecurrentNeuralLinear::learn(std::size_t action) {
  const std::int64_t t = time();
  const VectorXd input = recurrent_input(history_, action, t, shape_);
  sequence_.append(input, history_.reward(t));
  if (training_due(config_, t)) {
    adam_updates_ += train(params_, sequence_, config_);
    auto run = nnet::rnn_run(params_, sequence_.inputs, nnet::RnnState::zeros(config_.units[1]));
    features_ = std::move(run.features);
    state_ = std::move(run.final_state);
  } else {
    auto out = nnet::rnn_step(params_, state_, input);
    state_ = std::move(out.state);
    append_column(features_, out.features);
  }
  posterior_ = blr::posterior_fit(prior_, features_.transpose(), sequence_.targets);
}

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::random: return "random";
    case PolicyKind::fnlps: return "fnlps";
    case PolicyKind::rnlps: return "rnlps";
    case PolicyKind::ducb: return "ducb";
    case PolicyKind::swucb: return "swucb";
    case PolicyKind::dlinucb: return "dlinucb";
    case PolicyKind::swlinucb: return "swlinucb";
  }
  return "unknown";
}

std::optional<PolicyKind> policy_from_string(std::string_view name) {
  for (auto k : {PolicyKind::random, PolicyKind::fnlps, PolicyKind::rnlps, PolicyKind::ducb,
                 PolicyKind::swucb, PolicyKind::dlinucb, PolicyKind::swlinucb})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

bool is_neural(PolicyKind k) { return k == PolicyKind::fnlps || k == PolicyKind::rnlps; }

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const ProblemShape& shape,
                                    std::uint64_t seed) {
  switch (spec.kind) {
    case PolicyKind::random:
      return std::make_unique<RandomPolicy>(shape, seed);
    case PolicyKind::fnlps:
      return std::make_unique<FeedforwardNeuralLinear>(shape, spec.neural, seed);
    case PolicyKind::rnlps:
      return std::make_unique<RecurrentNeuralLinear>(shape, spec.neural, seed);
    case PolicyKind::ducb:
      return std::make_unique<DiscountedUcb>(shape, spec.baseline);
    case PolicyKind::swucb:
      return std::make_unique<SlidingWindowUcb>(shape, spec.baseline);
    case PolicyKind::dlinucb:
      return std::make_unique<DiscountedLinUcb>(shape, spec.baseline);
    case PolicyKind::swlinucb:
      return std::make_unique<SlidingWindowLinUcb>(shape, spec.baseline);
  }
  throw std::invalid_argument("unknown policy kind");
}

}  // namespace nlps::agents
