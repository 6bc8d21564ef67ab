#include "oracles.hpp"

#include "nlps/agents.hpp"
#include "nlps/envs.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nlps::agents;
using nlps::envs::EnvSpec;
using nlps::envs::Problem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

NeuralLinearConfig small_config(int epochs, int interval) {
  NeuralLinearConfig c;
  c.learning_rate = 0.01;
  c.epochs = epochs;
  c.interval = interval;
  c.units = {6, 5, 4};
  c.order = 1;
  c.sinusoidal_units = 2;
  return c;
}

// Runs a policy against an environment for `steps` decisions.
template <class P>
void drive(P& policy, nlps::envs::Environment& env, const nlps::envs::StepOutcome& initial,
           int steps) {
  if (policy.time() == 0) policy.start(initial);
  for (int i = 0; i < steps; ++i) policy.observe(env.step(policy.choose()));
}

struct Trace {
  std::vector<std::size_t> arms;
  std::vector<double> rewards;
};

Trace random_trace(std::size_t k, std::size_t length, std::mt19937_64& rng) {
  Trace tr;
  std::uniform_int_distribution<std::size_t> arm(0, k - 1);
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  for (std::size_t s = 0; s < length; ++s) {
    tr.arms.push_back(arm(rng));
    tr.rewards.push_back(r(rng));
  }
  return tr;
}

VectorXd random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  VectorXd v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = n(rng);
  return v / v.norm();
}

}  // namespace

TEST_CASE("argmax breaks ties by lowest index") {
  CHECK(argmax({1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(argmax({0.0, 0.0, 0.0}) == 0);
  CHECK_THROWS_AS(argmax({}), std::invalid_argument);
}

TEST_CASE("history buffer lengths") {
  HistoryBuffer h;
  h.start(0.0, VectorXd::Ones(2));
  h.push(1, 0.5, VectorXd::Zero(2));
  h.push(0, -0.5, VectorXd::Zero(2));
  CHECK(h.time() == 3);
  CHECK(h.rewards().size() == h.actions().size() + 1);
  CHECK(h.size_observations() == 3);
  CHECK(h.action(2) == 1);
  CHECK(h.reward(3) == -0.5);
}

TEST_CASE("psi layout") {
  const ProblemShape shape{3, 2, 0};
  CHECK(psi_dim(shape, 2) == 2 + 3 + 2 * (2 + 3 + 1));
  HistoryBuffer h;
  VectorXd x1(2), x2(2);
  x1 << 0.1, 0.2;
  x2 << 0.3, 0.4;
  h.start(0.0, x1);
  // t = 2: last observation x_1, one-hot candidate, zero-padded triplet
  const VectorXd p2 = build_psi(h, 1, 1, 2, shape);
  REQUIRE(p2.size() == 11);
  CHECK(p2.head(2) == x1);
  VectorXd hot(3);
  hot << 0, 1, 0;
  CHECK(p2.segment(2, 3) == hot);
  CHECK(p2.tail(6).isZero(0.0));

  h.push(2, 0.7, x2);
  const VectorXd p3 = build_psi(h, 0, 1, 3, shape);
  CHECK(p3.head(2) == x2);
  CHECK(p3.segment(5, 2) == x1);  // x_{t-k-1} = x_1
  VectorXd prev(3);
  prev << 0, 0, 1;
  CHECK(p3.segment(7, 3) == prev);  // a_2
  CHECK(p3[10] == 0.7);             // r_2
  CHECK_THROWS_AS(build_psi(h, 0, 1, 1, shape), std::invalid_argument);

  const ProblemShape linear{2, 4, 2};
  HistoryBuffer hl;
  VectorXd obs(4);
  obs << 1, 2, 3, 4;
  hl.start(0.0, obs);
  const VectorXd pl = build_psi(hl, 1, 1, 2, linear);
  CHECK(pl.size() == static_cast<Eigen::Index>(psi_dim(linear, 1)));
  CHECK(pl.size() == 2 + 3);
  CHECK(pl[0] == 3.0);
  CHECK(pl[1] == 4.0);
}

TEST_CASE("recurrent input layout") {
  const ProblemShape shape{3, 1, 0};
  HistoryBuffer h;
  h.start(0.25, VectorXd::Constant(1, 9.0));
  const VectorXd in = recurrent_input(h, 2, 2, shape);
  VectorXd want(5);
  want << 0.25, 9.0, 0, 0, 1;
  CHECK(in == want);
  CHECK(recurrent_input_dim(ProblemShape{25, 50, 2}) == 3);
}

TEST_CASE("discounted and windowed UCB match direct sums on random traces") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> g(0.8, 1.0);
  std::uniform_int_distribution<std::size_t> w(1, 60), k(2, 6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t arms = k(rng);
    const double gamma = trial == 0 ? 1.0 : g(rng);
    const std::size_t window = w(rng);
    const Trace tr = random_trace(arms, 50, rng);
    DiscountedStats ds(arms, gamma);
    SlidingWindowStats ss(arms, window);
    for (std::size_t s = 0; s < tr.arms.size(); ++s) {
      const auto t = static_cast<std::int64_t>(s) + 2;
      ds.update(tr.arms[s], tr.rewards[s]);
      ss.update(t, tr.arms[s], tr.rewards[s]);
      std::vector<std::size_t> arms_so_far(tr.arms.begin(), tr.arms.begin() + static_cast<long>(s) + 1);
      std::vector<double> rew_so_far(tr.rewards.begin(), tr.rewards.begin() + static_cast<long>(s) + 1);
      for (std::size_t a = 0; a < arms; ++a) {
        const double d_lib = ducb_score(ds, a, t, 0.5, 1.0);
        const double d_ref = oracle::ducb_direct(arms_so_far, rew_so_far, a, arms, gamma, 0.5, 1.0);
        const double s_lib = swucb_score(ss, a, t, 0.5, 1.0);
        const double s_ref = oracle::swucb_direct(arms_so_far, rew_so_far, a, window, 0.5, 1.0);
        CHECK(std::isinf(d_lib) == std::isinf(d_ref));
        CHECK(std::isinf(s_lib) == std::isinf(s_ref));
        if (!std::isinf(d_ref)) worst = std::max(worst, std::abs(d_lib - d_ref));
        if (!std::isinf(s_ref)) worst = std::max(worst, std::abs(s_lib - s_ref));
      }
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("two-arm scripted trace with discount 0.9") {
  const std::vector<std::size_t> arms{0, 1, 0, 0, 1, 0};
  const std::vector<double> rewards{1.0, 0.0, 0.5, 1.0, 1.0, 0.0};
  DiscountedStats ds(2, 0.9);
  for (std::size_t s = 0; s < 6; ++s) ds.update(arms[s], rewards[s]);
  // N_0 = 0.9^5 + 0.9^3 + 0.9^2 + 1, N_1 = 0.9^4 + 0.9
  CHECK(ds.counts[0] == doctest::Approx(0.59049 + 0.729 + 0.81 + 1.0).epsilon(1e-14));
  CHECK(ds.counts[1] == doctest::Approx(0.6561 + 0.9).epsilon(1e-14));
  for (std::size_t a = 0; a < 2; ++a)
    CHECK(ducb_score(ds, a, 7, 0.5, 1.0) ==
          doctest::Approx(oracle::ducb_direct(arms, rewards, a, 2, 0.9, 0.5, 1.0)).epsilon(1e-14));
}

TEST_CASE("UCB edge cases") {
  DiscountedStats ds(3, 0.7);
  for (int i = 0; i < 10; ++i) ds.update(1, 1.0);
  CHECK(ds.sums[1] / ds.counts[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isinf(ducb_score(ds, 0, 11, 0.5, 1.0)));
  SlidingWindowStats ss(2, 3);
  ss.update(2, 0, 1.0);
  ss.update(3, 1, 1.0);
  ss.update(4, 1, 1.0);
  ss.update(5, 1, 1.0);
  CHECK(std::isinf(swucb_score(ss, 0, 5, 0.5, 1.0)));  // play at t = 2 left the window
}

TEST_CASE("linear UCB variants reduce to plain LinUCB without forgetting") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> noise(0.0, 0.1);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 4);
    DiscountedLinearStats dl(d, 1.0, 1.0);
    WindowLinearStats unbounded(d, 0, 1.0), wide(d, 50, 1.0);
    std::vector<VectorXd> xs;
    std::vector<double> rs;
    const VectorXd w = random_unit(d, rng);
    for (int s = 0; s < 10; ++s) {
      const VectorXd x = random_unit(d, rng);
      const double r = w.dot(x) + noise(rng);
      xs.push_back(x);
      rs.push_back(r);
      dl.update(x, r);
      unbounded.update(x, r);
      wide.update(x, r);
      const VectorXd probe = random_unit(d, rng);
      const double ref = oracle::linucb_plain(xs, rs, probe, 1.0, 0.7);
      worst = std::max(worst, std::abs(dlinucb_score(dl, probe, 0.7) - ref));
      worst = std::max(worst, std::abs(swlinucb_score(unbounded, probe, 0.7) - ref));
      worst = std::max(worst, std::abs(swlinucb_score(wide, probe, 0.7) - ref));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("sliding-window LinUCB keeps only the last w observations") {
  std::mt19937_64 rng(5);
  WindowLinearStats ws(3, 4, 1.0);
  std::vector<VectorXd> xs;
  std::vector<double> rs;
  for (int s = 0; s < 9; ++s) {
    xs.push_back(random_unit(3, rng));
    rs.push_back(0.1 * s);
    ws.update(xs.back(), rs.back());
  }
  const std::vector<VectorXd> last(xs.end() - 4, xs.end());
  const std::vector<double> last_r(rs.end() - 4, rs.end());
  const VectorXd probe = random_unit(3, rng);
  CHECK(swlinucb_score(ws, probe, 0.3) ==
        doctest::Approx(oracle::linucb_plain(last, last_r, probe, 1.0, 0.3)).epsilon(1e-12));
}

TEST_CASE("discounted linear statistics match direct sums") {
  std::mt19937_64 rng(9);
  const double gamma = 0.99, ridge = 1.0;
  DiscountedLinearStats dl(2, gamma, ridge);
  std::vector<VectorXd> xs;
  std::vector<double> rs;
  for (int s = 0; s < 30; ++s) {
    xs.push_back(random_unit(2, rng));
    rs.push_back(std::sin(s));
    dl.update(xs.back(), rs.back());
  }
  const auto n = xs.size();
  MatrixXd v = MatrixXd::Zero(2, 2), vt = MatrixXd::Zero(2, 2);
  VectorXd b = VectorXd::Zero(2);
  for (std::size_t s = 0; s < n; ++s) {
    const double wgt = std::pow(gamma, static_cast<double>(n - 1 - s));
    v += wgt * xs[s] * xs[s].transpose();
    vt += wgt * wgt * xs[s] * xs[s].transpose();
    b += wgt * rs[s] * xs[s];
  }
  v += ridge * MatrixXd::Identity(2, 2);
  vt += ridge * MatrixXd::Identity(2, 2);
  CHECK((dl.v - v).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((dl.v_tilde - vt).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((dl.b - b).cwiseAbs().maxCoeff() < 1e-10);

  const VectorXd x = random_unit(2, rng);
  const MatrixXd vi = v.inverse();
  const double ref = (vi * b).dot(x) + 0.4 * std::sqrt(x.dot(vi * vt * vi * x));
  CHECK(dlinucb_score(dl, x, 0.4) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("linear UCB without data is the ridge width") {
  WindowLinearStats ws(2, 10, 4.0);
  VectorXd x(2);
  x << 3.0, 4.0;
  CHECK(swlinucb_score(ws, x, 0.5) == doctest::Approx(0.5 * 5.0 / 2.0).epsilon(1e-15));
}

TEST_CASE("linear tuning formulas") {
  const auto t = tune_linear(8.0, 2, 1000);
  CHECK(t.gamma == doctest::Approx(1.0 - std::pow(8.0 / 2000.0, 2.0 / 3.0)));
  CHECK(t.window == static_cast<std::size_t>(std::ceil(std::pow(2000.0 / 8.0, 2.0 / 3.0))));
  CHECK(tune_linear(0.0, 2, 100).gamma == 1.0);
}

TEST_CASE("random policy is uniform") {
  RandomPolicy p(ProblemShape{8, 0, 0}, 3);
  p.start({0.0, VectorXd(0)});
  std::vector<int> counts(8, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto a = p.choose();
    ++counts[a];
    p.observe({0.0, VectorXd(0)});
  }
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.125) < 0.005);
}

TEST_CASE("protocol errors") {
  RandomPolicy p(ProblemShape{2, 0, 0}, 1);
  CHECK_THROWS_AS(p.choose(), std::logic_error);
  p.start({0.0, VectorXd(0)});
  CHECK_THROWS_AS(p.observe({0.0, VectorXd(0)}), std::logic_error);
  p.choose();
  CHECK_THROWS_AS(p.choose(), std::logic_error);
}

TEST_CASE("neural policies train on schedule and keep t-1 posterior rows") {
  auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 4);
  auto [env2, initial2] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 4);
  const auto shape = ProblemShape::of(*env);
  FeedforwardNeuralLinear ff(shape, small_config(3, 8), 1);
  RecurrentNeuralLinear rn(shape, small_config(2, 8), 1);
  ff.start(initial);
  rn.start(initial2);
  for (int i = 0; i < 40; ++i) {
    ff.observe(env->step(ff.choose()));
    rn.observe(env2->step(rn.choose()));
    const auto t = ff.time();
    CHECK(ff.posterior_rows() == static_cast<std::size_t>(t - 1));
    CHECK(rn.posterior_rows() == static_cast<std::size_t>(t - 1));
    CHECK(ff.features().cols() == t - 1);
    CHECK(ff.adam_updates() == 3 * (t / 8));
    CHECK(rn.adam_updates() == 2 * (t / 8));
    CHECK(ff.params().adam().step == 3 * (t / 8));
  }
}

TEST_CASE("choose leaves the learning state untouched") {
  auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_bernoulli), 2);
  RecurrentNeuralLinear rn(ProblemShape::of(*env), small_config(2, 4), 3);
  FeedforwardNeuralLinear ff(ProblemShape::of(*env), small_config(2, 4), 3);
  drive(rn, *env, initial, 10);
  auto [env2, initial2] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_bernoulli), 2);
  drive(ff, *env2, initial2, 10);

  const auto params = rn.params();
  const auto state = rn.cached_state();
  const VectorXd mean = rn.posterior().mean();
  const MatrixXd features = rn.features();
  const auto a = rn.choose();
  CHECK(rn.params() == params);
  CHECK(rn.cached_state() == state);
  CHECK(rn.posterior().mean() == mean);
  CHECK(rn.features() == features);
  rn.observe(env->step(a));

  const auto ffp = ff.params();
  const MatrixXd ffc = ff.posterior().covariance();
  ff.choose();
  CHECK(ff.params() == ffp);
  CHECK(ff.posterior().covariance() == ffc);
}

TEST_CASE("recurrent cached state equals a full pass over the realized sequence") {
  for (int epochs : {0, 2}) {
    auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::circular_markov_chain), 6);
    RecurrentNeuralLinear rn(ProblemShape::of(*env), small_config(epochs, 5), 8);
    rn.start(initial);
    for (int i = 0; i < 23; ++i) {
      rn.observe(env->step(rn.choose()));
      const auto full = nlps::nnet::rnn_run(rn.params(), rn.sequence().inputs,
                                            nlps::nnet::RnnState::zeros(5));
      CHECK(rn.cached_state() == full.final_state);
      CHECK(rn.features() == full.features);
    }
  }
}

TEST_CASE("frozen networks keep historical features bitwise stable") {
  auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 1);
  RecurrentNeuralLinear rn(ProblemShape::of(*env), small_config(0, 4), 2);
  drive(rn, *env, initial, 5);
  const MatrixXd early = rn.features();
  drive(rn, *env, initial, 20);
  CHECK(rn.features().leftCols(early.cols()) == early);
  CHECK(rn.adam_updates() == 0);

  auto [env2, initial2] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 1);
  RecurrentNeuralLinear trained(ProblemShape::of(*env2), small_config(5, 4), 2);
  drive(trained, *env2, initial2, 2);
  const MatrixXd before = trained.features();
  CHECK(trained.adam_updates() == 0);
  drive(trained, *env2, initial2, 1);  // observing r_4 triggers training
  CHECK(trained.adam_updates() == 5);
  CHECK(trained.features().leftCols(before.cols()) != before);
}

TEST_CASE("zero recurrent network ties pick the lowest arm") {
  auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 1);
  const auto shape = ProblemShape::of(*env);
  RecurrentNeuralLinear rn(shape, small_config(0, 4), 2);
  rn.set_params(nlps::nnet::ParamSet(rn.params().spec()));
  rn.start(initial);
  for (int i = 0; i < 10; ++i) {
    const auto a = rn.choose();
    CHECK(a == 0);
    rn.observe(env->step(a));
  }
}

TEST_CASE("feedforward choice matches a brute-force scorer under a collapsed posterior") {
  auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_bernoulli), 3);
  const auto shape = ProblemShape::of(*env);
  FeedforwardNeuralLinear ff(shape, small_config(0, 4), 5);
  drive(ff, *env, initial, 6);
  std::mt19937_64 rng(4);
  for (int round = 0; round < 10; ++round) {
    const VectorXd w = random_unit(4, rng);
    ff.set_posterior(nlps::blr::GaussianPosterior::from_moments(w, MatrixXd::Zero(4, 4)));
    const auto t = ff.time() + 1;
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t k = 0; k < shape.arms; ++k) {
      const VectorXd psi = build_psi(ff.history(), k, 1, t, shape);
      std::vector<double> z;
      oracle::ff_predict(ff.params(), static_cast<double>(t),
                         std::vector<double>(psi.data(), psi.data() + psi.size()), &z);
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += w[static_cast<Eigen::Index>(i)] * z[i];
      if (s > best_score) best_score = s, best = k;
    }
    const auto a = ff.choose();
    CHECK(a == best);
    // A second decision from the same state agrees.
    CHECK(ff.scores(w) == ff.scores(w));
    ff.observe(env->step(a));
  }
}

TEST_CASE("linear baselines need linear problems") {
  BaselineConfig c;
  c.gamma = 0.9;
  c.window = 10;
  CHECK_THROWS_AS(DiscountedLinUcb(ProblemShape{3, 0, 0}, c), std::invalid_argument);
  CHECK_THROWS_AS(SlidingWindowLinUcb(ProblemShape{3, 0, 0}, c), std::invalid_argument);
  BaselineConfig none;
  CHECK_THROWS_AS(DiscountedUcb(ProblemShape{3, 0, 0}, none), std::invalid_argument);
  CHECK_THROWS_AS(SlidingWindowUcb(ProblemShape{3, 0, 0}, none), std::invalid_argument);
}

TEST_CASE("policy names and factory") {
  for (auto k : {PolicyKind::random, PolicyKind::fnlps, PolicyKind::rnlps, PolicyKind::ducb,
                 PolicyKind::swucb, PolicyKind::dlinucb, PolicyKind::swlinucb})
    CHECK(policy_from_string(to_string(k)) == k);
  CHECK_FALSE(policy_from_string("thompson").has_value());
  PolicySpec spec;
  spec.kind = PolicyKind::ducb;
  spec.baseline.gamma = 0.9;
  CHECK(make_policy(spec, ProblemShape{4, 0, 0}, 1)->name() == "ducb");
}

TEST_CASE("baseline policies play every arm before repeating") {
  auto [env, initial] = nlps::envs::env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 1);
  BaselineConfig c;
  c.gamma = 0.95;
  DiscountedUcb p(ProblemShape::of(*env), c);
  p.start(initial);
  for (std::size_t k = 0; k < 8; ++k) {
    const auto a = p.choose();
    CHECK(a == k);
    p.observe(env->step(a));
  }
}
