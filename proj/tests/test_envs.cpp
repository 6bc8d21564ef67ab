#include "env_checks.hpp"
#include "fixtures.hpp"

#include "nlps/envs.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace nlps::envs;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& m : v) s += m + "\n";
  return s;
}

}  // namespace

TEST_CASE("names round-trip") {
  for (Problem p : all_problems()) CHECK(problem_from_string(to_string(p)) == p);
  CHECK_FALSE(problem_from_string("flipping_gauss").has_value());
  CHECK(all_problems().size() == 9);
  CHECK(is_contextual(Problem::wall_following));
  CHECK_FALSE(is_contextual(Problem::circular_markov_chain));
  CHECK(is_linear(Problem::rotating_vector));
}

TEST_CASE("default constants") {
  const auto g = EnvSpec::defaults(Problem::flipping_gaussian);
  CHECK(g.arms == 8);
  CHECK(g.half_period == 10);
  CHECK(g.noise_std == 0.1);
  std::vector<double> means = g.initial_means;
  std::sort(means.begin(), means.end());
  CHECK(means == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9});
  CHECK(EnvSpec::defaults(Problem::sinusoidal_bernoulli).arms == 5);
  CHECK(EnvSpec::defaults(Problem::sinusoidal_bernoulli).frequency == 1.0 / 32.0);
  CHECK(EnvSpec::defaults(Problem::circular_markov_chain).noise_std == 0.05);
  CHECK(EnvSpec::defaults(Problem::flipping_digits).half_period == 64);
  const auto v = EnvSpec::defaults(Problem::flipping_vector);
  CHECK((v.arms == 25 && v.dim == 50 && v.half_period == 64));
  CHECK(EnvSpec::defaults(Problem::rotating_vector).dim == 2);
}

TEST_CASE("flipping gaussian initial means are a seeded permutation") {
  const auto spec = EnvSpec::defaults(Problem::flipping_gaussian);
  auto [a, ia] = env_reset(spec, 1);
  auto [b, ib] = env_reset(spec, 1);
  auto [c, ic] = env_reset(spec, 2);
  const auto ea = envcheck::expected_all(*a);
  CHECK(ea == envcheck::expected_all(*b));
  CHECK(ea != envcheck::expected_all(*c));
  auto sorted = ea;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9});
  CHECK(ia.reward == 0.0);
  CHECK(a->time() == 1);
}

TEST_CASE("flipping gaussian negates after h steps") {
  auto [env, initial] = env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 3);
  const auto first = envcheck::expected_all(*env);
  const auto k = static_cast<std::size_t>(
      std::max_element(first.begin(), first.end()) - first.begin());
  CHECK(first[k] == 0.9);
  for (int t = 1; t < 10; ++t) {
    CHECK(env->expected_reward(k) == 0.9);
    env->step(0);
  }
  // t = 10 decides the reward at time 11, the first of the second block.
  CHECK(env->expected_reward(k) == -0.9);
}

TEST_CASE("flipping bernoulli complements and draws binary rewards") {
  auto [env, initial] = env_reset(EnvSpec::defaults(Problem::flipping_bernoulli), 3);
  const auto first = envcheck::expected_all(*env);
  for (int t = 1; t < 10; ++t) {
    const double r = env->step(static_cast<std::size_t>(t) % 8).reward;
    CHECK((r == 0.0 || r == 1.0));
  }
  const auto second = envcheck::expected_all(*env);
  for (std::size_t a = 0; a < 8; ++a) CHECK(second[a] == doctest::Approx(1.0 - first[a]));
}

TEST_CASE("flipped helper") {
  CHECK_FALSE(flipped(1, 10));
  CHECK_FALSE(flipped(10, 10));
  CHECK(flipped(11, 10));
  CHECK(flipped(20, 10));
  CHECK_FALSE(flipped(21, 10));
  CHECK_FALSE(flipped(1000, 0));
}

TEST_CASE("sinusoid formula") {
  CHECK(sinusoidal_mean(0, 8, 5, 1.0 / 32.0) == doctest::Approx(1.0).epsilon(1e-15));
  for (std::int64_t t = 1; t < 100; ++t)
    for (std::size_t k = 0; k < 5; ++k)
      CHECK(sinusoidal_mean(k, t, 5, 1.0 / 32.0) ==
            doctest::Approx(sinusoidal_mean(k, t + 32, 5, 1.0 / 32.0)).epsilon(1e-12));
}

TEST_CASE("rotating vector aligns with the first axis when f t is an integer") {
  CHECK(envcheck::rotation_alignment(EnvSpec::defaults(Problem::rotating_vector)).empty());
}

TEST_CASE("every environment matches its oracle mean") {
  fixture::ScratchDir dir("env_means");
  const auto suite = envcheck::make_suite(dir);
  for (const auto& spec : suite.specs) {
    INFO(to_string(spec.problem));
    const auto failures = envcheck::mean_check(spec, suite.data);
    CHECK_MESSAGE(failures.empty(), join(failures));
  }
}

TEST_CASE("every environment keeps its structural invariants") {
  fixture::ScratchDir dir("env_structure");
  const auto suite = envcheck::make_suite(dir);
  for (const auto& spec : suite.specs) {
    INFO(to_string(spec.problem));
    const auto failures = envcheck::structure_check(spec, suite.data, dir);
    CHECK_MESSAGE(failures.empty(), join(failures));
  }
}

TEST_CASE("expected reward does not mutate and reset is deterministic") {
  fixture::ScratchDir dir("env_determinism");
  const auto suite = envcheck::make_suite(dir);
  for (const auto& spec : suite.specs) {
    INFO(to_string(spec.problem));
    auto [a, ia] = env_reset(spec, 21, suite.data);
    auto [b, ib] = env_reset(spec, 21, suite.data);
    CHECK(ia.observation == ib.observation);
    for (int t = 0; t < 40; ++t) {
      const auto before = envcheck::expected_all(*a);
      CHECK(before == envcheck::expected_all(*a));
      const auto action = static_cast<std::size_t>(t) % a->num_arms();
      const auto sa = a->step(action), sb = b->step(action);
      CHECK(sa.reward == sb.reward);
      CHECK(sa.observation == sb.observation);
      CHECK(sa.observation.size() == ia.observation.size());
    }
  }
}

TEST_CASE("observation layout") {
  auto [g, gi] = env_reset(EnvSpec::defaults(Problem::flipping_gaussian), 1);
  CHECK(gi.observation.size() == 0);
  auto [v, vi] = env_reset(EnvSpec::defaults(Problem::flipping_vector), 1);
  CHECK(v->arm_vector_dim() == 50);
  CHECK(vi.observation.size() == 25 * 50);
}

TEST_CASE("variation budget matches the recovered parameter drift") {
  auto fv = EnvSpec::defaults(Problem::flipping_vector);
  fv.dim = 5;
  for (std::int64_t horizon : {3, 64, 65, 66, 300}) {
    const double want = variation_budget(fv, horizon) - variation_budget(fv, 2);
    CHECK(envcheck::recovered_drift(fv, horizon) == doctest::Approx(want).epsilon(1e-9));
  }
  const auto rv = EnvSpec::defaults(Problem::rotating_vector);
  for (std::int64_t horizon : {3, 100, 960}) {
    const double want = variation_budget(rv, horizon) - variation_budget(rv, 2);
    CHECK(envcheck::recovered_drift(rv, horizon) == doctest::Approx(want).epsilon(1e-9));
  }
  CHECK_THROWS_AS(variation_budget(EnvSpec::defaults(Problem::flipping_gaussian), 10),
                  std::invalid_argument);
}

TEST_CASE("invalid specs and actions") {
  auto spec = EnvSpec::defaults(Problem::flipping_gaussian);
  spec.arms = 1;
  CHECK_THROWS_AS(env_reset(spec, 1), std::invalid_argument);
  auto [env, initial] = env_reset(EnvSpec::defaults(Problem::circular_markov_chain), 1);
  CHECK_THROWS_AS(env->step(8), std::out_of_range);
  CHECK_THROWS_AS(env->expected_reward(8), std::out_of_range);
  CHECK_THROWS(env_reset(EnvSpec::defaults(Problem::flipping_digits), 1));
  CHECK_THROWS(env_reset(EnvSpec::defaults(Problem::wall_following), 1));
}

TEST_CASE("IDX parsing") {
  fixture::ScratchDir dir("idx");
  fixture::write_idx_images(dir / "i.idx", {{0, 255, 128, 1}, {255, 255, 0, 0}, {7, 7, 7, 7}}, 2, 2);
  fixture::write_idx_labels(dir / "l.idx", {4, 9, 0});
  const auto d = load_digits((dir / "i.idx").string(), (dir / "l.idx").string());
  CHECK(d.rows == 2);
  CHECK(d.cols == 2);
  REQUIRE(d.images.size() == 3);
  CHECK(d.images[0].size() == 4);
  CHECK(d.images[0][1] == 1.0);
  CHECK(d.images[0][0] == 0.0);
  CHECK(d.images[0][2] == doctest::Approx(128.0 / 255.0));
  CHECK(d.labels == std::vector<int>{4, 9, 0});

  const auto limited = load_digits((dir / "i.idx").string(), (dir / "l.idx").string(), 2);
  CHECK(limited.images.size() == 2);

  // 28x28 images give 784-long vectors.
  std::vector<std::uint8_t> big(784, 3);
  fixture::write_idx_images(dir / "b.idx", {big, big}, 28, 28);
  fixture::write_idx_labels(dir / "bl.idx", {1, 2});
  CHECK(load_digits((dir / "b.idx").string(), (dir / "bl.idx").string()).images[1].size() == 784);

  fixture::write_idx_images(dir / "bad.idx", {{0, 0, 0, 0}}, 2, 2, 2049);
  CHECK_THROWS_WITH_AS(load_digits((dir / "bad.idx").string(), (dir / "l.idx").string()),
                       doctest::Contains("magic"), std::runtime_error);
  fixture::write_idx_labels(dir / "badl.idx", {1}, 2051);
  CHECK_THROWS_WITH_AS(load_digits((dir / "i.idx").string(), (dir / "badl.idx").string()),
                       doctest::Contains("magic"), std::runtime_error);
  fixture::write_idx_labels(dir / "short.idx", {1, 2});
  CHECK_THROWS_AS(load_digits((dir / "i.idx").string(), (dir / "short.idx").string()),
                  std::runtime_error);

  std::vector<std::uint8_t> bytes;
  fixture::put_be32(bytes, 2051);
  fixture::put_be32(bytes, 5);
  fixture::put_be32(bytes, 2);
  fixture::put_be32(bytes, 2);
  bytes.push_back(1);
  fixture::write_bytes(dir / "trunc.idx", bytes);
  fixture::write_idx_labels(dir / "five.idx", {1, 2, 3, 4, 5});
  CHECK_THROWS_WITH_AS(load_digits((dir / "trunc.idx").string(), (dir / "five.idx").string()),
                       doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("wall-following CSV parsing") {
  fixture::ScratchDir dir("wall");
  {
    std::ofstream out(dir / "w.csv");
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 24; ++s) out << r + s * 0.5 << ',';
      out << (r == 1 ? "Sharp-Right-Turn" : "Move-Forward") << '\n';
    }
  }
  const auto w = load_wall_following((dir / "w.csv").string());
  REQUIRE(w.readings.size() == 3);
  CHECK(w.readings[2].size() == 24);
  CHECK(w.readings[2][3] == 2 + 1.5);
  CHECK(w.arms == std::vector<std::size_t>{0, 1, 0});
  CHECK(w.label_names == std::vector<std::string>{"Move-Forward", "Sharp-Right-Turn"});

  fixture::write_wall_csv(dir / "four.csv", 12);
  const auto four = load_wall_following((dir / "four.csv").string());
  std::vector<std::size_t> arms = four.arms;
  std::sort(arms.begin(), arms.end());
  arms.erase(std::unique(arms.begin(), arms.end()), arms.end());
  CHECK(arms == std::vector<std::size_t>{0, 1, 2, 3});

  {
    std::ofstream out(dir / "short.csv");
    for (int s = 0; s < 24; ++s) out << s << ',';
    out << "Move-Forward\n";
    for (int s = 0; s < 23; ++s) out << s << ',';
    out << "Move-Forward\n";
  }
  CHECK_THROWS_WITH_AS(load_wall_following((dir / "short.csv").string()),
                       doctest::Contains("short.csv:2"), std::runtime_error);

  {
    std::ofstream out(dir / "nan.csv");
    for (int s = 0; s < 23; ++s) out << s << ',';
    out << "abc,Move-Forward\n";
  }
  CHECK_THROWS_AS(load_wall_following((dir / "nan.csv").string()), std::runtime_error);

  {
    std::ofstream out(dir / "five.csv");
    for (const char* label : {"a", "b", "c", "d", "e"}) {
      for (int s = 0; s < 24; ++s) out << s << ',';
      out << label << '\n';
    }
  }
  CHECK_THROWS_WITH_AS(load_wall_following((dir / "five.csv").string()),
                       doctest::Contains("unknown label"), std::runtime_error);
}

TEST_CASE("wall-following trials stop at the end of the data") {
  fixture::ScratchDir dir("wall_end");
  fixture::write_wall_csv(dir / "w.csv", 5);
  auto spec = EnvSpec::defaults(Problem::wall_following);
  spec.wall_following_path = (dir / "w.csv").string();
  auto [env, initial] = env_reset(spec, 1, load_datasets(spec));
  CHECK(env->max_time() == 5);
  for (int i = 0; i < 4; ++i) env->step(0);
  CHECK_THROWS_WITH_AS(env->step(0), doctest::Contains("exhausted"), std::runtime_error);
}
