#include <doctest.h>

#include "fapi/errors.hpp"
#include "fapi/mdp.hpp"
#include "support.hpp"

using namespace fapi;

namespace {

FiniteMdp chain() {
  // s0 -> s1 -> s1, R(s0) = 0, R(s1) = 1.
  return dense_mdp(2, 1, {1.0, 0.0}, std::vector<double>{0, 1, 0, 1}, {0.0, 1.0}, 0.9, 1.0);
}

}  // namespace

TEST_CASE("policy backup at zero is the expected reward") {
  std::mt19937_64 g(1);
  const FiniteMdp m = oracle::random_mdp(g, 4, 3, 0.8);
  const TabularPolicy pi = oracle::random_policy(g, 4, 3);
  const ValueFn out = bellman_policy_op(ValueFn(4), pi, m);
  for (std::size_t s = 0; s < 4; ++s) {
    double r = 0.0;
    for (std::size_t a = 0; a < 3; ++a) r += pi(s, a) * m.reward(s, a);
    CHECK(out[s] == doctest::Approx(r).epsilon(1e-15));
  }
}

TEST_CASE("policy backup on one state and on a chain") {
  const FiniteMdp one = dense_mdp(1, 1, {1.0}, std::vector<double>{1.0}, {1.0}, 0.5, 1.0);
  CHECK(bellman_policy_op(ValueFn{2.0}, TabularPolicy::uniform(1, 1), one)[0] == 2.0);
  const ValueFn out = bellman_policy_op(ValueFn{0.0, 10.0}, TabularPolicy::uniform(2, 1), chain());
  CHECK(out[0] == doctest::Approx(9.0));
  CHECK(out[1] == doctest::Approx(10.0));
}

TEST_CASE("operators reject mismatched dimensions") {
  CHECK_THROWS_AS(bellman_policy_op(ValueFn(3), TabularPolicy::uniform(2, 1), chain()), ContractViolation);
  CHECK_THROWS_AS(bellman_optimal_op(ValueFn(3), chain()), ContractViolation);
}

TEST_CASE("optimal backup") {
  std::mt19937_64 g(2);
  SUBCASE("single action equals the policy backup") {
    const FiniteMdp m = oracle::random_mdp(g, 4, 1, 0.9);
    const ValueFn v{0.3, 1.0, 2.0, 0.1};
    CHECK(bellman_optimal_op(v, m).values == bellman_policy_op(v, TabularPolicy::uniform(4, 1), m));
  }
  SUBCASE("zero value gives the best reward") {
    const FiniteMdp m = oracle::random_mdp(g, 4, 3, 0.9);
    const auto out = bellman_optimal_op(ValueFn(4), m);
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(out.values[s] == std::max({m.reward(s, 0), m.reward(s, 1), m.reward(s, 2)}));
    }
  }
  SUBCASE("matches brute force over actions") {
    for (int rep = 0; rep < 20; ++rep) {
      const FiniteMdp m = oracle::random_mdp(g, 4, 3, 0.9);
      std::uniform_real_distribution<double> u(0.0, 10.0);
      oracle::Dense v(4);
      for (double& x : v) x = u(g);
      const auto out = bellman_optimal_op(ValueFn(v), m);
      const oracle::Dense q = oracle::q_values(m, v);
      for (std::size_t s = 0; s < 4; ++s) {
        CHECK(out.values[s] == doctest::Approx(oracle::optimal_backup(m, v)[s]).epsilon(1e-14));
        for (std::size_t a = 0; a < 3; ++a) CHECK(q[s * 3 + out.actions[s]] >= q[s * 3 + a] - 1e-12);
      }
    }
  }
}

TEST_CASE("exact policy evaluation") {
  std::mt19937_64 g(3);
  SUBCASE("constant reward is a geometric series") {
    std::vector<double> p;
    for (int i = 0; i < 3 * 2; ++i) {
      const auto row = oracle::random_simplex(g, 3);
      p.insert(p.end(), row.begin(), row.end());
    }
    const FiniteMdp m = dense_mdp(3, 2, {1.0, 0.0, 0.0}, p, std::vector<double>(6, 0.7), 0.9, 1.0);
    const ValueFn v = exact_policy_evaluation(oracle::random_policy(g, 3, 2), m);
    for (double x : v) CHECK(x == doctest::Approx(7.0).epsilon(1e-12));
  }
  SUBCASE("tiny discount returns the expected reward") {
    const FiniteMdp base = oracle::random_mdp(g, 3, 2, 0.5);
    const FiniteMdp m = dense_mdp(3, 2, std::vector<double>(base.init_dist().begin(), base.init_dist().end()),
                                  [&] {
                                    std::vector<double> p;
                                    for (std::size_t s = 0; s < 3; ++s)
                                      for (std::size_t a = 0; a < 2; ++a)
                                        for (std::size_t j = 0; j < 3; ++j) p.push_back(base.prob(s, a, j));
                                    return p;
                                  }(),
                                  std::vector<double>(base.rewards().begin(), base.rewards().end()), 1e-9, 1.0);
    const TabularPolicy pi = oracle::random_policy(g, 3, 2);
    const ValueFn v = exact_policy_evaluation(pi, m);
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(v[s] == doctest::Approx(pi(s, 0) * m.reward(s, 0) + pi(s, 1) * m.reward(s, 1)).epsilon(1e-8));
    }
  }
  SUBCASE("matches ten thousand backups") {
    const FiniteMdp m = oracle::random_mdp(g, 3, 2, 0.9);
    const TabularPolicy pi = oracle::random_policy(g, 3, 2);
    oracle::Dense w(3, 0.0);
    for (int k = 0; k < 10000; ++k) w = oracle::policy_backup(m, pi, w);
    CHECK(oracle::sup_diff(oracle::as_dense(exact_policy_evaluation(pi, m)), w) <= 1e-8);
  }
  SUBCASE("residual and dense solve agree on larger instances") {
    const FiniteMdp m = oracle::random_mdp(g, 30, 4, 0.99);
    const TabularPolicy pi = oracle::random_policy(g, 30, 4);
    const ValueFn v = exact_policy_evaluation(pi, m);
    CHECK(sup_distance(bellman_policy_op(v, pi, m), v) <= 1e-9);
    CHECK(oracle::sup_diff(oracle::as_dense(v), oracle::evaluate(pi, m)) <= 1e-9);
  }
  SUBCASE("uniform row mass is handled exactly") {
    std::vector<TransitionRow> rows;
    for (int i = 0; i < 4 * 2; ++i) {
      if (i % 3 == 0) rows.push_back(TransitionRow::uniform());
      else if (i % 3 == 1) rows.push_back(TransitionRow({{static_cast<std::size_t>(i % 4), 0.6}}, 0.4));
      else rows.push_back(TransitionRow::point(static_cast<std::size_t>((i + 1) % 4)));
    }
    std::vector<double> r(8);
    for (double& x : r) x = std::uniform_real_distribution<double>(0, 1)(g);
    const FiniteMdp m(4, 2, {0.25, 0.25, 0.25, 0.25}, rows, r, 0.95, 1.0);
    const TabularPolicy pi = oracle::random_policy(g, 4, 2);
    CHECK(oracle::sup_diff(oracle::as_dense(exact_policy_evaluation(pi, m)), oracle::evaluate(pi, m)) <= 1e-10);
  }
}

TEST_CASE("greedy improvement") {
  std::mt19937_64 g(4);
  SUBCASE("single action") {
    const FiniteMdp m = oracle::random_mdp(g, 3, 1, 0.9);
    CHECK(greedy_improve(ValueFn(3), m) == TabularPolicy::uniform(3, 1));
  }
  SUBCASE("ties go to action zero") {
    const FiniteMdp m = dense_mdp(1, 2, {1.0}, std::vector<double>{1.0, 1.0}, {0.5, 0.5}, 0.9, 1.0);
    const TabularPolicy pi = greedy_improve(ValueFn{1.0}, m);
    CHECK(pi(0, 0) == 1.0);
    CHECK(pi(0, 1) == 0.0);
  }
  SUBCASE("greedy policy attains the optimal backup") {
    for (int rep = 0; rep < 20; ++rep) {
      const FiniteMdp m = oracle::random_mdp(g, 5, 3, 0.9);
      std::uniform_real_distribution<double> u(0.0, 10.0);
      oracle::Dense v(5);
      for (double& x : v) x = u(g);
      const TabularPolicy pi = greedy_improve(ValueFn(v), m);
      CHECK(oracle::sup_diff(oracle::policy_backup(m, pi, v), oracle::optimal_backup(m, v)) == 0.0);
    }
  }
}

TEST_CASE("value iteration") {
  std::mt19937_64 g(5);
  SUBCASE("constant reward") {
    std::vector<double> p;
    for (int i = 0; i < 6; ++i) {
      const auto row = oracle::random_simplex(g, 3);
      p.insert(p.end(), row.begin(), row.end());
    }
    const FiniteMdp m = dense_mdp(3, 2, {1.0, 0.0, 0.0}, p, std::vector<double>(6, 0.4), 0.8, 1.0);
    for (double x : value_iteration(m, 1e-12)) CHECK(x == doctest::Approx(2.0).epsilon(1e-10));
  }
  SUBCASE("residual and policy iteration cross-check") {
    for (int rep = 0; rep < 10; ++rep) {
      const FiniteMdp m = oracle::random_mdp(g, 5, 3, 0.9);
      const double tol = 1e-10;
      const ValueFn v = value_iteration(m, tol);
      CHECK(sup_distance(bellman_optimal_op(v, m).values, v) <= tol);
      const ValueFn vpi = exact_policy_evaluation(greedy_improve(v, m), m);
      CHECK(sup_distance(vpi, v) <= 2.0 * tol / (1.0 - 0.9));
      for (double x : v) {
        CHECK(x >= -1e-9);
        CHECK(x <= m.value_bound() + 1e-9);
      }
    }
  }
  SUBCASE("greedy at the fixed point is optimal") {
    for (int rep = 0; rep < 10; ++rep) {
      const FiniteMdp m = oracle::random_mdp(g, 5, 3, 0.9);
      const ValueFn v = value_iteration(m, 1e-12);
      CHECK(sup_distance(exact_policy_evaluation(greedy_improve(v, m), m), v) <= 1e-7);
    }
  }
  SUBCASE("iteration cap") {
    const FiniteMdp m = oracle::random_mdp(g, 3, 2, 0.99);
    CHECK_THROWS_AS(value_iteration(m, 1e-12, 3), NumericalFailure);
  }
}

TEST_CASE("operators are monotone and contract") {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t S = 2 + rep % 4, A = 1 + rep % 3;
    const double gamma = 0.5 + 0.49 * std::uniform_real_distribution<double>(0, 1)(g);
    const FiniteMdp m = oracle::random_mdp(g, S, A, gamma);
    const TabularPolicy pi = oracle::random_policy(g, S, A);
    ValueFn v(S), w(S), lo(S);
    for (std::size_t s = 0; s < S; ++s) {
      v[s] = u(g);
      w[s] = u(g);
      lo[s] = std::min(v[s], w[s]) - u(g);
    }
    const ValueFn tpl = bellman_policy_op(lo, pi, m), tpv = bellman_policy_op(v, pi, m);
    const ValueFn tl = bellman_optimal_op(lo, m).values, tv = bellman_optimal_op(v, m).values;
    for (std::size_t s = 0; s < S; ++s) {
      CHECK(tpl[s] <= tpv[s] + 1e-12);
      CHECK(tl[s] <= tv[s] + 1e-12);
    }
    const double d = sup_distance(v, w);
    CHECK(sup_distance(tpv, bellman_policy_op(w, pi, m)) <= gamma * d + 1e-10);
    CHECK(sup_distance(tv, bellman_optimal_op(w, m).values) <= gamma * d + 1e-10);
  }
}

TEST_CASE("construction validates every invariant") {
  const std::vector<double> p{0.5, 0.5, 1.0, 0.0};
  CHECK_NOTHROW(dense_mdp(2, 1, {0.5, 0.5}, p, {0.0, 1.0}, 0.9, 1.0));
  CHECK_THROWS_AS(dense_mdp(2, 1, {0.5, 0.5}, std::vector<double>{0.5, 0.6, 1.0, 0.0}, {0.0, 1.0}, 0.9, 1.0),
                  ContractViolation);
  CHECK_THROWS_AS(dense_mdp(2, 1, {0.5, 0.4}, p, {0.0, 1.0}, 0.9, 1.0), ContractViolation);
  CHECK_THROWS_AS(dense_mdp(2, 1, {0.5, 0.5}, p, {0.0, 2.0}, 0.9, 1.0), ContractViolation);
  CHECK_THROWS_AS(dense_mdp(2, 1, {0.5, 0.5}, p, {-0.1, 1.0}, 0.9, 1.0), ContractViolation);
  CHECK_NOTHROW(dense_mdp(2, 1, {0.5, 0.5}, p, {-0.1, 1.0}, 0.9, 1.0, FiniteMdp::Options{false}));
  CHECK_THROWS_AS(dense_mdp(2, 1, {0.5, 0.5}, p, {0.0, 1.0}, 1.0, 1.0), ContractViolation);
  CHECK_THROWS_AS(dense_mdp(2, 1, {0.5, 0.5}, p, {0.0, 1.0}, 0.0, 1.0), ContractViolation);
  CHECK_THROWS_AS(TabularPolicy(1, 2, {0.3, 0.3}), ContractViolation);
  CHECK(normalize_rows({1.0, 3.0, 0.0, 0.0}, 2) == std::vector<double>{0.25, 0.75, 0.5, 0.5});
}

TEST_CASE("sparse rows") {
  const TransitionRow row({{2, 0.25}, {0, 0.25}, {2, 0.25}, {1, 0.0}}, 0.25);
  CHECK(row.entries().size() == 2);
  CHECK(row.prob(2, 4) == doctest::Approx(0.5 + 0.0625));
  CHECK(row.prob(1, 4) == doctest::Approx(0.0625));
  CHECK(l1_distance(TransitionRow::point(0), TransitionRow::point(1), 3) == 2.0);
  CHECK(l1_distance(TransitionRow::uniform(), TransitionRow::point(0), 4) == doctest::Approx(1.5));
}
