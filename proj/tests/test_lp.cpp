#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"

using riskhedge::Error;
using riskhedge::ErrorCode;
using riskhedge::LpOptions;
using riskhedge::LpOutcome;
using riskhedge::LpProblem;
using riskhedge::LpStatus;
using riskhedge::solve;

namespace {

LpProblem<double> boxed(int n) {
  LpProblem<double> p;
  p.num_vars = n;
  p.objective.assign(static_cast<std::size_t>(n), 0.0);
  p.lower.assign(static_cast<std::size_t>(n), std::nullopt);
  p.upper.assign(static_cast<std::size_t>(n), std::nullopt);
  return p;
}

}  // namespace

TEST_CASE("hand-checked programs", "[lp]") {
  SECTION("1-d minimum at a bound") {
    auto p = boxed(1);
    p.objective = {1.0};
    p.lower[0] = -3.0;
    p.upper[0] = 7.0;
    auto out = solve(p);
    REQUIRE(out.status == LpStatus::optimal);
    CHECK(out.value == Catch::Approx(-3.0));
    CHECK(out.primal_point[0] == Catch::Approx(-3.0));
  }

  SECTION("diet-style program") {
    // min 2x + 3y  s.t.  x + y >= 2, x >= 0, y >= 0  ->  (2, 0)
    auto p = boxed(2);
    p.objective = {2.0, 3.0};
    p.ineq_lhs = {{-1.0, -1.0}};
    p.ineq_rhs = {-2.0};
    p.lower = {0.0, 0.0};
    auto out = solve(p);
    REQUIRE(out.status == LpStatus::optimal);
    CHECK(out.value == Catch::Approx(4.0));
    CHECK(out.primal_point[0] == Catch::Approx(2.0));
    CHECK(out.primal_point[1] == Catch::Approx(0.0));
  }

  SECTION("equality plus free variable") {
    // min x - y  s.t.  x + y = 1, 0 <= x <= 1, y free -> x = 0, y = 1
    auto p = boxed(2);
    p.objective = {1.0, -1.0};
    p.eq_lhs = {{1.0, 1.0}};
    p.eq_rhs = {1.0};
    p.lower[0] = 0.0;
    p.upper[0] = 1.0;
    auto out = solve(p);
    REQUIRE(out.status == LpStatus::optimal);
    CHECK(out.value == Catch::Approx(-1.0));
  }

  SECTION("infeasible system") {
    auto p = boxed(1);
    p.objective = {1.0};
    p.eq_lhs = {{1.0}};
    p.eq_rhs = {2.0};
    p.lower[0] = 0.0;
    p.upper[0] = 1.0;
    auto out = solve(p);
    CHECK(out.status == LpStatus::infeasible);
  }

  SECTION("unbounded direction is a certified ray") {
    // min -x - y  s.t.  x - y <= 1, x, y >= 0
    auto p = boxed(2);
    p.objective = {-1.0, -1.0};
    p.ineq_lhs = {{1.0, -1.0}};
    p.ineq_rhs = {1.0};
    p.lower = {0.0, 0.0};
    auto out = solve(p);
    REQUIRE(out.status == LpStatus::unbounded);
    REQUIRE(out.ray.size() == 2);
    // descent, feasible, nonzero
    CHECK(out.ray[0] * p.objective[0] + out.ray[1] * p.objective[1] < -1e-9);
    CHECK(out.ray[0] - out.ray[1] <= 1e-9);
    CHECK(out.ray[0] >= -1e-9);
    CHECK(out.ray[1] >= -1e-9);
  }

  SECTION("malformed input is rejected") {
    auto p = boxed(2);
    p.objective = {1.0};
    REQUIRE_THROWS_AS(solve(p), Error);
    try {
      solve(p);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::malformed_problem);
    }
  }

  SECTION("crossing bounds are rejected") {
    auto p = boxed(1);
    p.objective = {1.0};
    p.lower[0] = 2.0;
    p.upper[0] = 1.0;
    REQUIRE_THROWS_AS(solve(p), Error);
  }
}

TEST_CASE("random boxed programs match vertex enumeration", "[lp]") {
  std::mt19937_64 rng(20240811);
  std::uniform_int_distribution<int> nvars(1, 4);
  std::uniform_int_distribution<int> nineq(0, 5);
  std::uniform_int_distribution<int> coef(-3, 3);

  int optimal_seen = 0, infeasible_seen = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = nvars(rng);
    auto p = boxed(n);
    for (int i = 0; i < n; ++i) {
      p.objective[static_cast<std::size_t>(i)] = coef(rng);
      const int a = coef(rng), b = coef(rng);
      p.lower[static_cast<std::size_t>(i)] = std::min(a, b);
      p.upper[static_cast<std::size_t>(i)] = std::max(a, b);
    }
    const int mi = nineq(rng);
    for (int r = 0; r < mi; ++r) {
      std::vector<double> row(static_cast<std::size_t>(n));
      for (auto& v : row) v = coef(rng);
      p.ineq_lhs.push_back(row);
      p.ineq_rhs.push_back(coef(rng));
    }
    if (n >= 2 && trial % 3 == 0) {
      std::vector<double> row(static_cast<std::size_t>(n));
      for (auto& v : row) v = coef(rng);
      p.eq_lhs.push_back(row);
      p.eq_rhs.push_back(coef(rng));
    }

    const auto oracle = helpers::lp_vertex_oracle(p);
    const auto out = solve(p);
    INFO("trial " << trial);
    REQUIRE(out.status != LpStatus::unbounded);  // box bounds forbid rays
    if (out.status == LpStatus::optimal) {
      ++optimal_seen;
      REQUIRE(oracle.has_value());
      CHECK(std::abs(out.value - *oracle) <= 1e-7);
      // strong duality residual
      CHECK(std::abs(out.value - out.dual_value) <= 1e-9);
    } else {
      ++infeasible_seen;
      CHECK(!oracle.has_value());
    }
  }
  // the generator must exercise both outcomes
  CHECK(optimal_seen >= 200);
  CHECK(infeasible_seen >= 20);
}

TEST_CASE("dual multipliers reproduce the objective", "[lp]") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coef(-4, 4);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = boxed(3);
    for (int i = 0; i < 3; ++i) {
      p.objective[static_cast<std::size_t>(i)] = coef(rng);
      p.lower[static_cast<std::size_t>(i)] = -2.0;
      p.upper[static_cast<std::size_t>(i)] = 3.0;
    }
    for (int r = 0; r < 3; ++r) {
      std::vector<double> row(3);
      for (auto& v : row) v = coef(rng);
      p.ineq_lhs.push_back(row);
      p.ineq_rhs.push_back(std::abs(coef(rng)) + 1);
    }
    auto out = solve(p);
    if (out.status != LpStatus::optimal) continue;
    REQUIRE(out.dual_point.size() == p.ineq_lhs.size() + p.eq_lhs.size());
    CHECK(std::abs(out.value - out.dual_value) <= 1e-9);
  }
}
