#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"

using helpers::cvar_spec;
using helpers::one_step;
using helpers::worst_case_spec;
using riskhedge::Error;
using riskhedge::ErrorCode;
using riskhedge::NodeFunction;
using riskhedge::RiskVariant;

TEST_CASE("martingale kernel polytopes of known nodes", "[duality]") {
  SECTION("binomial: unique kernel with radius 1/3") {
    auto tree = helpers::binomial_tree();
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    auto poly = riskhedge::build_polytope(tree, drm, 0);
    REQUIRE_FALSE(poly.empty);
    CHECK(poly.interior_radius == Catch::Approx(1.0 / 3));
    CHECK(poly.interior_kernel[0] == Catch::Approx(1.0 / 3));
    CHECK(poly.interior_kernel[1] == Catch::Approx(2.0 / 3));
  }

  SECTION("trinomial: a segment whose deepest kernel is (1/4, 1/4, 1/2)") {
    auto tree = helpers::trinomial_tree();
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    auto poly = riskhedge::build_polytope(tree, drm, 0);
    REQUIRE_FALSE(poly.empty);
    CHECK(poly.interior_radius == Catch::Approx(0.25));
    CHECK(poly.interior_kernel[0] == Catch::Approx(0.25));
    CHECK(poly.interior_kernel[1] == Catch::Approx(0.25));
    CHECK(poly.interior_kernel[2] == Catch::Approx(0.5));
  }

  SECTION("one-sided increments give an empty polytope") {
    auto tree = one_step<double>({1.0}, {{2.0}, {3.0}});
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    CHECK(riskhedge::build_polytope(tree, drm, 0).empty);
  }

  SECTION("tight cvar caps empty the trinomial polytope") {
    auto tree = helpers::trinomial_tree();
    auto tight = riskhedge::build_dynamic(tree, cvar_spec(0.9));
    CHECK(riskhedge::build_polytope(tree, tight, 0).empty);

    auto loose = riskhedge::build_dynamic(tree, cvar_spec(0.75));
    auto poly = riskhedge::build_polytope(tree, loose, 0);
    REQUIRE_FALSE(poly.empty);
    CHECK(poly.interior_radius > 0);
    // martingale identity inside the cvar box: q1 = q3 / 2
    CHECK(poly.interior_kernel[0] == Catch::Approx(poly.interior_kernel[2] / 2));
  }
}

TEST_CASE("dual prices equal primal prices", "[duality]") {
  SECTION("binomial call at the root") {
    auto tree = helpers::binomial_tree();
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    auto du = riskhedge::dual_price(tree, drm, helpers::binomial_call(), 0);
    CHECK(du.prices.at(0) == Catch::Approx(1.0 / 3));
    CHECK(du.kernel.at(0)[0] == Catch::Approx(1.0 / 3));
    CHECK(du.strict.at(0));
  }

  SECTION("random arbitrage-free corpus, both evaluation times") {
    std::mt19937_64 rng(1301);
    const RiskVariant variants[] = {RiskVariant::worst_case, RiskVariant::cvar,
                                    RiskVariant::kernels};
    int instances = 0;
    for (int trial = 0; trial < 210; ++trial) {
      helpers::CorpusConfig cfg;
      cfg.depth = 1 + trial % 3;
      cfg.dim = trial % 5 == 0 ? 2 : 1;
      cfg.variant = variants[trial % 3];
      cfg.alpha = 0.55 + 0.4 * (trial % 4) / 4.0;
      auto inst = helpers::random_na_instance(rng, cfg);
      auto drm = riskhedge::build_dynamic(inst.tree, inst.spec);
      auto bw = riskhedge::backward_price(inst.tree, drm, inst.payoff);
      REQUIRE_FALSE(bw.any_minus_infinity);
      for (int t : {0, cfg.depth - 1}) {
        auto du = riskhedge::dual_price(inst.tree, drm, inst.payoff, t);
        INFO("trial " << trial << " variant " << static_cast<int>(cfg.variant) << " t=" << t);
        CHECK(helpers::max_gap(bw.prices[static_cast<std::size_t>(t)], du.prices) <= 1e-7);
      }
      ++instances;
    }
    CHECK(instances >= 200);
  }

  SECTION("dual pricing refuses markets with arbitrage") {
    auto tree = helpers::trinomial_tree();
    auto drm = riskhedge::build_dynamic(tree, cvar_spec(0.9));
    try {
      riskhedge::dual_price(tree, drm, helpers::trinomial_call(), 0);
      FAIL("expected no_na");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::no_na);
    }
  }
}

TEST_CASE("interior blending certifies attainment", "[duality]") {
  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 15; ++trial) {
    helpers::CorpusConfig cfg;
    cfg.depth = 2;
    cfg.variant = trial % 2 == 0 ? RiskVariant::worst_case : RiskVariant::cvar;
    auto inst = helpers::random_na_instance(rng, cfg);
    auto drm = riskhedge::build_dynamic(inst.tree, inst.spec);
    auto du = riskhedge::dual_price(inst.tree, drm, inst.payoff, 0);
    auto rep = riskhedge::verify_dual_attainment(inst.tree, drm, du);
    CHECK(rep.pass);
  }
}

TEST_CASE("witness measure on the two-period binomial", "[duality]") {
  auto tree = helpers::two_period_tree();
  auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
  auto mm = riskhedge::extract_witness_measure(tree, drm);
  CHECK(mm.strictly_positive);
  REQUIRE(mm.kernels.size() == 3);
  for (const auto& [id, q] : mm.kernels) {
    CHECK(q[0] == Catch::Approx(1.0 / 3));
    CHECK(q[1] == Catch::Approx(2.0 / 3));
  }
  CHECK(mm.leaf_weights.at(3) == Catch::Approx(1.0 / 9));
  CHECK(mm.leaf_weights.at(4) == Catch::Approx(2.0 / 9));
  CHECK(mm.leaf_weights.at(5) == Catch::Approx(2.0 / 9));
  CHECK(mm.leaf_weights.at(6) == Catch::Approx(4.0 / 9));

  SECTION("its conditional expectation prices the call") {
    NodeFunction<double> h;
    h.time = 2;
    h.values = {{3, 3.0}, {4, 0.0}, {5, 0.0}, {6, 0.0}};
    auto e0 = riskhedge::conditional_expectation(tree, mm, h, 0);
    CHECK(e0.at(0) == Catch::Approx(1.0 / 3));
    auto e1 = riskhedge::conditional_expectation(tree, mm, h, 1);
    CHECK(e1.at(1) == Catch::Approx(1.0));
    CHECK(e1.at(2) == Catch::Approx(0.0));
  }

  SECTION("markets with arbitrage have no witness") {
    auto bad = one_step<double>({1.0}, {{2.0}, {3.0}});
    auto bad_drm = riskhedge::build_dynamic(bad, worst_case_spec());
    try {
      riskhedge::extract_witness_measure(bad, bad_drm);
      FAIL("expected no_na");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::no_na);
    }
  }
}

TEST_CASE("conditional expectation ranges", "[duality]") {
  SECTION("unique kernel pins the range") {
    auto tree = helpers::binomial_tree();
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    auto r = riskhedge::conditional_range(tree, drm, helpers::binomial_call(), 0);
    REQUIRE(r.computable);
    CHECK(r.upper.at(0) == Catch::Approx(1.0 / 3));
    CHECK(r.lower.at(0) == Catch::Approx(1.0 / 3));
  }

  SECTION("the trinomial segment spreads the range") {
    auto tree = helpers::trinomial_tree();
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    auto r = riskhedge::conditional_range(tree, drm, helpers::trinomial_call(), 0);
    REQUIRE(r.computable);
    // kernels (t/2, 1 - 3t/2, t) for t in [0, 2/3]: E = t/2 ranges over [0, 1/3]
    CHECK(r.lower.at(0) == Catch::Approx(0.0).margin(1e-9));
    CHECK(r.upper.at(0) == Catch::Approx(1.0 / 3));
  }

  SECTION("empty polytopes make the range incomputable") {
    auto tree = helpers::trinomial_tree();
    auto drm = riskhedge::build_dynamic(tree, cvar_spec(0.9));
    auto r = riskhedge::conditional_range(tree, drm, helpers::trinomial_call(), 0);
    CHECK_FALSE(r.computable);
  }
}

TEST_CASE("dual characterization report on canonical markets", "[duality]") {
  SECTION("clean markets verify in full") {
    auto tree = helpers::two_period_tree();
    auto drm = riskhedge::build_dynamic(tree, worst_case_spec());
    auto fr = riskhedge::verify_ftap(tree, drm, 24, 7);
    CHECK(fr.hypothesis_support);
    CHECK(fr.na);
    CHECK(fr.polytopes_nonempty);
    CHECK(fr.polytopes_positive);
    CHECK(fr.full_equivalence);
    CHECK(fr.leg_i.pass);
    CHECK(fr.leg_ii.pass);
    CHECK(fr.leg_iii.pass);
    CHECK(fr.leg_iv.pass);
    CHECK(fr.ngd_all);
    CHECK(fr.ngd_matches_aip);
    CHECK(fr.empties_match_aip);
    CHECK(fr.consistent);
  }

  SECTION("instantaneous profit collapses the dual side coherently") {
    auto tree = helpers::trinomial_tree();
    auto drm = riskhedge::build_dynamic(tree, cvar_spec(0.9));
    auto fr = riskhedge::verify_ftap(tree, drm, 16, 7);
    CHECK_FALSE(fr.na);
    CHECK_FALSE(fr.polytopes_nonempty);
    CHECK_FALSE(fr.ngd_all);
    CHECK_FALSE(fr.full_equivalence);
    CHECK(fr.empties_match_aip);
    CHECK(fr.ngd_matches_aip);
    CHECK(fr.leg_i.pass);
    CHECK(fr.consistent);
  }

  SECTION("a one-sided market with a positive kernel still fails the claim test") {
    // increments (1, -1) under cvar 4/5 with weights (0.4, 0.6): the kernel
    // (1/2, 1/2) sits strictly inside the determining set, yet shorting the
    // asset is a symmetric-risk-neutrality violation. The dual statement
    // stays false because that short position is acceptable, outside the
    // zero-risk face, and every kernel gives it conditional expectation zero.
    auto tree = one_step<double>({2.0}, {{3.0}, {1.0}}, {0.4, 0.6});
    auto drm = riskhedge::build_dynamic(tree, cvar_spec(0.8));
    auto fr = riskhedge::verify_ftap(tree, drm, 16, 7);
    CHECK(fr.hypothesis_support);
    CHECK_FALSE(fr.na);
    CHECK(fr.polytopes_nonempty);
    CHECK(fr.polytopes_positive);
    CHECK_FALSE(fr.leg_iv.pass);
    CHECK_FALSE(fr.full_equivalence);
    CHECK(fr.leg_i.pass);
    CHECK(fr.ngd_all);  // no good deal despite the asymmetry
    CHECK(fr.consistent);
  }

  SECTION("thin support suspends the equivalence with a note") {
    auto tree = helpers::binomial_tree();
    riskhedge::RiskMeasureSpec<double> spec;
    spec.base.variant = RiskVariant::kernels;
    spec.base.per_node[0] = {{1.0, 0.0}};  // the down child carries no mass
    auto drm = riskhedge::build_dynamic(tree, spec);
    auto fr = riskhedge::verify_ftap(tree, drm, 8, 7);
    CHECK_FALSE(fr.hypothesis_support);
    CHECK_FALSE(fr.notes.empty());
    CHECK(fr.consistent);
  }
}

TEST_CASE("dual characterization across the random corpus", "[duality]") {
  std::mt19937_64 rng(90210);
  const RiskVariant variants[] = {RiskVariant::worst_case, RiskVariant::cvar,
                                  RiskVariant::kernels};
  int clean = 0, broken = 0;
  for (int trial = 0; trial < 110; ++trial) {
    helpers::CorpusConfig cfg;
    cfg.depth = 1 + trial % 2;
    cfg.variant = variants[trial % 3];
    cfg.alpha = 0.6 + 0.3 * (trial % 3) / 3.0;
    auto inst = helpers::random_na_instance(rng, cfg);

    const bool mutate = trial % 2 == 1;
    auto tree = mutate ? helpers::break_aip(inst.tree, rng) : inst.tree;
    auto drm = riskhedge::build_dynamic(tree, inst.spec);
    auto fr = riskhedge::verify_ftap(tree, drm, 6, 1234);
    INFO("trial " << trial << " mutated " << mutate);
    REQUIRE(fr.consistent);
    CHECK(fr.empties_match_aip);
    CHECK(fr.ngd_matches_aip);
    if (mutate) {
      CHECK_FALSE(fr.na);
      ++broken;
    } else {
      CHECK(fr.na);
      CHECK(fr.full_equivalence);
      ++clean;
    }
  }
  CHECK(clean >= 55);
  CHECK(broken >= 50);
}
