#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "bisg/simlab.hpp"

using namespace bisg;

namespace {

GeoPrior sim_prior() {
    GeoPrior prior;
    prior.strata = {"AA", "BB", "CC"};
    prior.p_r_given_g = {0.07, 0.03, 0.02};
    prior.p_g_given_r = {0.5, 0.3, 0.2};
    prior.rebuild_index();
    return prior;
}

SimConfig small_config() {
    SimConfig c;
    c.surname_count = 40;
    c.name_length = 5;
    c.m = 5000;
    c.n_minority = 2000;
    c.n_majority = 100000;
    c.beta = 1000.0;
    c.seed = 11;
    c.replicates = 10;
    c.sample_target = 500;
    return c;
}

}  // namespace

TEST_CASE("surname universe: unique names, simplex rows, determinism") {
    const GeoPrior prior = sim_prior();
    const SimConfig c = small_config();
    Rng rng(5);
    const SurnameUniverse u = gen_surname_universe(c, prior, rng);
    std::set<std::string> names(u.names.begin(), u.names.end());
    CHECK(names.size() == u.names.size());
    for (const auto& n : u.names) CHECK(n.size() == 5);
    REQUIRE(u.theta.size() == 3);
    for (const auto& row : u.theta) {
        double sum = 0.0;
        for (double x : row) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    Rng rng2(5);
    const SurnameUniverse v = gen_surname_universe(c, prior, rng2);
    CHECK(u.names == v.names);
    CHECK(u.theta == v.theta);
}

TEST_CASE("minority training data conserves totals") {
    const GeoPrior prior = sim_prior();
    const SimConfig c = small_config();
    Rng rng(7);
    const SurnameUniverse u = gen_surname_universe(c, prior, rng);
    const SurnameCountMatrix counts = gen_minority_data(c.m, u, prior, rng);
    CHECK(counts.total == c.m);
    long long by_strata = 0;
    for (long long t : counts.stratum_totals) by_strata += t;
    CHECK(by_strata == c.m);
    CHECK(counts.num_surnames() == c.surname_count);
}

TEST_CASE("majority stratum distribution follows the prior odds") {
    GeoPrior prior;
    prior.strata = {"AA", "BB"};
    prior.p_r_given_g = {0.5, 0.1};
    prior.p_g_given_r = {0.5, 0.5};
    prior.rebuild_index();
    const auto p0 = p_g_given_majority(prior);
    // proportional to (0.5/0.5)*0.5 : (0.5/0.1)*0.9 = 0.5 : 4.5.
    CHECK(p0[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(p0[1] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("softmax surname distribution for the majority") {
    const std::vector<double> theta{0.7, 0.3};
    const std::vector<double> eps{0.0, 0.0};
    const auto nu = nu_from_theta(theta, 1.0, eps);
    // exp(-0.7)/(exp(-0.7)+exp(-0.3)) = 1/(1+exp(0.4)).
    CHECK(nu[0] == doctest::Approx(1.0 / (1.0 + std::exp(0.4))).epsilon(1e-12));
    CHECK(nu[0] + nu[1] == doctest::Approx(1.0).epsilon(1e-14));
    // beta = 0 with no noise is uniform.
    const auto flat = nu_from_theta(theta, 0.0, eps);
    CHECK(flat[0] == doctest::Approx(0.5).epsilon(1e-14));
    // Large beta concentrates on low-theta surnames.
    const auto sharp = nu_from_theta(theta, 100.0, eps);
    CHECK(sharp[1] > 0.999);
}

TEST_CASE("frame generation conserves label totals and is deterministic") {
    const GeoPrior prior = sim_prior();
    const SimConfig c = small_config();
    Rng rng(13);
    const SurnameUniverse u = gen_surname_universe(c, prior, rng);
    const SimFrame f = gen_frame(c, u, prior, rng);
    CHECK(f.total1 == c.n_minority);
    CHECK(f.total0 == c.n_majority);
    long long grand = 0;
    for (int g = 0; g < 3; ++g) grand += f.stratum_total(g);
    CHECK(grand == c.n_minority + c.n_majority);
    for (int g = 0; g < 3; ++g)
        for (int s = 0; s < c.surname_count; ++s) {
            CHECK(f.true_p(g, s) >= 0.0);
            CHECK(f.true_p(g, s) <= 1.0);
        }

    Rng ra(13), rb(13);
    const SurnameUniverse ua = gen_surname_universe(c, prior, ra);
    const SurnameUniverse ub = gen_surname_universe(c, prior, rb);
    const SimFrame fa = gen_frame(c, ua, prior, ra);
    const SimFrame fb = gen_frame(c, ub, prior, rb);
    CHECK(fa.n1 == fb.n1);
    CHECK(fa.n0 == fb.n0);
}

TEST_CASE("yield comparison: probability-targeted sampling beats uniform draws") {
    const GeoPrior prior = sim_prior();
    const SimConfig c = small_config();
    Rng rng(17);
    const SurnameUniverse u = gen_surname_universe(c, prior, rng);
    const SimFrame f = gen_frame(c, u, prior, rng);
    Rng crng(19);
    const YieldReport report =
        run_comparison(f, prior, c.sample_target,
                       {SimMethod::RandomPerState, SimMethod::PoissonTrue}, c.replicates,
                       {}, crng);
    REQUIRE(report.methods.size() == 2);
    const auto& random = report.methods[0];
    const auto& poisson = report.methods[1];
    CHECK(random.method == "random_per_state");
    CHECK(poisson.method == "poisson_true");
    for (const auto& pm : report.methods) {
        CHECK(static_cast<int>(pm.yields.size()) == c.replicates);
        for (double y : pm.yields) {
            CHECK(y >= 0.0);
            CHECK(y <= 1.0);
        }
    }
    // Uniform within-stratum draws yield roughly the population fraction
    // (~0.02); probability-targeted Poisson sampling does far better.
    CHECK(random.mean < 0.1);
    CHECK(poisson.mean > random.mean + 0.05);

    Rng crng2(19);
    const YieldReport again =
        run_comparison(f, prior, c.sample_target,
                       {SimMethod::RandomPerState, SimMethod::PoissonTrue}, c.replicates,
                       {}, crng2);
    CHECK(again.methods[1].yields == poisson.yields);
}

TEST_CASE("estimated-probability method runs when estimates are supplied") {
    const GeoPrior prior = sim_prior();
    SimConfig c = small_config();
    c.replicates = 3;
    Rng rng(23);
    const SurnameUniverse u = gen_surname_universe(c, prior, rng);
    const SimFrame f = gen_frame(c, u, prior, rng);
    // Perfect estimates: results should behave like poisson_true.
    std::vector<std::vector<double>> p_est(3, std::vector<double>(c.surname_count));
    for (int g = 0; g < 3; ++g)
        for (int s = 0; s < c.surname_count; ++s) p_est[g][s] = f.true_p(g, s);
    Rng crng(29);
    const YieldReport report = run_comparison(
        f, prior, c.sample_target, {SimMethod::PoissonTrue, SimMethod::PoissonEstimated},
        c.replicates, p_est, crng);
    REQUIRE(report.methods.size() == 2);
    CHECK(report.methods[1].method == "poisson_estimated");
    CHECK(report.methods[1].mean == doctest::Approx(report.methods[0].mean).epsilon(0.2));

    // Without estimates the method is skipped.
    Rng crng2(29);
    const YieldReport skipped = run_comparison(
        f, prior, c.sample_target, {SimMethod::PoissonTrue, SimMethod::PoissonEstimated},
        c.replicates, {}, crng2);
    CHECK(skipped.methods.size() == 1);
}

TEST_CASE("total variation distance and stratum averaging") {
    CHECK(tv_distance({0.5, 0.5}, {0.8, 0.2}) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(tv_distance({0.1, 0.9}, {0.1, 0.9}) == 0.0);
    CHECK_THROWS(tv_distance({0.5, 0.5}, {1.0}));

    const std::vector<std::vector<double>> est = {{0.5, 0.5}, {0.0, 0.0}};
    const std::vector<std::vector<double>> truth = {{0.8, 0.2}, {0.5, 0.5}};
    CHECK(mean_tv(est, truth) == doctest::Approx(0.3).epsilon(1e-14));  // empty row skipped
    CHECK_THROWS(mean_tv({{0.0, 0.0}}, {{0.5, 0.5}}));
}

TEST_CASE("frame expansion produces one labeled unit per frame slot") {
    GeoPrior prior;
    prior.strata = {"AA"};
    prior.p_r_given_g = {0.1};
    prior.p_g_given_r = {1.0};
    prior.rebuild_index();
    SurnameUniverse u;
    u.names = {"QQQQQ", "RRRRR"};
    SimFrame f;
    f.n1 = {{2, 0}};
    f.n0 = {{1, 3}};
    f.total1 = 2;
    f.total0 = 4;
    const ExpandedFrame e = expand_frame(f, u, prior);
    REQUIRE(e.roster.rows.size() == 6);
    std::set<std::string> ids;
    long long minority = 0;
    for (std::size_t i = 0; i < e.roster.rows.size(); ++i) {
        ids.insert(e.roster.rows[i].unit_id);
        minority += e.minority[i];
        CHECK(e.true_p[i] == doctest::Approx(e.roster.rows[i].surname == "QQQQQ" ? 2.0 / 3.0 : 0.0));
    }
    CHECK(ids.size() == 6);
    CHECK(minority == 2);
    CHECK(e.roster.rows[0].unit_id == "AA:QQQQQ:m0");
}

TEST_CASE("simulation config validation") {
    SimConfig c = small_config();
    c.surname_count = 1;
    CHECK_THROWS(c.validate());
    c = small_config();
    c.replicates = 0;
    CHECK_THROWS(c.validate());
}
