#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bisg/design.hpp"
#include "bisg/rng.hpp"

using namespace bisg;

namespace {

GeoPrior make_prior(std::vector<double> p_r, std::vector<double> p_gr) {
    GeoPrior prior;
    for (std::size_t g = 0; g < p_r.size(); ++g) prior.strata.push_back("g" + std::to_string(g));
    prior.p_r_given_g = std::move(p_r);
    prior.p_g_given_r = std::move(p_gr);
    prior.rebuild_index();
    return prior;
}

FrameAggregate frame_with_totals(std::vector<long long> totals) {
    FrameAggregate frame;
    frame.num_strata = static_cast<int>(totals.size());
    frame.surnames = {"AAA"};
    frame.surname_index = {{"AAA", 0}};
    for (int g = 0; g < frame.num_strata; ++g) frame.cells.push_back({g, 0, totals[g]});
    frame.finalize();
    frame.filter = {1};
    return frame;
}

DesignTable table_from(std::vector<std::vector<DesignCell>> strata) {
    DesignTable t;
    t.strata = std::move(strata);
    return t;
}

}  // namespace

TEST_CASE("largest-remainder rounding is exact and tie-stable") {
    const auto out = largest_remainder_round({1.4, 1.4, 1.2}, 4);
    CHECK(out == std::vector<long long>{2, 1, 1});
    const auto big = largest_remainder_round({0.21, 0.29, 0.5}, 1000);
    CHECK(std::accumulate(big.begin(), big.end(), 0LL) == 1000);
    CHECK(big[2] == 500);
    CHECK_THROWS(largest_remainder_round({0.0, 0.0}, 5));
}

TEST_CASE("stratified allocation follows sqrt(p) N weights") {
    // N = (100, 100), p = (0.04, 0.01): weights 0.2*100 : 0.1*100 = 2 : 1.
    const GeoPrior prior = make_prior({0.04, 0.01}, {0.5, 0.5});
    const FrameAggregate frame = frame_with_totals({100, 100});
    const AllocationResult a = stratified_allocation(prior, frame, 30, false);
    CHECK(a.targets == std::vector<long long>{20, 10});
    CHECK(a.targets_real[0] == doctest::Approx(20.0));
    CHECK(a.targets_real[1] == doctest::Approx(10.0));
}

TEST_CASE("stratified allocation minimizes the variance proxy over compositions") {
    const GeoPrior prior = make_prior({0.04, 0.01, 0.09}, {0.4, 0.3, 0.3});
    const FrameAggregate frame = frame_with_totals({100, 300, 50});
    const long long n = 40;
    const AllocationResult a = stratified_allocation(prior, frame, n, false);
    const auto objective = [&](long long n0, long long n1, long long n2) {
        const double N[3] = {100, 300, 50};
        const double p[3] = {0.04, 0.01, 0.09};
        const long long ng[3] = {n0, n1, n2};
        double f = 0.0;
        for (int g = 0; g < 3; ++g) f += p[g] * N[g] * N[g] / static_cast<double>(ng[g]);
        return f;
    };
    const double fstar = objective(a.targets[0], a.targets[1], a.targets[2]);
    for (long long n0 = 1; n0 < n - 1; ++n0)
        for (long long n1 = 1; n0 + n1 < n; ++n1)
            CHECK(fstar <= objective(n0, n1, n - n0 - n1) + 1e-12);
}

TEST_CASE("stratified filtered allocation uses best-case rates on unfiltered totals") {
    const GeoPrior prior = make_prior({0.10, 0.10}, {0.5, 0.5});
    FrameAggregate frame;
    frame.num_strata = 2;
    frame.surnames = {"AAA", "BBB"};
    frame.surname_index = {{"AAA", 0}, {"BBB", 1}};
    // g0: 20 unfiltered of 100; g1: 100 unfiltered of 100.
    frame.cells = {{0, 0, 20}, {0, 1, 80}, {1, 0, 100}};
    frame.finalize();
    frame.filter = {1, 0};
    const AllocationResult a = stratified_allocation(prior, frame, 10, true);
    // p_best: g0 = min(100*0.1/20, 1) = 0.5; g1 = 0.1.
    // weights: sqrt(0.5)*20 : sqrt(0.1)*100 = 14.14 : 31.62.
    const double w0 = std::sqrt(0.5) * 20.0, w1 = std::sqrt(0.1) * 100.0;
    CHECK(a.targets_real[0] == doctest::Approx(10.0 * w0 / (w0 + w1)));
    CHECK(a.targets_real[1] == doctest::Approx(10.0 * w1 / (w0 + w1)));
}

TEST_CASE("success rate: hand value, count-scale invariance, homogeneity") {
    std::vector<DesignCell> cells = {{100, 0.9, 0.9}, {100, 0.1, 0.1}};
    CHECK(success_rate(cells) == doctest::Approx(0.82).epsilon(1e-14));
    CHECK(success_rate_serial(cells) == doctest::Approx(0.82).epsilon(1e-14));
    // Scaling all counts leaves the rate unchanged.
    std::vector<DesignCell> scaled = {{700, 0.9, 0.9}, {700, 0.1, 0.1}};
    CHECK(success_rate(scaled) == doctest::Approx(0.82).epsilon(1e-14));
    // A homogeneous stratum has success rate p.
    std::vector<DesignCell> homog = {{10, 0.37, 0.37}, {90, 0.37, 0.37}};
    CHECK(success_rate(homog) == doctest::Approx(0.37).epsilon(1e-14));
    CHECK_THROWS(success_rate({{10, 0.0, 0.0}}));
}

TEST_CASE("poisson allocation splits equally when pi(g)/sqrt(s_g) ties") {
    // pi = (0.8, 0.2) and per-stratum success rates (0.64, 0.04):
    // weights 0.8/0.8 = 0.2/0.2 = 1.
    const GeoPrior prior = make_prior({0.1, 0.1}, {0.8, 0.2});
    const DesignTable t = table_from({{{100, 0.64, 0.64}}, {{1000, 0.04, 0.04}}});
    const AllocationResult a = poisson_allocation(t, prior, 10, false);
    CHECK(a.targets == std::vector<long long>{5, 5});
    CHECK(a.clipped == std::vector<std::uint8_t>{0, 0});
}

TEST_CASE("poisson allocation clips to the feasibility bound and redistributes") {
    // Stratum 0 has only 2 units at p = 0.5: bound = sum(N p)/max_p = 2.
    const GeoPrior prior = make_prior({0.1, 0.1}, {0.9, 0.1});
    const DesignTable t = table_from({{{2, 0.5, 0.5}}, {{1000, 0.1, 0.1}}});
    const AllocationResult a = poisson_allocation(t, prior, 100, false);
    CHECK(a.clipped[0] == 1);
    CHECK(a.clipped[1] == 0);
    CHECK(a.targets == std::vector<long long>{2, 98});
    CHECK(a.clipped_mass > 0.0);
}

TEST_CASE("filtered poisson allocation weight formula") {
    const GeoPrior prior = make_prior({0.1, 0.1}, {0.5, 0.5});
    // g0: cells (10, 0.5), (40, 0.1); g1: one cell (100, 0.2).
    const DesignTable t = table_from({{{10, 0.5, 0.5}, {40, 0.1, 0.1}}, {{100, 0.2, 0.2}}});
    const double np0 = 10 * 0.5 + 40 * 0.1, np2_0 = 10 * 0.25 + 40 * 0.01;
    const double np1 = 100 * 0.2, np2_1 = 100 * 0.04;
    const double w0 = std::pow(np0, 1.5) / std::sqrt(np2_0);
    const double w1 = std::pow(np1, 1.5) / std::sqrt(np2_1);
    const AllocationResult a = poisson_allocation(t, prior, 10, true);
    CHECK(a.targets_real[0] == doctest::Approx(10.0 * w0 / (w0 + w1)));
    CHECK(a.targets_real[1] == doctest::Approx(10.0 * w1 / (w0 + w1)));
}

TEST_CASE("replication-bug allocation reproduces the documented formula") {
    const GeoPrior prior = make_prior({0.5, 0.1}, {0.6, 0.4});
    const DesignTable t = table_from({{{10, 0.1, 0.1}}, {{1000, 0.1, 0.1}}});
    const double w0 = std::sqrt(0.5 * 1.0);    // sqrt(p_r * sum Np)
    const double w1 = std::sqrt(0.1 * 100.0);
    const AllocationResult a = poisson_allocation(t, prior, 10, false, true);
    CHECK(a.targets_real[0] == doctest::Approx(10.0 * w0 / (w0 + w1)));
    CHECK(a.targets_real[1] == doctest::Approx(10.0 * w1 / (w0 + w1)));
}

TEST_CASE("sampling probabilities are proportional to p within a stratum") {
    const PiResult r = sampling_probabilities({0.9, 0.1}, {0, 0}, {1}, 1);
    CHECK(r.pi[0] == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(r.pi[1] == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(r.normalizer[0] == doctest::Approx(1.0));
    CHECK(r.capped == 0);
}

TEST_CASE("sampling probabilities cap at one while preserving the stratum total") {
    const PiResult r = sampling_probabilities({0.9, 0.3}, {0, 0}, {2}, 1);
    CHECK(r.pi[0] == 1.0);
    CHECK(r.pi[1] == 1.0);
    CHECK(r.capped == 2);

    // Random instances: totals preserved whenever feasible.
    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        const int n_units = 30;
        std::vector<double> p(n_units);
        std::vector<int> g(n_units);
        for (int i = 0; i < n_units; ++i) {
            p[i] = rng.uniform() * 0.999 + 0.001;
            g[i] = static_cast<int>(rng.next_u64() % 2);
        }
        std::vector<long long> targets{1 + static_cast<long long>(rng.next_u64() % 10),
                                       1 + static_cast<long long>(rng.next_u64() % 10)};
        const PiResult pr = sampling_probabilities(p, g, targets, 2);
        std::vector<double> sum(2, 0.0);
        std::vector<long long> count(2, 0);
        for (int i = 0; i < n_units; ++i) {
            CHECK(pr.pi[i] >= 0.0);
            CHECK(pr.pi[i] <= 1.0);
            sum[g[i]] += pr.pi[i];
            ++count[g[i]];
        }
        for (int s = 0; s < 2; ++s)
            if (targets[s] <= count[s])
                CHECK(sum[s] == doctest::Approx(static_cast<double>(targets[s])).epsilon(1e-12));
    }
    CHECK_THROWS(sampling_probabilities({0.0}, {0}, {1}, 1));
}

TEST_CASE("cell-level sampling probabilities preserve the stratum total") {
    const DesignTable t = table_from({{{50, 0.4, 0.4}, {200, 0.05, 0.05}}});
    const CellPiResult r = cell_sampling_probabilities(t, {12});
    double sum = 0.0;
    for (std::size_t i = 0; i < t.strata[0].size(); ++i)
        sum += static_cast<double>(t.strata[0][i].count) * r.pi[0][i];
    CHECK(sum == doctest::Approx(12.0).epsilon(1e-12));
    // Proportionality across cells.
    CHECK(r.pi[0][0] / r.pi[0][1] == doctest::Approx(0.4 / 0.05).epsilon(1e-12));
}

TEST_CASE("plan diagnostics: moment formulas at a hand-checked design") {
    // Single stratum, cells (1, 0.9) and (1, 0.1), target 1: pi = p.
    const GeoPrior prior = make_prior({0.5}, {1.0});
    const FrameAggregate frame = frame_with_totals({2});
    const DesignTable t = table_from({{{1, 0.9, 0.9}, {1, 0.1, 0.1}}});
    const PlanDiagnostics d = plan_diagnostics(t, {1}, prior, frame);
    CHECK(d.expected_n == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.var_n == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(d.expected_n1 == doctest::Approx(0.82).epsilon(1e-12));
    // Var(n1) = 0.81*0.19 + 0.01*0.99 = 0.1638.
    CHECK(d.var_n1 == doctest::Approx(0.1638).epsilon(1e-12));
    CHECK(d.expected_yield == doctest::Approx(0.82).epsilon(1e-12));
    CHECK(d.yield_variance ==
          doctest::Approx(0.1638 + 0.82 * 0.82 * 0.18).epsilon(1e-12));
    // SRS comparison: frame of 2 units with 1.0 expected minority.
    CHECK(d.srs_yield == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.srs_yield_variance == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d.stratified_yield == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("finite-population SRS yield variance") {
    // N = 1000, 20 expected minority, n = 100:
    // (0.02*0.98/100) * (900/999).
    const GeoPrior prior = make_prior({0.02}, {1.0});
    const FrameAggregate frame = frame_with_totals({1000});
    const DesignTable t = table_from({{{1000, 0.02, 0.02}}});
    const PlanDiagnostics d = plan_diagnostics(t, {100}, prior, frame);
    CHECK(d.srs_yield == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(d.srs_yield_variance ==
          doctest::Approx(0.02 * 0.98 / 100.0 * 900.0 / 999.0).epsilon(1e-12));
}

TEST_CASE("epsilon/delta sensitivity adds a synthetic cell per stratum") {
    const GeoPrior prior = make_prior({0.5}, {1.0});
    const FrameAggregate frame = frame_with_totals({10});  // 8 units uncovered
    const DesignTable t = table_from({{{1, 0.9, 0.9}, {1, 0.1, 0.1}}});
    SensitivityOptions sens;
    sens.epsilon = 0.01;
    sens.delta = 0.5;
    sens.enabled = true;
    const PlanDiagnostics d = plan_diagnostics(t, {1}, prior, frame, sens);
    // Normalizer grows to 1.08; all pi scale by 1/1.08.
    CHECK(d.expected_n == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.expected_n1 == doctest::Approx(0.86 / 1.08).epsilon(1e-12));
    CHECK(d.expected_yield == doctest::Approx(0.86 / 1.08).epsilon(1e-12));
}

TEST_CASE("draw_sample is deterministic, order-invariant, and unbiased") {
    UnitRoster roster;
    std::vector<double> pi;
    Rng rng(123);
    for (int i = 0; i < 400; ++i) {
        roster.rows.push_back({"unit-" + std::to_string(i), "", "AAA", i % 2, {}});
        pi.push_back(0.05 + 0.9 * rng.uniform());
    }
    const SampleDraw a = draw_sample(roster, pi, 42, 2);
    const SampleDraw b = draw_sample(roster, pi, 42, 2);
    REQUIRE(a.units.size() == b.units.size());
    for (std::size_t i = 0; i < a.units.size(); ++i)
        CHECK(a.units[i].unit_id == b.units[i].unit_id);
    const SampleDraw c = draw_sample(roster, pi, 43, 2);
    std::vector<std::string> ids_c;
    for (const auto& u : c.units) ids_c.push_back(u.unit_id);
    std::vector<std::string> ids_a0;
    for (const auto& u : a.units) ids_a0.push_back(u.unit_id);
    CHECK(ids_a0 != ids_c);  // different seed flips some inclusions

    // Reversing the roster yields the same included set.
    UnitRoster rev = roster;
    std::reverse(rev.rows.begin(), rev.rows.end());
    std::vector<double> rpi(pi.rbegin(), pi.rend());
    const SampleDraw d = draw_sample(rev, rpi, 42, 2);
    std::vector<std::string> ids_a, ids_d;
    for (const auto& u : a.units) ids_a.push_back(u.unit_id);
    for (const auto& u : d.units) ids_d.push_back(u.unit_id);
    std::sort(ids_a.begin(), ids_a.end());
    std::sort(ids_d.begin(), ids_d.end());
    CHECK(ids_a == ids_d);

    // Inclusion frequency of a single unit across seeds matches its pi.
    UnitRoster one;
    one.rows.push_back({"only-unit", "", "AAA", 0, {}});
    int hits = 0;
    const int n_seeds = 4000;
    for (int s = 0; s < n_seeds; ++s)
        hits += static_cast<int>(draw_sample(one, {0.3}, 1000 + s, 1).n);
    CHECK(std::abs(hits / static_cast<double>(n_seeds) - 0.3) <
          4.0 * std::sqrt(0.3 * 0.7 / n_seeds));
}

TEST_CASE("expected sample size matches the pi totals across seeds") {
    UnitRoster roster;
    std::vector<double> pi;
    Rng rng(9);
    double expected = 0.0;
    for (int i = 0; i < 200; ++i) {
        roster.rows.push_back({"u" + std::to_string(i), "", "AAA", 0, {}});
        pi.push_back(rng.uniform() * 0.5);
        expected += pi.back();
    }
    double mean_n = 0.0;
    const int n_seeds = 500;
    for (int s = 0; s < n_seeds; ++s)
        mean_n += static_cast<double>(draw_sample(roster, pi, 50000 + s, 1).n);
    mean_n /= n_seeds;
    // Var(n) <= sum pi(1-pi) <= expected; allow 5 standard errors.
    CHECK(std::abs(mean_n - expected) < 5.0 * std::sqrt(expected / n_seeds));
}

TEST_CASE("method names round-trip") {
    for (const char* name : {"srs", "stratified", "stratified_filtered", "poisson"})
        CHECK(method_name(parse_method(name)) == name);
    CHECK_THROWS(parse_method("bogus"));
}
