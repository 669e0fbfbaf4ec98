#ifndef BISG_DESIGN_HPP
#define BISG_DESIGN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bisg/bisg_table.hpp"
#include "bisg/types.hpp"

namespace bisg {

enum class Method { Srs, Stratified, StratifiedFiltered, Poisson };

Method parse_method(const std::string& name);
std::string method_name(Method m);

// Per-stratum surname cells carrying the estimated inclusion driver and,
// when known (simulation), the true minority probability.
struct DesignCell {
    long long count;
    double p_est;
    double p_true;
};

struct DesignTable {
    std::vector<std::vector<DesignCell>> strata;

    int num_strata() const { return static_cast<int>(strata.size()); }
};

// Builds cells from the frame and assembled surname layer.  When filtered,
// surnames with H(s)=0 are omitted (their inclusion probability is 0);
// unfiltered keeps them with p_est = 0.
DesignTable design_table(const BisgTable& bisg, const FrameAggregate& frame, bool filtered);

// Largest-remainder rounding of proportional weights to integers summing to n.
std::vector<long long> largest_remainder_round(const std::vector<double>& weights,
                                               long long n);

struct AllocationResult {
    std::vector<double> targets_real;
    std::vector<long long> targets;
    std::vector<std::uint8_t> clipped;  // Poisson feasibility clip report
    double clipped_mass = 0.0;
};

// n_g proportional to sqrt(Pr(R=1|g)) * N_g; the filtered variant replaces
// N_g by the unfiltered-surname total and p by the best-case rate.
AllocationResult stratified_allocation(const GeoPrior& prior, const FrameAggregate& frame,
                                       long long n, bool filtered);

// n_g proportional to Pr(G=g|R=1)/sqrt(success_g), or for the filtered
// variant pi*(g)^{3/2}/sqrt(sum_s N_gs p^2); each target then clipped to
// the feasibility bound pi(g)/max_p with proportional redistribution.
AllocationResult poisson_allocation(const DesignTable& cells, const GeoPrior& prior,
                                    long long n, bool filtered,
                                    bool replication_bug_allocation = false);

// Expected fraction of sampled units that are minority; free of n_g.
double success_rate(const std::vector<DesignCell>& cells);
double success_rate_serial(const std::vector<DesignCell>& cells);

struct PiResult {
    std::vector<double> pi;
    std::vector<double> normalizer;  // pi(g) per stratum, pre-capping
    long long capped = 0;
};

// Per-unit pi_i = n_g * p_i / pi(g) with iterative capping at 1 preserving
// per-stratum totals.  Values aligned with the input vectors.
PiResult sampling_probabilities(const std::vector<double>& p_est,
                                const std::vector<int>& stratum_of,
                                const std::vector<long long>& targets, int num_strata);

// Cell-level equivalent used at simulation scale.
struct CellPiResult {
    std::vector<std::vector<double>> pi;  // aligned with DesignTable cells
    std::vector<double> normalizer;
    long long capped_cells = 0;
};

CellPiResult cell_sampling_probabilities(const DesignTable& cells,
                                         const std::vector<long long>& targets);

struct StratumDiagnostics {
    double expected_n = 0.0;
    double var_n = 0.0;
    double expected_n1 = 0.0;
    double var_n1 = 0.0;
    double expected_yield = 0.0;
};

struct PlanDiagnostics {
    std::vector<StratumDiagnostics> strata;
    double expected_n = 0.0;
    double var_n = 0.0;
    double expected_n1 = 0.0;
    double var_n1 = 0.0;
    double expected_yield = 0.0;
    double yield_variance = 0.0;  // conservative two-term delta method
    // Method comparison at the same total n.
    double srs_yield = 0.0, srs_yield_variance = 0.0;
    double stratified_yield = 0.0, stratified_filtered_yield = 0.0;
};

struct SensitivityOptions {
    double epsilon = 0.0;  // assumed sampling probability for unobserved surnames
    double delta = 0.0;    // assumed true minority probability for them
    bool enabled = false;
};

PlanDiagnostics plan_diagnostics(const DesignTable& cells,
                                 const std::vector<long long>& targets,
                                 const GeoPrior& prior, const FrameAggregate& frame,
                                 const SensitivityOptions& sens = {});

struct SamplingPlan {
    Method method = Method::Poisson;
    bool filtered = false;
    long long n_total = 0;
    std::vector<long long> targets;
    std::vector<double> targets_real;
    std::vector<double> normalizer;
    std::vector<std::uint8_t> clipped;
    double clipped_mass = 0.0;
    long long capped_units = 0;
    PlanDiagnostics diagnostics;
};

struct SampleDraw {
    struct Unit {
        std::string unit_id;
        int stratum;
        double pi;
    };
    std::vector<Unit> units;
    std::uint64_t seed = 0;
    long long n = 0;
    std::vector<long long> n_g;
};

// Poisson draw keyed by (seed, unit_id); order- and partition-invariant.
SampleDraw draw_sample(const UnitRoster& roster, const std::vector<double>& pi,
                       std::uint64_t seed, int num_strata);

}  // namespace bisg

#endif
