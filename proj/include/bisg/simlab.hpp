#ifndef BISG_SIMLAB_HPP
#define BISG_SIMLAB_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bisg/design.hpp"
#include "bisg/rng.hpp"
#include "bisg/types.hpp"

namespace bisg {

struct SimConfig {
    int surname_count = 500;
    int name_length = 6;
    long long m = 50000;          // minority training records
    long long n_minority = 23530;  // N1 frame minority units
    long long n_majority = 1176500;  // N0, minority fraction ~0.02
    double beta = 1000.0;
    std::uint64_t seed = 1;
    int replicates = 20;
    long long sample_target = 1000;

    void validate() const;
};

struct SurnameUniverse {
    std::vector<std::string> names;
    std::vector<double> gamma;                // Exp(1) draws
    std::vector<std::vector<double>> theta;   // [stratum][surname]
};

SurnameUniverse gen_surname_universe(const SimConfig& config, const GeoPrior& prior, Rng& rng);

SurnameCountMatrix gen_minority_data(long long m, const SurnameUniverse& universe,
                                     const GeoPrior& prior, Rng& rng);

// Cell-level labeled frame: counts of minority/majority per (stratum, surname).
struct SimFrame {
    std::vector<std::vector<long long>> n1;  // [stratum][surname]
    std::vector<std::vector<long long>> n0;
    long long total1 = 0, total0 = 0;

    double true_p(int g, int s) const {
        const long long n = n1[g][s] + n0[g][s];
        return n == 0 ? 0.0 : static_cast<double>(n1[g][s]) / static_cast<double>(n);
    }
    long long stratum_total(int g) const;
};

// Pr(G|R=0) is implied by the prior: Pr(G) ~ Pr(G|R=1)/Pr(R=1|G).
std::vector<double> p_g_given_majority(const GeoPrior& prior);

SimFrame gen_frame(const SimConfig& config, const SurnameUniverse& universe,
                   const GeoPrior& prior, Rng& rng);

// Majority surname distribution nu = softmax(-beta * theta + eps).
std::vector<double> nu_from_theta(const std::vector<double>& theta_row, double beta,
                                  const std::vector<double>& eps);

enum class SimMethod { RandomPerState, PoissonTrue, PoissonEstimated };

struct YieldReport {
    struct PerMethod {
        std::string method;
        std::vector<double> yields;  // one per replicate
        double mean = 0.0, sd = 0.0;
    };
    std::vector<PerMethod> methods;
};

// Optional estimated probabilities, aligned (stratum, surname); empty means
// the PoissonEstimated method is skipped.
YieldReport run_comparison(const SimFrame& frame, const GeoPrior& prior, long long n_target,
                           const std::vector<SimMethod>& methods, int replicates,
                           const std::vector<std::vector<double>>& p_estimated, Rng& rng);

double tv_distance(const std::vector<double>& p, const std::vector<double>& q);
// Average per-stratum TV between estimated and true surname distributions,
// over strata with any training mass.
double mean_tv(const std::vector<std::vector<double>>& estimate,
               const std::vector<std::vector<double>>& truth);

// Expands the cell frame into a unit roster with true labels (small scales).
struct ExpandedFrame {
    UnitRoster roster;
    std::vector<std::uint8_t> minority;  // aligned with roster rows
    std::vector<double> true_p;          // cell truth per unit
};

ExpandedFrame expand_frame(const SimFrame& frame, const SurnameUniverse& universe,
                           const GeoPrior& prior);

}  // namespace bisg

#endif
