#ifndef BISG_HIERMODEL_HPP
#define BISG_HIERMODEL_HPP

#include <cstdint>
#include <vector>

#include "bisg/rng.hpp"
#include "bisg/types.hpp"

namespace bisg {

enum class PairSigmaRule { HalfSum, Fixed };

struct Hyperparams {
    std::vector<double> gamma;        // gamma_s, one per surname
    double eta_prior_shape = 1.0;     // Gamma(shape, rate) prior on eta
    double eta_prior_rate = 0.01;     // default: mean 100
    double proposal_sigma_eta = 1.0;
    PairSigmaRule pair_sigma_rule = PairSigmaRule::HalfSum;
    double pair_sigma_fixed = 0.01;   // used when rule is Fixed
    double eta_lower = 1e-8;
    double eta_upper = 1e12;

    // gamma_s = m_.s + 1 (empirical Bayes choice).
    static Hyperparams empirical_bayes(const SurnameCountMatrix& counts);
    // Alternative eta-prior preset: mean 1, variance 100.
    void use_diffuse_eta_prior() {
        eta_prior_shape = 0.01;
        eta_prior_rate = 0.01;
    }
    void validate(int num_surnames) const;
};

struct ModelState {
    std::vector<double> alpha;  // simplex over surnames
    double eta = 1.0;
};

struct SweepStats {
    double pair_accept_frac = 0.0;
    bool eta_accepted = false;
};

struct Chain {
    std::vector<ModelState> draws;
    std::vector<SweepStats> stats;
    std::uint64_t seed = 0;

    double mean_pair_accept() const;
    double mean_eta_accept() const;
};

struct PosteriorSummary {
    int num_strata = 0;
    int num_surnames = 0;
    // Dense [g * num_surnames + s] posterior means of theta_gs.
    std::vector<double> theta_hat;
    std::vector<double> rho_hat;    // per stratum
    std::vector<double> alpha_hat;  // per surname
    double eta_hat = 0.0;
    int burn_in = 0;
    double mean_pair_accept = 0.0;
    double mean_eta_accept = 0.0;

    double theta(int g, int s) const { return theta_hat[static_cast<std::size_t>(g) * num_surnames + s]; }
};

// Log of the unnormalized collapsed posterior over (alpha, eta), theta
// integrated out.  The Dirichlet normalizer enters once per stratum.
double log_marginal_posterior(const ModelState& state, const SurnameCountMatrix& counts,
                              const Hyperparams& hyper);
double log_marginal_posterior_serial(const ModelState& state,
                                     const SurnameCountMatrix& counts,
                                     const Hyperparams& hyper);

struct PairProposal {
    double alpha_i, alpha_j;
    double log_q_fwd, log_q_rev;
};

// Slope -1 segment move: the pair sum is preserved exactly and the step is
// a truncated normal along the segment between the box intersections.
PairProposal propose_alpha_pair(double alpha_i, double alpha_j, double li, double ui,
                                double lj, double uj, double sigma, Rng& rng);

struct EtaProposal {
    double eta;
    double log_q_fwd, log_q_rev;
};

// Log-normal step clamped to [lo, hi]; clamp boundaries carry atom mass.
EtaProposal propose_eta(double eta, double sigma, double lo, double hi, Rng& rng);

ModelState init_state(const SurnameCountMatrix& counts, const Hyperparams& hyper, Rng& rng);

ModelState mwg_sweep(const ModelState& state, const SurnameCountMatrix& counts,
                     const Hyperparams& hyper, Rng& rng, SweepStats& stats);

struct ChainConfig {
    int iters = 45000;
    std::uint64_t seed = 1;
};

Chain run_chain(const ModelState& init, const SurnameCountMatrix& counts,
                const Hyperparams& hyper, const ChainConfig& config);

PosteriorSummary posterior_summary(const Chain& chain, const SurnameCountMatrix& counts,
                                   int burn_in);

}  // namespace bisg

#endif
