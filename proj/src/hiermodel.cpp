#include "bisg/hiermodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bisg/mathutil.hpp"
#include "bisg/parallel.hpp"

namespace bisg {

Hyperparams Hyperparams::empirical_bayes(const SurnameCountMatrix& counts) {
    Hyperparams h;
    h.gamma.resize(counts.num_surnames());
    for (int s = 0; s < counts.num_surnames(); ++s)
        h.gamma[s] = static_cast<double>(counts.surname_totals[s]) + 1.0;
    return h;
}

void Hyperparams::validate(int num_surnames) const {
    if (static_cast<int>(gamma.size()) != num_surnames)
        throw std::runtime_error("hyperparams: gamma size mismatch");
    for (double g : gamma)
        if (!(g >= 1.0)) throw std::runtime_error("hyperparams: gamma_s < 1");
    if (!(eta_prior_shape > 0.0 && eta_prior_rate > 0.0))
        throw std::runtime_error("hyperparams: nonpositive eta prior parameters");
    if (!(proposal_sigma_eta > 0.0))
        throw std::runtime_error("hyperparams: nonpositive eta proposal sigma");
    if (!(eta_lower > 0.0 && eta_lower < eta_upper))
        throw std::runtime_error("hyperparams: bad eta bounds");
}

double Chain::mean_pair_accept() const {
    if (stats.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : stats) acc += s.pair_accept_frac;
    return acc / static_cast<double>(stats.size());
}

double Chain::mean_eta_accept() const {
    if (stats.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : stats) acc += s.eta_accepted ? 1.0 : 0.0;
    return acc / static_cast<double>(stats.size());
}

namespace {

// eta prior log density, unnormalized.
inline double eta_log_prior(double eta, const Hyperparams& h) {
    return (h.eta_prior_shape - 1.0) * std::log(eta) - h.eta_prior_rate * eta;
}

// All eta-dependent terms of the collapsed log posterior at fixed alpha.
template <typename SumFn>
double eta_terms(double eta, const std::vector<double>& alpha,
                 const SurnameCountMatrix& counts, const Hyperparams& hyper,
                 SumFn cell_sum) {
    double lp = eta_log_prior(eta, hyper);
    const int L = counts.num_strata;
    lp += static_cast<double>(L) * std::lgamma(eta);
    for (int g = 0; g < L; ++g)
        lp -= std::lgamma(static_cast<double>(counts.stratum_totals[g]) + eta);
    lp += cell_sum(counts.cells.size(), [&](std::size_t i) {
        const auto& c = counts.cells[i];
        return log_rising(c.count, eta * alpha[c.surname]);
    });
    return lp;
}

template <typename SumFn>
double log_marginal_impl(const ModelState& state, const SurnameCountMatrix& counts,
                         const Hyperparams& hyper, SumFn cell_sum) {
    hyper.validate(counts.num_surnames());
    if (static_cast<int>(state.alpha.size()) != counts.num_surnames())
        throw std::runtime_error("state: alpha size mismatch");
    if (!(state.eta > 0.0)) throw std::runtime_error("state: eta <= 0");
    for (int s = 0; s < counts.num_surnames(); ++s)
        if (!(state.alpha[s] > 0.0) || !std::isfinite(std::log(state.alpha[s])))
            throw std::runtime_error("log_marginal_posterior: alpha underflow for surname " +
                                     counts.surnames[s]);
    double lp = eta_terms(state.eta, state.alpha, counts, hyper, cell_sum);
    for (std::size_t s = 0; s < state.alpha.size(); ++s)
        lp += (hyper.gamma[s] - 1.0) * std::log(state.alpha[s]);
    if (!std::isfinite(lp))
        throw std::runtime_error("log_marginal_posterior: nonfinite result");
    return lp;
}

}  // namespace

double log_marginal_posterior(const ModelState& state, const SurnameCountMatrix& counts,
                              const Hyperparams& hyper) {
    return log_marginal_impl(state, counts, hyper,
                             [](std::size_t n, auto f) { return chunked_sum(n, f); });
}

double log_marginal_posterior_serial(const ModelState& state,
                                     const SurnameCountMatrix& counts,
                                     const Hyperparams& hyper) {
    return log_marginal_impl(state, counts, hyper,
                             [](std::size_t n, auto f) { return chunked_sum_serial(n, f); });
}

PairProposal propose_alpha_pair(double alpha_i, double alpha_j, double li, double ui,
                                double lj, double uj, double sigma, Rng& rng) {
    if (!(sigma > 0.0)) throw std::domain_error("propose_alpha_pair: sigma <= 0");
    const double sum = alpha_i + alpha_j;
    // Intersections of the slope -1 line through (alpha_i, alpha_j) with the box.
    const auto seg = [&](double ai, double aj) {
        const double s = ai + aj;
        const double left_x = std::max(s - uj, li);
        const double right_x = std::min(s - lj, ui);
        // Signed distances along the segment, in (i-coordinate) * sqrt(2).
        const double l1 = (ai - left_x) * kSqrt2;
        const double l2 = (right_x - ai) * kSqrt2;
        return std::pair<double, double>(l1, l2);
    };
    const auto [L1, L2] = seg(alpha_i, alpha_j);
    PairProposal out;
    if (!(L1 + L2 > 0.0)) {
        out.alpha_i = alpha_i;
        out.alpha_j = alpha_j;
        out.log_q_fwd = out.log_q_rev = 0.0;
        return out;
    }
    const auto tn_logpdf = [&](double eps, double l1, double l2) {
        const double z = eps / sigma;
        const double mass = norm_cdf(l2 / sigma) - norm_cdf(-l1 / sigma);
        return norm_log_pdf(z) - std::log(sigma) - std::log(mass);
    };
    const double eps = sigma * rng.truncated_normal(-L1 / sigma, L2 / sigma);
    out.alpha_i = alpha_i + eps / kSqrt2;
    out.alpha_j = sum - out.alpha_i;
    out.log_q_fwd = tn_logpdf(eps, L1, L2);
    const auto [R1, R2] = seg(out.alpha_i, out.alpha_j);
    out.log_q_rev = tn_logpdf(-eps, R1, R2);
    return out;
}

EtaProposal propose_eta(double eta, double sigma, double lo, double hi, Rng& rng) {
    if (!(eta >= lo && eta <= hi)) throw std::domain_error("propose_eta: eta outside bounds");
    if (!(sigma > 0.0)) throw std::domain_error("propose_eta: sigma <= 0");
    const double x = sigma * rng.normal();
    const double raw = eta * std::exp(x);
    EtaProposal out;
    out.eta = std::clamp(raw, lo, hi);
    // Piecewise density: atom mass at a clamped bound, log-normal inside.
    const auto log_q = [&](double from, double to) {
        if (to >= hi) return norm_log_sf(std::log(hi / from) / sigma);
        if (to <= lo) return norm_log_cdf(std::log(lo / from) / sigma);
        return norm_log_pdf(std::log(to / from) / sigma) - std::log(sigma) - std::log(to);
    };
    out.log_q_fwd = log_q(eta, out.eta);
    out.log_q_rev = log_q(out.eta, eta);
    return out;
}

ModelState init_state(const SurnameCountMatrix& counts, const Hyperparams& hyper, Rng& rng) {
    ModelState st;
    const int S = counts.num_surnames();
    st.alpha.resize(S);
    double sum = 0.0;
    for (int s = 0; s < S; ++s) {
        st.alpha[s] = hyper.gamma[s] + static_cast<double>(rng.binomial(100, 0.5));
        sum += st.alpha[s];
    }
    for (double& a : st.alpha) a /= sum;
    st.eta = static_cast<double>(rng.binomial(100, 0.5)) + 1.0;
    return st;
}

ModelState mwg_sweep(const ModelState& state, const SurnameCountMatrix& counts,
                     const Hyperparams& hyper, Rng& rng, SweepStats& stats) {
    const int S = counts.num_surnames();
    ModelState cur = state;

    // Contribution of one surname's count column at a candidate alpha value.
    const auto column_terms = [&](int s, double alpha_s) {
        const auto [lo, hi] = counts.surname_span[s];
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i)
            acc += log_rising(counts.cells[i].count, cur.eta * alpha_s);
        return acc;
    };

    const std::vector<int> perm = rng.permutation(S);
    std::vector<std::pair<int, int>> pairs;
    for (int t = 0; t + 1 < S; t += 2) pairs.emplace_back(perm[t], perm[t + 1]);
    if (S % 2 == 1 && S >= 3) pairs.emplace_back(perm[S - 2], perm[S - 1]);

    int accepted = 0;
    for (const auto& [i, j] : pairs) {
        const double ai = cur.alpha[i], aj = cur.alpha[j];
        const double sigma = hyper.pair_sigma_rule == PairSigmaRule::HalfSum
                                 ? 0.5 * (ai + aj)
                                 : hyper.pair_sigma_fixed;
        if (!(sigma > 0.0)) continue;
        const PairProposal prop = propose_alpha_pair(ai, aj, 0.0, 1.0, 0.0, 1.0, sigma, rng);
        // Conditional-posterior ratio: only the pair's prior and count terms move.
        double log_ratio = (hyper.gamma[i] - 1.0) * (std::log(prop.alpha_i) - std::log(ai)) +
                           (hyper.gamma[j] - 1.0) * (std::log(prop.alpha_j) - std::log(aj));
        log_ratio += column_terms(i, prop.alpha_i) - column_terms(i, ai);
        log_ratio += column_terms(j, prop.alpha_j) - column_terms(j, aj);
        const double log_acc = log_ratio + prop.log_q_rev - prop.log_q_fwd;
        if (std::log(rng.uniform()) < log_acc) {
            cur.alpha[i] = prop.alpha_i;
            cur.alpha[j] = prop.alpha_j;
            ++accepted;
        }
    }
    stats.pair_accept_frac =
        pairs.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(pairs.size());

    const EtaProposal eprop =
        propose_eta(cur.eta, hyper.proposal_sigma_eta, hyper.eta_lower, hyper.eta_upper, rng);
    const auto cell_sum = [](std::size_t n, auto f) { return chunked_sum(n, f); };
    const double delta = eta_terms(eprop.eta, cur.alpha, counts, hyper, cell_sum) -
                         eta_terms(cur.eta, cur.alpha, counts, hyper, cell_sum);
    const double log_acc = delta + eprop.log_q_rev - eprop.log_q_fwd;
    stats.eta_accepted = std::log(rng.uniform()) < log_acc;
    if (stats.eta_accepted) cur.eta = eprop.eta;
    return cur;
}

Chain run_chain(const ModelState& init, const SurnameCountMatrix& counts,
                const Hyperparams& hyper, const ChainConfig& config) {
    if (config.iters < 1) throw std::runtime_error("run_chain: iters < 1");
    hyper.validate(counts.num_surnames());
    Rng rng(config.seed);
    Chain chain;
    chain.seed = config.seed;
    chain.draws.reserve(config.iters);
    chain.stats.reserve(config.iters);
    ModelState cur = init;
    for (int it = 0; it < config.iters; ++it) {
        SweepStats stats;
        cur = mwg_sweep(cur, counts, hyper, rng, stats);
        chain.draws.push_back(cur);
        chain.stats.push_back(stats);
    }
    return chain;
}

PosteriorSummary posterior_summary(const Chain& chain, const SurnameCountMatrix& counts,
                                   int burn_in) {
    const int n = static_cast<int>(chain.draws.size());
    if (burn_in < 0 || burn_in >= n)
        throw std::runtime_error("posterior_summary: burn_in out of range");
    const int B = n - burn_in;
    const int G = counts.num_strata;
    const int S = counts.num_surnames();

    PosteriorSummary out;
    out.num_strata = G;
    out.num_surnames = S;
    out.burn_in = burn_in;
    out.theta_hat.assign(static_cast<std::size_t>(G) * S, 0.0);
    out.rho_hat.assign(G, 0.0);
    out.alpha_hat.assign(S, 0.0);

    for (int b = burn_in; b < n; ++b) {
        out.eta_hat += chain.draws[b].eta;
        for (int s = 0; s < S; ++s) out.alpha_hat[s] += chain.draws[b].alpha[s];
    }
    out.eta_hat /= B;
    for (double& a : out.alpha_hat) a /= B;

    // theta_gs = m_gs / (m_g. + eta) + eta * alpha_s / (m_g. + eta), averaged
    // over draws.  Per-stratum loops are sequential in draw order so the
    // result is independent of the thread count.
    std::vector<double> inv_mean_g(G, 0.0);
    parallel_for(static_cast<std::size_t>(G), [&](std::size_t gi) {
        const int g = static_cast<int>(gi);
        const double mg = static_cast<double>(counts.stratum_totals[g]);
        double* theta_row = &out.theta_hat[static_cast<std::size_t>(g) * S];
        double rho = 0.0;
        for (int b = burn_in; b < n; ++b) {
            const ModelState& st = chain.draws[b];
            const double denom = 1.0 / (mg + st.eta);
            const double w = st.eta * denom;
            rho += w;
            for (int s = 0; s < S; ++s) theta_row[s] += w * st.alpha[s];
        }
        rho /= B;
        for (int s = 0; s < S; ++s) theta_row[s] /= B;
        out.rho_hat[g] = rho;
        double inv_mean = 0.0;
        for (int b = burn_in; b < n; ++b) inv_mean += 1.0 / (mg + chain.draws[b].eta);
        inv_mean_g[g] = inv_mean / B;
    });
    // The count part only touches nonzero cells.
    for (const auto& c : counts.cells)
        out.theta_hat[static_cast<std::size_t>(c.stratum) * S + c.surname] +=
            static_cast<double>(c.count) * inv_mean_g[c.stratum];

    out.mean_pair_accept = chain.mean_pair_accept();
    out.mean_eta_accept = chain.mean_eta_accept();
    return out;
}

}  // namespace bisg
