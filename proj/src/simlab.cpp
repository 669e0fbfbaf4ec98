#include "bisg/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace bisg {

void SimConfig::validate() const {
    if (surname_count < 2) throw std::runtime_error("sim: surname_count < 2");
    if (name_length < 1) throw std::runtime_error("sim: name_length < 1");
    if (m < 1 || n_minority < 1 || n_majority < 1)
        throw std::runtime_error("sim: nonpositive population size");
    if (replicates < 1) throw std::runtime_error("sim: replicates < 1");
    if (sample_target < 1) throw std::runtime_error("sim: sample_target < 1");
}

SurnameUniverse gen_surname_universe(const SimConfig& config, const GeoPrior& prior, Rng& rng) {
    config.validate();
    SurnameUniverse u;
    std::unordered_set<std::string> seen;
    for (int s = 0; s < config.surname_count; ++s) {
        std::string name;
        int tries = 0;
        do {
            if (++tries > 1000)
                throw std::runtime_error("gen_surname_universe: name collision limit");
            name.clear();
            for (int k = 0; k < config.name_length; ++k)
                name += static_cast<char>('A' + rng.next_u64() % 26);
        } while (!seen.insert(name).second);
        u.names.push_back(name);
    }
    u.gamma.resize(config.surname_count);
    for (double& g : u.gamma) g = rng.exponential();
    u.theta.resize(prior.num_strata());
    for (auto& row : u.theta) {
        row.resize(config.surname_count);
        double sum = 0.0;
        for (int s = 0; s < config.surname_count; ++s) {
            row[s] = rng.gamma(u.gamma[s]);
            sum += row[s];
        }
        if (!(sum > 0.0)) throw std::runtime_error("gen_surname_universe: degenerate Dirichlet draw");
        for (double& x : row) x /= sum;
    }
    return u;
}

SurnameCountMatrix gen_minority_data(long long m, const SurnameUniverse& universe,
                                     const GeoPrior& prior, Rng& rng) {
    SurnameCountMatrix counts;
    counts.num_strata = prior.num_strata();
    for (const auto& name : universe.names) counts.intern_surname(name);
    const std::vector<long long> per_stratum = rng.multinomial(m, prior.p_g_given_r);
    for (int g = 0; g < prior.num_strata(); ++g) {
        if (per_stratum[g] == 0) continue;
        const std::vector<long long> per_surname =
            rng.multinomial(per_stratum[g], universe.theta[g]);
        for (std::size_t s = 0; s < per_surname.size(); ++s)
            if (per_surname[s] > 0) counts.add(g, static_cast<int>(s), per_surname[s]);
    }
    counts.finalize();
    return counts;
}

std::vector<double> p_g_given_majority(const GeoPrior& prior) {
    // Pr(G) ~ Pr(G|R=1)/Pr(R=1|G); Pr(G|R=0) ~ Pr(G) * (1 - Pr(R=1|G)).
    std::vector<double> out(prior.num_strata());
    double sum = 0.0;
    for (int g = 0; g < prior.num_strata(); ++g) {
        out[g] = prior.p_g_given_r[g] / prior.p_r_given_g[g] * (1.0 - prior.p_r_given_g[g]);
        sum += out[g];
    }
    for (double& x : out) x /= sum;
    return out;
}

std::vector<double> nu_from_theta(const std::vector<double>& theta_row, double beta,
                                  const std::vector<double>& eps) {
    std::vector<double> nu(theta_row.size());
    double max_log = -1e300;
    for (std::size_t s = 0; s < nu.size(); ++s) {
        nu[s] = -beta * theta_row[s] + eps[s];
        max_log = std::max(max_log, nu[s]);
    }
    double sum = 0.0;
    for (double& x : nu) {
        x = std::exp(x - max_log);
        sum += x;
    }
    for (double& x : nu) x /= sum;
    return nu;
}

SimFrame gen_frame(const SimConfig& config, const SurnameUniverse& universe,
                   const GeoPrior& prior, Rng& rng) {
    const int L = prior.num_strata();
    const int S = config.surname_count;
    SimFrame frame;
    frame.n1.assign(L, std::vector<long long>(S, 0));
    frame.n0.assign(L, std::vector<long long>(S, 0));

    const std::vector<long long> minority_g = rng.multinomial(config.n_minority, prior.p_g_given_r);
    for (int g = 0; g < L; ++g) {
        if (minority_g[g] == 0) continue;
        const auto counts = rng.multinomial(minority_g[g], universe.theta[g]);
        for (int s = 0; s < S; ++s) frame.n1[g][s] = counts[s];
        frame.total1 += minority_g[g];
    }

    const std::vector<long long> majority_g =
        rng.multinomial(config.n_majority, p_g_given_majority(prior));
    std::vector<double> eps(S);
    for (int g = 0; g < L; ++g) {
        for (double& e : eps) e = rng.normal();
        if (majority_g[g] == 0) continue;
        const std::vector<double> nu = nu_from_theta(universe.theta[g], config.beta, eps);
        const auto counts = rng.multinomial(majority_g[g], nu);
        for (int s = 0; s < S; ++s) frame.n0[g][s] = counts[s];
        frame.total0 += majority_g[g];
    }
    return frame;
}

long long SimFrame::stratum_total(int g) const {
    long long total = 0;
    for (std::size_t s = 0; s < n1[g].size(); ++s) total += n1[g][s] + n0[g][s];
    return total;
}

namespace {

DesignTable frame_design_table(const SimFrame& frame,
                               const std::vector<std::vector<double>>& p_est) {
    DesignTable t;
    const int L = static_cast<int>(frame.n1.size());
    t.strata.resize(L);
    for (int g = 0; g < L; ++g) {
        const int S = static_cast<int>(frame.n1[g].size());
        for (int s = 0; s < S; ++s) {
            const long long n = frame.n1[g][s] + frame.n0[g][s];
            if (n == 0) continue;
            const double pt = frame.true_p(g, s);
            const double pe = p_est.empty() ? pt : p_est[g][s];
            t.strata[g].push_back({n, pe, pt});
        }
    }
    return t;
}

// Minority count of a uniform without-replacement draw of k from a stratum.
long long hypergeometric_minority(long long k, long long n1, long long n0, Rng& rng) {
    long long hits = 0;
    for (long long i = 0; i < k && n1 + n0 > 0; ++i) {
        if (rng.uniform() * static_cast<double>(n1 + n0) < static_cast<double>(n1)) {
            ++hits;
            --n1;
        } else {
            --n0;
        }
    }
    return hits;
}

std::string sim_method_name(SimMethod m) {
    switch (m) {
        case SimMethod::RandomPerState: return "random_per_state";
        case SimMethod::PoissonTrue: return "poisson_true";
        case SimMethod::PoissonEstimated: return "poisson_estimated";
    }
    return "?";
}

}  // namespace

YieldReport run_comparison(const SimFrame& frame, const GeoPrior& prior, long long n_target,
                           const std::vector<SimMethod>& methods, int replicates,
                           const std::vector<std::vector<double>>& p_estimated, Rng& rng) {
    const int L = prior.num_strata();
    // All methods share the allocation computed from true probabilities, so
    // yield differences isolate the within-stratum sampling rule.
    const DesignTable truth_table = frame_design_table(frame, {});
    const AllocationResult alloc = poisson_allocation(truth_table, prior, n_target, false);

    const CellPiResult pi_true = cell_sampling_probabilities(truth_table, alloc.targets);
    CellPiResult pi_est;
    DesignTable est_table;
    if (!p_estimated.empty()) {
        est_table = frame_design_table(frame, p_estimated);
        pi_est = cell_sampling_probabilities(est_table, alloc.targets);
    }

    YieldReport report;
    for (const SimMethod method : methods) {
        if (method == SimMethod::PoissonEstimated && p_estimated.empty()) continue;
        YieldReport::PerMethod pm;
        pm.method = sim_method_name(method);
        for (int rep = 0; rep < replicates; ++rep) {
            Rng rrng(rng.derive(static_cast<std::uint64_t>(rep) * 131 +
                                static_cast<std::uint64_t>(method) + 1));
            long long sampled = 0, minority = 0;
            if (method == SimMethod::RandomPerState) {
                for (int g = 0; g < L; ++g) {
                    long long n1g = 0, n0g = 0;
                    for (std::size_t s = 0; s < frame.n1[g].size(); ++s) {
                        n1g += frame.n1[g][s];
                        n0g += frame.n0[g][s];
                    }
                    const long long k = std::min(alloc.targets[g], n1g + n0g);
                    minority += hypergeometric_minority(k, n1g, n0g, rrng);
                    sampled += k;
                }
            } else {
                const DesignTable& table =
                    method == SimMethod::PoissonTrue ? truth_table : est_table;
                const CellPiResult& pi = method == SimMethod::PoissonTrue ? pi_true : pi_est;
                for (int g = 0; g < L; ++g) {
                    std::size_t ci = 0;
                    for (std::size_t s = 0; s < frame.n1[g].size(); ++s) {
                        const long long n = frame.n1[g][s] + frame.n0[g][s];
                        if (n == 0) continue;
                        const double prob = pi.pi[g][ci];
                        if (prob > 0.0) {
                            const long long s1 = rrng.binomial(frame.n1[g][s], prob);
                            const long long s0 = rrng.binomial(frame.n0[g][s], prob);
                            minority += s1;
                            sampled += s1 + s0;
                        }
                        ++ci;
                    }
                    (void)table;
                }
            }
            pm.yields.push_back(sampled > 0 ? static_cast<double>(minority) /
                                                  static_cast<double>(sampled)
                                            : 0.0);
        }
        double mean = 0.0;
        for (double y : pm.yields) mean += y;
        mean /= static_cast<double>(pm.yields.size());
        double var = 0.0;
        for (double y : pm.yields) var += (y - mean) * (y - mean);
        pm.mean = mean;
        pm.sd = pm.yields.size() > 1
                    ? std::sqrt(var / (static_cast<double>(pm.yields.size()) - 1.0))
                    : 0.0;
        report.methods.push_back(std::move(pm));
    }
    return report;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::runtime_error("tv_distance: support mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

double mean_tv(const std::vector<std::vector<double>>& estimate,
               const std::vector<std::vector<double>>& truth) {
    if (estimate.size() != truth.size()) throw std::runtime_error("mean_tv: strata mismatch");
    double acc = 0.0;
    int used = 0;
    for (std::size_t g = 0; g < estimate.size(); ++g) {
        double mass = 0.0;
        for (double x : estimate[g]) mass += x;
        if (!(mass > 0.0)) continue;  // stratum without estimate (no data)
        acc += tv_distance(estimate[g], truth[g]);
        ++used;
    }
    if (used == 0) throw std::runtime_error("mean_tv: no covered strata");
    return acc / static_cast<double>(used);
}

ExpandedFrame expand_frame(const SimFrame& frame, const SurnameUniverse& universe,
                           const GeoPrior& prior) {
    ExpandedFrame out;
    const int L = prior.num_strata();
    for (int g = 0; g < L; ++g) {
        for (std::size_t s = 0; s < frame.n1[g].size(); ++s) {
            const double pt = frame.true_p(g, static_cast<int>(s));
            for (int label = 1; label >= 0; --label) {
                const long long n = label ? frame.n1[g][s] : frame.n0[g][s];
                for (long long k = 0; k < n; ++k) {
                    UnitRoster::Row row;
                    row.unit_id = prior.strata[g] + ":" + universe.names[s] + ":" +
                                  (label ? "m" : "j") + std::to_string(k);
                    row.surname = universe.names[s];
                    row.stratum = g;
                    out.roster.rows.push_back(std::move(row));
                    out.minority.push_back(static_cast<std::uint8_t>(label));
                    out.true_p.push_back(pt);
                }
            }
        }
    }
    return out;
}

}  // namespace bisg
