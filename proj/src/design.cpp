#include "bisg/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bisg/parallel.hpp"

namespace bisg {

Method parse_method(const std::string& name) {
    if (name == "srs") return Method::Srs;
    if (name == "stratified") return Method::Stratified;
    if (name == "stratified_filtered") return Method::StratifiedFiltered;
    if (name == "poisson") return Method::Poisson;
    throw std::runtime_error("unknown method: " + name);
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Srs: return "srs";
        case Method::Stratified: return "stratified";
        case Method::StratifiedFiltered: return "stratified_filtered";
        case Method::Poisson: return "poisson";
    }
    return "?";
}

DesignTable design_table(const BisgTable& bisg, const FrameAggregate& frame, bool filtered) {
    DesignTable t;
    t.strata.resize(frame.num_strata);
    for (const auto& c : bisg.cells) {
        const bool observed = c.p_surname > 0.0 ||
                              (!frame.filter.empty() && frame.filter[c.surname]);
        if (filtered && !observed) continue;
        const long long count = frame.count_at(c.stratum, c.surname);
        if (count <= 0) continue;
        t.strata[c.stratum].push_back({count, c.p_surname, c.p_surname});
    }
    return t;
}

std::vector<long long> largest_remainder_round(const std::vector<double>& weights,
                                               long long n) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw std::runtime_error("allocation: zero total weight");
    const std::size_t k = weights.size();
    std::vector<long long> out(k, 0);
    std::vector<std::pair<double, std::size_t>> frac(k);
    long long assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double quota = static_cast<double>(n) * weights[i] / total;
        out[i] = static_cast<long long>(std::floor(quota));
        assigned += out[i];
        frac[i] = {quota - std::floor(quota), i};
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (long long r = 0; r < n - assigned; ++r) ++out[frac[static_cast<std::size_t>(r)].second];
    return out;
}

AllocationResult stratified_allocation(const GeoPrior& prior, const FrameAggregate& frame,
                                       long long n, bool filtered) {
    const int L = prior.num_strata();
    if (n < L) throw std::runtime_error("stratified_allocation: n < number of strata");
    std::vector<double> weights(L, 0.0);
    if (!filtered) {
        for (int g = 0; g < L; ++g)
            weights[g] = std::sqrt(prior.p_r_given_g[g]) *
                         static_cast<double>(frame.stratum_totals[g]);
    } else {
        // Best case: filtering removes only majority units, so the full
        // minority mass concentrates on the unfiltered totals.
        std::vector<long long> unfiltered_totals(L, 0);
        for (const auto& c : frame.cells)
            if (!frame.filter.empty() && frame.filter[c.surname])
                unfiltered_totals[c.stratum] += c.count;
        for (int g = 0; g < L; ++g) {
            if (unfiltered_totals[g] == 0) continue;
            const double p_best = std::min(
                static_cast<double>(frame.stratum_totals[g]) * prior.p_r_given_g[g] /
                    static_cast<double>(unfiltered_totals[g]),
                1.0);
            weights[g] = std::sqrt(p_best) * static_cast<double>(unfiltered_totals[g]);
        }
    }
    AllocationResult out;
    out.targets_real.resize(L);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw std::runtime_error("stratified_allocation: zero denominator");
    for (int g = 0; g < L; ++g)
        out.targets_real[g] = static_cast<double>(n) * weights[g] / total;
    out.targets = largest_remainder_round(weights, n);
    out.clipped.assign(L, 0);
    return out;
}

double success_rate(const std::vector<DesignCell>& cells) {
    const double num = chunked_sum(cells.size(), [&](std::size_t i) {
        return static_cast<double>(cells[i].count) * cells[i].p_est * cells[i].p_est;
    });
    const double den = chunked_sum(cells.size(), [&](std::size_t i) {
        return static_cast<double>(cells[i].count) * cells[i].p_est;
    });
    if (!(den > 0.0)) throw std::runtime_error("success_rate: zero denominator");
    return num / den;
}

double success_rate_serial(const std::vector<DesignCell>& cells) {
    double num = 0.0, den = 0.0;
    for (const auto& c : cells) {
        num += static_cast<double>(c.count) * c.p_est * c.p_est;
        den += static_cast<double>(c.count) * c.p_est;
    }
    if (!(den > 0.0)) throw std::runtime_error("success_rate: zero denominator");
    return num / den;
}

AllocationResult poisson_allocation(const DesignTable& cells, const GeoPrior& prior,
                                    long long n, bool filtered,
                                    bool replication_bug_allocation) {
    const int L = prior.num_strata();
    if (cells.num_strata() != L) throw std::runtime_error("poisson_allocation: table size mismatch");
    std::vector<double> weights(L, 0.0), norm(L, 0.0), max_p(L, 0.0);
    for (int g = 0; g < L; ++g) {
        double sum_np = 0.0, sum_np2 = 0.0;
        for (const auto& c : cells.strata[g]) {
            sum_np += static_cast<double>(c.count) * c.p_est;
            sum_np2 += static_cast<double>(c.count) * c.p_est * c.p_est;
            max_p[g] = std::max(max_p[g], c.p_est);
        }
        norm[g] = sum_np;
        if (sum_np <= 0.0) {
            if (prior.p_g_given_r[g] > 1e-12)
                throw std::runtime_error("poisson_allocation: all-zero probabilities in stratum " +
                                         prior.strata[g]);
            continue;
        }
        if (replication_bug_allocation) {
            weights[g] = std::sqrt(prior.p_r_given_g[g] * sum_np);
        } else if (filtered) {
            weights[g] = std::pow(sum_np, 1.5) / std::sqrt(sum_np2);
        } else {
            weights[g] = prior.p_g_given_r[g] / std::sqrt(sum_np2 / sum_np);
        }
    }

    const double wtotal = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(wtotal > 0.0)) throw std::runtime_error("poisson_allocation: zero total weight");
    AllocationResult out;
    out.targets_real.resize(L);
    out.clipped.assign(L, 0);
    for (int g = 0; g < L; ++g)
        out.targets_real[g] = static_cast<double>(n) * weights[g] / wtotal;

    // Feasibility bound n_g <= pi(g)/max_p keeps every pi_i <= 1; clipped
    // mass is redistributed proportionally among unclipped strata.
    std::vector<double> bound(L, 0.0);
    for (int g = 0; g < L; ++g)
        bound[g] = max_p[g] > 0.0 ? norm[g] / max_p[g]
                                  : static_cast<double>(n);
    for (;;) {
        double clipped_total = 0.0, free_weight = 0.0;
        for (int g = 0; g < L; ++g)
            (out.clipped[g] ? clipped_total += bound[g] : free_weight += weights[g]);
        if (!(free_weight > 0.0)) break;
        const double remaining = static_cast<double>(n) - clipped_total;
        bool changed = false;
        for (int g = 0; g < L; ++g) {
            if (out.clipped[g]) {
                out.targets_real[g] = bound[g];
                continue;
            }
            out.targets_real[g] = remaining * weights[g] / free_weight;
            if (out.targets_real[g] > bound[g] * (1.0 + 1e-12)) {
                out.clipped[g] = 1;
                out.clipped_mass += out.targets_real[g] - bound[g];
                changed = true;
            }
        }
        if (!changed) break;
    }
    out.targets = largest_remainder_round(out.targets_real, n);
    return out;
}

namespace {

// Iterative capping to a fixed point: capped entries hold probability 1 and
// the rest rescale to keep the stratum total.
template <typename GetP, typename GetCount, typename SetPi>
long long cap_stratum(double target, std::size_t ncells, GetP p, GetCount cnt, SetPi set_pi) {
    std::vector<std::uint8_t> capped(ncells, 0);
    long long ncapped = 0;
    for (;;) {
        double capped_mass = 0.0, free_p = 0.0;
        for (std::size_t i = 0; i < ncells; ++i)
            (capped[i] ? capped_mass += static_cast<double>(cnt(i))
                       : free_p += static_cast<double>(cnt(i)) * p(i));
        const double residual = target - capped_mass;
        if (residual <= 0.0 || !(free_p > 0.0)) {
            for (std::size_t i = 0; i < ncells; ++i)
                if (!capped[i]) set_pi(i, 0.0);
            break;
        }
        const double scale = residual / free_p;
        bool changed = false;
        for (std::size_t i = 0; i < ncells; ++i) {
            if (capped[i]) continue;
            const double pi = p(i) * scale;
            if (pi >= 1.0) {
                capped[i] = 1;
                ncapped += cnt(i);
                changed = true;
            } else {
                set_pi(i, pi);
            }
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < ncells; ++i)
        if (capped[i]) set_pi(i, 1.0);
    return ncapped;
}

}  // namespace

PiResult sampling_probabilities(const std::vector<double>& p_est,
                                const std::vector<int>& stratum_of,
                                const std::vector<long long>& targets, int num_strata) {
    if (p_est.size() != stratum_of.size())
        throw std::runtime_error("sampling_probabilities: size mismatch");
    PiResult out;
    out.pi.assign(p_est.size(), 0.0);
    out.normalizer.assign(num_strata, 0.0);
    std::vector<std::vector<std::size_t>> by_stratum(num_strata);
    for (std::size_t i = 0; i < p_est.size(); ++i) {
        const int g = stratum_of[i];
        if (g < 0 || g >= num_strata) throw std::runtime_error("sampling_probabilities: bad stratum");
        out.normalizer[g] += p_est[i];
        by_stratum[g].push_back(i);
    }
    for (int g = 0; g < num_strata; ++g) {
        if (targets[g] == 0) continue;
        if (!(out.normalizer[g] > 0.0))
            throw std::runtime_error("sampling_probabilities: pi(g)=0 with positive target in stratum " +
                                     std::to_string(g));
        const auto& idx = by_stratum[g];
        out.capped += cap_stratum(
            static_cast<double>(targets[g]), idx.size(),
            [&](std::size_t i) { return p_est[idx[i]]; }, [](std::size_t) { return 1LL; },
            [&](std::size_t i, double v) { out.pi[idx[i]] = v; });
    }
    return out;
}

CellPiResult cell_sampling_probabilities(const DesignTable& cells,
                                         const std::vector<long long>& targets) {
    CellPiResult out;
    const int L = cells.num_strata();
    out.pi.resize(L);
    out.normalizer.assign(L, 0.0);
    for (int g = 0; g < L; ++g) {
        const auto& row = cells.strata[g];
        out.pi[g].assign(row.size(), 0.0);
        for (const auto& c : row) out.normalizer[g] += static_cast<double>(c.count) * c.p_est;
        if (targets[g] == 0) continue;
        if (!(out.normalizer[g] > 0.0))
            throw std::runtime_error("cell_sampling_probabilities: pi(g)=0 with positive target");
        out.capped_cells += cap_stratum(
            static_cast<double>(targets[g]), row.size(),
            [&](std::size_t i) { return row[i].p_est; },
            [&](std::size_t i) { return row[i].count; },
            [&](std::size_t i, double v) { out.pi[g][i] = v; });
    }
    return out;
}

PlanDiagnostics plan_diagnostics(const DesignTable& cells,
                                 const std::vector<long long>& targets,
                                 const GeoPrior& prior, const FrameAggregate& frame,
                                 const SensitivityOptions& sens) {
    DesignTable table = cells;
    if (sens.enabled) {
        // Unobserved surnames come back with assumed estimated/true rates.
        for (int g = 0; g < table.num_strata(); ++g) {
            long long covered = 0;
            for (const auto& c : table.strata[g]) covered += c.count;
            const long long missing = frame.stratum_totals[g] - covered;
            if (missing > 0) table.strata[g].push_back({missing, sens.epsilon, sens.delta});
        }
    }
    const CellPiResult cp = cell_sampling_probabilities(table, targets);

    PlanDiagnostics d;
    const int L = table.num_strata();
    d.strata.resize(L);
    for (int g = 0; g < L; ++g) {
        auto& sd = d.strata[g];
        const auto& row = table.strata[g];
        for (std::size_t i = 0; i < row.size(); ++i) {
            const double nc = static_cast<double>(row[i].count);
            const double pi = cp.pi[g][i];
            const double ip = pi * row[i].p_true;
            sd.expected_n += nc * pi;
            sd.var_n += nc * pi * (1.0 - pi);
            sd.expected_n1 += nc * ip;
            sd.var_n1 += nc * ip * (1.0 - ip);
        }
        sd.expected_yield = sd.expected_n > 0.0 ? sd.expected_n1 / sd.expected_n : 0.0;
        d.expected_n += sd.expected_n;
        d.var_n += sd.var_n;
        d.expected_n1 += sd.expected_n1;
        d.var_n1 += sd.var_n1;
    }
    d.expected_yield = d.expected_n > 0.0 ? d.expected_n1 / d.expected_n : 0.0;
    if (d.expected_n > 0.0) {
        const double n2 = d.expected_n * d.expected_n;
        d.yield_variance = d.var_n1 / n2 + d.expected_n1 * d.expected_n1 / (n2 * n2) * d.var_n;
    }

    // Cross-method yields at the same total size.
    long long n = 0;
    for (long long t : targets) n += t;
    if (n > 0 && frame.total > 0) {
        double n_r = 0.0;
        for (int g = 0; g < L; ++g)
            for (const auto& c : table.strata[g]) n_r += static_cast<double>(c.count) * c.p_true;
        const double frac = n_r / static_cast<double>(frame.total);
        d.srs_yield = frac;
        const double N = static_cast<double>(frame.total);
        if (N > 1.0)
            d.srs_yield_variance = frac * (1.0 - frac) / static_cast<double>(n) *
                                   (N - static_cast<double>(n)) / (N - 1.0);
        try {
            const AllocationResult st = stratified_allocation(prior, frame, n, false);
            double y = 0.0;
            for (int g = 0; g < L; ++g)
                y += static_cast<double>(st.targets[g]) * prior.p_r_given_g[g];
            d.stratified_yield = y / static_cast<double>(n);
        } catch (const std::exception&) {
            d.stratified_yield = 0.0;
        }
        try {
            const AllocationResult stf = stratified_allocation(prior, frame, n, true);
            std::vector<long long> unfiltered_totals(L, 0);
            for (const auto& c : frame.cells)
                if (!frame.filter.empty() && frame.filter[c.surname])
                    unfiltered_totals[c.stratum] += c.count;
            double y = 0.0;
            for (int g = 0; g < L; ++g) {
                if (unfiltered_totals[g] == 0) continue;
                const double p_best = std::min(
                    static_cast<double>(frame.stratum_totals[g]) * prior.p_r_given_g[g] /
                        static_cast<double>(unfiltered_totals[g]),
                    1.0);
                y += static_cast<double>(stf.targets[g]) * p_best;
            }
            d.stratified_filtered_yield = y / static_cast<double>(n);
        } catch (const std::exception&) {
            d.stratified_filtered_yield = 0.0;
        }
    }
    return d;
}

SampleDraw draw_sample(const UnitRoster& roster, const std::vector<double>& pi,
                       std::uint64_t seed, int num_strata) {
    if (pi.size() != roster.rows.size())
        throw std::runtime_error("draw_sample: pi missing for some units");
    SampleDraw out;
    out.seed = seed;
    out.n_g.assign(num_strata, 0);
    for (std::size_t i = 0; i < roster.rows.size(); ++i) {
        if (pi[i] <= 0.0) continue;
        if (hash_u01(seed, roster.rows[i].unit_id) < pi[i]) {
            out.units.push_back({roster.rows[i].unit_id, roster.rows[i].stratum, pi[i]});
            ++out.n;
            ++out.n_g[roster.rows[i].stratum];
        }
    }
    return out;
}

}  // namespace bisg
