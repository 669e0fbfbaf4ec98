#include "bisg/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "bisg/bisg_table.hpp"

namespace bisg {

namespace {

double y_value(const Respondent& r, const std::string& y_col) {
    auto it = r.y.find(y_col);
    if (it == r.y.end())
        throw std::runtime_error("missing outcome column '" + y_col + "' for unit " + r.unit_id);
    return it->second;
}

bool in_scope(const Respondent& r) { return r.responded && r.minority; }

}  // namespace

WeightVector ipw_weights(const std::vector<Respondent>& resp) {
    WeightVector out;
    out.provenance = "ipw";
    out.w.resize(resp.size());
    for (std::size_t i = 0; i < resp.size(); ++i) {
        if (!(resp[i].pi > 0.0 && resp[i].pi <= 1.0))
            throw std::runtime_error("ipw_weights: pi outside (0,1] for unit " + resp[i].unit_id);
        out.w[i] = 1.0 / resp[i].pi;
    }
    return out;
}

double hajek_mean(const std::vector<Respondent>& resp, const std::string& y_col,
                  const WeightVector& weights) {
    if (weights.w.size() != resp.size()) throw std::runtime_error("hajek_mean: weight size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < resp.size(); ++i) {
        if (!in_scope(resp[i])) continue;
        num += weights.w[i] * y_value(resp[i], y_col);
        den += weights.w[i];
    }
    if (!(den > 0.0)) throw std::runtime_error("hajek_mean: no responding minority units");
    return num / den;
}

double stratified_mean(const std::vector<Respondent>& resp, const GeoPrior& prior,
                       const std::string& y_col, EmptyStratumPolicy policy) {
    const int L = prior.num_strata();
    std::vector<double> sum(L, 0.0);
    std::vector<long long> count(L, 0);
    for (const auto& r : resp) {
        if (!in_scope(r)) continue;
        if (r.stratum < 0 || r.stratum >= L) throw std::runtime_error("stratified_mean: bad stratum");
        sum[r.stratum] += y_value(r, y_col);
        ++count[r.stratum];
    }
    double est = 0.0, mass = 0.0;
    int empty = 0;
    for (int g = 0; g < L; ++g) {
        if (count[g] == 0) {
            if (prior.p_g_given_r[g] > 0.0) {
                if (policy == EmptyStratumPolicy::Strict)
                    throw std::runtime_error("stratified_mean: no minority respondents in stratum " +
                                             prior.strata[g]);
                ++empty;
            }
            continue;
        }
        est += (sum[g] / static_cast<double>(count[g])) * prior.p_g_given_r[g];
        mass += prior.p_g_given_r[g];
    }
    if (!(mass > 0.0)) throw std::runtime_error("stratified_mean: no covered strata");
    if (empty > 0)
        std::fprintf(stderr,
                     "warning: stratified_mean dropped %d empty strata and renormalized\n", empty);
    return est / mass;
}

RakeResult rake(const std::vector<Respondent>& resp, const std::vector<Margin>& margins,
                const WeightVector& init, double tol, int max_iter) {
    if (init.w.size() != resp.size()) throw std::runtime_error("rake: weight size mismatch");
    // Category indices per margin, in-scope units only.
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < resp.size(); ++i)
        if (in_scope(resp[i])) idx.push_back(i);
    if (idx.empty()) throw std::runtime_error("rake: no responding minority units");

    std::vector<std::vector<const std::string*>> cat_of(margins.size(),
                                                        std::vector<const std::string*>(idx.size()));
    for (std::size_t m = 0; m < margins.size(); ++m) {
        const auto& [var, target] = margins[m];
        std::map<std::string, double> support;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            auto it = resp[idx[k]].x.find(var);
            if (it == resp[idx[k]].x.end())
                throw std::runtime_error("rake: missing raking variable '" + var + "'");
            cat_of[m][k] = &it->second;
            support[it->second] = 1.0;
        }
        for (const auto& [cat, prob] : target)
            if (prob > 0.0 && !support.count(cat))
                throw std::runtime_error("rake: target category '" + cat + "' of variable '" + var +
                                         "' has no sample support");
    }

    RakeResult out;
    out.weights = init;
    out.weights.provenance = "raked";
    auto& w = out.weights.w;
    for (int iter = 0; iter < max_iter; ++iter) {
        // Margins are cycled in the configured order.
        for (std::size_t m = 0; m < margins.size(); ++m) {
            const auto& target = margins[m].second;
            std::map<std::string, double> observed;
            double total = 0.0;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                observed[*cat_of[m][k]] += w[idx[k]];
                total += w[idx[k]];
            }
            for (std::size_t k = 0; k < idx.size(); ++k) {
                auto it = target.find(*cat_of[m][k]);
                const double t = it == target.end() ? 0.0 : it->second;
                const double o = observed[*cat_of[m][k]] / total;
                if (o > 0.0) w[idx[k]] *= t / o;
            }
        }
        // Convergence: every weighted margin within tol of target.
        out.max_gap = 0.0;
        for (std::size_t m = 0; m < margins.size(); ++m) {
            const auto& target = margins[m].second;
            std::map<std::string, double> observed;
            double total = 0.0;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                observed[*cat_of[m][k]] += w[idx[k]];
                total += w[idx[k]];
            }
            for (const auto& [cat, t] : target) {
                auto it = observed.find(cat);
                const double o = it == observed.end() ? 0.0 : it->second / total;
                out.max_gap = std::max(out.max_gap, std::abs(o - t));
            }
        }
        out.iterations = iter + 1;
        if (out.max_gap < tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

double percentile_linear(std::vector<double> values, double pct) {
    if (values.empty()) throw std::runtime_error("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double h = (pct / 100.0) * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - std::floor(h);
    return values[lo] + frac * (values[hi] - values[lo]);
}

WeightVector trim_weights(const WeightVector& weights, double lo_pct, double hi_pct) {
    if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0))
        throw std::runtime_error("trim_weights: bad percentile range");
    WeightVector out = weights;
    out.provenance = "trimmed";
    if (out.w.empty()) return out;
    const double lo = percentile_linear(out.w, lo_pct);
    const double hi = percentile_linear(out.w, hi_pct);
    for (double& x : out.w) x = std::min(std::max(x, lo), hi);
    return out;
}

std::map<std::string, double> derive_target(const BisgTable& bisg, const FrameCrossTab& xtab) {
    std::map<std::string, double> out;
    double total = 0.0;
    for (const auto& row : xtab.rows) {
        const double p = bisg.surname_layer(row.stratum, row.surname);
        if (p <= 0.0) continue;
        const double mass = p * static_cast<double>(row.count);
        out[row.category] += mass;
        total += mass;
    }
    if (!(total > 0.0)) throw std::runtime_error("derive_target: all-zero numerator");
    for (auto& [cat, mass] : out) mass /= total;
    return out;
}

}  // namespace bisg
