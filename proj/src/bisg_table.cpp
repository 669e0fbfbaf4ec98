#include "bisg/bisg_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bisg {

namespace {

template <typename T>
const T* find_cell(const std::vector<T>& cells, int stratum, int surname) {
    auto it = std::lower_bound(cells.begin(), cells.end(), std::pair<int, int>{stratum, surname},
                               [](const T& a, const std::pair<int, int>& key) {
                                   return a.stratum != key.first ? a.stratum < key.first
                                                                 : a.surname < key.second;
                               });
    if (it != cells.end() && it->stratum == stratum && it->surname == surname) return &*it;
    return nullptr;
}

}  // namespace

const ThetaBounds::Entry* ThetaBounds::find(int stratum, int surname) const {
    return find_cell(entries, stratum, surname);
}

ThetaBounds theta_bounds(const FrameAggregate& frame, const GeoPrior& prior) {
    ThetaBounds out;
    for (const auto& c : frame.cells) {
        if (c.count <= 0) continue;
        if (!frame.filter.empty() && !frame.filter[c.surname]) continue;
        const long long ng = frame.stratum_totals[c.stratum];
        if (ng == 0) throw std::runtime_error("theta_bounds: empty stratum " +
                                              prior.strata[c.stratum]);
        const double share = static_cast<double>(c.count) / static_cast<double>(ng);
        const double p = prior.p_r_given_g[c.stratum];
        const double lower = std::max((share - (1.0 - p)) / p, 0.0);
        const double upper = std::min(share / p, 1.0);
        out.entries.push_back({c.stratum, c.surname, lower, upper});
    }
    return out;
}

RatioTable first_name_ratio(const std::unordered_map<std::string, long long>& minority_fn,
                            long long minority_total,
                            const std::unordered_map<std::string, long long>& frame_fn,
                            long long frame_total, int min_count, double cap) {
    if (minority_total <= 0 || frame_total <= 0)
        throw std::runtime_error("first_name_ratio: empty name counts");
    RatioTable out;
    out.min_count = min_count;
    out.cap = cap;
    long long excluded = 0;
    for (const auto& [name, mc] : minority_fn) {
        auto it = frame_fn.find(name);
        const long long fc = it == frame_fn.end() ? 0 : it->second;
        if (mc + fc < min_count) continue;
        if (fc == 0) {
            ++excluded;
            continue;
        }
        const double ratio = (static_cast<double>(mc) / static_cast<double>(minority_total)) /
                             (static_cast<double>(fc) / static_cast<double>(frame_total));
        out.ratios[name] = std::min(ratio, cap);
    }
    if (excluded > 0)
        std::fprintf(stderr,
                     "warning: %lld eligible first names excluded (zero frame proportion)\n",
                     excluded);
    return out;
}

ClampResult clamp_theta(const PosteriorSummary& summary, const ThetaBounds& bounds,
                        const FrameAggregate& frame, const SurnameCountMatrix& training) {
    ClampResult out;
    out.theta.resize(bounds.entries.size());
    for (std::size_t i = 0; i < bounds.entries.size(); ++i) {
        const auto& e = bounds.entries[i];
        auto it = training.surname_index.find(frame.surnames[e.surname]);
        if (it == training.surname_index.end())
            throw std::runtime_error("clamp_theta: bounds cover filtered surname " +
                                     frame.surnames[e.surname]);
        const double raw = summary.theta(e.stratum, it->second);
        const double clamped = std::min(std::max(raw, e.lower), e.upper);
        out.theta[i] = clamped;
        if (clamped != raw) ++out.clamped;
    }
    return out;
}

const BisgTable::Cell* BisgTable::find(int stratum, int surname) const {
    return find_cell(cells, stratum, surname);
}

double BisgTable::surname_layer(int stratum, int surname) const {
    const Cell* c = find(stratum, surname);
    return c ? c->p_surname : 0.0;
}

double BisgTable::prob(const std::string& first_name, int stratum, int surname) const {
    const double layer = surname_layer(stratum, surname);
    if (layer <= 0.0) return 0.0;
    return std::min(layer * ratios.at(first_name), 1.0);
}

double BisgTable::prob_for_unit(const UnitRoster::Row& row) const {
    const int s = frame->find_surname(row.surname);
    if (s < 0) return 0.0;
    return prob(row.first_name, row.stratum, s);
}

BisgTable assemble(const PosteriorSummary& summary, const GeoPrior& prior,
                   const FrameAggregate& frame, const SurnameCountMatrix& training,
                   const RatioTable& ratios) {
    const ThetaBounds bounds = theta_bounds(frame, prior);
    const ClampResult clamped = clamp_theta(summary, bounds, frame, training);

    BisgTable out;
    out.frame = &frame;
    out.ratios = ratios;
    out.clamped_cells = clamped.clamped;

    std::size_t bi = 0;
    for (const auto& c : frame.cells) {
        if (c.count <= 0) continue;
        BisgTable::Cell cell{c.stratum, c.surname, 0.0, 0.0, 0.0, 0.0};
        if (!frame.filter.empty() && frame.filter[c.surname]) {
            const auto& e = bounds.entries[bi];
            cell.theta_hat = clamped.theta[bi];
            cell.theta_lower = e.lower;
            cell.theta_upper = e.upper;
            const double share = static_cast<double>(c.count) /
                                 static_cast<double>(frame.stratum_totals[c.stratum]);
            const double p = cell.theta_hat * prior.p_r_given_g[c.stratum] / share;
            cell.p_surname = std::min(std::max(p, 0.0), 1.0);
            ++bi;
        }
        out.cells.push_back(cell);
    }
    if (bi != bounds.entries.size())
        throw std::runtime_error("assemble: bounds/frame cell mismatch");

    // Training-positive cells missing from the frame stratum play no role.
    for (const auto& tc : training.cells) {
        const int fs = frame.find_surname(training.surnames[tc.surname]);
        if (fs < 0 || frame.count_at(tc.stratum, fs) == 0) ++out.skipped_cells;
    }
    if (out.skipped_cells > 0)
        std::fprintf(stderr,
                     "warning: %lld training cells absent from the frame were skipped\n",
                     out.skipped_cells);
    return out;
}

}  // namespace bisg
