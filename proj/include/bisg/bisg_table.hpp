#ifndef BISG_BISG_TABLE_HPP
#define BISG_BISG_TABLE_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "bisg/hiermodel.hpp"
#include "bisg/types.hpp"

namespace bisg {

// Interval constraints on theta_gs implied by frame surname shares.
struct ThetaBounds {
    struct Entry {
        int stratum;
        int surname;  // frame surname index
        double lower, upper;
    };
    std::vector<Entry> entries;  // sorted by (stratum, surname)

    const Entry* find(int stratum, int surname) const;
};

ThetaBounds theta_bounds(const FrameAggregate& frame, const GeoPrior& prior);

// First-name prevalence ratios, capped.
struct RatioTable {
    std::unordered_map<std::string, double> ratios;
    int min_count = 10;
    double cap = 10.0;

    // 1.0 for names absent from the table.
    double at(const std::string& first_name) const {
        auto it = ratios.find(first_name);
        return it == ratios.end() ? 1.0 : it->second;
    }
};

RatioTable first_name_ratio(const std::unordered_map<std::string, long long>& minority_fn,
                            long long minority_total,
                            const std::unordered_map<std::string, long long>& frame_fn,
                            long long frame_total, int min_count, double cap);

// Clamped theta table plus the surname-level probability layer, both keyed
// by frame (stratum, surname) cells; the first-name factor is applied
// lazily at roster scan time.
struct BisgTable {
    struct Cell {
        int stratum;
        int surname;  // frame surname index
        double theta_hat;       // post-clamp
        double theta_lower, theta_upper;
        double p_surname;       // Pr(R=1 | S=s, G=g)
    };
    std::vector<Cell> cells;  // sorted by (stratum, surname)
    const FrameAggregate* frame = nullptr;
    RatioTable ratios;
    long long clamped_cells = 0;
    long long skipped_cells = 0;  // theta > 0 but surname absent from frame stratum

    const Cell* find(int stratum, int surname) const;
    double surname_layer(int stratum, int surname) const;
    // min(surname layer * ratio(f), 1); 0 when the surname is filtered out.
    double prob(const std::string& first_name, int stratum, int surname) const;
    double prob_for_unit(const UnitRoster::Row& row) const;
};

struct ClampResult {
    // Aligned with bounds entries; clamped theta per (g,s).
    std::vector<double> theta;
    long long clamped = 0;
};

ClampResult clamp_theta(const PosteriorSummary& summary, const ThetaBounds& bounds,
                        const FrameAggregate& frame, const SurnameCountMatrix& training);

BisgTable assemble(const PosteriorSummary& summary, const GeoPrior& prior,
                   const FrameAggregate& frame, const SurnameCountMatrix& training,
                   const RatioTable& ratios);

}  // namespace bisg

#endif
