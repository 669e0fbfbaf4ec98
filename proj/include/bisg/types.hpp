#ifndef BISG_TYPES_HPP
#define BISG_TYPES_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bisg {

// Per-stratum Pr(R=1|G=g) and Pr(G=g|R=1), treated as known.
struct GeoPrior {
    std::vector<std::string> strata;
    std::vector<double> p_r_given_g;
    std::vector<double> p_g_given_r;
    std::unordered_map<std::string, int> index;

    int num_strata() const { return static_cast<int>(strata.size()); }
    // -1 when the stratum id is unknown.
    int find(const std::string& stratum) const {
        auto it = index.find(stratum);
        return it == index.end() ? -1 : it->second;
    }
    void rebuild_index();
    void validate() const;
};

// Sparse stratum x surname counts m_gs with cached marginals.
class SurnameCountMatrix {
public:
    struct Cell {
        int stratum;
        int surname;
        long long count;
    };

    int num_strata = 0;
    std::vector<std::string> surnames;
    std::unordered_map<std::string, int> surname_index;
    // Sorted by (surname, stratum); spans index per-surname runs.
    std::vector<Cell> cells;
    std::vector<std::pair<std::size_t, std::size_t>> surname_span;
    std::vector<long long> stratum_totals;  // m_g.
    std::vector<long long> surname_totals;  // m_.s
    long long total = 0;                    // m

    int intern_surname(const std::string& s);
    void add(int stratum, int surname, long long count);
    // Sorts, merges duplicate keys, computes marginals and spans.
    void finalize();
    long long count_at(int stratum, int surname) const;
    int num_surnames() const { return static_cast<int>(surnames.size()); }
};

// Frame counts N_gs. with totals and the training-presence filter H(s).
struct FrameAggregate {
    int num_strata = 0;
    std::vector<std::string> surnames;
    std::unordered_map<std::string, int> surname_index;
    struct Cell {
        int stratum;
        int surname;
        long long count;
    };
    std::vector<Cell> cells;  // sorted by (stratum, surname)
    std::vector<long long> stratum_totals;  // N_g.
    long long total = 0;                    // N
    // H(s) = 1 iff the surname appears in the training count matrix.
    std::vector<std::uint8_t> filter;

    // Optional first-name counts over the frame.
    std::unordered_map<std::string, long long> first_name_counts;
    long long first_name_total = 0;

    int find_surname(const std::string& s) const {
        auto it = surname_index.find(s);
        return it == surname_index.end() ? -1 : it->second;
    }
    void finalize();
    void set_filter(const SurnameCountMatrix& training);
    long long count_at(int stratum, int surname) const;
};

// Frame-level unit records used for per-unit sampling probabilities.
struct UnitRoster {
    struct Row {
        std::string unit_id;
        std::string first_name;   // canonical
        std::string surname;      // canonical (joined form, not split)
        int stratum;
        std::vector<std::string> covariates;
    };
    std::vector<std::string> covariate_names;
    std::vector<Row> rows;
};

}  // namespace bisg

#endif
