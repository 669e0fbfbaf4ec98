#include "bisg/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bisg {

void GeoPrior::rebuild_index() {
    index.clear();
    for (std::size_t i = 0; i < strata.size(); ++i)
        index[strata[i]] = static_cast<int>(i);
}

void GeoPrior::validate() const {
    if (strata.empty()) throw std::runtime_error("geo prior: no strata");
    double sum = 0.0;
    for (std::size_t i = 0; i < strata.size(); ++i) {
        if (!(p_r_given_g[i] > 0.0 && p_r_given_g[i] < 1.0))
            throw std::runtime_error("geo prior: p_r_given_g outside (0,1) for stratum " +
                                     strata[i]);
        if (!(p_g_given_r[i] >= 0.0 && p_g_given_r[i] <= 1.0))
            throw std::runtime_error("geo prior: p_g_given_r outside [0,1] for stratum " +
                                     strata[i]);
        sum += p_g_given_r[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::runtime_error("geo prior: p_g_given_r does not sum to 1");
}

int SurnameCountMatrix::intern_surname(const std::string& s) {
    auto it = surname_index.find(s);
    if (it != surname_index.end()) return it->second;
    const int id = static_cast<int>(surnames.size());
    surnames.push_back(s);
    surname_index[s] = id;
    return id;
}

void SurnameCountMatrix::add(int stratum, int surname, long long count) {
    if (count < 0) throw std::runtime_error("count matrix: negative count");
    if (count == 0) return;
    cells.push_back({stratum, surname, count});
}

void SurnameCountMatrix::finalize() {
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return a.surname != b.surname ? a.surname < b.surname : a.stratum < b.stratum;
    });
    // Merge duplicates in place.
    std::size_t w = 0;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (w > 0 && cells[w - 1].surname == cells[r].surname &&
            cells[w - 1].stratum == cells[r].stratum) {
            cells[w - 1].count += cells[r].count;
        } else {
            cells[w++] = cells[r];
        }
    }
    cells.resize(w);

    stratum_totals.assign(num_strata, 0);
    surname_totals.assign(surnames.size(), 0);
    surname_span.assign(surnames.size(), {0, 0});
    total = 0;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& c = cells[i];
        if (c.stratum < 0 || c.stratum >= num_strata)
            throw std::runtime_error("count matrix: stratum index out of range");
        stratum_totals[c.stratum] += c.count;
        surname_totals[c.surname] += c.count;
        total += c.count;
        if (i + 1 == cells.size() || cells[i + 1].surname != c.surname) {
            surname_span[c.surname] = {begin, i + 1};
            begin = i + 1;
        }
    }
}

long long SurnameCountMatrix::count_at(int stratum, int surname) const {
    if (surname < 0 || surname >= num_surnames()) return 0;
    const auto [lo, hi] = surname_span[surname];
    for (std::size_t i = lo; i < hi; ++i)
        if (cells[i].stratum == stratum) return cells[i].count;
    return 0;
}

void FrameAggregate::finalize() {
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return a.stratum != b.stratum ? a.stratum < b.stratum : a.surname < b.surname;
    });
    std::size_t w = 0;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (w > 0 && cells[w - 1].stratum == cells[r].stratum &&
            cells[w - 1].surname == cells[r].surname) {
            cells[w - 1].count += cells[r].count;
        } else {
            cells[w++] = cells[r];
        }
    }
    cells.resize(w);
    stratum_totals.assign(num_strata, 0);
    total = 0;
    for (const Cell& c : cells) {
        if (c.stratum < 0 || c.stratum >= num_strata)
            throw std::runtime_error("frame: stratum index out of range");
        stratum_totals[c.stratum] += c.count;
        total += c.count;
    }
    if (filter.size() != surnames.size()) filter.assign(surnames.size(), 0);
}

void FrameAggregate::set_filter(const SurnameCountMatrix& training) {
    filter.assign(surnames.size(), 0);
    for (std::size_t s = 0; s < surnames.size(); ++s) {
        auto it = training.surname_index.find(surnames[s]);
        if (it != training.surname_index.end() &&
            training.surname_totals[it->second] > 0)
            filter[s] = 1;
    }
}

long long FrameAggregate::count_at(int stratum, int surname) const {
    const Cell key{stratum, surname, 0};
    auto it = std::lower_bound(cells.begin(), cells.end(), key,
                               [](const Cell& a, const Cell& b) {
                                   return a.stratum != b.stratum ? a.stratum < b.stratum
                                                                 : a.surname < b.surname;
                               });
    if (it != cells.end() && it->stratum == stratum && it->surname == surname)
        return it->count;
    return 0;
}

}  // namespace bisg
