#ifndef BISG_ESTIMATE_HPP
#define BISG_ESTIMATE_HPP

#include <map>
#include <string>
#include <vector>

#include "bisg/types.hpp"

namespace bisg {

struct Respondent {
    std::string unit_id;
    bool responded = true;
    bool minority = false;  // R from the survey
    int stratum = -1;
    double pi = 0.0;
    std::map<std::string, double> y;       // numeric outcomes
    std::map<std::string, std::string> x;  // raking categories
};

struct WeightVector {
    std::vector<double> w;  // aligned with a respondent vector
    std::string provenance;
};

// Ratio-form inverse-probability-weighted mean over responding minority units.
double hajek_mean(const std::vector<Respondent>& resp, const std::string& y_col,
                  const WeightVector& weights);

WeightVector ipw_weights(const std::vector<Respondent>& resp);

enum class EmptyStratumPolicy { DropRenormalize, Strict };

double stratified_mean(const std::vector<Respondent>& resp, const GeoPrior& prior,
                       const std::string& y_col,
                       EmptyStratumPolicy policy = EmptyStratumPolicy::DropRenormalize);

// target distribution per raking variable: category -> probability.
using Margin = std::pair<std::string, std::map<std::string, double>>;

struct RakeResult {
    WeightVector weights;
    bool converged = false;
    int iterations = 0;
    double max_gap = 0.0;
};

RakeResult rake(const std::vector<Respondent>& resp, const std::vector<Margin>& margins,
                const WeightVector& init, double tol = 1e-10, int max_iter = 200);

// Percentile clipping with the linear-interpolation percentile rule.
WeightVector trim_weights(const WeightVector& weights, double lo_pct, double hi_pct);

double percentile_linear(std::vector<double> values, double pct);

// Frame cross-tab of (surname, stratum, category) counts.
struct FrameCrossTab {
    struct Row {
        int surname;  // frame surname index
        int stratum;
        std::string category;
        long long count;
    };
    std::vector<Row> rows;
};

// Pr(X=x | R=1) derived from the surname-layer probabilities and the frame
// cross-tab, assuming X independent of R given (S, G).
std::map<std::string, double> derive_target(const class BisgTable& bisg,
                                            const FrameCrossTab& xtab);

}  // namespace bisg

#endif
