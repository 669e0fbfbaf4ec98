// bisgsamp: pipeline driver for BISG-driven rare-population sampling.
//
// Subcommands: fit | probs | plan | sample | estimate | simulate | diagnose.
// Each stage reads only its declared inputs and writes only its declared
// outputs, so intermediate artifacts stay independently inspectable.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bisg/bisg_table.hpp"
#include "bisg/csv.hpp"
#include "bisg/design.hpp"
#include "bisg/estimate.hpp"
#include "bisg/hiermodel.hpp"
#include "bisg/ingest.hpp"
#include "bisg/simlab.hpp"

using json = nlohmann::json;
using namespace bisg;

namespace {

struct MissingInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string require_path(const json& config, const std::string& key) {
    if (!config.contains("paths") || !config["paths"].contains(key))
        throw std::runtime_error("config: missing paths." + key);
    const std::string p = config["paths"][key].get<std::string>();
    return p;
}

std::string require_input(const json& config, const std::string& key) {
    const std::string p = require_path(config, key);
    if (!std::filesystem::exists(p)) throw MissingInput("missing input file: " + p);
    return p;
}

std::optional<std::string> optional_path(const json& config, const std::string& key) {
    if (!config.contains("paths") || !config["paths"].contains(key)) return std::nullopt;
    return config["paths"][key].get<std::string>();
}

std::uint64_t config_hash(const json& config) {
    const std::string s = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

json stage_cfg(const json& config, const std::string& stage) {
    return config.contains(stage) ? config[stage] : json::object();
}

std::uint64_t stage_seed(const json& sc, const json& config) {
    if (sc.contains("seed")) return sc["seed"].get<std::uint64_t>();
    if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
    throw std::runtime_error("config: no seed given (wall-clock defaults are not allowed)");
}

NameRules rules_from_config(const json& config) {
    const auto nick = optional_path(config, "nicknames");
    const auto deny = optional_path(config, "non_names");
    if (nick && deny) {
        if (!std::filesystem::exists(*nick)) throw MissingInput("missing input file: " + *nick);
        if (!std::filesystem::exists(*deny)) throw MissingInput("missing input file: " + *deny);
        return load_name_rules(*nick, *deny);
    }
    return default_name_rules();
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << doc.dump(2) << "\n";
}

struct FittedInputs {
    GeoPrior prior;
    MinorityData minority;
    Hyperparams hyper;
};

FittedInputs load_training(const json& config) {
    FittedInputs in;
    in.prior = load_geo_prior(require_input(config, "geo_prior"));
    in.minority = load_minority_names(require_input(config, "minority_names"), in.prior,
                                      rules_from_config(config));
    if (in.minority.counts.total == 0) throw std::runtime_error("no usable training records");
    in.hyper = Hyperparams::empirical_bayes(in.minority.counts);
    const json fc = stage_cfg(config, "fit");
    if (fc.value("eta_prior", std::string("default")) == "diffuse") in.hyper.use_diffuse_eta_prior();
    if (fc.contains("sigma_eta")) in.hyper.proposal_sigma_eta = fc["sigma_eta"].get<double>();
    return in;
}

int cmd_fit(const json& config) {
    const FittedInputs in = load_training(config);
    const json fc = stage_cfg(config, "fit");
    ChainConfig cc;
    cc.iters = fc.value("iters", 45000);
    cc.seed = stage_seed(fc, config);
    const int burnin = fc.value("burnin", cc.iters / 3);
    if (burnin >= cc.iters) throw std::runtime_error("config: burnin >= iters");

    Rng rng(cc.seed);
    const ModelState init = init_state(in.minority.counts, in.hyper, rng);
    const Chain chain = run_chain(init, in.minority.counts, in.hyper, cc);
    const PosteriorSummary summary = posterior_summary(chain, in.minority.counts, burnin);

    const SurnameCountMatrix& counts = in.minority.counts;
    // Chain export: a configured surname subset (default: top counts).
    std::vector<int> exported;
    if (fc.contains("chain_export_surnames")) {
        for (const auto& name : fc["chain_export_surnames"]) {
            auto it = counts.surname_index.find(name.get<std::string>());
            if (it == counts.surname_index.end())
                throw std::runtime_error("config: unknown chain_export_surname " +
                                         name.get<std::string>());
            exported.push_back(it->second);
        }
    } else {
        std::vector<int> order(counts.num_surnames());
        for (int s = 0; s < counts.num_surnames(); ++s) order[s] = s;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return counts.surname_totals[a] != counts.surname_totals[b]
                       ? counts.surname_totals[a] > counts.surname_totals[b]
                       : a < b;
        });
        order.resize(std::min<std::size_t>(order.size(), 50));
        exported = order;
    }
    {
        std::vector<std::string> header{"iteration", "eta"};
        for (int s : exported) header.push_back("alpha_" + counts.surnames[s]);
        std::vector<std::vector<std::string>> rows;
        rows.reserve(chain.draws.size());
        for (std::size_t it = 0; it < chain.draws.size(); ++it) {
            std::vector<std::string> row{std::to_string(it),
                                         format_double(chain.draws[it].eta)};
            for (int s : exported) row.push_back(format_double(chain.draws[it].alpha[s]));
            rows.push_back(std::move(row));
        }
        write_csv(require_path(config, "chain_csv"), header, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (int g = 0; g < summary.num_strata; ++g)
            for (int s = 0; s < summary.num_surnames; ++s)
                rows.push_back({in.prior.strata[g], counts.surnames[s],
                                format_double(summary.theta(g, s))});
        write_csv(require_path(config, "posterior_csv"),
                  {"stratum", "surname", "theta_hat"}, rows);
    }
    json sidecar;
    sidecar["config_hash"] = config_hash(config);
    sidecar["seed"] = cc.seed;
    sidecar["iters"] = cc.iters;
    sidecar["burn_in"] = burnin;
    sidecar["eta_hat"] = summary.eta_hat;
    sidecar["acceptance"] = {{"pair_mean", summary.mean_pair_accept},
                             {"eta_mean", summary.mean_eta_accept}};
    json rho = json::object();
    for (int g = 0; g < summary.num_strata; ++g) rho[in.prior.strata[g]] = summary.rho_hat[g];
    sidecar["rho_hat"] = rho;
    json alpha = json::object();
    for (int s : exported) alpha[counts.surnames[s]] = summary.alpha_hat[s];
    sidecar["alpha_hat"] = alpha;
    write_json(require_path(config, "posterior_json"), sidecar);
    return 0;
}

PosteriorSummary summary_from_csv(const std::string& path, const GeoPrior& prior,
                                  const SurnameCountMatrix& counts) {
    const CsvTable t = read_csv(path);
    const std::size_t c_g = t.col("stratum");
    const std::size_t c_s = t.col("surname");
    const std::size_t c_t = t.col("theta_hat");
    PosteriorSummary summary;
    summary.num_strata = prior.num_strata();
    summary.num_surnames = counts.num_surnames();
    summary.theta_hat.assign(static_cast<std::size_t>(summary.num_strata) *
                                 summary.num_surnames,
                             0.0);
    for (const auto& row : t.rows) {
        const int g = prior.find(row[c_g]);
        auto it = counts.surname_index.find(row[c_s]);
        if (g < 0 || it == counts.surname_index.end()) continue;
        summary.theta_hat[static_cast<std::size_t>(g) * summary.num_surnames + it->second] =
            std::stod(row[c_t]);
    }
    return summary;
}

int cmd_probs(const json& config) {
    const FittedInputs in = load_training(config);
    FrameAggregate frame = load_frame_counts(require_input(config, "frame_counts"), in.prior);
    frame.set_filter(in.minority.counts);
    const PosteriorSummary summary =
        summary_from_csv(require_input(config, "posterior_csv"), in.prior, in.minority.counts);

    const json pc = stage_cfg(config, "probs");
    RatioTable ratios;
    ratios.min_count = pc.value("min_count", 10);
    ratios.cap = pc.value("cap", 10.0);
    if (const auto roster_path = optional_path(config, "roster");
        roster_path && std::filesystem::exists(*roster_path) &&
        in.minority.first_name_total > 0) {
        const UnitRoster roster =
            load_roster(*roster_path, in.prior, rules_from_config(config));
        add_first_names_from_roster(frame, roster);
        if (frame.first_name_total > 0)
            ratios = first_name_ratio(in.minority.first_name_counts,
                                      in.minority.first_name_total, frame.first_name_counts,
                                      frame.first_name_total, ratios.min_count, ratios.cap);
    }

    const BisgTable table = assemble(summary, in.prior, frame, in.minority.counts, ratios);
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : table.cells)
            rows.push_back({in.prior.strata[c.stratum], frame.surnames[c.surname],
                            format_double(c.theta_hat), format_double(c.theta_lower),
                            format_double(c.theta_upper), format_double(c.p_surname)});
        write_csv(require_path(config, "bisg_csv"),
                  {"stratum", "surname", "theta_hat", "theta_lower", "theta_upper",
                   "p_surname_layer"},
                  rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        std::vector<std::string> names;
        for (const auto& [name, r] : table.ratios.ratios) names.push_back(name);
        std::sort(names.begin(), names.end());
        for (const auto& name : names)
            rows.push_back({name, format_double(table.ratios.ratios.at(name))});
        write_csv(require_path(config, "ratios_csv"), {"first_name", "ratio"}, rows);
    }
    return 0;
}

struct PlanInputs {
    GeoPrior prior;
    FrameAggregate frame;
    BisgTable table;
};

PlanInputs load_plan_inputs(const json& config) {
    PlanInputs in;
    in.prior = load_geo_prior(require_input(config, "geo_prior"));
    in.frame = load_frame_counts(require_input(config, "frame_counts"), in.prior);

    const CsvTable t = read_csv(require_input(config, "bisg_csv"));
    const std::size_t c_g = t.col("stratum");
    const std::size_t c_s = t.col("surname");
    const std::size_t c_th = t.col("theta_hat");
    const std::size_t c_lo = t.col("theta_lower");
    const std::size_t c_hi = t.col("theta_upper");
    const std::size_t c_p = t.col("p_surname_layer");
    in.table.frame = &in.frame;
    in.frame.filter.assign(in.frame.surnames.size(), 0);
    for (const auto& row : t.rows) {
        const int g = in.prior.find(row[c_g]);
        const int s = in.frame.find_surname(row[c_s]);
        if (g < 0 || s < 0)
            throw std::runtime_error("bisg table references unknown stratum/surname: " +
                                     row[c_g] + "/" + row[c_s]);
        const double p = std::stod(row[c_p]);
        in.table.cells.push_back({g, s, std::stod(row[c_th]), std::stod(row[c_lo]),
                                  std::stod(row[c_hi]), p});
        if (p > 0.0) in.frame.filter[s] = 1;
    }
    std::sort(in.table.cells.begin(), in.table.cells.end(),
              [](const BisgTable::Cell& a, const BisgTable::Cell& b) {
                  return a.stratum != b.stratum ? a.stratum < b.stratum
                                                : a.surname < b.surname;
              });
    if (const auto ratios_path = optional_path(config, "ratios_csv");
        ratios_path && std::filesystem::exists(*ratios_path)) {
        const CsvTable rt = read_csv(*ratios_path);
        const std::size_t c_f = rt.col("first_name");
        const std::size_t c_r = rt.col("ratio");
        for (const auto& row : rt.rows)
            in.table.ratios.ratios[row[c_f]] = std::stod(row[c_r]);
    }
    return in;
}

struct PlanOverrides {
    std::optional<long long> target;
    std::optional<std::string> method;
    std::optional<bool> filtered;
    std::optional<double> epsilon, delta;
    std::optional<bool> replication_bug;
};

int cmd_plan(const json& config, const PlanOverrides& ov) {
    PlanInputs in = load_plan_inputs(config);
    const UnitRoster roster =
        load_roster(require_input(config, "roster"), in.prior, rules_from_config(config));

    const json pc = stage_cfg(config, "plan");
    const long long n = ov.target.value_or(pc.value("target", 0LL));
    if (n <= 0) throw std::runtime_error("plan: positive target required");
    const Method method = parse_method(ov.method.value_or(pc.value("method", std::string("poisson"))));
    const bool filtered = ov.filtered.value_or(pc.value("filtered", true));
    const bool bug = ov.replication_bug.value_or(pc.value("replication_bug_allocation", false));

    AllocationResult alloc;
    const DesignTable cells = design_table(in.table, in.frame, filtered);
    switch (method) {
        case Method::Srs: {
            // A single pooled stratum: targets proportional to frame sizes.
            std::vector<double> w(in.prior.num_strata());
            for (int g = 0; g < in.prior.num_strata(); ++g)
                w[g] = static_cast<double>(in.frame.stratum_totals[g]);
            alloc.targets = largest_remainder_round(w, n);
            alloc.targets_real.assign(w.begin(), w.end());
            alloc.clipped.assign(w.size(), 0);
            break;
        }
        case Method::Stratified:
            alloc = stratified_allocation(in.prior, in.frame, n, false);
            break;
        case Method::StratifiedFiltered:
            alloc = stratified_allocation(in.prior, in.frame, n, true);
            break;
        case Method::Poisson:
            alloc = poisson_allocation(cells, in.prior, n, filtered, bug);
            break;
    }

    // Roster-level normalizers pi(g) used by the sample stage.
    std::vector<double> p_est(roster.rows.size());
    std::vector<int> stratum_of(roster.rows.size());
    for (std::size_t i = 0; i < roster.rows.size(); ++i) {
        p_est[i] = in.table.prob_for_unit(roster.rows[i]);
        stratum_of[i] = roster.rows[i].stratum;
    }
    const PiResult pi =
        sampling_probabilities(p_est, stratum_of, alloc.targets, in.prior.num_strata());

    SensitivityOptions sens;
    sens.epsilon = ov.epsilon.value_or(pc.value("epsilon", 0.0));
    sens.delta = ov.delta.value_or(pc.value("delta", 0.0));
    sens.enabled = sens.epsilon > 0.0 || sens.delta > 0.0;
    const PlanDiagnostics diag = plan_diagnostics(cells, alloc.targets, in.prior, in.frame);

    json doc;
    doc["config_hash"] = config_hash(config);
    doc["method"] = method_name(method);
    doc["filtered"] = filtered;
    doc["replication_bug_allocation"] = bug;
    doc["n_total"] = n;
    json targets = json::object(), normalizers = json::object(), clipped = json::array();
    for (int g = 0; g < in.prior.num_strata(); ++g) {
        targets[in.prior.strata[g]] = alloc.targets[g];
        normalizers[in.prior.strata[g]] = pi.normalizer[g];
        if (alloc.clipped[g]) clipped.push_back(in.prior.strata[g]);
    }
    doc["targets"] = targets;
    doc["normalizers"] = normalizers;
    doc["cap_report"] = {{"clipped_strata", clipped},
                         {"clipped_mass", alloc.clipped_mass},
                         {"capped_units", pi.capped}};
    json dstrata = json::object();
    for (int g = 0; g < in.prior.num_strata(); ++g) {
        const auto& sd = diag.strata[g];
        dstrata[in.prior.strata[g]] = {{"expected_n", sd.expected_n},
                                       {"var_n", sd.var_n},
                                       {"expected_n1", sd.expected_n1},
                                       {"var_n1", sd.var_n1},
                                       {"expected_yield", sd.expected_yield}};
    }
    doc["diagnostics"] = {{"strata", dstrata},
                          {"expected_n", diag.expected_n},
                          {"var_n", diag.var_n},
                          {"expected_n1", diag.expected_n1},
                          {"var_n1", diag.var_n1},
                          {"expected_yield", diag.expected_yield},
                          {"yield_variance", diag.yield_variance},
                          {"srs_yield", diag.srs_yield},
                          {"srs_yield_variance", diag.srs_yield_variance},
                          {"stratified_yield", diag.stratified_yield},
                          {"stratified_filtered_yield", diag.stratified_filtered_yield}};
    if (sens.enabled) {
        const PlanDiagnostics sd = plan_diagnostics(cells, alloc.targets, in.prior, in.frame, sens);
        doc["sensitivity"] = {{"epsilon", sens.epsilon},
                              {"delta", sens.delta},
                              {"expected_yield", sd.expected_yield},
                              {"yield_variance", sd.yield_variance}};
    }
    write_json(require_path(config, "plan_json"), doc);
    return 0;
}

int cmd_sample(const json& config, std::optional<std::uint64_t> seed_override) {
    PlanInputs in = load_plan_inputs(config);
    const UnitRoster roster =
        load_roster(require_input(config, "roster"), in.prior, rules_from_config(config));
    std::ifstream pf(require_input(config, "plan_json"));
    json plan;
    pf >> plan;
    const json sc = stage_cfg(config, "sample");
    const std::uint64_t seed = seed_override ? *seed_override : stage_seed(sc, config);

    std::vector<long long> targets(in.prior.num_strata(), 0);
    for (const auto& [name, t] : plan["targets"].items()) {
        const int g = in.prior.find(name);
        if (g < 0) throw std::runtime_error("plan references unknown stratum " + name);
        targets[g] = t.get<long long>();
    }
    std::vector<double> p_est(roster.rows.size());
    std::vector<int> stratum_of(roster.rows.size());
    for (std::size_t i = 0; i < roster.rows.size(); ++i) {
        p_est[i] = in.table.prob_for_unit(roster.rows[i]);
        stratum_of[i] = roster.rows[i].stratum;
    }
    const PiResult pi =
        sampling_probabilities(p_est, stratum_of, targets, in.prior.num_strata());
    const SampleDraw draw = draw_sample(roster, pi.pi, seed, in.prior.num_strata());

    std::vector<std::vector<std::string>> rows;
    for (const auto& u : draw.units)
        rows.push_back({u.unit_id, in.prior.strata[u.stratum], format_double(u.pi)});
    write_csv(require_path(config, "sample_csv"), {"unit_id", "stratum", "pi"}, rows);

    json meta;
    meta["config_hash"] = config_hash(config);
    meta["seed"] = seed;
    meta["n"] = draw.n;
    json ng = json::object(), sum_pi = json::object();
    std::vector<double> pisum(in.prior.num_strata(), 0.0);
    for (std::size_t i = 0; i < pi.pi.size(); ++i) pisum[stratum_of[i]] += pi.pi[i];
    for (int g = 0; g < in.prior.num_strata(); ++g) {
        ng[in.prior.strata[g]] = draw.n_g[g];
        sum_pi[in.prior.strata[g]] = pisum[g];
    }
    meta["n_g"] = ng;
    meta["sum_pi_per_stratum"] = sum_pi;
    meta["capped_units"] = pi.capped;
    const auto meta_path = optional_path(config, "sample_meta_json");
    write_json(meta_path ? *meta_path : require_path(config, "sample_csv") + ".meta.json", meta);
    return 0;
}

int cmd_estimate(const json& config) {
    const GeoPrior prior = load_geo_prior(require_input(config, "geo_prior"));
    const CsvTable sample = read_csv(require_input(config, "sample_csv"));
    const CsvTable resp = read_csv(require_input(config, "responses"));

    std::unordered_map<std::string, std::pair<int, double>> sample_info;  // id -> (g, pi)
    {
        const std::size_t c_id = sample.col("unit_id");
        const std::size_t c_g = sample.col("stratum");
        const std::size_t c_pi = sample.col("pi");
        for (const auto& row : sample.rows)
            sample_info[row[c_id]] = {prior.find(row[c_g]), std::stod(row[c_pi])};
    }

    const std::size_t c_id = resp.col("unit_id");
    const std::size_t c_rd = resp.col("responded");
    const std::size_t c_r = resp.col("r");
    std::vector<std::string> y_cols, x_cols;
    for (const auto& h : resp.header) {
        if (h.rfind("y_", 0) == 0) y_cols.push_back(h);
        if (h.rfind("x_", 0) == 0) x_cols.push_back(h);
    }
    std::vector<Respondent> respondents;
    for (const auto& row : resp.rows) {
        auto it = sample_info.find(row[c_id]);
        if (it == sample_info.end())
            throw std::runtime_error("responses: unit " + row[c_id] + " not in sample");
        Respondent r;
        r.unit_id = row[c_id];
        r.responded = row[c_rd] == "1" || row[c_rd] == "true";
        r.minority = row[c_r] == "1" || row[c_r] == "true";
        r.stratum = it->second.first;
        r.pi = it->second.second;
        for (const auto& yc : y_cols)
            if (const auto& v = row[resp.col(yc)]; !v.empty()) r.y[yc] = std::stod(v);
        for (const auto& xc : x_cols) r.x[xc] = row[resp.col(xc)];
        respondents.push_back(std::move(r));
    }

    const json ec = stage_cfg(config, "estimate");
    json doc;
    doc["config_hash"] = config_hash(config);

    WeightVector weights = ipw_weights(respondents);
    json convergence = json::object();
    if (const auto targets_path = optional_path(config, "targets");
        targets_path && std::filesystem::exists(*targets_path)) {
        const CsvTable tt = read_csv(*targets_path);
        const std::size_t c_v = tt.col("variable");
        const std::size_t c_c = tt.col("category");
        const std::size_t c_p = tt.col("probability");
        std::map<std::string, std::map<std::string, double>> by_var;
        for (const auto& row : tt.rows) by_var[row[c_v]][row[c_c]] = std::stod(row[c_p]);
        std::vector<Margin> margins(by_var.begin(), by_var.end());
        if (!margins.empty()) {
            const RakeResult rr = rake(respondents, margins, weights,
                                       ec.value("tol", 1e-10), ec.value("max_iter", 200));
            weights = rr.weights;
            convergence = {{"converged", rr.converged},
                           {"iterations", rr.iterations},
                           {"max_gap", rr.max_gap}};
        }
    }
    if (ec.contains("trim")) {
        const double lo = ec["trim"][0].get<double>();
        const double hi = ec["trim"][1].get<double>();
        weights = trim_weights(weights, lo, hi);
    }
    doc["weights"] = [&] {
        double wmin = 1e300, wmax = 0.0, wsum = 0.0, wsum2 = 0.0;
        long long k = 0;
        for (std::size_t i = 0; i < respondents.size(); ++i) {
            if (!(respondents[i].responded && respondents[i].minority)) continue;
            const double w = weights.w[i];
            wmin = std::min(wmin, w);
            wmax = std::max(wmax, w);
            wsum += w;
            wsum2 += w * w;
            ++k;
        }
        json out;
        out["provenance"] = weights.provenance;
        out["n_minority_respondents"] = k;
        if (k > 0) {
            const double mean = wsum / static_cast<double>(k);
            out["min"] = wmin;
            out["max"] = wmax;
            out["mean"] = mean;
            out["cv"] = std::sqrt(std::max(wsum2 / static_cast<double>(k) - mean * mean, 0.0)) / mean;
        }
        return out;
    }();
    doc["convergence"] = convergence;

    json est = json::object();
    for (const auto& yc : y_cols) {
        json e;
        e["hajek"] = hajek_mean(respondents, yc, weights);
        e["stratified"] = stratified_mean(respondents, prior, yc);
        est[yc] = e;
    }
    doc["estimates"] = est;
    write_json(require_path(config, "estimates_json"), doc);
    return 0;
}

int cmd_simulate(const json& config) {
    const GeoPrior prior = load_geo_prior(require_input(config, "geo_prior"));
    const json sc = stage_cfg(config, "simulate");
    SimConfig sim;
    sim.surname_count = sc.value("surname_count", 500);
    sim.name_length = sc.value("name_length", 6);
    sim.m = sc.value("m", 50000LL);
    sim.n_minority = sc.value("n_minority", 23530LL);
    sim.n_majority = sc.value("n_majority", 1176500LL);
    sim.replicates = sc.value("replicates", 20);
    sim.sample_target = sc.value("target", 1000LL);
    sim.seed = stage_seed(sc, config);
    std::vector<double> betas;
    if (sc.contains("betas"))
        for (const auto& b : sc["betas"]) betas.push_back(b.get<double>());
    else
        betas.push_back(sc.value("beta", 1000.0));
    const bool fit_model = sc.value("fit_model", false);

    json doc;
    doc["config_hash"] = config_hash(config);
    doc["seed"] = sim.seed;
    doc["config_echo"] = {{"surname_count", sim.surname_count},
                          {"m", sim.m},
                          {"n_minority", sim.n_minority},
                          {"n_majority", sim.n_majority},
                          {"replicates", sim.replicates},
                          {"target", sim.sample_target},
                          {"betas", betas}};
    json per_beta = json::array();
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
        sim.beta = betas[bi];
        Rng rng(Rng(sim.seed).derive(1000 + bi));
        const SurnameUniverse universe = gen_surname_universe(sim, prior, rng);
        const SimFrame frame = gen_frame(sim, universe, prior, rng);
        const YieldReport report =
            run_comparison(frame, prior, sim.sample_target,
                           {SimMethod::RandomPerState, SimMethod::PoissonTrue},
                           sim.replicates, {}, rng);
        json jb;
        jb["beta"] = sim.beta;
        json methods = json::object();
        for (const auto& pm : report.methods) {
            methods[pm.method] = {{"mean", pm.mean}, {"sd", pm.sd}, {"yields", pm.yields}};
        }
        jb["yields"] = methods;
        if (fit_model) {
            const SurnameCountMatrix counts = gen_minority_data(sim.m, universe, prior, rng);
            Hyperparams hyper = Hyperparams::empirical_bayes(counts);
            ChainConfig cc;
            cc.iters = sc.value("fit_iters", 2000);
            cc.seed = rng.derive(77);
            Rng init_rng(cc.seed);
            const ModelState init = init_state(counts, hyper, init_rng);
            const Chain chain = run_chain(init, counts, hyper, cc);
            const PosteriorSummary summary =
                posterior_summary(chain, counts, cc.iters / 2);
            std::vector<std::vector<double>> posterior(prior.num_strata()),
                raw(prior.num_strata());
            for (int g = 0; g < prior.num_strata(); ++g) {
                posterior[g].resize(sim.surname_count, 0.0);
                raw[g].assign(sim.surname_count, 0.0);
                for (int s = 0; s < sim.surname_count; ++s) {
                    auto it = counts.surname_index.find(universe.names[s]);
                    if (it == counts.surname_index.end()) continue;
                    posterior[g][s] = summary.theta(g, it->second);
                    if (counts.stratum_totals[g] > 0)
                        raw[g][s] = static_cast<double>(counts.count_at(g, it->second)) /
                                    static_cast<double>(counts.stratum_totals[g]);
                }
            }
            jb["tv"] = {{"posterior_mean_tv", mean_tv(posterior, universe.theta)},
                        {"raw_mean_tv", mean_tv(raw, universe.theta)}};
        }
        per_beta.push_back(std::move(jb));
    }
    doc["results"] = per_beta;
    write_json(require_path(config, "sim_report_json"), doc);
    return 0;
}

int cmd_diagnose(const json& config, const PlanOverrides& ov) {
    PlanInputs in = load_plan_inputs(config);
    std::ifstream pf(require_input(config, "plan_json"));
    json plan;
    pf >> plan;
    std::vector<long long> targets(in.prior.num_strata(), 0);
    for (const auto& [name, t] : plan["targets"].items()) {
        const int g = in.prior.find(name);
        if (g < 0) throw std::runtime_error("plan references unknown stratum " + name);
        targets[g] = t.get<long long>();
    }
    const bool filtered = plan.value("filtered", true);
    const DesignTable cells = design_table(in.table, in.frame, filtered);
    const json pc = stage_cfg(config, "plan");
    SensitivityOptions sens;
    sens.epsilon = ov.epsilon.value_or(pc.value("epsilon", 0.0));
    sens.delta = ov.delta.value_or(pc.value("delta", 0.0));
    sens.enabled = sens.epsilon > 0.0 || sens.delta > 0.0;
    const PlanDiagnostics diag = plan_diagnostics(cells, targets, in.prior, in.frame, sens);
    json doc;
    doc["config_hash"] = config_hash(config);
    doc["plan_hash"] = plan.value("config_hash", 0ULL);
    doc["expected_yield"] = diag.expected_yield;
    doc["yield_variance"] = diag.yield_variance;
    doc["expected_n"] = diag.expected_n;
    doc["expected_n1"] = diag.expected_n1;
    doc["var_n"] = diag.var_n;
    doc["var_n1"] = diag.var_n1;
    doc["srs_yield"] = diag.srs_yield;
    doc["stratified_yield"] = diag.stratified_yield;
    doc["stratified_filtered_yield"] = diag.stratified_filtered_yield;
    if (sens.enabled) doc["sensitivity"] = {{"epsilon", sens.epsilon}, {"delta", sens.delta}};
    std::cout << doc.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BISG-driven rare-population sampling pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file")->required();

    std::optional<long long> iters, burnin, target;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<double> cap, epsilon, delta;
    std::optional<long long> min_count;
    std::optional<bool> filtered, replication_bug;
    app.add_option("--iters", iters, "MCMC iterations override");
    app.add_option("--burnin", burnin, "MCMC burn-in override");
    app.add_option("--seed", seed, "Stage seed override");
    app.add_option("--target", target, "Total sample size override");
    app.add_option("--method", method, "Allocation method override");
    app.add_option("--cap", cap, "First-name ratio cap override");
    app.add_option("--min-count", min_count, "First-name ratio minimum count override");
    app.add_option("--epsilon", epsilon, "Sensitivity: assumed sampling probability");
    app.add_option("--delta", delta, "Sensitivity: assumed true probability");
    std::optional<int> filtered_raw, bug_raw;
    app.add_option("--filtered", filtered_raw, "Filtered design (0/1) override");
    app.add_option("--replication-bug-allocation", bug_raw,
                   "Replicate the documented allocation coding error (0/1)");

    for (const char* name :
         {"fit", "probs", "plan", "sample", "estimate", "simulate", "diagnose"})
        app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);
    if (filtered_raw) filtered = *filtered_raw != 0;
    if (bug_raw) replication_bug = *bug_raw != 0;

    try {
        if (!std::filesystem::exists(config_path))
            throw MissingInput("missing input file: " + config_path);
        std::ifstream cf(config_path);
        json config;
        cf >> config;
        // CLI overrides fold into the config before hashing so provenance
        // reflects what actually ran.
        if (iters) config["fit"]["iters"] = *iters;
        if (burnin) config["fit"]["burnin"] = *burnin;
        if (cap) config["probs"]["cap"] = *cap;
        if (min_count) config["probs"]["min_count"] = *min_count;
        if (target) config["plan"]["target"] = *target;
        if (method) config["plan"]["method"] = *method;
        if (filtered) config["plan"]["filtered"] = *filtered;
        if (epsilon) config["plan"]["epsilon"] = *epsilon;
        if (delta) config["plan"]["delta"] = *delta;
        if (replication_bug) config["plan"]["replication_bug_allocation"] = *replication_bug;
        if (seed) {
            for (const char* st : {"fit", "sample", "simulate"})
                config[st]["seed"] = *seed;
        }

        PlanOverrides ov{target, method, filtered, epsilon, delta, replication_bug};
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "fit") return cmd_fit(config);
        if (sub == "probs") return cmd_probs(config);
        if (sub == "plan") return cmd_plan(config, ov);
        if (sub == "sample") return cmd_sample(config, seed);
        if (sub == "estimate") return cmd_estimate(config);
        if (sub == "simulate") return cmd_simulate(config);
        if (sub == "diagnose") return cmd_diagnose(config, ov);
        throw std::runtime_error("unknown subcommand " + sub);
    } catch (const MissingInput& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
}
