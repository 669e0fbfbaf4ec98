#ifndef BISG_INGEST_HPP
#define BISG_INGEST_HPP

#include <optional>
#include <regex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bisg/types.hpp"

namespace bisg {

// Compatibility folding to uppercase ASCII: Latin-1 / Latin-Extended-A
// letters map to base letters, apostrophes are removed, other punctuation
// drops; spaces and hyphens survive, runs of spaces collapse.
std::string fold_name(const std::string& raw);

// Hyphenated "A-B" splits into components iff every component is in the
// reference set; otherwise the joined form is kept as a single name.
std::vector<std::string> normalize_surname(const std::string& raw,
                                           const std::unordered_set<std::string>& reference);

struct NameRules {
    std::unordered_map<std::string, std::string> nicknames;
    std::vector<std::regex> deny;
};

NameRules default_name_rules();
NameRules load_name_rules(const std::string& nickname_csv_path,
                          const std::string& deny_list_path);

// nullopt signals "drop row" (deny-list hit); throws on empty input.
std::optional<std::string> normalize_first_name(const std::string& raw,
                                                const NameRules& rules);

enum class UnknownStratumPolicy { DropWithWarning, Abort };

struct NormalizedRecord {
    std::string first_name;  // may be empty
    std::string surname;     // canonical single surname (post-split component)
    std::string stratum;
};

struct AggregateResult {
    SurnameCountMatrix counts;
    std::unordered_map<std::string, long long> first_name_counts;
    long long first_name_total = 0;
    long long dropped_unknown_strata = 0;
};

AggregateResult aggregate_counts(const std::vector<NormalizedRecord>& records,
                                 const GeoPrior& prior, UnknownStratumPolicy policy);

GeoPrior load_geo_prior(const std::string& path);

struct MinorityData {
    SurnameCountMatrix counts;
    std::unordered_map<std::string, long long> first_name_counts;
    long long first_name_total = 0;
    long long dropped_unknown_strata = 0;
    long long dropped_non_name_rows = 0;
};

MinorityData load_minority_names(const std::string& path, const GeoPrior& prior,
                                 const NameRules& rules,
                                 UnknownStratumPolicy policy = UnknownStratumPolicy::DropWithWarning);

FrameAggregate load_frame_counts(const std::string& path, const GeoPrior& prior);

UnitRoster load_roster(const std::string& path, const GeoPrior& prior,
                       const NameRules& rules);

// Frame first-name proportions come from the roster when available.
void add_first_names_from_roster(FrameAggregate& frame, const UnitRoster& roster);

}  // namespace bisg

#endif
