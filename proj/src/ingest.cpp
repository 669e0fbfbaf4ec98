#include "bisg/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bisg/csv.hpp"

namespace bisg {

namespace {

// Base letters for U+00C0..U+00FF (Latin-1 supplement letters).
const char* latin1_base(unsigned cp) {
    switch (cp) {
        case 0xC0: case 0xC1: case 0xC2: case 0xC3: case 0xC4: case 0xC5:
        case 0xE0: case 0xE1: case 0xE2: case 0xE3: case 0xE4: case 0xE5:
            return "A";
        case 0xC6: case 0xE6: return "AE";
        case 0xC7: case 0xE7: return "C";
        case 0xC8: case 0xC9: case 0xCA: case 0xCB:
        case 0xE8: case 0xE9: case 0xEA: case 0xEB:
            return "E";
        case 0xCC: case 0xCD: case 0xCE: case 0xCF:
        case 0xEC: case 0xED: case 0xEE: case 0xEF:
            return "I";
        case 0xD0: case 0xF0: return "D";
        case 0xD1: case 0xF1: return "N";
        case 0xD2: case 0xD3: case 0xD4: case 0xD5: case 0xD6: case 0xD8:
        case 0xF2: case 0xF3: case 0xF4: case 0xF5: case 0xF6: case 0xF8:
            return "O";
        case 0xD9: case 0xDA: case 0xDB: case 0xDC:
        case 0xF9: case 0xFA: case 0xFB: case 0xFC:
            return "U";
        case 0xDD: case 0xFD: case 0xFF: return "Y";
        case 0xDE: case 0xFE: return "TH";
        case 0xDF: return "SS";
        default: return nullptr;
    }
}

// Base letters for U+0100..U+017F (Latin Extended-A).
const char* latin_ext_a_base(unsigned cp) {
    if (cp <= 0x105) return "A";
    if (cp >= 0x106 && cp <= 0x10D) return "C";
    if (cp >= 0x10E && cp <= 0x111) return "D";
    if (cp >= 0x112 && cp <= 0x11B) return "E";
    if (cp >= 0x11C && cp <= 0x123) return "G";
    if (cp >= 0x124 && cp <= 0x127) return "H";
    if (cp >= 0x128 && cp <= 0x131) return "I";
    if (cp == 0x132 || cp == 0x133) return "IJ";
    if (cp == 0x134 || cp == 0x135) return "J";
    if (cp >= 0x136 && cp <= 0x138) return "K";
    if (cp >= 0x139 && cp <= 0x142) return "L";
    if (cp >= 0x143 && cp <= 0x14B) return "N";
    if (cp >= 0x14C && cp <= 0x151) return "O";
    if (cp == 0x152 || cp == 0x153) return "OE";
    if (cp >= 0x154 && cp <= 0x159) return "R";
    if (cp >= 0x15A && cp <= 0x161) return "S";
    if (cp >= 0x162 && cp <= 0x167) return "T";
    if (cp >= 0x168 && cp <= 0x173) return "U";
    if (cp == 0x174 || cp == 0x175) return "W";
    if (cp >= 0x176 && cp <= 0x178) return "Y";
    if (cp >= 0x179 && cp <= 0x17E) return "Z";
    if (cp == 0x17F) return "S";
    return nullptr;
}

// Decodes one UTF-8 code point; invalid bytes decode as U+FFFD.
unsigned next_codepoint(const std::string& s, std::size_t& i) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    unsigned cp = 0;
    int extra = 0;
    if ((b0 & 0xE0) == 0xC0) {
        cp = b0 & 0x1F;
        extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
        cp = b0 & 0x0F;
        extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
        cp = b0 & 0x07;
        extra = 3;
    } else {
        ++i;
        return 0xFFFD;
    }
    ++i;
    for (int k = 0; k < extra; ++k) {
        if (i >= s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80)
            return 0xFFFD;
        cp = (cp << 6) | (static_cast<unsigned char>(s[i]) & 0x3F);
        ++i;
    }
    return cp;
}

}  // namespace

std::string fold_name(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        const unsigned cp = next_codepoint(raw, i);
        if (cp == '\'' || cp == 0x2018 || cp == 0x2019 || cp == '`') continue;
        if (cp >= 'a' && cp <= 'z') {
            out += static_cast<char>(cp - 'a' + 'A');
        } else if (cp >= 'A' && cp <= 'Z') {
            out += static_cast<char>(cp);
        } else if (cp == ' ' || cp == '\t') {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else if (cp == '-') {
            out += '-';
        } else if (cp >= 0xC0 && cp <= 0xFF) {
            if (const char* base = latin1_base(cp)) out += base;
        } else if (cp >= 0x100 && cp <= 0x17F) {
            if (const char* base = latin_ext_a_base(cp)) out += base;
        }
        // Everything else (digits, periods, other scripts) drops.
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    std::size_t start = 0;
    while (start < out.size() && out[start] == ' ') ++start;
    return out.substr(start);
}

std::vector<std::string> normalize_surname(const std::string& raw,
                                           const std::unordered_set<std::string>& reference) {
    const std::string folded = fold_name(raw);
    if (folded.empty()) throw std::runtime_error("surname empty after normalization: '" + raw + "'");
    if (folded.find('-') == std::string::npos) return {folded};
    std::vector<std::string> parts;
    std::stringstream ss(folded);
    std::string part;
    bool all_known = true;
    while (std::getline(ss, part, '-')) {
        if (part.empty()) {
            all_known = false;
            break;
        }
        parts.push_back(part);
        if (!reference.count(part)) all_known = false;
    }
    if (all_known && parts.size() >= 2) return parts;
    return {folded};
}

NameRules default_name_rules() {
    NameRules rules;
    static const std::pair<const char*, const char*> kNicknames[] = {
        {"TOMMY", "THOMAS"}, {"TOM", "THOMAS"},     {"BOB", "ROBERT"},
        {"BOBBY", "ROBERT"}, {"ROB", "ROBERT"},     {"BILL", "WILLIAM"},
        {"BILLY", "WILLIAM"},{"WILL", "WILLIAM"},   {"DICK", "RICHARD"},
        {"RICK", "RICHARD"}, {"RICH", "RICHARD"},   {"JIM", "JAMES"},
        {"JIMMY", "JAMES"},  {"MIKE", "MICHAEL"},   {"MICKEY", "MICHAEL"},
        {"DAVE", "DAVID"},   {"DAN", "DANIEL"},     {"DANNY", "DANIEL"},
        {"JOE", "JOSEPH"},   {"JOEY", "JOSEPH"},    {"JOHNNY", "JOHN"},
        {"JACK", "JOHN"},    {"TED", "THEODORE"},   {"TEDDY", "THEODORE"},
        {"ED", "EDWARD"},    {"EDDIE", "EDWARD"},   {"STEVE", "STEVEN"},
        {"KEN", "KENNETH"},  {"KENNY", "KENNETH"},  {"LARRY", "LAWRENCE"},
        {"ANDY", "ANDREW"},  {"DREW", "ANDREW"},    {"TONY", "ANTHONY"},
        {"BERNIE", "BERNARD"},{"HARRY", "HAROLD"},  {"HANK", "HENRY"},
        {"ABE", "ABRAHAM"},  {"AL", "ALBERT"},      {"ALEX", "ALEXANDER"},
        {"BETTY", "ELIZABETH"},{"BETH", "ELIZABETH"},{"LIZ", "ELIZABETH"},
        {"LIBBY", "ELIZABETH"},{"BECKY", "REBECCA"},{"SUE", "SUSAN"},
        {"SUSIE", "SUSAN"},  {"KATE", "KATHERINE"}, {"KATHY", "KATHERINE"},
        {"KATIE", "KATHERINE"},{"PEGGY", "MARGARET"},{"MAGGIE", "MARGARET"},
        {"MEG", "MARGARET"}, {"PAT", "PATRICIA"},   {"PATTY", "PATRICIA"},
        {"TRISH", "PATRICIA"},{"DEBBIE", "DEBORAH"},{"DEB", "DEBORAH"},
        {"BARB", "BARBARA"}, {"JUDY", "JUDITH"},    {"JAN", "JANET"},
        {"NANCY", "ANN"},    {"FANNY", "FRANCES"},  {"FRAN", "FRANCES"},
        {"SAM", "SAMUEL"},   {"SAMMY", "SAMUEL"},   {"NATE", "NATHAN"},
        {"NICK", "NICHOLAS"},{"GREG", "GREGORY"},   {"JEFF", "JEFFREY"},
        {"JERRY", "GERALD"}, {"RON", "RONALD"},     {"RONNIE", "RONALD"},
        {"DON", "DONALD"},   {"DONNIE", "DONALD"},  {"RAY", "RAYMOND"},
        {"LOU", "LOUIS"},    {"LOUIE", "LOUIS"},    {"FRANK", "FRANCIS"},
        {"FRED", "FREDERICK"},{"FREDDY", "FREDERICK"},{"GENE", "EUGENE"},
        {"HERB", "HERBERT"}, {"HOWIE", "HOWARD"},   {"IRV", "IRVING"},
        {"IZZY", "ISRAEL"},  {"LEN", "LEONARD"},    {"LENNY", "LEONARD"},
        {"MANNY", "EMANUEL"},{"MARTY", "MARTIN"},   {"MAX", "MAXWELL"},
        {"MEL", "MELVIN"},   {"MOE", "MORRIS"},     {"MORTY", "MORTON"},
        {"NORM", "NORMAN"},  {"PHIL", "PHILIP"},    {"SID", "SIDNEY"},
        {"SOL", "SOLOMON"},  {"STAN", "STANLEY"},   {"VIC", "VICTOR"},
        {"WALT", "WALTER"},  {"ZACH", "ZACHARY"},   {"GABE", "GABRIEL"},
        {"BEN", "BENJAMIN"}, {"BENNY", "BENJAMIN"}, {"JOSH", "JOSHUA"},
        {"DOTTIE", "DOROTHY"},{"DOT", "DOROTHY"},   {"ESTIE", "ESTHER"},
        {"GERT", "GERTRUDE"},{"GERTIE", "GERTRUDE"},{"MILLIE", "MILDRED"},
        {"MINNIE", "MINERVA"},{"ROSIE", "ROSE"},    {"SADIE", "SARAH"},
        {"SALLY", "SARAH"},  {"SHIRL", "SHIRLEY"},  {"SYL", "SYLVIA"},
        {"VICKI", "VICTORIA"},{"GINNY", "VIRGINIA"},{"CONNIE", "CONSTANCE"},
        {"CHRIS", "CHRISTOPHER"},{"CHUCK", "CHARLES"},{"CHARLIE", "CHARLES"},
        {"CARRIE", "CAROLINE"},{"CINDY", "CYNTHIA"},{"ELLIE", "ELEANOR"},
        {"EVIE", "EVELYN"},  {"FLO", "FLORENCE"},   {"HELENE", "HELEN"},
        {"JENNY", "JENNIFER"},{"JEN", "JENNIFER"},  {"JESS", "JESSICA"},
        {"MANDY", "AMANDA"}, {"MOLLY", "MARY"},     {"RACHIE", "RACHEL"},
    };
    for (const auto& [nick, canon] : kNicknames) rules.nicknames[nick] = canon;
    static const char* kDeny[] = {
        "MOTHER", "FATHER",   "GRANDMA",  "GRANDPA",  "GRANDMOTHER",
        "GRANDFATHER", "BUBBE", "ZAYDE",  "MOM",      "DAD",
        "MRS?",   "MS",       "MISS",     "DR",       "RABBI",
        "CANTOR", "REV",      "SISTER",   "BROTHER",  "AUNT",
        "UNCLE",  "BABY",     "UNKNOWN",  "N/?A",     "NONE",
        "TEST",   ".*\\d.*",
    };
    for (const char* pat : kDeny) rules.deny.emplace_back(std::string("^(") + pat + ")$");
    return rules;
}

NameRules load_name_rules(const std::string& nickname_csv_path,
                          const std::string& deny_list_path) {
    NameRules rules;
    const CsvTable nick = read_csv(nickname_csv_path);
    const std::size_t c_from = nick.col("nickname");
    const std::size_t c_to = nick.col("canonical");
    for (const auto& row : nick.rows)
        rules.nicknames[fold_name(row[c_from])] = fold_name(row[c_to]);

    std::ifstream in(deny_list_path);
    if (!in) throw std::runtime_error("cannot open file: " + deny_list_path);
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        rules.deny.emplace_back("^(" + line + ")$");
    }
    return rules;
}

std::optional<std::string> normalize_first_name(const std::string& raw,
                                                const NameRules& rules) {
    std::string folded = fold_name(raw);
    if (folded.empty()) throw std::runtime_error("first name empty after normalization: '" + raw + "'");
    // Strip a leading or trailing single-letter initial.
    std::vector<std::string> tokens;
    std::stringstream ss(folded);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.size() > 1 && tokens.front().size() == 1) tokens.erase(tokens.begin());
    if (tokens.size() > 1 && tokens.back().size() == 1) tokens.pop_back();
    std::string name;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) name += ' ';
        name += tokens[i];
    }
    for (const auto& re : rules.deny)
        if (std::regex_match(name, re)) return std::nullopt;
    auto it = rules.nicknames.find(name);
    if (it != rules.nicknames.end()) name = it->second;
    return name;
}

AggregateResult aggregate_counts(const std::vector<NormalizedRecord>& records,
                                 const GeoPrior& prior, UnknownStratumPolicy policy) {
    AggregateResult out;
    out.counts.num_strata = prior.num_strata();
    for (const auto& rec : records) {
        const int g = prior.find(rec.stratum);
        if (g < 0) {
            if (policy == UnknownStratumPolicy::Abort)
                throw std::runtime_error("unknown stratum id: " + rec.stratum);
            ++out.dropped_unknown_strata;
            continue;
        }
        const int s = out.counts.intern_surname(rec.surname);
        out.counts.add(g, s, 1);
        if (!rec.first_name.empty()) {
            ++out.first_name_counts[rec.first_name];
            ++out.first_name_total;
        }
    }
    out.counts.finalize();
    if (out.dropped_unknown_strata > 0)
        std::fprintf(stderr, "warning: dropped %lld records with unknown strata\n",
                     out.dropped_unknown_strata);
    return out;
}

GeoPrior load_geo_prior(const std::string& path) {
    const CsvTable t = read_csv(path);
    const std::size_t c_g = t.col("stratum");
    const std::size_t c_p = t.col("p_r_given_g");
    const std::size_t c_q = t.col("p_g_given_r");
    GeoPrior prior;
    for (const auto& row : t.rows) {
        if (prior.index.count(row[c_g]))
            throw std::runtime_error("geo prior: duplicate stratum " + row[c_g]);
        prior.index[row[c_g]] = static_cast<int>(prior.strata.size());
        prior.strata.push_back(row[c_g]);
        prior.p_r_given_g.push_back(std::stod(row[c_p]));
        prior.p_g_given_r.push_back(std::stod(row[c_q]));
    }
    double sum = 0.0;
    for (double q : prior.p_g_given_r) sum += q;
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::runtime_error("geo prior: p_g_given_r sums to " + std::to_string(sum));
    if (std::abs(sum - 1.0) > 1e-9) {
        std::fprintf(stderr, "warning: renormalizing p_g_given_r (sum %.12f)\n", sum);
    }
    for (double& q : prior.p_g_given_r) q /= sum;
    prior.validate();
    return prior;
}

MinorityData load_minority_names(const std::string& path, const GeoPrior& prior,
                                 const NameRules& rules, UnknownStratumPolicy policy) {
    const CsvTable t = read_csv(path);
    const std::size_t c_s = t.col("surname");
    const std::size_t c_g = t.col("stratum");
    const int c_f = t.col_opt("first_name");

    // Pass 1: the reference set for hyphen splitting is every non-hyphenated
    // folded surname occurring in the dataset.
    std::unordered_set<std::string> reference;
    for (const auto& row : t.rows) {
        const std::string folded = fold_name(row[c_s]);
        if (!folded.empty() && folded.find('-') == std::string::npos)
            reference.insert(folded);
    }

    MinorityData out;
    std::vector<NormalizedRecord> records;
    records.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        std::string first;
        if (c_f >= 0 && !fold_name(row[c_f]).empty()) {
            auto fn = normalize_first_name(row[c_f], rules);
            if (!fn) {
                ++out.dropped_non_name_rows;
                continue;
            }
            first = *fn;
        }
        for (const auto& s : normalize_surname(row[c_s], reference))
            records.push_back({first, s, row[c_g]});
    }
    AggregateResult agg = aggregate_counts(records, prior, policy);
    out.counts = std::move(agg.counts);
    out.first_name_counts = std::move(agg.first_name_counts);
    out.first_name_total = agg.first_name_total;
    out.dropped_unknown_strata = agg.dropped_unknown_strata;
    return out;
}

FrameAggregate load_frame_counts(const std::string& path, const GeoPrior& prior) {
    const CsvTable t = read_csv(path);
    const std::size_t c_s = t.col("surname");
    const std::size_t c_g = t.col("stratum");
    const std::size_t c_n = t.col("count");
    FrameAggregate frame;
    frame.num_strata = prior.num_strata();
    long long dropped = 0;
    for (const auto& row : t.rows) {
        const int g = prior.find(row[c_g]);
        if (g < 0) {
            ++dropped;
            continue;
        }
        const std::string s = fold_name(row[c_s]);
        if (s.empty()) throw std::runtime_error("frame: surname empty after normalization");
        int sid;
        auto it = frame.surname_index.find(s);
        if (it == frame.surname_index.end()) {
            sid = static_cast<int>(frame.surnames.size());
            frame.surnames.push_back(s);
            frame.surname_index[s] = sid;
        } else {
            sid = it->second;
        }
        const long long n = std::stoll(row[c_n]);
        if (n < 0) throw std::runtime_error("frame: negative count");
        frame.cells.push_back({g, sid, n});
    }
    if (dropped > 0)
        std::fprintf(stderr, "warning: dropped %lld frame rows with unknown strata\n", dropped);
    frame.finalize();
    return frame;
}

UnitRoster load_roster(const std::string& path, const GeoPrior& prior,
                       const NameRules& rules) {
    const CsvTable t = read_csv(path);
    const std::size_t c_id = t.col("unit_id");
    const std::size_t c_f = t.col("first_name");
    const std::size_t c_s = t.col("surname");
    const std::size_t c_g = t.col("stratum");
    UnitRoster roster;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (i != c_id && i != c_f && i != c_s && i != c_g)
            roster.covariate_names.push_back(t.header[i]);
    std::unordered_set<std::string> seen_ids;
    for (const auto& row : t.rows) {
        if (!seen_ids.insert(row[c_id]).second)
            throw std::runtime_error("roster: duplicate unit_id " + row[c_id]);
        const int g = prior.find(row[c_g]);
        if (g < 0) throw std::runtime_error("roster: unknown stratum " + row[c_g]);
        UnitRoster::Row r;
        r.unit_id = row[c_id];
        const std::string folded_first = fold_name(row[c_f]);
        if (!folded_first.empty()) {
            auto fn = normalize_first_name(row[c_f], rules);
            // Non-name roster first names are kept blank, not dropped: the
            // unit still exists in the frame.
            r.first_name = fn ? *fn : std::string();
        }
        r.surname = fold_name(row[c_s]);
        if (r.surname.empty())
            throw std::runtime_error("roster: surname empty for unit " + r.unit_id);
        r.stratum = g;
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (i != c_id && i != c_f && i != c_s && i != c_g)
                r.covariates.push_back(row[i]);
        roster.rows.push_back(std::move(r));
    }
    return roster;
}

void add_first_names_from_roster(FrameAggregate& frame, const UnitRoster& roster) {
    for (const auto& row : roster.rows) {
        if (row.first_name.empty()) continue;
        ++frame.first_name_counts[row.first_name];
        ++frame.first_name_total;
    }
}

}  // namespace bisg
