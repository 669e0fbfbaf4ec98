#include "bisg/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bisg {

std::size_t CsvTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("csv: missing column '" + name + "'");
}

int CsvTable::col_opt(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> parse_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n") != std::string::npos;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
    // Strip a UTF-8 BOM if present.
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    t.header = parse_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = parse_line(line);
        if (fields.size() != t.header.size())
            throw std::runtime_error("csv: row with " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(t.header.size()) +
                                     " in " + path);
        t.rows.push_back(std::move(fields));
    }
    return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            if (needs_quoting(fields[i])) {
                out << '"';
                for (char c : fields[i]) {
                    if (c == '"') out << '"';
                    out << c;
                }
                out << '"';
            } else {
                out << fields[i];
            }
        }
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string format_double(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace bisg
