#ifndef BISG_CSV_HPP
#define BISG_CSV_HPP

#include <string>
#include <vector>

namespace bisg {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index for a header name; throws naming the column if absent.
    std::size_t col(const std::string& name) const;
    // -1 when absent.
    int col_opt(const std::string& name) const;
};

// Header row required; quoted fields and embedded commas supported.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Shortest decimal that round-trips; stable across platforms for our use.
std::string format_double(double x);

}  // namespace bisg

#endif
