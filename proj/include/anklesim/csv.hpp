#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "anklesim/types.hpp"

namespace anklesim {

// Append-oriented CSV writer: header row, comma-delimited, time column first,
// numbers at 9 significant digits so reruns are byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns);

    void row(const std::vector<double>& values);
    void raw_row(const std::string& line);
    const std::string& path() const { return path_; }
    static std::string format(double v);

private:
    std::string path_;
    std::ofstream out_;
    size_t n_columns_;
};

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace anklesim
