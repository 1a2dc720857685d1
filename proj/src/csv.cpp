#include "anklesim/csv.hpp"

#include <cstdio>
#include <sstream>

namespace anklesim {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), out_(path), n_columns_(columns.size()) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
        out_ << (i ? "," : "") << columns[i];
    }
    out_ << "\n";
}

std::string CsvWriter::format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != n_columns_) {
        throw IoError("csv row width mismatch in " + path_);
    }
    for (size_t i = 0; i < values.size(); ++i) {
        out_ << (i ? "," : "") << format(values[i]);
    }
    out_ << "\n";
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n"; }

int CsvTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    CsvTable table;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        if (header) {
            while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
            header = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(cell.empty() ? 0.0 : std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("non-numeric cell '" + cell + "' in " + path);
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace anklesim
