#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsd {

// Doubles are printed with %.17g so values round-trip exactly through replay.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }

    void header(const std::vector<std::string>& cols) { write_strings(cols); }

    void field(const std::string& s) {
        if (!row_.empty()) row_ += ',';
        row_ += s;
    }
    void field(double v) { field(format_double(v)); }
    void field(int v) { field(std::to_string(v)); }
    void field(std::size_t v) { field(std::to_string(v)); }

    void end_row() {
        out_ << row_ << '\n';
        row_.clear();
    }

    void write_strings(const std::vector<std::string>& cols) {
        for (const auto& c : cols) field(c);
        end_row();
    }

private:
    std::ofstream out_;
    std::string row_;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace fsd
