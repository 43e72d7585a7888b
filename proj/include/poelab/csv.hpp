#pragma once
// Small CSV writer with deterministic number formatting (%.17g round-trips
// doubles and is stable across runs and thread counts).

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace poelab {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {}

    bool good() const { return out_.good(); }

    void header(const std::vector<std::string>& cols) { raw_row(cols); }

    class Row {
    public:
        explicit Row(CsvWriter& w) : w_(w) {}
        Row& col(double v) {
            cells_.push_back(fmt_double(v));
            return *this;
        }
        Row& col(long long v) {
            cells_.push_back(std::to_string(v));
            return *this;
        }
        Row& col(int v) { return col(static_cast<long long>(v)); }
        Row& col(std::size_t v) { return col(static_cast<long long>(v)); }
        Row& col(const std::string& v) {
            cells_.push_back(v);
            return *this;
        }
        ~Row() { w_.raw_row(cells_); }

    private:
        CsvWriter& w_;
        std::vector<std::string> cells_;
    };

    Row row() { return Row(*this); }

private:
    void raw_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
    friend class Row;
};

} // namespace poelab
