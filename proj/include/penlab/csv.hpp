#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/grid.hpp"
#include "penlab/stepper.hpp"

namespace penlab {

/// Deterministic CSV emission: fixed column order, %.17g numbers, LF line
/// endings, no locale involvement. Identical data produces byte-identical
/// files.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary) {
        if (!out_) throw ConfigError("cannot open output file '" + path + "'");
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> cells) {
        bool first = true;
        for (double c : cells) {
            if (!first) out_ << ',';
            first = false;
            out_ << cell(c);
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cell(cells[i]);
        }
        out_ << '\n';
    }

    static std::string cell(double x) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return buf;
    }

private:
    std::ofstream out_;
};

/// Field values as flat (t, x, u) rows, time-major.
inline void write_field_csv(const std::string& path, const SpaceTimeField& u) {
    CsvWriter w(path, {"t", "x", "u"});
    for (int k = 0; k < u.n_frames(); ++k) {
        double t = u.times.nodes[static_cast<std::size_t>(k)];
        for (int i = 0; i < u.grid.n_x; ++i)
            w.row({t, u.grid.node(i), u.value(k, i)});
    }
}

/// Reflection-measure cells as (t_left, x, mass) rows, one per grid cell.
inline void write_measure_csv(const std::string& path, const RegularMeasure& nu) {
    CsvWriter w(path, {"t_left", "x", "mass"});
    for (int k = 0; k < nu.times.n_intervals(); ++k) {
        double t = nu.times.nodes[static_cast<std::size_t>(k)];
        for (int i = 0; i < nu.grid.n_x; ++i)
            w.row({t, nu.grid.node(i),
                   nu.cell_mass[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]});
    }
}

} // namespace penlab
