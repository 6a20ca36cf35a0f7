#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/fixtures.hpp"
#include "penlab/grid.hpp"

namespace penlab {

/// Flat experiment configuration, one section per concern. Every field has
/// a working default, so an empty file is a valid configuration.
struct RunConfig {
    // [process]
    int d = 1;
    double alpha = 1.0;
    double eps_trunc = 1.0;
    double z_max = 2.0;
    // [grid]
    double L = 10.0;
    int n_x = 129;
    std::string boundary = "zero";
    // [time]
    double T = 0.5;
    int n_t = 256;
    // [problem]
    std::string fixture = "active";
    int d1 = 1;
    double beta = 0.0;
    // [penalty]
    double n_schedule = 256.0;
    // [monte-carlo]
    int n_paths = 1000;
    std::uint64_t seed = 12345;
    // [output]
    std::string directory = "out";

    Grid make_grid() const {
        BoundaryRule rule;
        if (boundary == "zero")
            rule = BoundaryRule::ZeroExtension;
        else if (boundary == "periodic")
            rule = BoundaryRule::Periodic;
        else
            throw ConfigError("RunConfig: boundary must be 'zero' or 'periodic'");
        return Grid{L, n_x, rule};
    }

    TimeGrid make_times() const { return TimeGrid::uniform(T, n_t); }

    /// Increasing penalty schedule 4, 8, ..., n_schedule (always at least
    /// one level).
    std::vector<double> make_schedule() const {
        std::vector<double> s;
        for (double n = 4.0; n < n_schedule; n *= 2.0) s.push_back(n);
        s.push_back(n_schedule);
        return s;
    }

    void validate() const {
        if (d != 1 && d != 2) throw ConfigError("RunConfig: d must be 1 or 2");
        if (!(alpha > 0.0 && alpha < 2.0))
            throw ConfigError("RunConfig: alpha must lie in (0, 2)");
        Grid g = make_grid();
        g.validate();
        if (eps_trunc < g.spacing())
            throw ConfigError("RunConfig: need eps_trunc >= grid spacing");
        if (!(z_max > eps_trunc)) throw ConfigError("RunConfig: need z_max > eps_trunc");
        if (!(T > 0.0) || n_t < 1) throw ConfigError("RunConfig: need T > 0 and n_t >= 1");
        if (d1 < 1) throw ConfigError("RunConfig: d1 must be >= 1");
        if (!(beta * beta < 1.0)) throw ConfigError("RunConfig: need beta^2 < 1");
        if (!(n_schedule >= 1.0)) throw ConfigError("RunConfig: n_schedule must be >= 1");
        if (n_schedule * (T / static_cast<double>(n_t)) > 1.0 + 1e-12)
            throw ConfigError("RunConfig: schedule violates n * dt <= 1");
        if (n_paths < 1) throw ConfigError("RunConfig: n_paths must be >= 1");
        if (fixture != "linear-smooth" && fixture != "linear-noisy" &&
            fixture != "potential" && fixture != "active" && fixture != "active-noisy" &&
            fixture != "ordered-pair" && fixture != "periodic-shift")
            throw ConfigError("RunConfig: unknown fixture '" + fixture + "'");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line) +
                          ": expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line) +
                          ": expected an integer, got '" + v + "'");
    }
}

} // namespace detail

/// Parses the sectioned key = value format. Unknown sections or keys are
/// reported with their line number; keys not present keep their defaults.
inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = detail::trim(s.substr(1, s.size() - 2));
            if (section != "process" && section != "grid" && section != "time" &&
                section != "problem" && section != "penalty" &&
                section != "monte-carlo" && section != "output")
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        std::string val = detail::trim(s.substr(eq + 1));
        std::string qual = section + "." + key;

        if (qual == "process.d") cfg.d = static_cast<int>(detail::parse_int(val, line_no));
        else if (qual == "process.alpha") cfg.alpha = detail::parse_double(val, line_no);
        else if (qual == "process.eps_trunc") cfg.eps_trunc = detail::parse_double(val, line_no);
        else if (qual == "process.z_max") cfg.z_max = detail::parse_double(val, line_no);
        else if (qual == "grid.L") cfg.L = detail::parse_double(val, line_no);
        else if (qual == "grid.n_x") cfg.n_x = static_cast<int>(detail::parse_int(val, line_no));
        else if (qual == "grid.boundary") cfg.boundary = val;
        else if (qual == "time.T") cfg.T = detail::parse_double(val, line_no);
        else if (qual == "time.n_t") cfg.n_t = static_cast<int>(detail::parse_int(val, line_no));
        else if (qual == "problem.fixture") cfg.fixture = val;
        else if (qual == "problem.d1") cfg.d1 = static_cast<int>(detail::parse_int(val, line_no));
        else if (qual == "problem.beta") cfg.beta = detail::parse_double(val, line_no);
        else if (qual == "penalty.n_schedule") cfg.n_schedule = detail::parse_double(val, line_no);
        else if (qual == "monte-carlo.n_paths")
            cfg.n_paths = static_cast<int>(detail::parse_int(val, line_no));
        else if (qual == "monte-carlo.seed")
            cfg.seed = static_cast<std::uint64_t>(detail::parse_int(val, line_no));
        else if (qual == "output.directory") cfg.directory = val;
        else
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": unknown key '" + key + "' in section [" + section + "]");
    }
    return cfg;
}

/// Canonical serialization: fixed section and key order, %.17g doubles, so
/// parse(serialize(cfg)) reproduces cfg exactly and serialization is a
/// fixed point.
inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "[process]\n";
    out << "d = " << cfg.d << "\n";
    out << "alpha = " << detail::format_double(cfg.alpha) << "\n";
    out << "eps_trunc = " << detail::format_double(cfg.eps_trunc) << "\n";
    out << "z_max = " << detail::format_double(cfg.z_max) << "\n";
    out << "\n[grid]\n";
    out << "L = " << detail::format_double(cfg.L) << "\n";
    out << "n_x = " << cfg.n_x << "\n";
    out << "boundary = " << cfg.boundary << "\n";
    out << "\n[time]\n";
    out << "T = " << detail::format_double(cfg.T) << "\n";
    out << "n_t = " << cfg.n_t << "\n";
    out << "\n[problem]\n";
    out << "fixture = " << cfg.fixture << "\n";
    out << "d1 = " << cfg.d1 << "\n";
    out << "beta = " << detail::format_double(cfg.beta) << "\n";
    out << "\n[penalty]\n";
    out << "n_schedule = " << detail::format_double(cfg.n_schedule) << "\n";
    out << "\n[monte-carlo]\n";
    out << "n_paths = " << cfg.n_paths << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "\n[output]\n";
    out << "directory = " << cfg.directory << "\n";
    return out.str();
}

inline RunConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Builds the fixture named in the configuration on the configured grid.
/// The ordered-pair fixture returns its first problem here; callers that
/// need both sides use fixtures::ordered_pair directly.
inline FixtureBundle make_fixture(const RunConfig& cfg) {
    cfg.validate();
    Grid g = cfg.make_grid();
    TimeGrid tg = cfg.make_times();
    FixtureBundle b;
    if (cfg.fixture == "linear-smooth")
        b = fixtures::linear_smooth(fixtures::LinearVariant::Deterministic, g, tg);
    else if (cfg.fixture == "linear-noisy")
        b = fixtures::linear_smooth(fixtures::LinearVariant::Noisy, g, tg);
    else if (cfg.fixture == "potential")
        b = fixtures::linear_smooth(fixtures::LinearVariant::Potential, g, tg);
    else if (cfg.fixture == "active")
        b = fixtures::active_obstacle(false, g, tg);
    else if (cfg.fixture == "active-noisy")
        b = fixtures::active_obstacle(true, g, tg);
    else if (cfg.fixture == "ordered-pair")
        b = fixtures::ordered_pair(g, tg).first;
    else if (cfg.fixture == "periodic-shift")
        b = fixtures::periodic_shift(0.0, g, tg);
    else
        throw ConfigError("RunConfig: unknown fixture '" + cfg.fixture + "'");
    b.alpha = cfg.alpha;
    b.eps_trunc = cfg.eps_trunc;
    b.z_max = cfg.z_max;
    return b;
}

} // namespace penlab
