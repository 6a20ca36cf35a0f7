#pragma once

#include <stdexcept>
#include <string>

namespace penlab {

/// Invalid or inconsistent user-supplied configuration. The CLI maps this
/// to exit code 3.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the domain an operation is defined on (times past the
/// horizon, mismatched grids, ...).
class RangeError : public std::out_of_range {
public:
    explicit RangeError(const std::string& what) : std::out_of_range(what) {}
};

} // namespace penlab
