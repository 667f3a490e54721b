#pragma once

#include <stdexcept>
#include <string>

namespace elapse {

/// Invalid model parameters, malformed config fields, mismatched grids.
class invalid_argument_error : public std::invalid_argument {
public:
    explicit invalid_argument_error(const std::string& what)
        : std::invalid_argument(what) {}
};

/// A solver or quadrature could not deliver its contract (bracket failure,
/// tail bound too wide, trace too short, ...).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace elapse
