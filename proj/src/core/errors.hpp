#pragma once

#include <stdexcept>
#include <string>

namespace raseg {

// Training aborted on a non-finite loss; carries the diagnostic string.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace raseg
