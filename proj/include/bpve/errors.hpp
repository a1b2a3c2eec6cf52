#pragma once

#include <stdexcept>
#include <string>

namespace bpve {

// Raised for malformed scenario configs; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bpve
