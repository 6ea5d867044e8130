#pragma once

#include <stdexcept>
#include <string>

namespace mbrd {

// Bad inputs: malformed files, invariant violations, out-of-range parameters.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failures: missing files, unreadable/unwritable paths.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// External scorer process failures: timeouts, protocol violations, bad scores.
class ScorerError : public std::runtime_error {
public:
    explicit ScorerError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mbrd
