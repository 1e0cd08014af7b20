#pragma once

#include <stdexcept>
#include <string>

namespace dds {

// Invalid sizes, malformed structure, bad configuration values.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// A factorization met a pivot below the singularity threshold.
class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// A subdomain or coarse Newton solve failed to reach its tolerance.
class SolveFailure : public std::runtime_error {
public:
    SolveFailure(const std::string& what, int subdomain, int iterations, double residual)
        : std::runtime_error(what), subdomain(subdomain), iterations(iterations),
          final_residual(residual) {}
    int subdomain;
    int iterations;
    double final_residual;
};

// Unparseable or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dds
