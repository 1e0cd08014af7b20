#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/vec.hpp"

namespace dds {

using LinearOperator = std::function<Vector(std::span<const double>)>;

struct GmresOptions {
    double rtol = 1e-8;          // on the residual relative to the initial residual
    int maxit = 1000;            // capped at the problem dimension
    double breakdown_tol = 1e-14; // relative to the norm of the vector being orthogonalized
    bool record_basis = false;   // keep the Arnoldi basis and Hessenberg in the result
};

struct GmresResult {
    Vector solution;
    std::vector<double> residual_history; // estimates, entry 0 is the initial residual norm
    int iterations = 0;                   // Arnoldi steps taken
    int basis_dim = 0;                    // iterations + 1 stored basis vectors
    bool converged = false;
    bool breakdown = false; // lucky Arnoldi breakdown hit
    std::int64_t stored_basis_bytes = 0;  // 8 * vector length * basis_dim

    // Filled only when record_basis is set.
    std::vector<Vector> basis;                    // q_0 .. q_k
    std::vector<std::vector<double>> hessenberg;  // column i holds h_{0..i+1, i}

    std::string to_json() const;
};

// Unrestarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations
// on the least-squares problem. The residual history is non-increasing. On a
// lucky breakdown the current least-squares solution is returned and the
// breakdown flag set.
GmresResult gmres(const LinearOperator& op, std::span<const double> b,
                  std::span<const double> x0, const GmresOptions& opts);

} // namespace dds
