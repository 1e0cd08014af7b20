#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dds {

// Per-sweep record of a stationary or Krylov run.
struct ConvergenceHistory {
    struct Row {
        int iter = 0;
        double err = 0.0; // relative error against the reference solution, -1 if unavailable
        double res = 0.0; // relative residual of the volume iterate
        std::int64_t cum_solves = 0;
        std::int64_t cum_parallel_rounds = 0;
        std::int64_t basis_bytes = 0;
    };
    std::vector<Row> rows;
    bool converged = false;
    bool diverged = false;

    int iterations() const { return rows.empty() ? 0 : rows.back().iter; }
    std::string to_csv() const; // iter,err,res,cum_solves,cum_parallel_rounds,basis_bytes
};

// Per-outer-iteration record of a Newton-type run. cum_cost accumulates
// max_inner_newton + inner_gmres exactly.
struct OuterNewtonHistory {
    struct Row {
        int iter = 0;
        double err = 0.0;
        double res = 0.0; // norm of the method's own residual
        int inner_gmres = 0;
        int max_inner_newton = 0;
        std::int64_t cum_cost = 0;
        double wall_ms = 0.0;
        int coarse_newton_iters = 0; // two-level methods only
    };
    std::vector<Row> rows;
    bool converged = false;
    bool diverged = false;
    bool two_level = false;

    int iterations() const { return rows.empty() ? 0 : rows.back().iter; }
    std::int64_t total_cost() const { return rows.empty() ? 0 : rows.back().cum_cost; }
    double average_inner_gmres() const;
    std::string to_csv() const; // iter,err,res,inner_gmres,max_inner_newton,cum_cost,wall_ms[,coarse_newton_iters]
};

void write_file(const std::string& path, const std::string& content);

} // namespace dds
