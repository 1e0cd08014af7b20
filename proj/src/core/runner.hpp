#pragma once

// Experiment runner: JSON configuration in, per-method CSV histories and a
// summary JSON out, plus the fast invariant battery behind `verify`.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "core/history.hpp"
#include "core/linear_schwarz.hpp"
#include "core/problems.hpp"

namespace dds {

struct RunConfig {
    ProblemSpec problem;
    std::vector<index_t> subdomains;  // per axis
    int overlap_layers = 1;
    std::vector<std::string> methods;

    double tol = 1e-10;
    StoppingMode mode = StoppingMode::Error;
    int maxit = 200;

    std::string guess_type = "zeros";  // zeros | constant | random
    double guess_value = 0.0;
    unsigned long long seed = 1234;

    int threads = 1;
    bool timings = false;  // off: wall_ms columns stay 0 so reruns are byte-identical

    double gmres_rtol = 1e-10;  // linear Krylov runs
    int gmres_maxit = 500;
    double newton_gmres_rtol = 1e-12;     // Jacobian systems of one-level Newton methods
    double two_level_gmres_rtol = 1e-9;   // finite-difference Jacobians need a looser floor
    std::string line_search = "default";  // default | on | off | fallback
    double inner_tol = 1e-12;
    int inner_maxit = 50;
    double coarse_tol = 1e-12;

    static RunConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

struct MethodRecord {
    std::string method;
    bool converged = false;
    bool diverged = false;
    int iterations = 0;
    double final_err = -1.0;
    double final_res = -1.0;
    std::int64_t total_cost = 0;        // Newton-family cumulative inner work
    std::int64_t subdomain_solves = 0;  // stationary/Krylov counters
    std::int64_t parallel_rounds = 0;
    std::int64_t basis_bytes = 0;
    double wall_ms = 0.0;
    std::string csv;
};

struct RunOutput {
    std::vector<MethodRecord> records;
    std::string summary_json;
    std::string decomposition_json;
};

const std::vector<std::string>& valid_method_ids();

// Executes the configured methods in order; writes nothing.
RunOutput run_experiment(const RunConfig& cfg);

// run_experiment, then one <method>.csv per record plus summary.json and
// decomposition.json under out_dir (created if missing).
RunOutput run_experiment_to_dir(const RunConfig& cfg, const std::string& out_dir);

// Reference discrete solution: direct sparse solve for the linear problem,
// otherwise globalized Newton with direct Jacobian solves, iterated to the
// machine-precision floor.
Vector reference_solution(const NonlinearProblem& problem);

// Fast invariant battery; one "verify <name>: PASS/FAIL" line per check.
bool run_verify(std::ostream& out);

} // namespace dds
