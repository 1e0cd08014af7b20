#pragma once

// One-level nonlinear overlapping Schwarz methods on a shared geometric
// context: the local solution operators G_j (frozen exterior data), the
// stationary sweeps in volume and substructured form, and the Newton-based
// outer solvers (plain Newton baseline, volume-preconditioned Newton, and its
// substructured counterpart) with exact Jacobian matvecs built from local
// factorizations.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "core/context.hpp"
#include "core/dense.hpp"
#include "core/history.hpp"
#include "core/linear_schwarz.hpp"
#include "core/parallel.hpp"
#include "core/problems.hpp"
#include "core/sparse_lu.hpp"
#include "core/vec.hpp"

namespace dds {

// ---- Local solution operator ---------------------------------------------

struct LocalSolveOptions {
    double tol = 1e-12;      // absolute acceptance: ||r_loc||_2 <= tol
    int maxit = 200;         // subdomain problems near sharp flux limits converge slowly
    bool warm_start = true;  // start inner Newton from R_j u instead of zero
    int max_backtracks = 30;  // halvings inside the damped inner Newton
};

struct LocalSolveReport {
    int subdomain = -1;
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
};

// Solves the subdomain problem R_j F(P_j w + (I - P_j R_j) u) = 0 for the
// local vector w with damped Newton. Throws SolveFailure on non-convergence.
// Each inner Newton step adds one subdomain solve to `counters` (if given).
Vector local_solve_gj(const NonlinearProblem& problem, const SchwarzContext& ctx, int j,
                      std::span<const double> u, const LocalSolveOptions& opts,
                      LocalSolveReport* report = nullptr, SolveCounters* counters = nullptr);

// ---- Stationary sweeps ----------------------------------------------------

struct SweepResult {
    Vector next;                            // iterate after the sweep
    std::vector<LocalSolveReport> reports;  // one per subdomain
    int max_inner_newton() const;
    int total_inner_newton() const;
};

// One sweep u -> sum_j Ptilde_j G_j(u). Adds max_inner_newton parallel rounds
// to `counters` (subdomain solves are counted inside the local solver).
SweepResult nras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                      std::span<const double> u, const LocalSolveOptions& opts = {},
                      SolveCounters* counters = nullptr);

// Substructured sweep: restriction of nras_step applied to the zero extension,
// with a single set of subdomain solves. `volume_next`, when non-null,
// receives the volume iterate the sweep passed through.
SweepResult nsras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                       std::span<const double> v, const LocalSolveOptions& opts = {},
                       SolveCounters* counters = nullptr, Vector* volume_next = nullptr);

struct NonlinearStationaryResult {
    Vector solution;  // volume iterate (volume variant) or skeleton iterate
    ConvergenceHistory history;
};

// Runs repeated nras/nsras sweeps with the same stopping rules as the linear
// stationary driver: err against a volume reference, or the problem residual
// norm ||F(u)||_2 relative to the initial one.
NonlinearStationaryResult solve_nonlinear_stationary(const NonlinearProblem& problem,
                                                     const SchwarzContext& ctx,
                                                     StationaryVariant variant, const Vector& init,
                                                     const StationaryOptions& opts,
                                                     const LocalSolveOptions& local = {});

// ---- Preconditioned residuals --------------------------------------------

struct PreconditionedResidual {
    Vector value;                // u - sum_j Ptilde_j G_j(u), or its restriction
    std::vector<Vector> states;  // per-subdomain volume states u^(j) for the Jacobian
    std::vector<LocalSolveReport> reports;
    int max_inner_newton() const;
};

// Fixed-point residual of the preconditioned volume formulation.
PreconditionedResidual raspen_residual(const NonlinearProblem& problem, const SchwarzContext& ctx,
                                       std::span<const double> u, const LocalSolveOptions& opts = {},
                                       SolveCounters* counters = nullptr);

// Substructured residual: restriction of the volume residual at the zero
// extension of v; states are cached at that extension.
PreconditionedResidual sraspen_residual(const NonlinearProblem& problem, const SchwarzContext& ctx,
                                        std::span<const double> v, const LocalSolveOptions& opts = {},
                                        SolveCounters* counters = nullptr);

// ---- Preconditioned Jacobian ---------------------------------------------

// Exact Jacobian of the preconditioned residual at the states cached by the
// last residual evaluation: J(u) w = sum_j Ptilde_j (R_j J(u^(j)) P_j)^{-1}
// R_j J(u^(j)) w. Local blocks are factored once at construction and reused
// across all matvecs (one Krylov solve per outer iteration).
class RaspenJacobian {
  public:
    RaspenJacobian(const NonlinearProblem& problem, const SchwarzContext& ctx,
                   const std::vector<Vector>& states, SolveCounters* counters = nullptr);

    Vector apply_volume(std::span<const double> w) const;
    // Restriction of the volume matvec to skeleton unknowns: w = zero
    // extension of y, result restricted back.
    Vector apply_substructured(std::span<const double> y) const;
    // Dense substructured Jacobian assembled one skeleton column at a time
    // (one parallel round of local solves per column).
    DenseMatrix assemble_substructured() const;

  private:
    const SchwarzContext* ctx_;
    SolveCounters* counters_;
    std::vector<CsrMatrix> local_rows_;  // rows of J(u^(j)) over the subdomain, all columns
    std::vector<SparseLu> local_factors_;
};

// ---- Outer Newton drivers -------------------------------------------------

enum class OuterMethodKind { PlainNewton, Raspen, Sraspen };
enum class JacobianSolver { Direct, Gmres };
enum class LineSearchMode {
    On,        // Armijo backtracking on the residual norm
    Off,       // full steps; non-finite trial => divergence
    Fallback,  // full steps; halve only to escape failed/non-finite trials
};

struct NewtonOptions {
    StoppingMode mode = StoppingMode::Residual;
    double tol = 1e-10;
    int maxit = 100;
    const Vector* reference = nullptr;  // volume reference, required in Error mode
    JacobianSolver solver = JacobianSolver::Gmres;
    double gmres_rtol = 1e-12;
    int gmres_maxit = 1000;
    std::optional<LineSearchMode> line_search;  // default: On for plain Newton, Fallback otherwise
    double armijo_c = 1e-4;
    int max_backtracks = 30;
    LocalSolveOptions local;
    double divergence_factor = 1e6;
    bool timings = false;  // record wall-clock per outer iteration
    // When set, every accepted iterate (including the initial one) is
    // appended, in the method's own space: volume for plain Newton and the
    // volume fixed-point method, skeleton for the substructured one.
    std::vector<Vector>* trace = nullptr;
};

struct NewtonResult {
    Vector solution;         // iterate in the method's own space
    Vector volume_solution;  // substructured methods: volume iterate rebuilt by one sweep
    OuterNewtonHistory history;
};

// Generic outer Newton loop over a caller-supplied residual/Jacobian pair;
// the two-level methods reuse it with their own operators.
struct OuterOperators {
    index_t dim = 0;
    // Evaluates the residual; reports the max inner Newton depth consumed.
    std::function<Vector(const Vector& x, int& inner_newton)> residual;
    struct Jacobian {
        std::function<Vector(std::span<const double>)> matvec;
        // Direct solve with the same Jacobian; empty when unsupported.
        std::function<Vector(const Vector& rhs)> direct_solve;
    };
    // Prepares the Jacobian at x from the caches of the last residual call.
    std::function<Jacobian(const Vector& x)> jacobian;
    // Maps the iterate of the most recent residual evaluation to the volume
    // space for error/residual reporting (substructured methods reuse the
    // subdomain solves of that evaluation to reconstruct the volume iterate).
    std::function<Vector(const Vector& x)> to_volume;
    // Problem residual norm ||F(.)||_2 of a volume vector, for the res column.
    std::function<double(const Vector& volume)> problem_residual_norm;
    // Coarse-level Newton iterations of the last residual evaluation, for the
    // two-level history column.
    std::function<int()> extra_inner;
};

NewtonResult newton_loop(const OuterOperators& ops, const Vector& init, const NewtonOptions& opts,
                         LineSearchMode line_search);

// Plain Newton on F, or Newton on the preconditioned volume/substructured
// residuals with the exact Jacobian matvecs above.
NewtonResult newton_outer(const NonlinearProblem& problem, const SchwarzContext& ctx,
                          OuterMethodKind kind, const Vector& init, const NewtonOptions& opts = {},
                          SolveCounters* counters = nullptr);

} // namespace dds
