#pragma once

#include <string>

#include "core/context.hpp"
#include "core/csr.hpp"
#include "core/gmres.hpp"
#include "core/history.hpp"
#include "core/parallel.hpp"
#include "core/sparse_lu.hpp"

namespace dds {

// Linear restricted Schwarz solver state: the matrix, the right-hand side and
// one exact factorization per subdomain block, built once.
class LinearSchwarzContext {
public:
    LinearSchwarzContext(const SchwarzContext& geo, CsrMatrix a, Vector f);

    const SchwarzContext& geometry() const { return *geo_; }
    const CsrMatrix& matrix() const { return a_; }
    std::span<const double> rhs() const { return f_; }

    // sum_j inject_j A_j^{-1} R_j r, the one-level preconditioner.
    Vector apply_M_inv(std::span<const double> r) const;

    // One sweep in boundary-condition form: every subdomain solves its block
    // with exterior data frozen, owners assemble the next iterate. Depends on
    // the exterior only through skeleton values.
    Vector ras_step(std::span<const double> u) const;
    // Same sweep as residual update u + M^{-1}(f - A u); agrees with ras_step
    // up to rounding.
    Vector ras_step_residual_form(std::span<const double> u) const;

    // Substructured sweep: extend by zero, sweep, restrict to the skeleton.
    // Also exposes the volume iterate produced on the way.
    Vector sras_step(std::span<const double> v) const;
    Vector sras_step_volume(std::span<const double> v) const;

    // Volume solution reconstructed from converged skeleton data by one sweep.
    Vector volume_from_skeleton(std::span<const double> v) const { return sras_step_volume(v); }

    mutable SolveCounters counters;

private:
    friend class RaspenJacobian;
    Vector local_solve(int j, std::span<const double> rhs) const;

    const SchwarzContext* geo_;
    CsrMatrix a_;
    Vector f_;
    std::vector<SparseLu> local_factors_;
};

enum class StationaryVariant { Ras, Sras };
enum class StoppingMode { Error, Residual };

struct StationaryOptions {
    StoppingMode mode = StoppingMode::Residual;
    double tol = 1e-8;
    int maxit = 200;
    const Vector* reference = nullptr; // volume reference, required in Error mode
    double divergence_factor = 1e6;
};

struct StationaryResult {
    Vector solution; // volume iterate for Ras, skeleton iterate for Sras
    ConvergenceHistory history;
};

StationaryResult solve_stationary(const LinearSchwarzContext& ctx, StationaryVariant variant,
                                  const Vector& init, const StationaryOptions& opts);

struct SchwarzKrylovResult {
    Vector solution; // volume for gmres_ras, skeleton for gmres_sras
    GmresResult gmres;
    ConvergenceHistory history;
};

// GMRES on M^{-1} A u = M^{-1} f.
SchwarzKrylovResult gmres_ras(const LinearSchwarzContext& ctx, const Vector& u0,
                              const GmresOptions& opts, const Vector* reference = nullptr);
// GMRES on the skeleton system (R M^{-1} A P) v = R M^{-1} f.
SchwarzKrylovResult gmres_sras(const LinearSchwarzContext& ctx, const Vector& v0,
                               const GmresOptions& opts, const Vector* reference = nullptr);

// Checks that restriction commutes with powers of the preconditioned operator
// and that the restricted volume Krylov basis spans the substructured one.
struct KrylovRestrictionReport {
    int k_requested = 0;
    int k_volume = 0; // Arnoldi depth reached on the volume side
    int k_sub = 0;    // and on the substructured side
    std::vector<double> identity_rel_err; // power identity error for k = 1..
    double max_identity_rel_err = 0.0;
    std::vector<int> restricted_rank, sub_rank, joint_rank; // per depth 1..
    bool identity_ok = false;
    bool spans_match = false;
    std::string to_json() const;
};

KrylovRestrictionReport check_krylov_restriction(const LinearSchwarzContext& ctx, const Vector& u0,
                                                 int kmax, unsigned long long seed,
                                                 double tol = 1e-10);

// Least-squares reconstruction of substructured iterates from the volume
// Arnoldi data; reports how far they drift from the substructured GMRES
// iterates in floating point.
struct LsqDiagnostic {
    std::vector<double> lsq_residuals;   // per iteration
    std::vector<double> deviation_from_sras;
    double max_deviation = 0.0;
};
LsqDiagnostic substructured_lsq_diagnostic(const LinearSchwarzContext& ctx, const Vector& u0,
                                           int kmax);

} // namespace dds
