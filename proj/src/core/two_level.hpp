#pragma once

// Coarse spaces and two-level corrections: a full-approximation coarse
// correction in the volume of the domain and its counterpart acting purely on
// skeleton unknowns, the two-level stationary sweeps, and the two-level
// Newton residuals with finite-difference directional Jacobians.

#include <span>
#include <vector>

#include "core/context.hpp"
#include "core/csr.hpp"
#include "core/nonlinear_schwarz.hpp"
#include "core/problems.hpp"
#include "core/vec.hpp"

namespace dds {

enum class CoarseKind { Volume, Substructured };
enum class CoarseWeighting {
    FullWeighting,  // restriction = row-normalized transpose of the interpolation
    Injection,      // restriction samples the coarse points; exact right inverse
};

// Coarse space over either the full grid or the skeleton. The volume variant
// keeps every other grid point per axis with tensor linear interpolation; the
// substructured variant keeps every other unknown along each interface
// segment (1D linear interpolation along the segment, cross and isolated
// points always kept).
class CoarseSpace {
  public:
    static CoarseSpace build_volume(const CartesianGrid& grid,
                                    CoarseWeighting weighting = CoarseWeighting::FullWeighting);
    static CoarseSpace build_substructured(const SchwarzContext& ctx,
                                           CoarseWeighting weighting = CoarseWeighting::FullWeighting);

    CoarseKind kind() const { return kind_; }
    index_t fine_dim() const { return prolongation_.rows(); }
    index_t coarse_dim() const { return prolongation_.cols(); }

    // Fine positions (grid indices or skeleton slots) of the coarse unknowns.
    std::span<const index_t> coarse_to_fine() const { return coarse_to_fine_; }

    const CsrMatrix& prolongation() const { return prolongation_; }
    const CsrMatrix& restriction() const { return restriction_; }

    Vector restrict_to(std::span<const double> fine) const { return restriction_.apply(fine); }
    Vector prolongate(std::span<const double> coarse) const { return prolongation_.apply(coarse); }

  private:
    CoarseKind kind_ = CoarseKind::Volume;
    CsrMatrix prolongation_;
    CsrMatrix restriction_;
    std::vector<index_t> coarse_to_fine_;
};

struct CoarseNewtonReport {
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
};

struct CoarseNewtonOptions {
    double tol = 1e-12;  // accept when ||residual|| <= tol * (1 + ||target||)
    int maxit = 50;
};

// Coarse restriction of the problem residual: F0(u0) = R0 F(P0 u0), with the
// Jacobian R0 J(P0 u0) P0 assembled as a sparse triple product.
Vector coarse_function_f0(const NonlinearProblem& problem, const CoarseSpace& coarse,
                          std::span<const double> u0);
CsrMatrix coarse_jacobian_f0(const NonlinearProblem& problem, const CoarseSpace& coarse,
                             std::span<const double> u0);

// Sparse triple product R * A * P for the coarse sandwich.
CsrMatrix triple_product(const CsrMatrix& r, const CsrMatrix& a, const CsrMatrix& p);

// Full-approximation coarse correction: solve F0(y) = F0(R0 u) - R0 F(u) by
// Newton from y = R0 u and return y - R0 u.
Vector fas_correction_volume(const NonlinearProblem& problem, const CoarseSpace& coarse,
                             std::span<const double> u, const CoarseNewtonOptions& opts = {},
                             CoarseNewtonReport* report = nullptr);

// Coarse correction followed by one volume sweep.
Vector two_level_nras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                           const CoarseSpace& coarse, std::span<const double> u,
                           const LocalSolveOptions& local = {},
                           const CoarseNewtonOptions& coarse_opts = {},
                           SolveCounters* counters = nullptr, CoarseNewtonReport* report = nullptr,
                           std::vector<LocalSolveReport>* sweep_reports = nullptr);

// Coarse restriction of the substructured fixed-point residual:
// FBar0(v0) = RBar0 FBar(PBar0 v0). Evaluation performs fine subdomain
// solves; the exact Jacobian is the coarse sandwich of the substructured
// Jacobian, assembled densely one coarse column at a time.
Vector sub_coarse_function(const NonlinearProblem& problem, const SchwarzContext& ctx,
                           const CoarseSpace& coarse, std::span<const double> v0,
                           const LocalSolveOptions& local = {}, SolveCounters* counters = nullptr);

// Substructured correction: solve FBar0(y) = FBar0(RBar0 v) - RBar0 FBar(v)
// by Newton from y = RBar0 v and return y - RBar0 v.
Vector fas_correction_substructured(const NonlinearProblem& problem, const SchwarzContext& ctx,
                                    const CoarseSpace& coarse, std::span<const double> v,
                                    const LocalSolveOptions& local = {},
                                    const CoarseNewtonOptions& opts = {},
                                    SolveCounters* counters = nullptr,
                                    CoarseNewtonReport* report = nullptr);

// Substructured coarse correction followed by one substructured sweep.
Vector two_level_nsras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                            const CoarseSpace& coarse, std::span<const double> v,
                            const LocalSolveOptions& local = {},
                            const CoarseNewtonOptions& coarse_opts = {},
                            SolveCounters* counters = nullptr, CoarseNewtonReport* report = nullptr,
                            Vector* volume_next = nullptr);

// Two-level Newton residuals. The correction-operator form
// -P0 C0(u) - sum_j Ptilde_j C_j(u + P0 C0(u)), with C_j(u) = G_j(u) - R_j u,
// is returned alongside the sweep form u - [correction + sweep] so their
// algebraic agreement can be checked.
struct TwoLevelResidual {
    Vector value;          // sweep form
    Vector value_cj_form;  // correction-operator form
    CoarseNewtonReport coarse;
    std::vector<LocalSolveReport> reports;
    Vector volume_reconstruction;  // volume iterate carried by the evaluation
    int max_inner_newton() const;
};

TwoLevelResidual two_level_raspen_residual(const NonlinearProblem& problem,
                                           const SchwarzContext& ctx, const CoarseSpace& coarse,
                                           std::span<const double> u,
                                           const LocalSolveOptions& local = {},
                                           const CoarseNewtonOptions& coarse_opts = {},
                                           SolveCounters* counters = nullptr);

TwoLevelResidual two_level_sraspen_residual(const NonlinearProblem& problem,
                                            const SchwarzContext& ctx, const CoarseSpace& coarse,
                                            std::span<const double> v,
                                            const LocalSolveOptions& local = {},
                                            const CoarseNewtonOptions& coarse_opts = {},
                                            SolveCounters* counters = nullptr);

// Stationary two-level iterations with the shared stopping rules.
NonlinearStationaryResult solve_two_level_stationary(const NonlinearProblem& problem,
                                                     const SchwarzContext& ctx,
                                                     const CoarseSpace& coarse,
                                                     StationaryVariant variant, const Vector& init,
                                                     const StationaryOptions& opts,
                                                     const LocalSolveOptions& local = {},
                                                     const CoarseNewtonOptions& coarse_opts = {});

enum class TwoLevelMethodKind { Raspen, Sraspen };

// Newton on the two-level residuals. The Jacobian is applied matrix-free by
// one-sided finite differences of the residual (the step scales with
// 1e-7 * (1 + ||x||_inf) per unit direction); pair it with a Krylov solver
// tolerance no tighter than the differencing noise floor.
NewtonResult two_level_newton(const NonlinearProblem& problem, const SchwarzContext& ctx,
                              const CoarseSpace& coarse, TwoLevelMethodKind kind,
                              const Vector& init, const NewtonOptions& opts = {},
                              const CoarseNewtonOptions& coarse_opts = {},
                              SolveCounters* counters = nullptr);

} // namespace dds
