#include "core/two_level.hpp"

#include <algorithm>
#include <cmath>

#include "core/dense.hpp"
#include "core/errors.hpp"
#include "core/sparse_lu.hpp"

namespace dds {

// ---- Coarse space construction -------------------------------------------

namespace {
struct AxisWeights {
    int count = 0;
    index_t coarse[2] = {0, 0};
    double weight[2] = {0.0, 0.0};
};

// Every-other-point coarsening along one axis: coarse unknown c sits at fine
// index 2c+1; even fine indices average their coarse neighbors (boundary
// values are zero, so edge points keep a single half weight).
std::vector<AxisWeights> axis_interpolation(index_t n) {
    std::vector<AxisWeights> w(n);
    for (index_t i = 0; i < n; ++i) {
        if (i % 2 == 1) {
            w[i].count = 1;
            w[i].coarse[0] = (i - 1) / 2;
            w[i].weight[0] = 1.0;
        } else {
            if (i >= 2) {
                w[i].coarse[w[i].count] = i / 2 - 1;
                w[i].weight[w[i].count] = 0.5;
                ++w[i].count;
            }
            if (i + 1 <= n - 1) {
                w[i].coarse[w[i].count] = i / 2;
                w[i].weight[w[i].count] = 0.5;
                ++w[i].count;
            }
        }
    }
    return w;
}

CsrMatrix restriction_from_prolongation(const CsrMatrix& p, CoarseWeighting weighting,
                                        std::span<const index_t> coarse_to_fine) {
    std::vector<Triplet> entries;
    if (weighting == CoarseWeighting::Injection) {
        for (index_t c = 0; c < p.cols(); ++c)
            entries.push_back({c, coarse_to_fine[c], 1.0});
    } else {
        Vector colsum(p.cols(), 0.0);
        for (index_t i = 0; i < p.rows(); ++i) {
            auto cols = p.row_cols(i);
            auto vals = p.row_values(i);
            for (std::size_t k = 0; k < cols.size(); ++k) colsum[cols[k]] += vals[k];
        }
        for (index_t i = 0; i < p.rows(); ++i) {
            auto cols = p.row_cols(i);
            auto vals = p.row_values(i);
            for (std::size_t k = 0; k < cols.size(); ++k)
                entries.push_back({cols[k], i, vals[k] / colsum[cols[k]]});
        }
    }
    return CsrMatrix::from_triplets(p.cols(), p.rows(), std::move(entries));
}
} // namespace

CoarseSpace CoarseSpace::build_volume(const CartesianGrid& grid, CoarseWeighting weighting) {
    const int dim = grid.dim();
    std::array<std::vector<AxisWeights>, 3> axes;
    std::array<index_t, 3> mc{1, 1, 1};
    for (int a = 0; a < 3; ++a) {
        const index_t n = grid.extent(a);
        if (a < dim) {
            if (n < 3)
                throw InvalidArgument("volume coarse space needs at least 3 points per axis");
            axes[a] = axis_interpolation(n);
            mc[a] = n / 2;
        } else {
            axes[a] = {AxisWeights{1, {0, 0}, {1.0, 0.0}}};
        }
    }

    CoarseSpace cs;
    cs.kind_ = CoarseKind::Volume;
    const index_t n_coarse = mc[0] * mc[1] * mc[2];
    cs.coarse_to_fine_.resize(n_coarse);
    for (index_t cz = 0; cz < mc[2]; ++cz)
        for (index_t cy = 0; cy < mc[1]; ++cy)
            for (index_t cx = 0; cx < mc[0]; ++cx) {
                std::array<index_t, 3> fine{0, 0, 0};
                const std::array<index_t, 3> cc{cx, cy, cz};
                for (int a = 0; a < 3; ++a) fine[a] = a < dim ? 2 * cc[a] + 1 : 0;
                cs.coarse_to_fine_[cx + mc[0] * (cy + mc[1] * cz)] = grid.index(fine);
            }

    std::vector<Triplet> entries;
    for (index_t idx = 0; idx < grid.size(); ++idx) {
        const std::array<index_t, 3> c = grid.coord(idx);
        const AxisWeights& wx = axes[0][c[0]];
        const AxisWeights& wy = axes[1][c[1]];
        const AxisWeights& wz = axes[2][c[2]];
        for (int iz = 0; iz < wz.count; ++iz)
            for (int iy = 0; iy < wy.count; ++iy)
                for (int ix = 0; ix < wx.count; ++ix) {
                    const index_t cc =
                        wx.coarse[ix] + mc[0] * (wy.coarse[iy] + mc[1] * wz.coarse[iz]);
                    const double w = wx.weight[ix] * wy.weight[iy] * wz.weight[iz];
                    entries.push_back({idx, cc, w});
                }
    }
    cs.prolongation_ = CsrMatrix::from_triplets(grid.size(), n_coarse, std::move(entries));
    cs.restriction_ = restriction_from_prolongation(cs.prolongation_, weighting, cs.coarse_to_fine_);
    return cs;
}

CoarseSpace CoarseSpace::build_substructured(const SchwarzContext& ctx, CoarseWeighting weighting) {
    const auto& skel = ctx.skeleton.indices;
    const index_t nbar = static_cast<index_t>(skel.size());
    if (nbar == 0)
        throw InvalidArgument("substructured coarse space needs a nonempty skeleton");
    const CartesianGrid& grid = *ctx.grid;
    const int dim = grid.dim();
    if (dim > 2)
        throw InvalidArgument("substructured coarse space supports 1D and 2D grids");

    // Maximal straight runs of skeleton unknowns: along the only axis in 1D
    // (where the two unknowns flanking one interface form a run), along grid
    // rows and columns in 2D.
    std::vector<std::vector<index_t>> runs; // skeleton slots, in geometric order
    std::vector<int> membership(nbar, 0);
    std::vector<index_t> slot_run(nbar, -1), slot_pos(nbar, -1);

    auto record_run = [&](std::vector<index_t> run) {
        if (run.size() < 2) return;
        for (std::size_t p = 0; p < run.size(); ++p) {
            ++membership[run[p]];
            slot_run[run[p]] = static_cast<index_t>(runs.size());
            slot_pos[run[p]] = static_cast<index_t>(p);
        }
        runs.push_back(std::move(run));
    };

    if (dim == 1) {
        const index_t gap = 2 * ctx.decomposition().overlap_layers + 1;
        std::vector<index_t> run{0};
        for (index_t s = 1; s < nbar; ++s) {
            if (skel[s] - skel[s - 1] <= gap) {
                run.push_back(s);
            } else {
                record_run(std::move(run));
                run = {s};
            }
        }
        record_run(std::move(run));
    } else {
        const index_t nx = grid.extent(0);
        const index_t ny = grid.extent(1);
        const auto& vts = ctx.skeleton.volume_to_skel;
        // Horizontal runs: sorted skeleton indices list row neighbors adjacently.
        index_t s = 0;
        while (s < nbar) {
            std::vector<index_t> run{s};
            while (s + 1 < nbar && skel[s + 1] == skel[s] + 1 && (skel[s] + 1) % nx != 0) {
                ++s;
                run.push_back(s);
            }
            ++s;
            record_run(std::move(run));
        }
        // Vertical runs: walk each column from its topmost skeleton unknown.
        for (index_t head = 0; head < nbar; ++head) {
            const index_t idx = skel[head];
            const index_t y = idx / nx;
            if (y > 0 && vts[idx - nx] >= 0) continue;
            std::vector<index_t> run{head};
            index_t cur = idx;
            while (cur / nx + 1 < ny && vts[cur + nx] >= 0) {
                cur += nx;
                run.push_back(vts[cur]);
            }
            record_run(std::move(run));
        }
    }

    // Coarse picks: every other unknown per run, plus cross points (unknowns
    // on two runs) and isolated unknowns.  Runs of one or two unknowns are
    // too short to interpolate along, so they are kept entirely coarse; a
    // copied (piecewise-constant) value there feeds the overlapping sweep an
    // O(1) interface error each iteration, which can stall the outer cycle.
    std::vector<char> is_coarse(nbar, 0);
    for (const auto& run : runs) {
        if (run.size() <= 2) {
            for (const index_t s : run) is_coarse[s] = 1;
            continue;
        }
        for (std::size_t p = 0; p < run.size(); p += 2) is_coarse[run[p]] = 1;
    }
    for (index_t s = 0; s < nbar; ++s)
        if (membership[s] >= 2 || membership[s] == 0) is_coarse[s] = 1;

    CoarseSpace cs;
    cs.kind_ = CoarseKind::Substructured;
    std::vector<index_t> slot_to_coarse(nbar, -1);
    for (index_t s = 0; s < nbar; ++s)
        if (is_coarse[s]) {
            slot_to_coarse[s] = static_cast<index_t>(cs.coarse_to_fine_.size());
            cs.coarse_to_fine_.push_back(s);
        }
    const index_t n0 = static_cast<index_t>(cs.coarse_to_fine_.size());

    std::vector<Triplet> entries;
    for (index_t s = 0; s < nbar; ++s) {
        if (is_coarse[s]) {
            entries.push_back({s, slot_to_coarse[s], 1.0});
            continue;
        }
        // On exactly one run; interpolate between the nearest coarse
        // neighbors along it (copy when only one side has any).
        const auto& run = runs[slot_run[s]];
        const index_t p = slot_pos[s];
        index_t pl = -1, pr = -1;
        for (index_t q = p; q-- > 0;)
            if (is_coarse[run[q]]) {
                pl = q;
                break;
            }
        for (index_t q = p + 1; q < static_cast<index_t>(run.size()); ++q)
            if (is_coarse[run[q]]) {
                pr = q;
                break;
            }
        if (pl >= 0 && pr >= 0) {
            const double d = static_cast<double>(pr - pl);
            entries.push_back({s, slot_to_coarse[run[pl]], (pr - p) / d});
            entries.push_back({s, slot_to_coarse[run[pr]], (p - pl) / d});
        } else if (pl >= 0) {
            entries.push_back({s, slot_to_coarse[run[pl]], 1.0});
        } else if (pr >= 0) {
            entries.push_back({s, slot_to_coarse[run[pr]], 1.0});
        } else {
            throw InvalidArgument("substructured coarse space: run without coarse unknowns");
        }
    }
    cs.prolongation_ = CsrMatrix::from_triplets(nbar, n0, std::move(entries));
    cs.restriction_ = restriction_from_prolongation(cs.prolongation_, weighting, cs.coarse_to_fine_);
    return cs;
}

// ---- Sparse triple product ------------------------------------------------

CsrMatrix triple_product(const CsrMatrix& r, const CsrMatrix& a, const CsrMatrix& p) {
    if (r.cols() != a.rows() || a.cols() != p.rows())
        throw InvalidArgument("triple product: inner dimensions disagree");
    std::vector<Triplet> entries;
    Vector acc(p.cols(), 0.0);
    std::vector<index_t> touched;
    for (index_t row = 0; row < r.rows(); ++row) {
        touched.clear();
        auto rcols = r.row_cols(row);
        auto rvals = r.row_values(row);
        for (std::size_t k = 0; k < rcols.size(); ++k) {
            auto acols = a.row_cols(rcols[k]);
            auto avals = a.row_values(rcols[k]);
            for (std::size_t m = 0; m < acols.size(); ++m) {
                auto pcols = p.row_cols(acols[m]);
                auto pvals = p.row_values(acols[m]);
                const double ra = rvals[k] * avals[m];
                for (std::size_t q = 0; q < pcols.size(); ++q) {
                    if (acc[pcols[q]] == 0.0) touched.push_back(pcols[q]);
                    acc[pcols[q]] += ra * pvals[q];
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        for (const index_t c : touched) {
            entries.push_back({row, c, acc[c]});
            acc[c] = 0.0;
        }
    }
    return CsrMatrix::from_triplets(r.rows(), p.cols(), std::move(entries));
}

// ---- Volume coarse function and correction --------------------------------

Vector coarse_function_f0(const NonlinearProblem& problem, const CoarseSpace& coarse,
                          std::span<const double> u0) {
    if (coarse.kind() != CoarseKind::Volume)
        throw InvalidArgument("coarse function: volume coarse space required");
    if (coarse.fine_dim() != problem.dimension())
        throw InvalidArgument("coarse function: coarse space does not match the problem");
    return coarse.restrict_to(problem.residual(coarse.prolongate(u0)));
}

CsrMatrix coarse_jacobian_f0(const NonlinearProblem& problem, const CoarseSpace& coarse,
                             std::span<const double> u0) {
    if (coarse.kind() != CoarseKind::Volume)
        throw InvalidArgument("coarse jacobian: volume coarse space required");
    const CsrMatrix j = problem.jacobian(coarse.prolongate(u0));
    return triple_product(coarse.restriction(), j, coarse.prolongation());
}

Vector fas_correction_volume(const NonlinearProblem& problem, const CoarseSpace& coarse,
                             std::span<const double> u, const CoarseNewtonOptions& opts,
                             CoarseNewtonReport* report) {
    const Vector r0u = coarse.restrict_to(u);
    Vector target = coarse_function_f0(problem, coarse, r0u);
    {
        const Vector rf = coarse.restrict_to(problem.residual(u));
        for (std::size_t i = 0; i < target.size(); ++i) target[i] -= rf[i];
    }
    const double scale = 1.0 + norm2(target);

    CoarseNewtonReport rep;
    Vector y = r0u;
    Vector res = coarse_function_f0(problem, coarse, y);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= target[i];
    double rnorm = norm2(res);
    while (rnorm > opts.tol * scale && rep.iterations < opts.maxit) {
        const CsrMatrix j0 = coarse_jacobian_f0(problem, coarse, y);
        const Vector d = SparseLu(j0).solve(res);
        // Backtracking keeps the coarse solve robust far from the solution,
        // where a full step on a strongly nonlinear coefficient can overshoot.
        double t = 1.0;
        bool accepted = false;
        Vector yt(y.size()), rest;
        double rnt = rnorm;
        for (int bt = 0; bt <= 40; ++bt) {
            for (std::size_t i = 0; i < y.size(); ++i) yt[i] = y[i] - t * d[i];
            if (!all_finite(yt)) {
                t *= 0.5;
                continue;
            }
            rest = coarse_function_f0(problem, coarse, yt);
            for (std::size_t i = 0; i < rest.size(); ++i) rest[i] -= target[i];
            rnt = norm2(rest);
            if (std::isfinite(rnt) && rnt <= (1.0 - 1e-4 * t) * rnorm) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        ++rep.iterations;
        if (!accepted) break;
        y = std::move(yt);
        res = std::move(rest);
        rnorm = rnt;
    }
    rep.final_residual = rnorm;
    rep.converged = rnorm <= opts.tol * scale;
    if (report) *report = rep;
    if (!rep.converged)
        throw SolveFailure("coarse Newton did not converge (residual " + std::to_string(rnorm) + ")",
                           -1, rep.iterations, rnorm);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= r0u[i];
    return y;
}

// ---- One sweep with per-subdomain correction parts ------------------------

namespace {
struct SweepDetail {
    Vector next;
    Vector correction_sum; // sum_j Ptilde_j (G_j(u) - R_j u)
    std::vector<LocalSolveReport> reports;
    int max_inner() const {
        int m = 0;
        for (const auto& r : reports) m = std::max(m, r.iterations);
        return m;
    }
};

SweepDetail detailed_sweep(const NonlinearProblem& problem, const SchwarzContext& ctx,
                           std::span<const double> u, const LocalSolveOptions& local,
                           SolveCounters* counters) {
    SweepDetail out;
    out.next.assign(ctx.volume_size(), 0.0);
    out.correction_sum.assign(ctx.volume_size(), 0.0);
    out.reports.resize(ctx.subdomains());
    parallel_for(ctx.subdomains(), ctx.threads, [&](int j) {
        Vector w = local_solve_gj(problem, ctx, j, u, local, &out.reports[j], counters);
        ctx.transfer.inject_owned(j, w, out.next);
        const Vector ru = ctx.transfer.restrict_to(j, u);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= ru[i];
        ctx.transfer.inject_owned(j, w, out.correction_sum);
    });
    if (counters) counters->parallel_rounds.fetch_add(out.max_inner(), std::memory_order_relaxed);
    return out;
}
} // namespace

Vector two_level_nras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                           const CoarseSpace& coarse, std::span<const double> u,
                           const LocalSolveOptions& local, const CoarseNewtonOptions& coarse_opts,
                           SolveCounters* counters, CoarseNewtonReport* report,
                           std::vector<LocalSolveReport>* sweep_reports) {
    const Vector c0 = fas_correction_volume(problem, coarse, u, coarse_opts, report);
    Vector half = coarse.prolongate(c0);
    for (std::size_t i = 0; i < half.size(); ++i) half[i] += u[i];
    SweepResult sweep = nras_step(problem, ctx, half, local, counters);
    if (sweep_reports) *sweep_reports = std::move(sweep.reports);
    return sweep.next;
}

// ---- Substructured coarse function and correction -------------------------

namespace {
void check_sub_coarse(const SchwarzContext& ctx, const CoarseSpace& coarse) {
    if (coarse.kind() != CoarseKind::Substructured)
        throw InvalidArgument("substructured coarse space required");
    if (coarse.fine_dim() != ctx.skeleton_size())
        throw InvalidArgument("coarse space does not match the skeleton");
}
} // namespace

Vector sub_coarse_function(const NonlinearProblem& problem, const SchwarzContext& ctx,
                           const CoarseSpace& coarse, std::span<const double> v0,
                           const LocalSolveOptions& local, SolveCounters* counters) {
    check_sub_coarse(ctx, coarse);
    const Vector v = coarse.prolongate(v0);
    const PreconditionedResidual pr = sraspen_residual(problem, ctx, v, local, counters);
    return coarse.restrict_to(pr.value);
}

Vector fas_correction_substructured(const NonlinearProblem& problem, const SchwarzContext& ctx,
                                    const CoarseSpace& coarse, std::span<const double> v,
                                    const LocalSolveOptions& local, const CoarseNewtonOptions& opts,
                                    SolveCounters* counters, CoarseNewtonReport* report) {
    check_sub_coarse(ctx, coarse);
    const index_t n0 = coarse.coarse_dim();
    const Vector r0v = coarse.restrict_to(v);

    // Target: value of the coarse function at the restricted iterate, minus
    // the restricted fine residual.
    PreconditionedResidual pr = sraspen_residual(problem, ctx, coarse.prolongate(r0v), local,
                                                 counters);
    Vector target = coarse.restrict_to(pr.value);
    {
        const PreconditionedResidual fine = sraspen_residual(problem, ctx, v, local, counters);
        const Vector rf = coarse.restrict_to(fine.value);
        for (index_t i = 0; i < n0; ++i) target[i] -= rf[i];
    }
    const double scale = 1.0 + norm2(target);

    CoarseNewtonReport rep;
    Vector y = r0v;
    Vector res = coarse.restrict_to(pr.value); // coarse function at y = r0v, reusing pr
    for (index_t i = 0; i < n0; ++i) res[i] -= target[i];
    double rnorm = norm2(res);
    while (rnorm > opts.tol * scale && rep.iterations < opts.maxit) {
        // Dense coarse Jacobian, one coarse column of the exact sandwich at a time.
        const RaspenJacobian jac(problem, ctx, pr.states, counters);
        DenseMatrix m(n0, n0);
        Vector e(n0, 0.0);
        for (index_t c = 0; c < n0; ++c) {
            e[c] = 1.0;
            const Vector col = coarse.restrict_to(jac.apply_substructured(coarse.prolongate(e)));
            e[c] = 0.0;
            for (index_t r = 0; r < n0; ++r) m(r, c) = col[r];
        }
        const Vector d = DenseLu(m).solve(res);
        // Same backtracking safeguard as the volume-coarse solve; each trial
        // costs one substructured sweep.
        double t = 1.0;
        bool accepted = false;
        Vector yt(n0);
        double rnt = rnorm;
        for (int bt = 0; bt <= 40; ++bt) {
            for (index_t i = 0; i < n0; ++i) yt[i] = y[i] - t * d[i];
            if (!all_finite(yt)) {
                t *= 0.5;
                continue;
            }
            bool finite_eval = true;
            PreconditionedResidual prt;
            try {
                prt = sraspen_residual(problem, ctx, coarse.prolongate(yt), local, counters);
            } catch (const SolveFailure&) {
                finite_eval = false;
            }
            if (finite_eval) {
                Vector rest = coarse.restrict_to(prt.value);
                for (index_t i = 0; i < n0; ++i) rest[i] -= target[i];
                rnt = norm2(rest);
                if (std::isfinite(rnt) && rnt <= (1.0 - 1e-4 * t) * rnorm) {
                    accepted = true;
                    pr = std::move(prt);
                    res = std::move(rest);
                    break;
                }
            }
            t *= 0.5;
        }
        ++rep.iterations;
        if (!accepted) break;
        y = std::move(yt);
        rnorm = rnt;
    }
    rep.final_residual = rnorm;
    rep.converged = rnorm <= opts.tol * scale;
    if (report) *report = rep;
    if (!rep.converged)
        throw SolveFailure("substructured coarse Newton did not converge (residual " +
                               std::to_string(rnorm) + ")",
                           -1, rep.iterations, rnorm);
    for (index_t i = 0; i < n0; ++i) y[i] -= r0v[i];
    return y;
}

Vector two_level_nsras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                            const CoarseSpace& coarse, std::span<const double> v,
                            const LocalSolveOptions& local, const CoarseNewtonOptions& coarse_opts,
                            SolveCounters* counters, CoarseNewtonReport* report,
                            Vector* volume_next) {
    const Vector c0s =
        fas_correction_substructured(problem, ctx, coarse, v, local, coarse_opts, counters, report);
    Vector half = coarse.prolongate(c0s);
    for (std::size_t i = 0; i < half.size(); ++i) half[i] += v[i];
    SweepResult sweep = nsras_step(problem, ctx, half, local, counters, volume_next);
    return sweep.next;
}

// ---- Two-level Newton residuals -------------------------------------------

int TwoLevelResidual::max_inner_newton() const {
    int m = 0;
    for (const auto& r : reports) m = std::max(m, r.iterations);
    return m;
}

TwoLevelResidual two_level_raspen_residual(const NonlinearProblem& problem,
                                           const SchwarzContext& ctx, const CoarseSpace& coarse,
                                           std::span<const double> u,
                                           const LocalSolveOptions& local,
                                           const CoarseNewtonOptions& coarse_opts,
                                           SolveCounters* counters) {
    TwoLevelResidual out;
    const Vector c0 = fas_correction_volume(problem, coarse, u, coarse_opts, &out.coarse);
    const Vector p0c0 = coarse.prolongate(c0);
    Vector half(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) half[i] = u[i] + p0c0[i];
    SweepDetail sweep = detailed_sweep(problem, ctx, half, local, counters);
    out.reports = std::move(sweep.reports);
    out.value.resize(u.size());
    out.value_cj_form.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out.value[i] = u[i] - sweep.next[i];
        out.value_cj_form[i] = -p0c0[i] - sweep.correction_sum[i];
    }
    out.volume_reconstruction = std::move(sweep.next);
    return out;
}

TwoLevelResidual two_level_sraspen_residual(const NonlinearProblem& problem,
                                            const SchwarzContext& ctx, const CoarseSpace& coarse,
                                            std::span<const double> v,
                                            const LocalSolveOptions& local,
                                            const CoarseNewtonOptions& coarse_opts,
                                            SolveCounters* counters) {
    TwoLevelResidual out;
    const Vector c0s = fas_correction_substructured(problem, ctx, coarse, v, local, coarse_opts,
                                                    counters, &out.coarse);
    const Vector p0c0 = coarse.prolongate(c0s);
    Vector half(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) half[i] = v[i] + p0c0[i];
    SweepDetail sweep = detailed_sweep(problem, ctx, ctx.skeleton.prolongate(half), local, counters);
    out.reports = std::move(sweep.reports);
    const Vector next = ctx.skeleton.restrict_to(sweep.next);
    const Vector csum = ctx.skeleton.restrict_to(sweep.correction_sum);
    out.value.resize(v.size());
    out.value_cj_form.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.value[i] = v[i] - next[i];
        out.value_cj_form[i] = -p0c0[i] - csum[i];
    }
    out.volume_reconstruction = std::move(sweep.next);
    return out;
}

// ---- Two-level stationary driver ------------------------------------------

NonlinearStationaryResult solve_two_level_stationary(const NonlinearProblem& problem,
                                                     const SchwarzContext& ctx,
                                                     const CoarseSpace& coarse,
                                                     StationaryVariant variant, const Vector& init,
                                                     const StationaryOptions& opts,
                                                     const LocalSolveOptions& local,
                                                     const CoarseNewtonOptions& coarse_opts) {
    if (opts.mode == StoppingMode::Error && !opts.reference)
        throw InvalidArgument("two-level stationary: error stopping needs a reference");
    const bool sub = variant == StationaryVariant::Sras;
    const index_t want = sub ? ctx.skeleton_size() : ctx.volume_size();
    if (static_cast<index_t>(init.size()) != want)
        throw InvalidArgument("two-level stationary: initial iterate size mismatch");
    if (sub)
        check_sub_coarse(ctx, coarse);
    else if (coarse.kind() != CoarseKind::Volume || coarse.fine_dim() != ctx.volume_size())
        throw InvalidArgument("two-level stationary: volume coarse space required");

    SolveCounters counters;
    NonlinearStationaryResult out;
    out.solution = init;
    Vector volume = sub ? ctx.skeleton.prolongate(init) : init;
    const double f0 = norm2(problem.residual(volume));

    auto push_row = [&](int iter) {
        ConvergenceHistory::Row row;
        row.iter = iter;
        row.err = -1.0;
        if (opts.reference) {
            const double rn = norm2(*opts.reference);
            row.err = diff_norm2(volume, *opts.reference) / (rn > 0.0 ? rn : 1.0);
        }
        row.res = norm2(problem.residual(volume)) / (f0 > 0.0 ? f0 : 1.0);
        row.cum_solves = counters.subdomain_solves.load();
        row.cum_parallel_rounds = counters.parallel_rounds.load();
        row.basis_bytes = 0;
        out.history.rows.push_back(row);
        return opts.mode == StoppingMode::Error ? row.err : row.res;
    };

    const double metric0 = push_row(0);
    if (metric0 <= opts.tol) {
        out.history.converged = true;
        return out;
    }
    for (int m = 1; m <= opts.maxit; ++m) {
        if (sub) {
            out.solution = two_level_nsras_step(problem, ctx, coarse, out.solution, local,
                                                coarse_opts, &counters, nullptr, &volume);
        } else {
            out.solution = two_level_nras_step(problem, ctx, coarse, out.solution, local,
                                               coarse_opts, &counters, nullptr, nullptr);
            volume = out.solution;
        }
        const double metric = push_row(m);
        if (metric <= opts.tol) {
            out.history.converged = true;
            break;
        }
        if (!std::isfinite(metric) || metric > opts.divergence_factor * std::max(metric0, 1e-300)) {
            out.history.diverged = true;
            break;
        }
    }
    return out;
}

// ---- Two-level Newton -----------------------------------------------------

namespace {
struct TwoLevelCache {
    Vector x;
    Vector base_residual;
    Vector volume_reconstruction;
    int coarse_iters = 0;
};
} // namespace

NewtonResult two_level_newton(const NonlinearProblem& problem, const SchwarzContext& ctx,
                              const CoarseSpace& coarse, TwoLevelMethodKind kind,
                              const Vector& init, const NewtonOptions& opts,
                              const CoarseNewtonOptions& coarse_opts, SolveCounters* counters) {
    const bool sub = kind == TwoLevelMethodKind::Sraspen;
    if (sub)
        check_sub_coarse(ctx, coarse);
    else if (coarse.kind() != CoarseKind::Volume || coarse.fine_dim() != ctx.volume_size())
        throw InvalidArgument("two-level Newton: volume coarse space required");

    auto cache = std::make_shared<TwoLevelCache>();
    auto evaluate = [&, cache](const Vector& x, int& inner, bool store) {
        TwoLevelResidual tr =
            sub ? two_level_sraspen_residual(problem, ctx, coarse, x, opts.local, coarse_opts,
                                             counters)
                : two_level_raspen_residual(problem, ctx, coarse, x, opts.local, coarse_opts,
                                            counters);
        inner = tr.max_inner_newton();
        if (store) {
            cache->x = x;
            cache->base_residual = tr.value;
            cache->volume_reconstruction = std::move(tr.volume_reconstruction);
            cache->coarse_iters = tr.coarse.iterations;
        }
        return tr.value;
    };

    OuterOperators ops;
    ops.dim = sub ? ctx.skeleton_size() : ctx.volume_size();
    ops.residual = [evaluate](const Vector& x, int& inner) { return evaluate(x, inner, true); };
    ops.jacobian = [evaluate, cache](const Vector& x) {
        OuterOperators::Jacobian jac;
        jac.matvec = [evaluate, cache, x](std::span<const double> w) {
            const double wn = norm2(w);
            Vector out(w.size(), 0.0);
            if (wn == 0.0) return out;
            const double sigma = 1e-7 * (1.0 + norm_inf(x)) / wn;
            Vector xt(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + sigma * w[i];
            int ignored = 0;
            const Vector rt = evaluate(xt, ignored, false);
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = (rt[i] - cache->base_residual[i]) / sigma;
            return out;
        };
        return jac;
    };
    ops.to_volume = [cache, sub](const Vector& x) {
        return sub ? cache->volume_reconstruction : x;
    };
    ops.problem_residual_norm = [&problem](const Vector& vol) {
        return norm2(problem.residual(vol));
    };
    ops.extra_inner = [cache] { return cache->coarse_iters; };

    const LineSearchMode ls = opts.line_search.value_or(LineSearchMode::Fallback);
    NewtonResult res = newton_loop(ops, init, opts, ls);
    res.history.two_level = true;
    return res;
}

} // namespace dds
