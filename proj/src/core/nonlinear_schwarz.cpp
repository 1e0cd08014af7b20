#include "core/nonlinear_schwarz.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "core/csr.hpp"
#include "core/errors.hpp"
#include "core/gmres.hpp"

namespace dds {

namespace {
int max_inner_of(const std::vector<LocalSolveReport>& reports) {
    int m = 0;
    for (const auto& r : reports) m = std::max(m, r.iterations);
    return m;
}
} // namespace

int SweepResult::max_inner_newton() const { return max_inner_of(reports); }
int SweepResult::total_inner_newton() const {
    int s = 0;
    for (const auto& r : reports) s += r.iterations;
    return s;
}
int PreconditionedResidual::max_inner_newton() const { return max_inner_of(reports); }

// ---- Local solution operator ---------------------------------------------

namespace {
Vector local_solve_state(const NonlinearProblem& problem, const SchwarzContext& ctx, int j,
                         std::span<const double> u, const LocalSolveOptions& opts,
                         LocalSolveReport* report, SolveCounters* counters, Vector* final_state) {
    if (static_cast<index_t>(u.size()) != ctx.volume_size())
        throw InvalidArgument("local solve: iterate size mismatch");
    const auto& rows = ctx.decomposition().overlap_sets[j];
    const std::size_t nj = rows.size();

    LocalSolveReport rep;
    rep.subdomain = j;

    // Frozen exterior data; the local unknowns overwrite the subdomain slots.
    Vector state = ctx.transfer.mask_exterior(j, u);
    Vector w(nj, 0.0);
    if (opts.warm_start) w = ctx.transfer.restrict_to(j, u);
    for (std::size_t i = 0; i < nj; ++i) state[rows[i]] = w[i];

    auto local_residual = [&](const Vector& s) {
        return ctx.transfer.restrict_to(j, problem.residual(s));
    };

    const double target = opts.tol;

    // Scale of the data this subdomain sees, for the stagnation escape below.
    const Vector full_at_u = problem.residual(Vector(u.begin(), u.end()));
    const double scale = 1.0 + norm2(ctx.transfer.restrict_to(j, full_at_u));

    Vector r = local_residual(state);
    double rnorm = norm2(r);
    bool converged = rnorm <= target;

    // When the damped step cannot reduce the residual any further, the
    // iteration has hit the round-off noise of the residual evaluation; such
    // a state is accepted provided the residual is small on the scale of the
    // subdomain data, and reported as a failure otherwise.
    const double eps = std::numeric_limits<double>::epsilon();
    const double stagnation_cap = std::sqrt(eps) * scale;
    const double step_tol = 4.0 * eps;  // a few ulps: the step cannot move w

    while (!converged && rep.iterations < opts.maxit) {
        const CsrMatrix jac = problem.jacobian(state);
        const CsrMatrix sub = extract_principal_submatrix(jac, rows);
        const SparseLu lu(sub);
        const Vector d = lu.solve(r);
        if (counters) counters->subdomain_solves.fetch_add(1, std::memory_order_relaxed);
        ++rep.iterations;

        // A step too small to move the iterate: converged to working precision.
        if (norm2(d) <= step_tol * (1.0 + norm2(w))) {
            converged = true;
            break;
        }

        // Backtracking on the local residual norm.
        double t = 1.0;
        bool accepted = false;
        Vector w_try(nj), state_try, r_try;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < nj; ++i) w_try[i] = w[i] - t * d[i];
            state_try = state;
            for (std::size_t i = 0; i < nj; ++i) state_try[rows[i]] = w_try[i];
            r_try = local_residual(state_try);
            const double rt = norm2(r_try);
            if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * t) * rnorm) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            converged = rnorm <= stagnation_cap;
            break;
        }
        w = std::move(w_try);
        state = std::move(state_try);
        r = std::move(r_try);
        rnorm = norm2(r);
        converged = rnorm <= target;
    }

    rep.final_residual = rnorm;
    rep.converged = converged;
    if (report) *report = rep;
    if (!converged) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "subdomain %d inner Newton stalled at residual %.3e (target %.3e)", j, rnorm,
                      target);
        throw SolveFailure(msg, j, rep.iterations, rnorm);
    }
    if (final_state) *final_state = std::move(state);
    return w;
}
} // namespace

Vector local_solve_gj(const NonlinearProblem& problem, const SchwarzContext& ctx, int j,
                      std::span<const double> u, const LocalSolveOptions& opts,
                      LocalSolveReport* report, SolveCounters* counters) {
    return local_solve_state(problem, ctx, j, u, opts, report, counters, nullptr);
}

// ---- Stationary sweeps ----------------------------------------------------

namespace {
SweepResult sweep_volume(const NonlinearProblem& problem, const SchwarzContext& ctx,
                         std::span<const double> u, const LocalSolveOptions& opts,
                         SolveCounters* counters, std::vector<Vector>* states) {
    SweepResult out;
    out.next.assign(ctx.volume_size(), 0.0);
    out.reports.resize(ctx.subdomains());
    if (states) states->assign(ctx.subdomains(), Vector());
    parallel_for(ctx.subdomains(), ctx.threads, [&](int j) {
        Vector state;
        const Vector w = local_solve_state(problem, ctx, j, u, opts, &out.reports[j], counters,
                                           states ? &state : nullptr);
        ctx.transfer.inject_owned(j, w, out.next);
        if (states) (*states)[j] = std::move(state);
    });
    if (counters)
        counters->parallel_rounds.fetch_add(out.max_inner_newton(), std::memory_order_relaxed);
    return out;
}
} // namespace

SweepResult nras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                      std::span<const double> u, const LocalSolveOptions& opts,
                      SolveCounters* counters) {
    return sweep_volume(problem, ctx, u, opts, counters, nullptr);
}

SweepResult nsras_step(const NonlinearProblem& problem, const SchwarzContext& ctx,
                       std::span<const double> v, const LocalSolveOptions& opts,
                       SolveCounters* counters, Vector* volume_next) {
    const Vector vol = ctx.skeleton.prolongate(v);
    SweepResult sweep = sweep_volume(problem, ctx, vol, opts, counters, nullptr);
    SweepResult out;
    out.next = ctx.skeleton.restrict_to(sweep.next);
    out.reports = std::move(sweep.reports);
    if (volume_next) *volume_next = std::move(sweep.next);
    return out;
}

NonlinearStationaryResult solve_nonlinear_stationary(const NonlinearProblem& problem,
                                                     const SchwarzContext& ctx,
                                                     StationaryVariant variant, const Vector& init,
                                                     const StationaryOptions& opts,
                                                     const LocalSolveOptions& local) {
    if (opts.mode == StoppingMode::Error && !opts.reference)
        throw InvalidArgument("nonlinear stationary: error stopping needs a reference");
    const bool sub = variant == StationaryVariant::Sras;
    const index_t want = sub ? ctx.skeleton_size() : ctx.volume_size();
    if (static_cast<index_t>(init.size()) != want)
        throw InvalidArgument("nonlinear stationary: initial iterate size mismatch");

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
        try {
            if (sub) {
                SweepResult sweep =
                    nsras_step(problem, ctx, out.solution, local, &counters, &volume);
                out.solution = std::move(sweep.next);
            } else {
                SweepResult sweep = nras_step(problem, ctx, out.solution, local, &counters);
                out.solution = std::move(sweep.next);
                volume = out.solution;
            }
        } catch (const SolveFailure&) {
            out.history.diverged = true;
            break;
        } catch (const SingularMatrixError&) {
            out.history.diverged = true;
            break;
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

// ---- Preconditioned residuals --------------------------------------------

PreconditionedResidual raspen_residual(const NonlinearProblem& problem, const SchwarzContext& ctx,
                                       std::span<const double> u, const LocalSolveOptions& opts,
                                       SolveCounters* counters) {
    PreconditionedResidual out;
    SweepResult sweep = sweep_volume(problem, ctx, u, opts, counters, &out.states);
    out.reports = std::move(sweep.reports);
    out.value.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out.value[i] = u[i] - sweep.next[i];
    return out;
}

PreconditionedResidual sraspen_residual(const NonlinearProblem& problem, const SchwarzContext& ctx,
                                        std::span<const double> v, const LocalSolveOptions& opts,
                                        SolveCounters* counters) {
    const Vector vol = ctx.skeleton.prolongate(v);
    PreconditionedResidual full = raspen_residual(problem, ctx, vol, opts, counters);
    PreconditionedResidual out;
    out.value = ctx.skeleton.restrict_to(full.value);
    out.states = std::move(full.states);
    out.reports = std::move(full.reports);
    return out;
}

// ---- Preconditioned Jacobian ---------------------------------------------

RaspenJacobian::RaspenJacobian(const NonlinearProblem& problem, const SchwarzContext& ctx,
                               const std::vector<Vector>& states, SolveCounters* counters)
    : ctx_(&ctx), counters_(counters) {
    if (static_cast<int>(states.size()) != ctx.subdomains())
        throw InvalidArgument("preconditioned jacobian: one cached state per subdomain required");
    local_rows_.reserve(ctx.subdomains());
    std::vector<std::unique_ptr<SparseLu>> factors(ctx.subdomains());
    std::vector<CsrMatrix> rows_tmp(ctx.subdomains(), CsrMatrix());
    parallel_for(ctx.subdomains(), ctx.threads, [&](int j) {
        const CsrMatrix jac = problem.jacobian(states[j]);
        const auto& set = ctx.decomposition().overlap_sets[j];
        rows_tmp[j] = extract_rows(jac, set);
        factors[j] = std::make_unique<SparseLu>(extract_principal_submatrix(jac, set));
    });
    for (int j = 0; j < ctx.subdomains(); ++j) {
        local_rows_.push_back(std::move(rows_tmp[j]));
        local_factors_.push_back(std::move(*factors[j]));
    }
}

Vector RaspenJacobian::apply_volume(std::span<const double> w) const {
    const SchwarzContext& g = *ctx_;
    if (static_cast<index_t>(w.size()) != g.volume_size())
        throw InvalidArgument("preconditioned jacobian: vector size mismatch");
    Vector out(g.volume_size(), 0.0);
    if (counters_) counters_->parallel_rounds.fetch_add(1, std::memory_order_relaxed);
    parallel_for(g.subdomains(), g.threads, [&](int j) {
        const Vector rhs = local_rows_[j].apply(w);
        const Vector sol = local_factors_[j].solve(rhs);
        if (counters_) counters_->subdomain_solves.fetch_add(1, std::memory_order_relaxed);
        g.transfer.inject_owned(j, sol, out);
    });
    return out;
}

Vector RaspenJacobian::apply_substructured(std::span<const double> y) const {
    return ctx_->skeleton.restrict_to(apply_volume(ctx_->skeleton.prolongate(y)));
}

DenseMatrix RaspenJacobian::assemble_substructured() const {
    const index_t nbar = ctx_->skeleton_size();
    DenseMatrix m(nbar, nbar);
    Vector e(nbar, 0.0);
    for (index_t c = 0; c < nbar; ++c) {
        e[c] = 1.0;
        const Vector col = apply_substructured(e);
        e[c] = 0.0;
        for (index_t r = 0; r < nbar; ++r) m(r, c) = col[r];
    }
    return m;
}

// ---- Outer Newton drivers -------------------------------------------------

NewtonResult newton_loop(const OuterOperators& ops, const Vector& init, const NewtonOptions& opts,
                         LineSearchMode line_search) {
    if (opts.mode == StoppingMode::Error && !opts.reference)
        throw InvalidArgument("newton: error stopping needs a reference");
    if (static_cast<index_t>(init.size()) != ops.dim)
        throw InvalidArgument("newton: initial iterate size mismatch");

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    auto elapsed_ms = [&] {
        if (!opts.timings) return 0.0;
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    NewtonResult res;
    Vector x = init;
    int inner = 0;
    Vector r;
    try {
        r = ops.residual(x, inner);
    } catch (const SolveFailure&) {
        res.history.diverged = true;
        res.solution = std::move(x);
        return res;
    } catch (const SingularMatrixError&) {
        res.history.diverged = true;
        res.solution = std::move(x);
        return res;
    }

    std::int64_t cum_cost = 0;
    double metric0 = -1.0;

    auto push_row = [&](int iter, int gmres_iters) {
        OuterNewtonHistory::Row row;
        row.iter = iter;
        row.err = -1.0;
        const Vector vol = ops.to_volume(x);
        if (opts.reference) {
            const double rn = norm2(*opts.reference);
            row.err = diff_norm2(vol, *opts.reference) / (rn > 0.0 ? rn : 1.0);
        }
        row.res = ops.problem_residual_norm(vol);
        row.inner_gmres = gmres_iters;
        row.max_inner_newton = inner;
        cum_cost += inner + gmres_iters;
        row.cum_cost = cum_cost;
        row.wall_ms = elapsed_ms();
        row.coarse_newton_iters = ops.extra_inner ? ops.extra_inner() : 0;
        res.history.rows.push_back(row);
        return opts.mode == StoppingMode::Error ? row.err : row.res;
    };

    if (opts.trace) opts.trace->push_back(x);
    double metric = push_row(0, 0);
    metric0 = metric;
    if (metric <= opts.tol) {
        res.history.converged = true;
    } else {
        for (int n = 1; n <= opts.maxit; ++n) {
            Vector d;
            int gmres_iters = 0;
            try {
                const OuterOperators::Jacobian jac = ops.jacobian(x);
                if (opts.solver == JacobianSolver::Direct) {
                    if (!jac.direct_solve)
                        throw InvalidArgument("newton: direct jacobian solver not available here");
                    d = jac.direct_solve(r);
                } else {
                    GmresOptions gopt;
                    gopt.rtol = opts.gmres_rtol;
                    gopt.maxit = std::min<int>(opts.gmres_maxit, static_cast<int>(ops.dim));
                    const Vector zero(ops.dim, 0.0);
                    GmresResult g = gmres(jac.matvec, r, zero, gopt);
                    d = std::move(g.solution);
                    gmres_iters = g.iterations;
                }
            } catch (const SolveFailure&) {
                res.history.diverged = true;
                break;
            } catch (const SingularMatrixError&) {
                res.history.diverged = true;
                break;
            }

            // Step with the requested globalization.
            const double rnorm = norm2(r);
            double t = 1.0;
            bool accepted = false;
            Vector xt(ops.dim), rt;
            int inner_t = 0;
            const int attempts = line_search == LineSearchMode::Off ? 1 : opts.max_backtracks + 1;
            for (int bt = 0; bt < attempts; ++bt) {
                for (index_t i = 0; i < ops.dim; ++i) xt[i] = x[i] - t * d[i];
                bool ok = true;
                try {
                    inner_t = 0;
                    rt = ops.residual(xt, inner_t);
                    ok = all_finite(rt);
                } catch (const SolveFailure&) {
                    ok = false;
                } catch (const SingularMatrixError&) {
                    ok = false;
                }
                if (ok) {
                    switch (line_search) {
                        case LineSearchMode::On:
                            accepted = norm2(rt) <= (1.0 - opts.armijo_c * t) * rnorm;
                            break;
                        case LineSearchMode::Off:
                        case LineSearchMode::Fallback:
                            accepted = true;
                            break;
                    }
                }
                if (accepted) break;
                t *= 0.5;
            }
            if (!accepted) {
                res.history.diverged = true;
                break;
            }
            x = std::move(xt);
            r = std::move(rt);
            inner = inner_t;
            if (opts.trace) opts.trace->push_back(x);
            metric = push_row(n, gmres_iters);
            if (metric <= opts.tol) {
                res.history.converged = true;
                break;
            }
            if (!std::isfinite(metric) ||
                metric > opts.divergence_factor * std::max(metric0, 1e-300)) {
                res.history.diverged = true;
                break;
            }
        }
    }

    res.solution = std::move(x);
    res.volume_solution = ops.to_volume(res.solution);
    return res;
}

namespace {
struct ResidualCache {
    std::vector<Vector> states;
    Vector volume_reconstruction;  // sum_j Ptilde_j G_j at the last evaluation point
};
} // namespace

NewtonResult newton_outer(const NonlinearProblem& problem, const SchwarzContext& ctx,
                          OuterMethodKind kind, const Vector& init, const NewtonOptions& opts,
                          SolveCounters* counters) {
    OuterOperators ops;
    auto res_norm = [&problem](const Vector& vol) { return norm2(problem.residual(vol)); };
    ops.problem_residual_norm = res_norm;

    const LineSearchMode ls = opts.line_search.value_or(
        kind == OuterMethodKind::PlainNewton ? LineSearchMode::On : LineSearchMode::Fallback);

    switch (kind) {
        case OuterMethodKind::PlainNewton: {
            ops.dim = problem.dimension();
            ops.residual = [&problem](const Vector& x, int& inner_newton) {
                inner_newton = 0;
                return problem.residual(x);
            };
            ops.jacobian = [&problem](const Vector& x) {
                auto jmat = std::make_shared<CsrMatrix>(problem.jacobian(x));
                OuterOperators::Jacobian jac;
                jac.matvec = [jmat](std::span<const double> w) { return jmat->apply(w); };
                jac.direct_solve = [jmat](const Vector& rhs) {
                    return SparseLu(*jmat).solve(rhs);
                };
                return jac;
            };
            ops.to_volume = [](const Vector& x) { return x; };
            break;
        }
        case OuterMethodKind::Raspen: {
            ops.dim = ctx.volume_size();
            auto cache = std::make_shared<ResidualCache>();
            ops.residual = [&, cache, counters](const Vector& x, int& inner_newton) {
                PreconditionedResidual pr = raspen_residual(problem, ctx, x, opts.local, counters);
                inner_newton = pr.max_inner_newton();
                cache->states = std::move(pr.states);
                return pr.value;
            };
            ops.jacobian = [&, cache, counters](const Vector&) {
                auto jac = std::make_shared<RaspenJacobian>(problem, ctx, cache->states, counters);
                OuterOperators::Jacobian out;
                out.matvec = [jac](std::span<const double> w) { return jac->apply_volume(w); };
                const index_t n = ctx.volume_size();
                out.direct_solve = [jac, n](const Vector& rhs) {
                    DenseMatrix m(n, n);
                    Vector e(n, 0.0);
                    for (index_t c = 0; c < n; ++c) {
                        e[c] = 1.0;
                        const Vector col = jac->apply_volume(e);
                        e[c] = 0.0;
                        for (index_t r = 0; r < n; ++r) m(r, c) = col[r];
                    }
                    return DenseLu(m).solve(rhs);
                };
                return out;
            };
            ops.to_volume = [](const Vector& x) { return x; };
            break;
        }
        case OuterMethodKind::Sraspen: {
            ops.dim = ctx.skeleton_size();
            auto cache = std::make_shared<ResidualCache>();
            ops.residual = [&, cache, counters](const Vector& v, int& inner_newton) {
                const Vector vol = ctx.skeleton.prolongate(v);
                PreconditionedResidual pr = raspen_residual(problem, ctx, vol, opts.local, counters);
                inner_newton = pr.max_inner_newton();
                cache->states = std::move(pr.states);
                // vol - value = sum_j Ptilde_j G_j(vol): the volume iterate the
                // substructured method implicitly carries.
                cache->volume_reconstruction.resize(vol.size());
                for (std::size_t i = 0; i < vol.size(); ++i)
                    cache->volume_reconstruction[i] = vol[i] - pr.value[i];
                return ctx.skeleton.restrict_to(pr.value);
            };
            ops.jacobian = [&, cache, counters](const Vector&) {
                auto jac = std::make_shared<RaspenJacobian>(problem, ctx, cache->states, counters);
                OuterOperators::Jacobian out;
                out.matvec = [jac](std::span<const double> y) {
                    return jac->apply_substructured(y);
                };
                out.direct_solve = [jac](const Vector& rhs) {
                    return DenseLu(jac->assemble_substructured()).solve(rhs);
                };
                return out;
            };
            ops.to_volume = [cache](const Vector&) { return cache->volume_reconstruction; };
            break;
        }
    }
    return newton_loop(ops, init, opts, ls);
}

} // namespace dds
