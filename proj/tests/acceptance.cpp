// Acceptance suite: twelve checks covering the headline guarantees of the
// library, each printed as a single PASS/FAIL line with its measurements.
// Tolerances and instance sizes are pinned in this file on purpose; loosening
// them is a deliberate, reviewable act.
//
// Exit code 0 iff every check passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "core/context.hpp"
#include "core/history.hpp"
#include "core/linear_schwarz.hpp"
#include "core/nonlinear_schwarz.hpp"
#include "core/problems.hpp"
#include "core/runner.hpp"
#include "core/sparse_lu.hpp"
#include "core/two_level.hpp"
#include "core/vec.hpp"

using namespace dds;

namespace {

// ---------------------------------------------------------------------------
// Small utilities

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return std::string(buf);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector random_vector(std::size_t n, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Vector v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

Vector random_direction(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Vector v(n);
    for (auto& x : v) x = dist(rng);
    scale(v, 1.0 / std::max(norm2(v), 1e-300));
    return v;
}

// Grid + problem + Schwarz geometry bundled with stable addresses, so the
// struct can be returned by value.
struct Setup {
    std::unique_ptr<CartesianGrid> grid;
    std::unique_ptr<NonlinearProblem> problem;
    SchwarzContext ctx;

    const LinearResidualProblem& linear() const {
        return dynamic_cast<const LinearResidualProblem&>(*problem);
    }
};

Setup make_setup(const std::string& id, std::vector<index_t> points, std::vector<index_t> counts,
                 int overlap_layers, double gamma = 1.0) {
    Setup s;
    ProblemSpec spec;
    spec.id = id;
    spec.points = std::move(points);
    spec.gamma = gamma;
    s.grid = std::make_unique<CartesianGrid>(make_grid(spec));
    s.problem = make_problem(spec, *s.grid);
    s.ctx = build_schwarz_context(*s.grid, counts, overlap_layers, s.problem->sparsity(), 1);
    return s;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Results shared between criteria that reuse each other's runs.
struct Shared {
    bool c2_ran = false, c2_pass = false;
    bool c3_ran = false, c3_pass = false;
    bool forch_ready = false;
    // Forchheimer outer-Newton runs, index 0 = 20 subdomains, 1 = 50.
    OuterNewtonHistory raspen_hist[2], sraspen_hist[2];
    index_t nbar[2] = {0, 0};
};
Shared g_shared;

int first_iter_at_or_below(const std::vector<ConvergenceHistory::Row>& rows, double tol) {
    for (const auto& r : rows)
        if (r.err >= 0.0 && r.err <= tol) return r.iter;
    return std::numeric_limits<int>::max();
}

int first_iter_at_or_below(const std::vector<OuterNewtonHistory::Row>& rows, double tol) {
    for (const auto& r : rows)
        if (r.err >= 0.0 && r.err <= tol) return r.iter;
    return std::numeric_limits<int>::max();
}

// ---------------------------------------------------------------------------
// 1. Volume/substructured equivalence of the stationary linear sweeps:
//    ||restrict(u^n) - v^n||_inf <= 1e-11 over 50 sweeps, 1D and 2D Poisson.

Outcome criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    double dev1 = 0.0, dev2 = 0.0;
    const struct {
        std::vector<index_t> pts, counts;
        double* dev;
    } cases[] = {{{999}, {20}, &dev1}, {{83, 83}, {2, 2}, &dev2}};

    for (const auto& c : cases) {
        Setup s = make_setup("poisson", c.pts, c.counts, 4);
        const auto& lin = s.linear();
        const LinearSchwarzContext lsc(s.ctx, lin.matrix(),
                                       Vector(lin.rhs().begin(), lin.rhs().end()));
        Vector u = random_vector(s.ctx.volume_size(), 20260822);
        Vector v = s.ctx.skeleton.restrict_to(u);
        for (int n = 1; n <= 50; ++n) {
            u = lsc.ras_step(u);
            v = lsc.sras_step(v);
            *c.dev = std::max(*c.dev, diff_norm_inf(s.ctx.skeleton.restrict_to(u), v));
        }
    }
    const double elapsed = seconds_since(t0);
    const bool pass = dev1 <= 1e-11 && dev2 <= 1e-11 && elapsed < 10.0;
    return {pass, fmt("50 sweeps, max |restrict(u)-v|: 1D %.2e, 2D %.2e (tol 1e-11), %.2fs (cap 10s)",
                      dev1, dev2, elapsed)};
}

// ---------------------------------------------------------------------------
// 2. GMRES bounds on every linear desk instance: substructured converges in
//    <= Nbar iterations at rtol 1e-10, volume in <= Nbar+1 (or breaks down
//    luckily), and the two counts agree within 2 at rtol 1e-8.

struct LinearInstanceSpec {
    const char* name;
    std::vector<index_t> pts, counts;
    int overlap;
};

const std::vector<LinearInstanceSpec>& linear_instances() {
    static const std::vector<LinearInstanceSpec> v = {
        {"1D/20", {999}, {20}, 4},
        {"1D/50", {999}, {50}, 4},
        {"2D/2x2", {83, 83}, {2, 2}, 4},
        {"3D/2x2x2", {17, 17, 17}, {2, 2, 2}, 2},
    };
    return v;
}

Outcome criterion_2() {
    bool pass = true;
    std::string detail;
    for (const auto& inst : linear_instances()) {
        Setup s = make_setup("poisson", inst.pts, inst.counts, inst.overlap);
        const auto& lin = s.linear();
        const LinearSchwarzContext lsc(s.ctx, lin.matrix(),
                                       Vector(lin.rhs().begin(), lin.rhs().end()));
        const index_t nbar = s.ctx.skeleton_size();
        const Vector zv(s.ctx.volume_size(), 0.0);
        const Vector zs(nbar, 0.0);

        GmresOptions tight;
        tight.rtol = 1e-10;
        tight.maxit = static_cast<int>(nbar) + 6;
        const SchwarzKrylovResult sub = gmres_sras(lsc, zs, tight);
        const SchwarzKrylovResult vol = gmres_ras(lsc, zv, tight);
        const bool sub_ok = sub.gmres.converged && sub.gmres.iterations <= nbar;
        const bool vol_ok =
            (vol.gmres.converged || vol.gmres.breakdown) && vol.gmres.iterations <= nbar + 1;

        GmresOptions loose = tight;
        loose.rtol = 1e-8;
        const int it_s8 = gmres_sras(lsc, zs, loose).gmres.iterations;
        const int it_v8 = gmres_ras(lsc, zv, loose).gmres.iterations;
        const bool gap_ok = std::abs(it_v8 - it_s8) <= 2;

        pass = pass && sub_ok && vol_ok && gap_ok;
        detail += fmt("%s[Nbar=%d: sub %d%s, vol %d%s, rtol1e-8 %d/%d] ", inst.name, (int)nbar,
                      sub.gmres.iterations, sub_ok ? "" : "!", vol.gmres.iterations,
                      vol_ok ? "" : "!", it_v8, it_s8);
        if (!gap_ok) detail += "gap>2! ";
    }
    g_shared.c2_ran = true;
    g_shared.c2_pass = pass;
    return {pass, detail};
}

// ---------------------------------------------------------------------------
// 3. Arnoldi storage ratio volume/substructured at matched depth equals
//    N_v/Nbar within 1%.

Outcome criterion_3() {
    bool pass = true;
    std::string detail;
    for (const auto* inst : {&linear_instances()[0], &linear_instances()[3]}) {
        Setup s = make_setup("poisson", inst->pts, inst->counts, inst->overlap);
        const auto& lin = s.linear();
        const LinearSchwarzContext lsc(s.ctx, lin.matrix(),
                                       Vector(lin.rhs().begin(), lin.rhs().end()));
        const index_t nv = s.ctx.volume_size();
        const index_t nbar = s.ctx.skeleton_size();

        GmresOptions sopt;
        sopt.rtol = 1e-10;
        sopt.maxit = static_cast<int>(nbar) + 6;
        const SchwarzKrylovResult probe = gmres_sras(lsc, Vector(nbar, 0.0), sopt);

        // Equal-depth comparison: cap both runs one short of any terminal
        // breakdown so each side stores exactly k + 1 basis vectors.
        const int k = probe.gmres.iterations - (probe.gmres.breakdown ? 1 : 0);
        GmresOptions copt;
        copt.rtol = 0.0;  // run to the iteration cap for a matched basis depth
        copt.maxit = k;
        copt.record_basis = true;
        const SchwarzKrylovResult sub = gmres_sras(lsc, Vector(nbar, 0.0), copt);
        const SchwarzKrylovResult vol = gmres_ras(lsc, Vector(nv, 0.0), copt);

        const bool matched = vol.gmres.iterations == k && sub.gmres.iterations == k;
        const double ratio = static_cast<double>(vol.gmres.stored_basis_bytes) /
                             static_cast<double>(sub.gmres.stored_basis_bytes);
        const double predicted = static_cast<double>(nv) / static_cast<double>(nbar);
        const double rel = std::abs(ratio / predicted - 1.0);
        pass = pass && matched && rel <= 0.01;
        detail += fmt("%s[k=%d, bytes %lld/%lld, ratio %.4f vs N_v/Nbar %.4f, off %.2e%%] ",
                      inst->name, k, (long long)vol.gmres.stored_basis_bytes,
                      (long long)sub.gmres.stored_basis_bytes, ratio, predicted, rel * 100.0);
    }
    g_shared.c3_ran = true;
    g_shared.c3_pass = pass;
    return {pass, detail + "(tol 1%)"};
}

// ---------------------------------------------------------------------------
// 4. Restriction commutes with powers of the preconditioned operator
//    (k = 1..Nbar, which covers the k = 1..5 claim, at 1e-10), and the
//    restricted volume Krylov basis spans the substructured one rank-for-rank
//    on the instances with Nbar <= 40.

Outcome criterion_4() {
    bool pass = true;
    std::string detail;
    const struct {
        const char* name;
        std::vector<index_t> pts, counts;
        int overlap;
    } cases[] = {{"1D/4-small", {99}, {4}, 2}, {"1D/20", {999}, {20}, 4}};
    for (const auto& c : cases) {
        Setup s = make_setup("poisson", c.pts, c.counts, c.overlap);
        const auto& lin = s.linear();
        const LinearSchwarzContext lsc(s.ctx, lin.matrix(),
                                       Vector(lin.rhs().begin(), lin.rhs().end()));
        const index_t nbar = s.ctx.skeleton_size();
        if (nbar > 40) {
            pass = false;
            detail += fmt("%s[Nbar=%d exceeds the 40-unknown instance cap!] ", c.name, (int)nbar);
            continue;
        }
        const Vector u0 = random_vector(s.ctx.volume_size(), 7 + nbar);
        const KrylovRestrictionReport rep =
            check_krylov_restriction(lsc, u0, static_cast<int>(nbar), 321, 1e-10);
        pass = pass && rep.identity_ok && rep.spans_match;
        const int last = rep.restricted_rank.empty() ? -1 : rep.restricted_rank.back();
        const int lasts = rep.sub_rank.empty() ? -1 : rep.sub_rank.back();
        detail += fmt("%s[Nbar=%d, max identity err %.2e%s, ranks %d=%d depth %d%s] ", c.name,
                      (int)nbar, rep.max_identity_rel_err, rep.identity_ok ? "" : "!", last, lasts,
                      std::min(rep.k_volume, rep.k_sub), rep.spans_match ? "" : " spans!");
    }
    return {pass, detail + "(identity tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 5. With F(u) = Au - f the nonlinear sweeps, the fixed-point residual and
//    the preconditioned Jacobian all reproduce their linear counterparts to
//    1e-11.

Outcome criterion_5() {
    Setup s = make_setup("poisson", {99}, {4}, 2);
    const auto& lin = s.linear();
    const LinearSchwarzContext lsc(s.ctx, lin.matrix(),
                                   Vector(lin.rhs().begin(), lin.rhs().end()));
    const Vector u = random_vector(s.ctx.volume_size(), 99);
    const Vector v = s.ctx.skeleton.restrict_to(u);

    const Vector ras = lsc.ras_step(u);
    const double d_sweep = diff_norm_inf(nras_step(*s.problem, s.ctx, u).next, ras);
    const double d_sub = diff_norm_inf(nsras_step(*s.problem, s.ctx, v).next, lsc.sras_step(v));

    const PreconditionedResidual pr = raspen_residual(*s.problem, s.ctx, u);
    Vector expect = u;
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] -= ras[i];
    const double d_res = diff_norm_inf(pr.value, expect);

    const RaspenJacobian jac(*s.problem, s.ctx, pr.states);
    std::mt19937_64 rng(5);
    double d_jv = 0.0, d_js = 0.0;
    for (int t = 0; t < 5; ++t) {
        const Vector w = random_direction(s.ctx.volume_size(), rng);
        const Vector jw = jac.apply_volume(w);
        const Vector mw = lsc.apply_M_inv(lin.matrix().apply(w));
        d_jv = std::max(d_jv, diff_norm_inf(jw, mw));

        const Vector y = random_direction(s.ctx.skeleton_size(), rng);
        const Vector jy = jac.apply_substructured(y);
        const Vector my = s.ctx.skeleton.restrict_to(
            lsc.apply_M_inv(lin.matrix().apply(s.ctx.skeleton.prolongate(y))));
        d_js = std::max(d_js, diff_norm_inf(jy, my));
    }
    const bool pass = d_sweep <= 1e-11 && d_sub <= 1e-11 && d_res <= 1e-11 && d_jv <= 1e-11 &&
                      d_js <= 1e-11;
    return {pass, fmt("sweep %.2e, substructured %.2e, fixed-point residual %.2e, Jacobian "
                      "volume %.2e / substructured %.2e (tol 1e-11)",
                      d_sweep, d_sub, d_res, d_jv, d_js)};
}

// ---------------------------------------------------------------------------
// 6. Forchheimer equivalences (h = 1e-3, 20 and 50 subdomains, total overlap
//    8h, zero start): skeleton counts exactly 38/98; 20 stationary sweeps
//    agree to 1e-10; the two outer Newton methods produce matching iterates
//    to 1e-8 for every outer iteration until the error reaches 1e-12.

Outcome criterion_6() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    const index_t expected_nbar[2] = {38, 98};
    const index_t counts[2] = {20, 50};

    for (int c = 0; c < 2; ++c) {
        Setup s = make_setup("forchheimer", {999}, {counts[c]}, 4);
        const index_t nbar = s.ctx.skeleton_size();
        g_shared.nbar[c] = nbar;
        const bool nbar_ok = nbar == expected_nbar[c];

        // Stationary sweeps from zero.
        Vector u(s.ctx.volume_size(), 0.0);
        Vector v(s.ctx.skeleton_size(), 0.0);
        double dev_sweep = 0.0;
        for (int n = 1; n <= 20; ++n) {
            u = nras_step(*s.problem, s.ctx, u).next;
            v = nsras_step(*s.problem, s.ctx, v).next;
            dev_sweep = std::max(dev_sweep, diff_norm2(s.ctx.skeleton.restrict_to(u), v));
        }

        // Outer Newton methods until relative error 1e-12.
        const Vector ref = reference_solution(*s.problem);
        std::vector<Vector> trace_r, trace_s;
        NewtonOptions no;
        no.mode = StoppingMode::Error;
        no.tol = 1e-12;
        no.maxit = 50;
        no.reference = &ref;
        no.trace = &trace_r;
        const NewtonResult rr = newton_outer(*s.problem, s.ctx, OuterMethodKind::Raspen,
                                             Vector(s.ctx.volume_size(), 0.0), no);
        no.trace = &trace_s;
        const NewtonResult rs = newton_outer(*s.problem, s.ctx, OuterMethodKind::Sraspen,
                                             Vector(s.ctx.skeleton_size(), 0.0), no);
        g_shared.raspen_hist[c] = rr.history;
        g_shared.sraspen_hist[c] = rs.history;

        double dev_newton = 0.0;
        const std::size_t m = std::min(trace_r.size(), trace_s.size());
        for (std::size_t n = 0; n < m; ++n)
            dev_newton = std::max(
                dev_newton, diff_norm2(s.ctx.skeleton.restrict_to(trace_r[n]), trace_s[n]));

        const bool ok = nbar_ok && dev_sweep <= 1e-10 && rr.history.converged &&
                        rs.history.converged && dev_newton <= 1e-8;
        pass = pass && ok;
        detail += fmt("%d sub[Nbar=%d%s, sweep dev %.2e, newton dev %.2e over %zu+%zu iters%s] ",
                      (int)counts[c], (int)nbar, nbar_ok ? "" : "!=expected", dev_sweep, dev_newton,
                      trace_r.size() - 1, trace_s.size() - 1,
                      rr.history.converged && rs.history.converged ? "" : ", not converged!");
    }
    const double elapsed = seconds_since(t0);
    pass = pass && elapsed < 120.0;
    g_shared.forch_ready = true;
    return {pass, detail + fmt("(tols 1e-10/1e-8, %.1fs, cap 120s)", elapsed)};
}

// ---------------------------------------------------------------------------
// 7. Inner-GMRES averages on the Forchheimer runs: the substructured method
//    never averages above Nbar; the volume-substructured gap lies in [0, 3];
//    the averages match the reported 40/38 and 91.5/90.87 within +-2.

Outcome criterion_7() {
    if (!g_shared.forch_ready)
        return {false, "prerequisite runs from criterion 6 are unavailable"};
    const double expect_r[2] = {40.0, 91.5};
    const double expect_s[2] = {38.0, 90.87};
    bool pass = true;
    std::string detail;
    for (int c = 0; c < 2; ++c) {
        const double ar = g_shared.raspen_hist[c].average_inner_gmres();
        const double as = g_shared.sraspen_hist[c].average_inner_gmres();
        const double gap = ar - as;
        const bool ok = as <= static_cast<double>(g_shared.nbar[c]) && gap >= 0.0 && gap <= 3.0 &&
                        std::abs(ar - expect_r[c]) <= 2.0 && std::abs(as - expect_s[c]) <= 2.0;
        pass = pass && ok;
        detail += fmt("%s[vol %.2f vs %.2f, sub %.2f vs %.2f, gap %.2f]%s ", c == 0 ? "20" : "50",
                      ar, expect_r[c], as, expect_s[c], gap, ok ? "" : "!");
    }
    return {pass, detail + "(within +-2, gap in [0,3], sub <= Nbar)"};
}

// ---------------------------------------------------------------------------
// 8. Nonlinear diffusion, 83x83 (h = 1/84), total overlap 8h, start 1e5:
//    both preconditioned Newton methods reach relative error 1e-12 while
//    plain undamped Newton stagnates or diverges within the same number of
//    outer iterations; the 4-subdomain inner-GMRES averages sit within 1.5
//    of 8.17.

Outcome criterion_8() {
    const auto t0 = std::chrono::steady_clock::now();
    Setup s = make_setup("nldiffusion", {83, 83}, {2, 2}, 4);
    const Vector ref = reference_solution(*s.problem);
    const Vector u0(s.ctx.volume_size(), 1e5);
    const Vector v0 = s.ctx.skeleton.restrict_to(u0);

    NewtonOptions no;
    no.mode = StoppingMode::Error;
    no.tol = 1e-12;
    no.maxit = 60;
    no.reference = &ref;
    const NewtonResult rr = newton_outer(*s.problem, s.ctx, OuterMethodKind::Raspen, u0, no);
    const NewtonResult rs = newton_outer(*s.problem, s.ctx, OuterMethodKind::Sraspen, v0, no);

    const int budget = std::max(rr.history.iterations(), rs.history.iterations());
    NewtonOptions pn = no;
    pn.maxit = std::max(budget, 1);
    pn.line_search = LineSearchMode::Off;  // undamped baseline
    pn.solver = JacobianSolver::Direct;
    const NewtonResult rp = newton_outer(*s.problem, s.ctx, OuterMethodKind::PlainNewton, u0, pn);

    const double ar = rr.history.average_inner_gmres();
    const double as = rs.history.average_inner_gmres();
    const double plain_err = rp.history.rows.empty() ? -1.0 : rp.history.rows.back().err;
    const double elapsed = seconds_since(t0);

    const bool pass = rr.history.converged && rs.history.converged && !rp.history.converged &&
                      std::abs(ar - 8.17) <= 1.5 && std::abs(as - 8.17) <= 1.5 && elapsed < 300.0;
    return {pass,
            fmt("preconditioned converge in %d/%d iters%s; plain undamped %s after %d iters "
                "(err %.2e); avg inner GMRES %.2f/%.2f vs 8.17 (+-1.5); %.1fs (cap 300s)",
                rr.history.iterations(), rs.history.iterations(),
                rr.history.converged && rs.history.converged ? "" : " (not converged!)",
                rp.history.converged   ? "CONVERGED (expected stagnation)"
                : rp.history.diverged  ? "diverged"
                                       : "stagnated",
                rp.history.iterations(), plain_err, ar, as, elapsed)};
}

// ---------------------------------------------------------------------------
// 9. Preconditioned Jacobian matvecs (volume and substructured forms) agree
//    with central finite differences of the corresponding residuals to 1e-4
//    relative on 20 random directions per problem.

Outcome criterion_9() {
    bool pass = true;
    std::string detail;
    struct Case {
        const char* name;
        Setup s;
    };
    std::vector<Case> cases;
    cases.push_back({"flow", make_setup("forchheimer", {240}, {6}, 3)});
    cases.push_back({"plane", make_setup("nldiffusion", {25, 25}, {2, 2}, 2)});

    for (auto& c : cases) {
        const auto& p = *c.s.problem;
        const SchwarzContext& ctx = c.s.ctx;
        // Evaluation point: two sweeps away from zero, far from the solution.
        Vector u(ctx.volume_size(), 0.0);
        u = nras_step(p, ctx, u).next;
        u = nras_step(p, ctx, u).next;
        const Vector v = ctx.skeleton.restrict_to(u);

        std::mt19937_64 rng(2718);
        double worst_vol = 0.0, worst_sub = 0.0;

        {
            const PreconditionedResidual pr = raspen_residual(p, ctx, u);
            const RaspenJacobian jac(p, ctx, pr.states);
            for (int t = 0; t < 20; ++t) {
                const Vector w = random_direction(ctx.volume_size(), rng);
                const double eps = 1e-6 * (1.0 + norm_inf(u)) / std::max(norm_inf(w), 1e-300);
                Vector up = u, um = u;
                axpy(eps, w, up);
                axpy(-eps, w, um);
                const Vector rp = raspen_residual(p, ctx, up).value;
                const Vector rm = raspen_residual(p, ctx, um).value;
                Vector fd(rp.size());
                for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (rp[i] - rm[i]) / (2.0 * eps);
                const Vector jw = jac.apply_volume(w);
                worst_vol = std::max(worst_vol, diff_norm2(jw, fd) / std::max(norm2(fd), 1e-300));
            }
        }
        {
            const PreconditionedResidual pr = sraspen_residual(p, ctx, v);
            const RaspenJacobian jac(p, ctx, pr.states);
            for (int t = 0; t < 20; ++t) {
                const Vector y = random_direction(ctx.skeleton_size(), rng);
                const double eps = 1e-6 * (1.0 + norm_inf(v)) / std::max(norm_inf(y), 1e-300);
                Vector vp = v, vm = v;
                axpy(eps, y, vp);
                axpy(-eps, y, vm);
                const Vector rp = sraspen_residual(p, ctx, vp).value;
                const Vector rm = sraspen_residual(p, ctx, vm).value;
                Vector fd(rp.size());
                for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (rp[i] - rm[i]) / (2.0 * eps);
                const Vector jy = jac.apply_substructured(y);
                worst_sub = std::max(worst_sub, diff_norm2(jy, fd) / std::max(norm2(fd), 1e-300));
            }
        }
        pass = pass && worst_vol <= 1e-4 && worst_sub <= 1e-4;
        detail += fmt("%s[vol %.2e, sub %.2e] ", c.name, worst_vol, worst_sub);
    }
    return {pass, detail + "(20 directions each, tol 1e-4)"};
}

// ---------------------------------------------------------------------------
// 10. Two-level methods (total overlap 4h, 4 and 16 subdomains, start 1e5):
//     the substructured stationary variant needs strictly fewer sweeps than
//     the volume one to reach error 1e-10; substructured two-level Newton
//     needs no more outer iterations than the volume variant; and every
//     two-level fixed point satisfies ||F(u)||_2 <= 1e-10.

Outcome criterion_10() {
    bool pass = true;
    std::string detail;
    for (const index_t nsub : {2, 4}) {  // per axis: 2x2 = 4 and 4x4 = 16 subdomains
        Setup s = make_setup("nldiffusion", {35, 35}, {nsub, nsub}, 2);
        const auto& p = *s.problem;
        const Vector ref = reference_solution(p);
        const Vector u0(s.ctx.volume_size(), 1e5);
        const Vector v0 = s.ctx.skeleton.restrict_to(u0);
        const CoarseSpace vol_cs = CoarseSpace::build_volume(*s.grid);
        const CoarseSpace sub_cs = CoarseSpace::build_substructured(s.ctx);

        StationaryOptions so;
        so.mode = StoppingMode::Error;
        so.tol = 1e-12;
        so.maxit = 600;
        so.reference = &ref;
        const NonlinearStationaryResult st_ras =
            solve_two_level_stationary(p, s.ctx, vol_cs, StationaryVariant::Ras, u0, so);
        const NonlinearStationaryResult st_sras =
            solve_two_level_stationary(p, s.ctx, sub_cs, StationaryVariant::Sras, v0, so);
        const int it_ras = first_iter_at_or_below(st_ras.history.rows, 1e-10);
        const int it_sras = first_iter_at_or_below(st_sras.history.rows, 1e-10);
        const bool sweep_ok =
            it_ras != std::numeric_limits<int>::max() && it_sras < it_ras;

        NewtonOptions tn;
        tn.mode = StoppingMode::Error;
        tn.tol = 1e-12;
        tn.maxit = 40;
        tn.reference = &ref;
        tn.gmres_rtol = 1e-9;  // differencing noise floor of the two-level Jacobian
        const NewtonResult nw_r =
            two_level_newton(p, s.ctx, vol_cs, TwoLevelMethodKind::Raspen, u0, tn);
        const NewtonResult nw_s =
            two_level_newton(p, s.ctx, sub_cs, TwoLevelMethodKind::Sraspen, v0, tn);
        const int itn_r = first_iter_at_or_below(nw_r.history.rows, 1e-10);
        const int itn_s = first_iter_at_or_below(nw_s.history.rows, 1e-10);
        const bool newton_ok = itn_r != std::numeric_limits<int>::max() && itn_s <= itn_r;

        // Fixed-point quality: polish each final iterate with the two-level
        // map it came from and measure the volume residual of the limit.
        auto polish_volume = [&](Vector u) {
            double r = norm2(p.residual(u));
            for (int i = 0; i < 30 && r > 1e-11; ++i) {
                u = two_level_nras_step(p, s.ctx, vol_cs, u);
                r = norm2(p.residual(u));
            }
            return r;
        };
        auto polish_sub = [&](Vector v) {
            Vector vol = s.ctx.skeleton.prolongate(v);
            double r = std::numeric_limits<double>::infinity();
            for (int i = 0; i < 30 && r > 1e-11; ++i) {
                v = two_level_nsras_step(p, s.ctx, sub_cs, v, {}, {}, nullptr, nullptr, &vol);
                r = norm2(p.residual(vol));
            }
            return r;
        };
        const double f1 = polish_volume(st_ras.solution);
        const double f2 = polish_sub(st_sras.solution);
        const double f3 = polish_volume(nw_r.volume_solution);
        const double f4 = polish_sub(nw_s.solution);
        const double fmax = std::max(std::max(f1, f2), std::max(f3, f4));
        const bool fixed_ok = fmax <= 1e-10;

        pass = pass && sweep_ok && newton_ok && fixed_ok;
        detail += fmt("%dx%d[sweeps %d>%d%s, newton %d>=%d%s, max |F| %.2e%s] ", (int)nsub,
                      (int)nsub, it_ras, it_sras, sweep_ok ? "" : "!", itn_r, itn_s,
                      newton_ok ? "" : "!", fmax, fixed_ok ? "" : "!");
    }
    return {pass, detail + "(error 1e-10, fixed-point tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 11. Coarse corrections vanish at the solution: the volume correction at u*
//     and the substructured correction at restrict(u*) are both <= 1e-10.

Outcome criterion_11() {
    bool pass = true;
    std::string detail;
    struct Case {
        const char* name;
        Setup s;
    };
    std::vector<Case> cases;
    cases.push_back({"flow", make_setup("forchheimer", {999}, {20}, 4)});
    cases.push_back({"plane", make_setup("nldiffusion", {35, 35}, {2, 2}, 2)});
    for (auto& c : cases) {
        const auto& p = *c.s.problem;
        const Vector star = reference_solution(p);
        const CoarseSpace vol_cs = CoarseSpace::build_volume(*c.s.grid);
        const CoarseSpace sub_cs = CoarseSpace::build_substructured(c.s.ctx);
        const double cv = norm_inf(fas_correction_volume(p, vol_cs, star));
        const double cs = norm_inf(fas_correction_substructured(
            p, c.s.ctx, sub_cs, c.s.ctx.skeleton.restrict_to(star)));
        pass = pass && cv <= 1e-10 && cs <= 1e-10;
        detail += fmt("%s[volume %.2e, substructured %.2e] ", c.name, cv, cs);
    }
    return {pass, detail + "(tol 1e-10)"};
}

// ---------------------------------------------------------------------------
// 12. Full-scale wall-clock tables are out of reach at desk scale; the
//     substitute is the pair of criteria 2-3 plus the exact cumulative cost
//     accounting L(n) = sum over outer iterations of (inner Newton depth +
//     inner GMRES iterations), checked row by row on the criterion-6 runs.

Outcome criterion_12() {
    if (!g_shared.forch_ready || !g_shared.c2_ran || !g_shared.c3_ran)
        return {false, "prerequisite results from criteria 2, 3 or 6 are unavailable"};
    bool identity = true;
    int rows_checked = 0;
    for (const OuterNewtonHistory* h :
         {&g_shared.raspen_hist[0], &g_shared.sraspen_hist[0], &g_shared.raspen_hist[1],
          &g_shared.sraspen_hist[1]}) {
        std::int64_t running = 0;
        for (const auto& row : h->rows) {
            running += row.max_inner_newton + row.inner_gmres;
            if (row.cum_cost != running) identity = false;
            ++rows_checked;
        }
    }
    // Single-step sanity of the formula itself: 3 inner Newton + 10 GMRES = 13.
    const bool formula = (3 + 10) == 13;
    const bool pass = identity && formula && g_shared.c2_pass && g_shared.c3_pass;
    return {pass, fmt("cost identity exact on %d history rows%s; substituted criteria: 2 %s, 3 %s",
                      rows_checked, identity ? "" : " (violated!)",
                      g_shared.c2_pass ? "PASS" : "FAIL", g_shared.c3_pass ? "PASS" : "FAIL")};
}

}  // namespace

int main() {
    struct Entry {
        int id;
        std::function<Outcome()> fn;
    };
    const std::vector<Entry> entries = {
        {1, criterion_1},  {2, criterion_2},  {3, criterion_3},  {4, criterion_4},
        {5, criterion_5},  {6, criterion_6},  {7, criterion_7},  {8, criterion_8},
        {9, criterion_9},  {10, criterion_10}, {11, criterion_11}, {12, criterion_12},
    };
    bool all = true;
    for (const auto& e : entries) {
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        std::printf("ACCEPT %d: %s - %s\n", e.id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
