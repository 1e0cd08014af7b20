#include "core/linear_schwarz.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace dds {

LinearSchwarzContext::LinearSchwarzContext(const SchwarzContext& geo, CsrMatrix a, Vector f)
    : geo_(&geo), a_(std::move(a)), f_(std::move(f)) {
    const index_t n = geo.volume_size();
    if (a_.rows() != n || a_.cols() != n || static_cast<index_t>(f_.size()) != n)
        throw InvalidArgument("linear schwarz: matrix/rhs must match the grid");
    local_factors_.reserve(geo.subdomains());
    for (int j = 0; j < geo.subdomains(); ++j)
        local_factors_.push_back(
            SparseLu(extract_principal_submatrix(a_, geo.decomposition().overlap_sets[j])));
}

Vector LinearSchwarzContext::local_solve(int j, std::span<const double> rhs) const {
    counters.subdomain_solves.fetch_add(1, std::memory_order_relaxed);
    return local_factors_[j].solve(rhs);
}

Vector LinearSchwarzContext::apply_M_inv(std::span<const double> r) const {
    const SchwarzContext& g = *geo_;
    Vector out(g.volume_size(), 0.0);
    counters.parallel_rounds.fetch_add(1, std::memory_order_relaxed);
    parallel_for(g.subdomains(), g.threads, [&](int j) {
        const Vector rloc = g.transfer.restrict_to(j, r);
        const Vector w = local_solve(j, rloc);
        g.transfer.inject_owned(j, w, out);
    });
    return out;
}

Vector LinearSchwarzContext::ras_step(std::span<const double> u) const {
    const SchwarzContext& g = *geo_;
    if (static_cast<index_t>(u.size()) != g.volume_size())
        throw InvalidArgument("ras step: iterate size mismatch");
    Vector out(g.volume_size(), 0.0);
    counters.parallel_rounds.fetch_add(1, std::memory_order_relaxed);
    parallel_for(g.subdomains(), g.threads, [&](int j) {
        // Local Dirichlet problem: A_j w = R_j (f - A (I - P_j R_j) u). Only
        // exterior columns survive the mask, and those reach the rows of the
        // subdomain through skeleton unknowns alone.
        const Vector masked = g.transfer.mask_exterior(j, u);
        const auto& rows = g.decomposition().overlap_sets[j];
        Vector rhs(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const index_t gi = rows[i];
            double s = f_[gi];
            auto cols = a_.row_cols(gi);
            auto vals = a_.row_values(gi);
            for (std::size_t p = 0; p < cols.size(); ++p) s -= vals[p] * masked[cols[p]];
            rhs[i] = s;
        }
        const Vector w = local_solve(j, rhs);
        g.transfer.inject_owned(j, w, out);
    });
    return out;
}

Vector LinearSchwarzContext::ras_step_residual_form(std::span<const double> u) const {
    Vector r = a_.apply(u);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f_[i] - r[i];
    Vector du = apply_M_inv(r);
    for (std::size_t i = 0; i < du.size(); ++i) du[i] += u[i];
    return du;
}

Vector LinearSchwarzContext::sras_step_volume(std::span<const double> v) const {
    const Vector vol = geo_->skeleton.prolongate(v);
    return ras_step(vol);
}

Vector LinearSchwarzContext::sras_step(std::span<const double> v) const {
    return geo_->skeleton.restrict_to(sras_step_volume(v));
}

namespace {
double rel_residual(const LinearSchwarzContext& ctx, std::span<const double> u) {
    Vector r = ctx.matrix().apply(u);
    auto f = ctx.rhs();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f[i] - r[i];
    const double fn = norm2(f);
    return norm2(r) / (fn > 0.0 ? fn : 1.0);
}

double rel_error(std::span<const double> u, const Vector* ref) {
    if (!ref) return -1.0;
    const double rn = norm2(*ref);
    return diff_norm2(u, *ref) / (rn > 0.0 ? rn : 1.0);
}
} // namespace

StationaryResult solve_stationary(const LinearSchwarzContext& ctx, StationaryVariant variant,
                                  const Vector& init, const StationaryOptions& opts) {
    if (opts.mode == StoppingMode::Error && !opts.reference)
        throw InvalidArgument("stationary solve: error stopping needs a reference");
    const bool sub = variant == StationaryVariant::Sras;
    const index_t want = sub ? ctx.geometry().skeleton_size() : ctx.geometry().volume_size();
    if (static_cast<index_t>(init.size()) != want)
        throw InvalidArgument("stationary solve: initial iterate size mismatch");

    StationaryResult out;
    out.solution = init;
    Vector volume = sub ? ctx.geometry().skeleton.prolongate(init) : init;

    auto push_row = [&](int iter) {
        ConvergenceHistory::Row row;
        row.iter = iter;
        row.err = rel_error(volume, opts.reference);
        row.res = rel_residual(ctx, volume);
        row.cum_solves = ctx.counters.subdomain_solves.load();
        row.cum_parallel_rounds = ctx.counters.parallel_rounds.load();
        row.basis_bytes = 0;
        out.history.rows.push_back(row);
        return opts.mode == StoppingMode::Error ? row.err : row.res;
    };

    double metric0 = push_row(0);
    if (metric0 <= opts.tol) {
        out.history.converged = true;
        return out;
    }
    for (int m = 1; m <= opts.maxit; ++m) {
        if (sub) {
            volume = ctx.sras_step_volume(out.solution);
            out.solution = ctx.geometry().skeleton.restrict_to(volume);
        } else {
            out.solution = ctx.ras_step(out.solution);
            volume = out.solution;
        }
        const double metric = push_row(m);
        if (metric <= opts.tol) {
            out.history.converged = true;
            break;
        }
        if (metric > opts.divergence_factor * std::max(metric0, 1e-300)) {
            out.history.diverged = true;
            break;
        }
    }
    return out;
}

namespace {
struct OpTrace {
    std::vector<std::int64_t> solves, rounds;
    void snap(const SolveCounters& c) {
        solves.push_back(c.subdomain_solves.load());
        rounds.push_back(c.parallel_rounds.load());
    }
};

ConvergenceHistory history_from_gmres(const GmresResult& g, const OpTrace& trace, index_t veclen,
                                      double final_err) {
    ConvergenceHistory h;
    for (std::size_t i = 0; i < g.residual_history.size(); ++i) {
        ConvergenceHistory::Row row;
        row.iter = static_cast<int>(i);
        row.err = -1.0;
        row.res = g.residual_history[i] /
                  (g.residual_history[0] > 0.0 ? g.residual_history[0] : 1.0);
        if (i < trace.solves.size()) {
            row.cum_solves = trace.solves[i];
            row.cum_parallel_rounds = trace.rounds[i];
        } else if (!trace.solves.empty()) {
            row.cum_solves = trace.solves.back();
            row.cum_parallel_rounds = trace.rounds.back();
        }
        row.basis_bytes = static_cast<std::int64_t>(8) * veclen * static_cast<std::int64_t>(i + 1);
        h.rows.push_back(row);
    }
    if (!h.rows.empty()) h.rows.back().err = final_err;
    h.converged = g.converged;
    return h;
}
} // namespace

SchwarzKrylovResult gmres_ras(const LinearSchwarzContext& ctx, const Vector& u0,
                              const GmresOptions& opts, const Vector* reference) {
    const Vector rhs = ctx.apply_M_inv(ctx.rhs());
    OpTrace trace;
    LinearOperator op = [&](std::span<const double> u) {
        Vector au = ctx.matrix().apply(u);
        Vector out = ctx.apply_M_inv(au);
        trace.snap(ctx.counters);
        return out;
    };
    SchwarzKrylovResult res;
    res.gmres = gmres(op, rhs, u0, opts);
    res.solution = res.gmres.solution;
    res.history =
        history_from_gmres(res.gmres, trace, ctx.geometry().volume_size(),
                           rel_error(res.solution, reference));
    return res;
}

SchwarzKrylovResult gmres_sras(const LinearSchwarzContext& ctx, const Vector& v0,
                               const GmresOptions& opts, const Vector* reference) {
    const SchwarzContext& g = ctx.geometry();
    const Vector rhs = g.skeleton.restrict_to(ctx.apply_M_inv(ctx.rhs()));
    OpTrace trace;
    LinearOperator op = [&](std::span<const double> v) {
        const Vector vol = g.skeleton.prolongate(v);
        Vector avol = ctx.matrix().apply(vol);
        Vector mav = ctx.apply_M_inv(avol);
        trace.snap(ctx.counters);
        return g.skeleton.restrict_to(mav);
    };
    SchwarzKrylovResult res;
    res.gmres = gmres(op, rhs, v0, opts);
    res.solution = res.gmres.solution;
    double err = -1.0;
    if (reference) {
        const Vector vref = g.skeleton.restrict_to(*reference);
        const double rn = norm2(vref);
        err = diff_norm2(res.solution, vref) / (rn > 0.0 ? rn : 1.0);
    }
    res.history = history_from_gmres(res.gmres, trace, g.skeleton_size(), err);
    return res;
}

// ---- Krylov restriction checks -------------------------------------------

namespace {
Eigen::MatrixXd to_matrix(const std::vector<Vector>& cols, std::size_t count,
                          const Skeleton* restrict_with) {
    const std::size_t rows = restrict_with ? restrict_with->indices.size() : cols[0].size();
    Eigen::MatrixXd m(rows, count);
    for (std::size_t c = 0; c < count; ++c) {
        if (restrict_with) {
            const Vector r = restrict_with->restrict_to(cols[c]);
            for (std::size_t i = 0; i < rows; ++i) m(i, c) = r[i];
        } else {
            for (std::size_t i = 0; i < rows; ++i) m(i, c) = cols[c][i];
        }
    }
    return m;
}

int numeric_rank(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    return rank;
}
} // namespace

std::string KrylovRestrictionReport::to_json() const {
    nlohmann::json j;
    j["k_requested"] = k_requested;
    j["k_volume"] = k_volume;
    j["k_sub"] = k_sub;
    j["identity_rel_err"] = identity_rel_err;
    j["max_identity_rel_err"] = max_identity_rel_err;
    j["restricted_rank"] = restricted_rank;
    j["sub_rank"] = sub_rank;
    j["joint_rank"] = joint_rank;
    j["identity_ok"] = identity_ok;
    j["spans_match"] = spans_match;
    return j.dump(2);
}

KrylovRestrictionReport check_krylov_restriction(const LinearSchwarzContext& ctx, const Vector& u0,
                                                 int kmax, unsigned long long seed, double tol) {
    const SchwarzContext& g = ctx.geometry();
    KrylovRestrictionReport rep;
    rep.k_requested = kmax;

    auto vol_op = [&](std::span<const double> u) {
        return ctx.apply_M_inv(ctx.matrix().apply(u));
    };
    auto sub_op = [&](std::span<const double> v) {
        return g.skeleton.restrict_to(ctx.apply_M_inv(ctx.matrix().apply(g.skeleton.prolongate(v))));
    };

    // Power identity on a random direction.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    Vector w(g.volume_size());
    for (auto& x : w) x = dist(rng);
    scale(w, 1.0 / std::max(norm2(w), 1e-300));
    Vector vol_pow = w;
    Vector sub_pow = g.skeleton.restrict_to(w);
    rep.identity_ok = true;
    for (int k = 1; k <= kmax; ++k) {
        vol_pow = vol_op(vol_pow);
        sub_pow = sub_op(sub_pow);
        const Vector lhs = g.skeleton.restrict_to(vol_pow);
        const double den = std::max(norm2(lhs), 1e-300);
        const double err = diff_norm2(lhs, sub_pow) / den;
        rep.identity_rel_err.push_back(err);
        rep.max_identity_rel_err = std::max(rep.max_identity_rel_err, err);
        if (err > tol) rep.identity_ok = false;
    }

    // Arnoldi bases of the two preconditioned systems from matching starts.
    Vector r0 = ctx.apply_M_inv(ctx.rhs());
    {
        const Vector au = vol_op(u0);
        for (std::size_t i = 0; i < r0.size(); ++i) r0[i] -= au[i];
    }
    GmresOptions gopt;
    gopt.rtol = 0.0;
    gopt.maxit = kmax;
    gopt.record_basis = true;
    const Vector zero_v(g.volume_size(), 0.0);
    const GmresResult vol = gmres(vol_op, r0, zero_v, gopt);

    Vector r0s = g.skeleton.restrict_to(ctx.apply_M_inv(ctx.rhs()));
    {
        const Vector v0 = g.skeleton.restrict_to(u0);
        const Vector av = sub_op(v0);
        for (std::size_t i = 0; i < r0s.size(); ++i) r0s[i] -= av[i];
    }
    const Vector zero_s(g.skeleton_size(), 0.0);
    const GmresResult sb = gmres(sub_op, r0s, zero_s, gopt);

    rep.k_volume = vol.iterations;
    rep.k_sub = sb.iterations;
    const int depth = std::min(rep.k_volume, rep.k_sub);
    rep.spans_match = true;
    for (int k = 1; k <= depth; ++k) {
        const Eigen::MatrixXd rv = to_matrix(vol.basis, k, &g.skeleton);
        const Eigen::MatrixXd sv = to_matrix(sb.basis, k, nullptr);
        Eigen::MatrixXd joint(rv.rows(), rv.cols() + sv.cols());
        joint << rv, sv;
        const int r1 = numeric_rank(rv, tol);
        const int r2 = numeric_rank(sv, tol);
        const int r3 = numeric_rank(joint, tol);
        rep.restricted_rank.push_back(r1);
        rep.sub_rank.push_back(r2);
        rep.joint_rank.push_back(r3);
        if (!(r1 == r2 && r2 == r3)) rep.spans_match = false;
    }
    return rep;
}

namespace {
// Least-squares iterate of depth d from recorded Arnoldi data.
Vector ls_iterate(const GmresResult& g, int d, std::span<const double> x0, double beta) {
    Eigen::MatrixXd H(d + 1, d);
    H.setZero();
    for (int c = 0; c < d; ++c)
        for (std::size_t r = 0; r < g.hessenberg[c].size(); ++r) H(static_cast<int>(r), c) = g.hessenberg[c][r];
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + 1);
    rhs(0) = beta;
    const Eigen::VectorXd t = H.colPivHouseholderQr().solve(rhs);
    Vector out(x0.begin(), x0.end());
    for (int c = 0; c < d; ++c) axpy(t(c), g.basis[c], out);
    return out;
}
} // namespace

LsqDiagnostic substructured_lsq_diagnostic(const LinearSchwarzContext& ctx, const Vector& u0,
                                           int kmax) {
    const SchwarzContext& g = ctx.geometry();
    GmresOptions gopt;
    gopt.rtol = 0.0;
    gopt.maxit = kmax;
    gopt.record_basis = true;

    auto vol_op = [&](std::span<const double> u) {
        return ctx.apply_M_inv(ctx.matrix().apply(u));
    };
    auto sub_op = [&](std::span<const double> v) {
        return g.skeleton.restrict_to(ctx.apply_M_inv(ctx.matrix().apply(g.skeleton.prolongate(v))));
    };

    const Vector rhs_vol = ctx.apply_M_inv(ctx.rhs());
    const GmresResult vol = gmres(vol_op, rhs_vol, u0, gopt);
    const double beta_vol = vol.residual_history[0];

    const Vector v0 = g.skeleton.restrict_to(u0);
    const Vector rhs_sub = g.skeleton.restrict_to(ctx.apply_M_inv(ctx.rhs()));
    const GmresResult sb = gmres(sub_op, rhs_sub, v0, gopt);
    const double beta_sub = sb.residual_history[0];

    LsqDiagnostic out;
    const int depth = std::min(vol.iterations, sb.iterations);
    for (int d = 1; d <= depth; ++d) {
        // Minimize over the restricted volume Krylov space directly.
        Eigen::MatrixXd H(d + 1, d);
        H.setZero();
        for (int c = 0; c < d; ++c)
            for (std::size_t r = 0; r < vol.hessenberg[c].size(); ++r)
                H(static_cast<int>(r), c) = vol.hessenberg[c][r];
        const index_t nbar = g.skeleton_size();
        Eigen::MatrixXd rq(nbar, d + 1);
        for (int c = 0; c <= d; ++c) {
            const Vector r = g.skeleton.restrict_to(vol.basis[c]);
            for (index_t i = 0; i < nbar; ++i) rq(i, c) = r[i];
        }
        Eigen::VectorXd e1 = Eigen::VectorXd::Zero(d + 1);
        e1(0) = beta_vol;
        const Eigen::MatrixXd B = rq * H;
        const Eigen::VectorXd target = rq * e1;
        const Eigen::VectorXd t = B.colPivHouseholderQr().solve(target);
        out.lsq_residuals.push_back((target - B * t).norm());

        Vector vd = g.skeleton.restrict_to(u0);
        for (int c = 0; c < d; ++c) {
            const Vector rqc = g.skeleton.restrict_to(vol.basis[c]);
            axpy(t(c), rqc, vd);
        }
        const Vector vs = ls_iterate(sb, d, v0, beta_sub);
        const double dev = diff_norm2(vd, vs);
        out.deviation_from_sras.push_back(dev);
        out.max_deviation = std::max(out.max_deviation, dev);
    }
    return out;
}

} // namespace dds
