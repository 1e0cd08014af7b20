#include "core/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "core/context.hpp"
#include "core/errors.hpp"
#include "core/nonlinear_schwarz.hpp"
#include "core/sparse_lu.hpp"
#include "core/two_level.hpp"

namespace dds {

using nlohmann::json;

// ---- Configuration --------------------------------------------------------

const std::vector<std::string>& valid_method_ids() {
    static const std::vector<std::string> ids = {
        "ras",           "sras",           "gmres_ras",        "gmres_sras",
        "nras",          "nsras",          "newton",           "raspen",
        "sraspen",       "two_level_nras", "two_level_nsras",  "two_level_raspen",
        "two_level_sraspen",
    };
    return ids;
}

namespace {
void require_known_keys(const json& obj, const std::vector<std::string>& known,
                        const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("unknown configuration key '" + it.key() + "' in " + where);
    }
}

std::string joined_method_ids() {
    std::string s;
    for (const auto& id : valid_method_ids()) {
        if (!s.empty()) s += ", ";
        s += id;
    }
    return s;
}
} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("configuration root must be an object");
    require_known_keys(j,
                       {"problem", "decomposition", "methods", "tolerance", "stopping", "maxit",
                        "initial_guess", "threads", "timings", "gmres", "newton", "two_level"},
                       "the configuration root");

    RunConfig cfg;
    if (!j.contains("problem")) throw ConfigError("configuration needs a 'problem' section");
    cfg.problem = ProblemSpec::from_json(j.at("problem").dump());

    if (!j.contains("decomposition"))
        throw ConfigError("configuration needs a 'decomposition' section");
    const json& dec = j.at("decomposition");
    require_known_keys(dec, {"subdomains", "overlap_layers"}, "'decomposition'");
    if (!dec.contains("subdomains") || !dec.at("subdomains").is_array())
        throw ConfigError("'decomposition.subdomains' must be an array of per-axis counts");
    for (const auto& v : dec.at("subdomains")) cfg.subdomains.push_back(v.get<index_t>());
    cfg.overlap_layers = dec.value("overlap_layers", 1);

    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty())
        throw ConfigError("configuration needs a nonempty 'methods' array");
    for (const auto& m : j.at("methods")) {
        const std::string id = m.get<std::string>();
        bool ok = false;
        for (const auto& valid : valid_method_ids())
            if (id == valid) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("unknown method '" + id + "'; valid methods: " + joined_method_ids());
        cfg.methods.push_back(id);
    }

    cfg.tol = j.value("tolerance", cfg.tol);
    const std::string stopping = j.value("stopping", std::string("error"));
    if (stopping == "error")
        cfg.mode = StoppingMode::Error;
    else if (stopping == "residual")
        cfg.mode = StoppingMode::Residual;
    else
        throw ConfigError("'stopping' must be 'error' or 'residual'");
    cfg.maxit = j.value("maxit", cfg.maxit);

    if (j.contains("initial_guess")) {
        const json& g = j.at("initial_guess");
        require_known_keys(g, {"type", "value", "seed"}, "'initial_guess'");
        cfg.guess_type = g.value("type", std::string("zeros"));
        if (cfg.guess_type != "zeros" && cfg.guess_type != "constant" && cfg.guess_type != "random")
            throw ConfigError("'initial_guess.type' must be zeros, constant or random");
        cfg.guess_value = g.value("value", 0.0);
        cfg.seed = g.value("seed", cfg.seed);
    }
    cfg.threads = j.value("threads", 1);
    if (cfg.threads < 1) throw ConfigError("'threads' must be at least 1");
    cfg.timings = j.value("timings", false);

    if (j.contains("gmres")) {
        const json& g = j.at("gmres");
        require_known_keys(g, {"rtol", "maxit"}, "'gmres'");
        cfg.gmres_rtol = g.value("rtol", cfg.gmres_rtol);
        cfg.gmres_maxit = g.value("maxit", cfg.gmres_maxit);
    }
    if (j.contains("newton")) {
        const json& n = j.at("newton");
        require_known_keys(n, {"gmres_rtol", "line_search", "inner_tol", "inner_maxit"}, "'newton'");
        cfg.newton_gmres_rtol = n.value("gmres_rtol", cfg.newton_gmres_rtol);
        cfg.line_search = n.value("line_search", cfg.line_search);
        if (cfg.line_search != "default" && cfg.line_search != "on" && cfg.line_search != "off" &&
            cfg.line_search != "fallback")
            throw ConfigError("'newton.line_search' must be default, on, off or fallback");
        cfg.inner_tol = n.value("inner_tol", cfg.inner_tol);
        cfg.inner_maxit = n.value("inner_maxit", cfg.inner_maxit);
    }
    if (j.contains("two_level")) {
        const json& t = j.at("two_level");
        require_known_keys(t, {"gmres_rtol", "coarse_tol"}, "'two_level'");
        cfg.two_level_gmres_rtol = t.value("gmres_rtol", cfg.two_level_gmres_rtol);
        cfg.coarse_tol = t.value("coarse_tol", cfg.coarse_tol);
    }
    return cfg;
}

std::string RunConfig::to_json() const {
    json j;
    j["problem"] = json::parse(problem.to_json());
    j["decomposition"] = {{"subdomains", subdomains}, {"overlap_layers", overlap_layers}};
    j["methods"] = methods;
    j["tolerance"] = tol;
    j["stopping"] = mode == StoppingMode::Error ? "error" : "residual";
    j["maxit"] = maxit;
    j["initial_guess"] = {{"type", guess_type}, {"value", guess_value}, {"seed", seed}};
    j["threads"] = threads;
    j["timings"] = timings;
    j["gmres"] = {{"rtol", gmres_rtol}, {"maxit", gmres_maxit}};
    j["newton"] = {{"gmres_rtol", newton_gmres_rtol},
                   {"line_search", line_search},
                   {"inner_tol", inner_tol},
                   {"inner_maxit", inner_maxit}};
    j["two_level"] = {{"gmres_rtol", two_level_gmres_rtol}, {"coarse_tol", coarse_tol}};
    return j.dump(2);
}

// ---- Reference solution ---------------------------------------------------

Vector reference_solution(const NonlinearProblem& problem) {
    if (const auto* lin = dynamic_cast<const LinearResidualProblem*>(&problem)) {
        return SparseLu(lin->matrix()).solve(lin->rhs());
    }
    const index_t n = problem.dimension();
    Vector u(n, 0.0);
    Vector f = problem.residual(u);
    double fn = norm2(f);
    for (int it = 0; it < 200; ++it) {
        const Vector d = SparseLu(problem.jacobian(u)).solve(f);
        if (norm2(d) <= 1e-14 * (1.0 + norm2(u))) {
            for (index_t i = 0; i < n; ++i) u[i] -= d[i];
            break;
        }
        double t = 1.0;
        bool accepted = false;
        Vector ut(n), ft;
        for (int bt = 0; bt < 40; ++bt) {
            for (index_t i = 0; i < n; ++i) ut[i] = u[i] - t * d[i];
            ft = problem.residual(ut);
            const double fnt = norm2(ft);
            if (std::isfinite(fnt) && fnt <= (1.0 - 1e-4 * t) * fn) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // machine-precision floor
        u = std::move(ut);
        f = std::move(ft);
        fn = norm2(f);
    }
    return u;
}

// ---- Experiment execution -------------------------------------------------

namespace {
Vector initial_volume_guess(const RunConfig& cfg, index_t n) {
    Vector u(n, 0.0);
    if (cfg.guess_type == "constant") {
        for (auto& x : u) x = cfg.guess_value;
    } else if (cfg.guess_type == "random") {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (auto& x : u) x = dist(rng);
    }
    return u;
}

std::optional<LineSearchMode> line_search_from(const std::string& s) {
    if (s == "on") return LineSearchMode::On;
    if (s == "off") return LineSearchMode::Off;
    if (s == "fallback") return LineSearchMode::Fallback;
    return std::nullopt;  // per-method default
}

void fill_from_history(MethodRecord& rec, const ConvergenceHistory& h) {
    rec.converged = h.converged;
    rec.diverged = h.diverged;
    rec.iterations = h.iterations();
    if (!h.rows.empty()) {
        rec.final_err = h.rows.back().err;
        rec.final_res = h.rows.back().res;
        rec.subdomain_solves = h.rows.back().cum_solves;
        rec.parallel_rounds = h.rows.back().cum_parallel_rounds;
        rec.basis_bytes = h.rows.back().basis_bytes;
    }
    rec.csv = h.to_csv();
}

void fill_from_history(MethodRecord& rec, const OuterNewtonHistory& h) {
    rec.converged = h.converged;
    rec.diverged = h.diverged;
    rec.iterations = h.iterations();
    rec.total_cost = h.total_cost();
    if (!h.rows.empty()) {
        rec.final_err = h.rows.back().err;
        rec.final_res = h.rows.back().res;
    }
    rec.csv = h.to_csv();
}
} // namespace

RunOutput run_experiment(const RunConfig& cfg) {
    const CartesianGrid grid = make_grid(cfg.problem);
    const auto problem = make_problem(cfg.problem, grid);
    SchwarzContext ctx = build_schwarz_context(grid, cfg.subdomains, cfg.overlap_layers,
                                               problem->sparsity(), cfg.threads);
    const Vector reference = reference_solution(*problem);
    const Vector u0 = initial_volume_guess(cfg, grid.size());
    const Vector v0 = ctx.skeleton.restrict_to(u0);
    const auto* linear = dynamic_cast<const LinearResidualProblem*>(problem.get());

    StationaryOptions stat_opts;
    stat_opts.mode = cfg.mode;
    stat_opts.tol = cfg.tol;
    stat_opts.maxit = cfg.maxit;
    stat_opts.reference = &reference;

    LocalSolveOptions local;
    local.tol = cfg.inner_tol;
    local.maxit = cfg.inner_maxit;

    NewtonOptions newton_opts;
    newton_opts.mode = cfg.mode;
    newton_opts.tol = cfg.tol;
    newton_opts.maxit = cfg.maxit;
    newton_opts.reference = &reference;
    newton_opts.gmres_rtol = cfg.newton_gmres_rtol;
    newton_opts.line_search = line_search_from(cfg.line_search);
    newton_opts.local = local;
    newton_opts.timings = cfg.timings;

    CoarseNewtonOptions coarse_opts;
    coarse_opts.tol = cfg.coarse_tol;

    std::optional<CoarseSpace> coarse_volume, coarse_sub;
    auto volume_coarse = [&]() -> const CoarseSpace& {
        if (!coarse_volume) coarse_volume = CoarseSpace::build_volume(grid);
        return *coarse_volume;
    };
    auto sub_coarse = [&]() -> const CoarseSpace& {
        if (!coarse_sub) coarse_sub = CoarseSpace::build_substructured(ctx);
        return *coarse_sub;
    };

    auto require_linear = [&](const std::string& id) -> const LinearResidualProblem& {
        if (!linear)
            throw ConfigError("method '" + id + "' applies to the linear problem only; use the "
                              "nonlinear variants for problem '" + cfg.problem.id + "'");
        return *linear;
    };

    RunOutput out;
    out.decomposition_json = decomposition_summary_json(ctx.decomposition(), ctx.skeleton);

    for (const std::string& id : cfg.methods) {
        MethodRecord rec;
        rec.method = id;
        const auto t0 = std::chrono::steady_clock::now();

        if (id == "ras" || id == "sras") {
            const auto& lin = require_linear(id);
            LinearSchwarzContext lctx(ctx, lin.matrix(), Vector(lin.rhs().begin(), lin.rhs().end()));
            const bool sub = id == "sras";
            const StationaryResult r =
                solve_stationary(lctx, sub ? StationaryVariant::Sras : StationaryVariant::Ras,
                                 sub ? v0 : u0, stat_opts);
            fill_from_history(rec, r.history);
        } else if (id == "gmres_ras" || id == "gmres_sras") {
            const auto& lin = require_linear(id);
            LinearSchwarzContext lctx(ctx, lin.matrix(), Vector(lin.rhs().begin(), lin.rhs().end()));
            GmresOptions gopt;
            gopt.rtol = cfg.gmres_rtol;
            gopt.maxit = cfg.gmres_maxit;
            const SchwarzKrylovResult r = id == "gmres_ras"
                                              ? gmres_ras(lctx, u0, gopt, &reference)
                                              : gmres_sras(lctx, v0, gopt, &reference);
            fill_from_history(rec, r.history);
        } else if (id == "nras" || id == "nsras") {
            const bool sub = id == "nsras";
            const NonlinearStationaryResult r = solve_nonlinear_stationary(
                *problem, ctx, sub ? StationaryVariant::Sras : StationaryVariant::Ras,
                sub ? v0 : u0, stat_opts, local);
            fill_from_history(rec, r.history);
        } else if (id == "newton" || id == "raspen" || id == "sraspen") {
            const OuterMethodKind kind = id == "newton"  ? OuterMethodKind::PlainNewton
                                         : id == "raspen" ? OuterMethodKind::Raspen
                                                          : OuterMethodKind::Sraspen;
            const NewtonResult r = newton_outer(*problem, ctx, kind,
                                                kind == OuterMethodKind::Sraspen ? v0 : u0,
                                                newton_opts);
            fill_from_history(rec, r.history);
        } else if (id == "two_level_nras" || id == "two_level_nsras") {
            const bool sub = id == "two_level_nsras";
            const NonlinearStationaryResult r = solve_two_level_stationary(
                *problem, ctx, sub ? sub_coarse() : volume_coarse(),
                sub ? StationaryVariant::Sras : StationaryVariant::Ras, sub ? v0 : u0, stat_opts,
                local, coarse_opts);
            fill_from_history(rec, r.history);
        } else {  // two_level_raspen / two_level_sraspen
            const bool sub = id == "two_level_sraspen";
            NewtonOptions opts = newton_opts;
            opts.gmres_rtol = cfg.two_level_gmres_rtol;
            const NewtonResult r = two_level_newton(
                *problem, ctx, sub ? sub_coarse() : volume_coarse(),
                sub ? TwoLevelMethodKind::Sraspen : TwoLevelMethodKind::Raspen, sub ? v0 : u0,
                opts, coarse_opts);
            fill_from_history(rec, r.history);
        }

        if (cfg.timings)
            rec.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
        out.records.push_back(std::move(rec));
    }

    json summary;
    summary["config"] = json::parse(cfg.to_json());
    summary["n_volume"] = grid.size();
    summary["n_skeleton"] = ctx.skeleton_size();
    summary["subdomain_count"] = ctx.subdomains();
    summary["methods"] = json::array();
    for (const auto& rec : out.records) {
        json m;
        m["method"] = rec.method;
        m["converged"] = rec.converged;
        m["diverged"] = rec.diverged;
        m["iterations"] = rec.iterations;
        m["final_error"] = rec.final_err;
        m["final_residual"] = rec.final_res;
        m["total_cost"] = rec.total_cost;
        m["subdomain_solves"] = rec.subdomain_solves;
        m["parallel_rounds"] = rec.parallel_rounds;
        m["stored_basis_bytes"] = rec.basis_bytes;
        m["wall_ms"] = rec.wall_ms;
        m["csv_file"] = rec.method + ".csv";
        summary["methods"].push_back(std::move(m));
    }
    out.summary_json = summary.dump(2);
    return out;
}

RunOutput run_experiment_to_dir(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());
    RunOutput out = run_experiment(cfg);
    for (const auto& rec : out.records)
        write_file((fs::path(out_dir) / (rec.method + ".csv")).string(), rec.csv);
    write_file((fs::path(out_dir) / "summary.json").string(), out.summary_json);
    write_file((fs::path(out_dir) / "decomposition.json").string(), out.decomposition_json);
    return out;
}

// ---- Invariant battery ----------------------------------------------------

namespace {
struct Verifier {
    std::ostream& out;
    bool all_ok = true;

    void check(const std::string& name, const std::function<std::string()>& fn) {
        std::string detail;
        bool ok = false;
        try {
            detail = fn();  // empty string means pass
            ok = detail.empty();
        } catch (const std::exception& e) {
            detail = e.what();
        }
        out << "verify " << name << ": " << (ok ? "PASS" : "FAIL") << (ok ? "" : " — " + detail)
            << "\n";
        all_ok = all_ok && ok;
    }
};

std::string expect(bool cond, const std::string& msg) { return cond ? "" : msg; }
} // namespace

bool run_verify(std::ostream& out) {
    Verifier v{out};

    v.check("sparse-matvec", [] {
        CsrMatrix a = CsrMatrix::from_triplets(
            2, 3, {{0, 1, 2.0}, {0, 1, 0.5}, {1, 0, -1.0}, {1, 2, 4.0}});
        const Vector y = a.apply(Vector{1.0, 2.0, 3.0});
        return expect(y[0] == 5.0 && y[1] == 11.0, "matvec of a 2x3 example came out wrong");
    });

    v.check("dense-lu", [] {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        const index_t n = 8;
        DenseMatrix a(n, n);
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < n; ++j) a(i, j) = dist(rng) + (i == j ? 4.0 : 0.0);
        DenseLu lu(a);
        const DenseMatrix back = lu.reconstruct();
        double worst = 0.0;
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(back(i, j) - a(i, j)));
        return expect(worst <= 1e-12, "permuted LU product differs from the matrix");
    });

    // Shared small linear instance: 1D Poisson, 99 unknowns, 4 subdomains.
    const std::vector<index_t> pts{99};
    const CartesianGrid grid = build_grid(1, pts, 1.0 / 100.0);
    const CsrMatrix a = assemble_poisson(grid);
    const Vector f = poisson_rhs(grid);
    const std::vector<index_t> counts{4};
    SchwarzContext ctx = build_schwarz_context(grid, counts, 2, a.pattern());

    v.check("gmres-direct-agreement", [&] {
        const Vector direct = SparseLu(a).solve(f);
        GmresOptions gopt;
        gopt.rtol = 1e-12;
        const GmresResult g =
            gmres([&](std::span<const double> x) { return a.apply(x); }, f,
                  Vector(grid.size(), 0.0), gopt);
        return expect(diff_norm_inf(g.solution, direct) <= 1e-8,
                      "Krylov solution differs from the direct one");
    });

    v.check("ownership-partition", [&] {
        std::vector<int> owned(grid.size(), 0);
        for (int j = 0; j < ctx.subdomains(); ++j)
            for (const index_t i : ctx.decomposition().nonoverlap_sets[j]) ++owned[i];
        for (const int c : owned)
            if (c != 1) return std::string("an unknown is owned by " + std::to_string(c));
        Vector w(ctx.skeleton_size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 + static_cast<double>(i);
        const Vector back = ctx.skeleton.restrict_to(ctx.skeleton.prolongate(w));
        return expect(diff_norm_inf(back, w) == 0.0, "skeleton restriction is not a left inverse");
    });

    v.check("sweep-equivalence", [&] {
        LinearSchwarzContext lctx(ctx, a, f);
        Vector u(grid.size(), 1.0);
        Vector vs = ctx.skeleton.restrict_to(u);
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            u = lctx.ras_step(u);
            vs = lctx.sras_step(vs);
            worst = std::max(worst, diff_norm_inf(ctx.skeleton.restrict_to(u), vs));
        }
        return expect(worst <= 1e-12, "restricted sweep and skeleton sweep drifted apart");
    });

    v.check("nonlinear-linear-reduction", [&] {
        LinearSchwarzContext lctx(ctx, a, f);
        const LinearResidualProblem lp(a, f);
        const Vector u(grid.size(), 0.5);
        const Vector ras = lctx.ras_step(u);
        const SweepResult nl = nras_step(lp, ctx, u);
        return expect(diff_norm_inf(ras, nl.next) <= 1e-11,
                      "one nonlinear sweep does not reduce to the linear sweep");
    });

    v.check("jacobian-differences", [] {
        const std::vector<index_t> fpts{40};
        const CartesianGrid fg = build_grid(1, fpts, 1.0 / 41.0);
        const ForchheimerProblem fp(fg);
        Vector u(fg.size());
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> dist(0.5, 2.0);
        for (auto& x : u) x = dist(rng);
        const double m1 = validate_jacobian(fp, u, 10, 3);
        const std::vector<index_t> dpts{7, 7};
        const CartesianGrid dg = build_grid(2, dpts, 1.0 / 8.0);
        const NonlinearDiffusionProblem dp(dg);
        Vector w(dg.size());
        for (auto& x : w) x = dist(rng);
        const double m2 = validate_jacobian(dp, w, 10, 5);
        return expect(m1 <= 1e-5 && m2 <= 1e-5, "analytic Jacobian mismatch: " +
                                                    std::to_string(m1) + ", " + std::to_string(m2));
    });

    v.check("preconditioned-jacobian-linear", [&] {
        LinearSchwarzContext lctx(ctx, a, f);
        const LinearResidualProblem lp(a, f);
        const Vector u(grid.size(), 0.25);
        const PreconditionedResidual pr = raspen_residual(lp, ctx, u);
        const RaspenJacobian jac(lp, ctx, pr.states);
        Vector w(grid.size());
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (auto& x : w) x = dist(rng);
        const Vector lhs = jac.apply_volume(w);
        const Vector rhs = lctx.apply_M_inv(a.apply(w));
        return expect(diff_norm_inf(lhs, rhs) <= 1e-11 * std::max(1.0, norm_inf(rhs)),
                      "preconditioned Jacobian does not reduce to the linear preconditioner");
    });

    v.check("cost-identity", [] {
        const std::vector<index_t> fpts{40};
        const CartesianGrid fg = build_grid(1, fpts, 1.0 / 41.0);
        const ForchheimerProblem fp(fg);
        const std::vector<index_t> counts4{4};
        SchwarzContext fctx = build_schwarz_context(fg, counts4, 2, fp.sparsity());
        NewtonOptions opts;
        opts.mode = StoppingMode::Residual;
        opts.tol = 1e-10;
        opts.maxit = 20;
        const NewtonResult r =
            newton_outer(fp, fctx, OuterMethodKind::Raspen, Vector(fg.size(), 0.0), opts);
        std::int64_t acc = 0;
        for (const auto& row : r.history.rows) {
            acc += row.max_inner_newton + row.inner_gmres;
            if (acc != row.cum_cost) return std::string("cumulative cost drifts from the row sums");
        }
        return expect(r.history.converged && !r.history.rows.empty(),
                      "preconditioned Newton failed on the small flow instance");
    });

    v.check("coarse-spaces", [&] {
        const std::vector<index_t> p9{9};
        const CartesianGrid g9 = build_grid(1, p9, 0.1);
        const CoarseSpace cv = CoarseSpace::build_volume(g9);
        if (cv.coarse_dim() != 4) return std::string("volume coarsening of 9 points is not 4");
        const CoarseSpace inj = CoarseSpace::build_volume(g9, CoarseWeighting::Injection);
        Vector c(inj.coarse_dim());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1.0 + static_cast<double>(i);
        const Vector back = inj.restrict_to(inj.prolongate(c));
        if (diff_norm_inf(back, c) > 1e-12)
            return std::string("injection restriction is not a left inverse of interpolation");
        // Interface pairs are too short to interpolate along, so they stay
        // entirely coarse: the skeleton coarse space equals the skeleton.
        const CoarseSpace cs = CoarseSpace::build_substructured(ctx);
        return expect(cs.coarse_dim() == ctx.skeleton_size(),
                      "interface pairs are expected to stay fully coarse");
    });

    v.check("coarse-correction-at-solution", [] {
        const std::vector<index_t> fpts{41};
        const CartesianGrid fg = build_grid(1, fpts, 1.0 / 42.0);
        const ForchheimerProblem fp(fg);
        const Vector ustar = reference_solution(fp);
        const CoarseSpace coarse = CoarseSpace::build_volume(fg);
        const Vector c0 = fas_correction_volume(fp, coarse, ustar);
        return expect(norm2(c0) <= 1e-10, "coarse correction at the solution is " +
                                              std::to_string(norm2(c0)));
    });

    return v.all_ok;
}

} // namespace dds
