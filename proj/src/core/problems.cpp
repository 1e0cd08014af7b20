#include "core/problems.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace dds {

LinearResidualProblem::LinearResidualProblem(CsrMatrix a, Vector f)
    : a_(std::move(a)), f_(std::move(f)) {
    if (a_.rows() != a_.cols() || static_cast<index_t>(f_.size()) != a_.rows())
        throw InvalidArgument("linear problem: shape mismatch");
}

Vector LinearResidualProblem::residual(std::span<const double> u) const {
    Vector r = a_.apply(u);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= f_[i];
    return r;
}

CsrMatrix assemble_poisson(const CartesianGrid& grid) {
    const double h2inv = 1.0 / (grid.spacing() * grid.spacing());
    const index_t n = grid.size();
    std::vector<Triplet> trip;
    trip.reserve(std::size_t(n) * (2 * grid.dim() + 1));
    for (index_t k = 0; k < n; ++k) {
        auto c = grid.coord(k);
        trip.push_back({k, k, 2.0 * grid.dim() * h2inv});
        for (int a = 0; a < grid.dim(); ++a) {
            for (int s : {-1, 1}) {
                auto cn = c;
                cn[a] += s;
                if (cn[a] >= 0 && cn[a] < grid.extent(a))
                    trip.push_back({k, grid.index(cn), -h2inv});
            }
        }
    }
    return CsrMatrix::from_triplets(n, n, std::move(trip));
}

Vector poisson_rhs(const CartesianGrid& grid, double value) {
    return Vector(grid.size(), value);
}

// ---- Forchheimer ----------------------------------------------------------

ForchheimerProblem::ForchheimerProblem(const CartesianGrid& grid, double gamma)
    : grid_(&grid), gamma_(gamma), u_left_(1.0), u_right_(std::exp(1.0)) {
    if (grid.dim() != 1) throw InvalidArgument("forchheimer: one dimensional problem");
    if (!(gamma >= 0.0)) throw InvalidArgument("forchheimer: gamma must be nonnegative");
}

double ForchheimerProblem::flux(double y) const {
    if (gamma_ == 0.0) return y; // Darcy limit
    // Rationalized root of gamma*q^2 + q = |y|: the textbook form
    // (sqrt(1+4*gamma*|y|)-1)/(2*gamma) cancels catastrophically as
    // gamma -> 0, this one degrades gracefully to the Darcy limit.
    const double s = y < 0.0 ? -1.0 : 1.0;
    return s * 2.0 * std::abs(y) / (1.0 + std::sqrt(1.0 + 4.0 * gamma_ * std::abs(y)));
}

double ForchheimerProblem::flux_deriv(double y) const {
    if (gamma_ == 0.0) return 1.0;
    return 1.0 / std::sqrt(1.0 + 4.0 * gamma_ * std::abs(y));
}

double ForchheimerProblem::mobility(double x) const { return 2.0 + std::cos(5.0 * M_PI * x); }

double ForchheimerProblem::forcing(double x) const {
    return 50.0 * std::sin(5.0 * M_PI * x) * std::exp(x);
}

double ForchheimerProblem::face_mobility(index_t face) const {
    // Face `face` separates node face-1 from node face; boundary positions 0 and 1
    // take the boundary point as the missing neighbour.
    const index_t n = grid_->size();
    const double xl = face == 0 ? 0.0 : grid_->position(face - 1);
    const double xr = face == n ? 1.0 : grid_->position(face);
    return 0.5 * (mobility(xl) + mobility(xr));
}

Vector ForchheimerProblem::residual(std::span<const double> u) const {
    const index_t n = grid_->size();
    if (static_cast<index_t>(u.size()) != n) throw InvalidArgument("forchheimer: size mismatch");
    const double h = grid_->spacing();
    Vector r(n);
    for (index_t i = 0; i < n; ++i) {
        const double ul = i == 0 ? u_left_ : u[i - 1];
        const double ur = i == n - 1 ? u_right_ : u[i + 1];
        const double arg_r = -face_mobility(i + 1) * (ur - u[i]) / h;
        const double arg_l = -face_mobility(i) * (u[i] - ul) / h;
        r[i] = (flux(arg_r) - flux(arg_l)) / h - forcing(grid_->position(i));
    }
    return r;
}

CsrMatrix ForchheimerProblem::jacobian(std::span<const double> u) const {
    const index_t n = grid_->size();
    if (static_cast<index_t>(u.size()) != n) throw InvalidArgument("forchheimer: size mismatch");
    const double h = grid_->spacing();
    std::vector<Triplet> trip;
    trip.reserve(3 * std::size_t(n));
    for (index_t i = 0; i < n; ++i) {
        const double ul = i == 0 ? u_left_ : u[i - 1];
        const double ur = i == n - 1 ? u_right_ : u[i + 1];
        const double lam_r = face_mobility(i + 1);
        const double lam_l = face_mobility(i);
        const double qp_r = flux_deriv(-lam_r * (ur - u[i]) / h);
        const double qp_l = flux_deriv(-lam_l * (u[i] - ul) / h);
        trip.push_back({i, i, (qp_r * lam_r + qp_l * lam_l) / (h * h)});
        if (i > 0) trip.push_back({i, i - 1, -qp_l * lam_l / (h * h)});
        if (i < n - 1) trip.push_back({i, i + 1, -qp_r * lam_r / (h * h)});
    }
    return CsrMatrix::from_triplets(n, n, std::move(trip));
}

Pattern ForchheimerProblem::sparsity() const {
    return jacobian(Vector(grid_->size(), 0.0)).pattern();
}

// ---- Nonlinear diffusion --------------------------------------------------

NonlinearDiffusionProblem::NonlinearDiffusionProblem(const CartesianGrid& grid) : grid_(&grid) {
    if (grid.dim() != 2) throw InvalidArgument("nldiffusion: two dimensional problem");
}

double NonlinearDiffusionProblem::exact(double x, double y) const {
    return std::sin(M_PI * x) * std::sin(M_PI * y);
}

double NonlinearDiffusionProblem::forcing(double x, double y) const {
    // -div((1+u^2) grad u) = -(1+u^2) lap(u) - 2 u |grad u|^2 for the exact u.
    const double u = exact(x, y);
    const double sx = std::sin(M_PI * x), cx = std::cos(M_PI * x);
    const double sy = std::sin(M_PI * y), cy = std::cos(M_PI * y);
    const double pi2 = M_PI * M_PI;
    const double grad2 = pi2 * (cx * cx * sy * sy + sx * sx * cy * cy);
    return 2.0 * pi2 * u * (1.0 + u * u) - 2.0 * u * grad2;
}

Vector NonlinearDiffusionProblem::residual(std::span<const double> u) const {
    const index_t n = grid_->size();
    if (static_cast<index_t>(u.size()) != n) throw InvalidArgument("nldiffusion: size mismatch");
    const double h = grid_->spacing();
    const double h2inv = 1.0 / (h * h);
    const index_t nx = grid_->extent(0), ny = grid_->extent(1);
    auto coef = [](double v) { return 1.0 + v * v; };
    Vector r(n);
    for (index_t j = 0; j < ny; ++j) {
        const double yj = grid_->position(j);
        for (index_t i = 0; i < nx; ++i) {
            const index_t k = i + nx * j;
            const double xi = grid_->position(i);
            const double uc = u[k];
            double acc = 0.0;
            const double uxm = i == 0 ? boundary(0.0, yj) : u[k - 1];
            const double uxp = i == nx - 1 ? boundary(1.0, yj) : u[k + 1];
            const double uym = j == 0 ? boundary(xi, 0.0) : u[k - nx];
            const double uyp = j == ny - 1 ? boundary(xi, 1.0) : u[k + nx];
            acc += 0.5 * (coef(uc) + coef(uxm)) * (uc - uxm);
            acc += 0.5 * (coef(uc) + coef(uxp)) * (uc - uxp);
            acc += 0.5 * (coef(uc) + coef(uym)) * (uc - uym);
            acc += 0.5 * (coef(uc) + coef(uyp)) * (uc - uyp);
            r[k] = acc * h2inv - forcing(xi, yj);
        }
    }
    return r;
}

CsrMatrix NonlinearDiffusionProblem::jacobian(std::span<const double> u) const {
    const index_t n = grid_->size();
    if (static_cast<index_t>(u.size()) != n) throw InvalidArgument("nldiffusion: size mismatch");
    const double h = grid_->spacing();
    const double h2inv = 1.0 / (h * h);
    const index_t nx = grid_->extent(0), ny = grid_->extent(1);
    auto coef = [](double v) { return 1.0 + v * v; };
    std::vector<Triplet> trip;
    trip.reserve(5 * std::size_t(n));
    for (index_t j = 0; j < ny; ++j) {
        const double yj = grid_->position(j);
        for (index_t i = 0; i < nx; ++i) {
            const index_t k = i + nx * j;
            const double xi = grid_->position(i);
            const double uc = u[k];
            double diag = 0.0;
            // For each face: d/duc [a(uc,un)(uc-un)] = a + uc (uc-un), and for an
            // interior neighbour d/dun = -a + un (uc-un).
            auto face = [&](double un, index_t neighbour) {
                const double a = 0.5 * (coef(uc) + coef(un));
                const double d = uc - un;
                diag += a + uc * d;
                if (neighbour >= 0) trip.push_back({k, neighbour, (-a + un * d) * h2inv});
            };
            face(i == 0 ? boundary(0.0, yj) : u[k - 1], i == 0 ? -1 : k - 1);
            face(i == nx - 1 ? boundary(1.0, yj) : u[k + 1], i == nx - 1 ? -1 : k + 1);
            face(j == 0 ? boundary(xi, 0.0) : u[k - nx], j == 0 ? -1 : k - nx);
            face(j == ny - 1 ? boundary(xi, 1.0) : u[k + nx], j == ny - 1 ? -1 : k + nx);
            trip.push_back({k, k, diag * h2inv});
        }
    }
    return CsrMatrix::from_triplets(n, n, std::move(trip));
}

Pattern NonlinearDiffusionProblem::sparsity() const {
    return jacobian(Vector(grid_->size(), 0.0)).pattern();
}

std::optional<Vector> NonlinearDiffusionProblem::analytic_solution() const {
    const index_t nx = grid_->extent(0), ny = grid_->extent(1);
    Vector out(grid_->size());
    for (index_t j = 0; j < ny; ++j)
        for (index_t i = 0; i < nx; ++i)
            out[i + nx * j] = exact(grid_->position(i), grid_->position(j));
    return out;
}

// ---- ProblemSpec ----------------------------------------------------------

double ProblemSpec::spacing() const {
    if (points.empty()) throw ConfigError("problem spec: no grid extents");
    return 1.0 / (points[0] + 1);
}

std::string ProblemSpec::to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["points"] = points;
    if (id == "forchheimer") j["gamma"] = gamma;
    return j.dump();
}

ProblemSpec ProblemSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("problem spec: invalid JSON");
    ProblemSpec s;
    if (!j.contains("id") || !j["id"].is_string()) throw ConfigError("problem spec: missing id");
    s.id = j["id"].get<std::string>();
    if (!j.contains("points") || !j["points"].is_array())
        throw ConfigError("problem spec: missing points");
    for (const auto& p : j["points"]) s.points.push_back(p.get<index_t>());
    s.gamma = j.value("gamma", 1.0);
    return s;
}

CartesianGrid make_grid(const ProblemSpec& spec) {
    int dim = static_cast<int>(spec.points.size());
    for (index_t p : spec.points)
        if (p != spec.points[0])
            throw ConfigError("problem spec: anisotropic extents not supported");
    return CartesianGrid(dim, spec.points, spec.spacing());
}

std::unique_ptr<NonlinearProblem> make_problem(const ProblemSpec& spec,
                                               const CartesianGrid& grid) {
    if (spec.id == "poisson")
        return std::make_unique<LinearResidualProblem>(assemble_poisson(grid), poisson_rhs(grid));
    if (spec.id == "forchheimer") return std::make_unique<ForchheimerProblem>(grid, spec.gamma);
    if (spec.id == "nldiffusion") return std::make_unique<NonlinearDiffusionProblem>(grid);
    throw ConfigError("problem spec: unknown id '" + spec.id +
                      "' (expected poisson, forchheimer or nldiffusion)");
}

double validate_jacobian(const NonlinearProblem& p, std::span<const double> u, int directions,
                         unsigned long long seed) {
    const index_t n = p.dimension();
    const double eps = 1e-6 * (1.0 + norm_inf(u));
    const CsrMatrix jac = p.jacobian(u);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    double worst = 0.0;
    Vector up(u.begin(), u.end()), um(u.begin(), u.end());
    for (int d = 0; d < directions; ++d) {
        Vector w(n);
        for (auto& x : w) x = dist(rng);
        scale(w, 1.0 / std::max(norm2(w), 1e-300));
        for (index_t i = 0; i < n; ++i) {
            up[i] = u[i] + eps * w[i];
            um[i] = u[i] - eps * w[i];
        }
        const Vector rp = p.residual(up), rm = p.residual(um);
        const Vector jw = jac.apply(w);
        double num = 0.0, den = 0.0;
        for (index_t i = 0; i < n; ++i) {
            const double fd = (rp[i] - rm[i]) / (2.0 * eps);
            num += (fd - jw[i]) * (fd - jw[i]);
            den += jw[i] * jw[i];
        }
        worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-300));
    }
    return worst;
}

} // namespace dds
