#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "core/csr.hpp"
#include "core/grid.hpp"

namespace dds {

// Discrete nonlinear system F(u) = 0. Implementations provide the residual,
// an exact Jacobian with fixed sparsity, and optionally an analytic solution
// sampled on the grid.
class NonlinearProblem {
public:
    virtual ~NonlinearProblem() = default;
    virtual index_t dimension() const = 0;
    virtual Vector residual(std::span<const double> u) const = 0;
    virtual CsrMatrix jacobian(std::span<const double> u) const = 0;
    virtual Pattern sparsity() const = 0;
    virtual std::optional<Vector> analytic_solution() const { return std::nullopt; }
};

// F(u) = A u - f, turning a linear system into the nonlinear interface.
class LinearResidualProblem final : public NonlinearProblem {
public:
    LinearResidualProblem(CsrMatrix a, Vector f);
    index_t dimension() const override { return a_.rows(); }
    Vector residual(std::span<const double> u) const override;
    CsrMatrix jacobian(std::span<const double>) const override { return a_; }
    Pattern sparsity() const override { return a_.pattern(); }
    const CsrMatrix& matrix() const { return a_; }
    std::span<const double> rhs() const { return f_; }

private:
    CsrMatrix a_;
    Vector f_;
};

// Dirichlet Laplacian on the unit interval/square/cube, scaled by 1/h^2,
// homogeneous boundary values folded into the right-hand side.
CsrMatrix assemble_poisson(const CartesianGrid& grid);
Vector poisson_rhs(const CartesianGrid& grid, double value = 1.0);

// One dimensional flow model with flux q(-lambda(x) u') and Dirichlet ends,
// discretized by a cell-centered finite-volume scheme on the grid nodes with
// face coefficients from arithmetic averaging.
class ForchheimerProblem final : public NonlinearProblem {
public:
    ForchheimerProblem(const CartesianGrid& grid, double gamma = 1.0);
    index_t dimension() const override { return grid_->size(); }
    Vector residual(std::span<const double> u) const override;
    CsrMatrix jacobian(std::span<const double> u) const override;
    Pattern sparsity() const override;

    double flux(double y) const;       // q
    double flux_deriv(double y) const; // q'
    double mobility(double x) const;   // lambda
    double forcing(double x) const;

private:
    const CartesianGrid* grid_;
    double gamma_;
    double u_left_;
    double u_right_;
    double face_mobility(index_t face) const; // face i sits between nodes i-1 and i
};

// -div((1+u^2) grad u) = f on the unit square with the solution
// sin(pi x) sin(pi y) manufactured through the expanded divergence, Dirichlet
// data taken from it, five-point conservative differences with arithmetic
// face averages.
class NonlinearDiffusionProblem final : public NonlinearProblem {
public:
    explicit NonlinearDiffusionProblem(const CartesianGrid& grid);
    index_t dimension() const override { return grid_->size(); }
    Vector residual(std::span<const double> u) const override;
    CsrMatrix jacobian(std::span<const double> u) const override;
    Pattern sparsity() const override;
    std::optional<Vector> analytic_solution() const override;

private:
    const CartesianGrid* grid_;
    double exact(double x, double y) const;
    double forcing(double x, double y) const;
    double boundary(double x, double y) const { return exact(x, y); }
};

// Problem description that can round-trip through JSON: which model, grid
// extents (spacing is 1/(n+1) per axis on the unit domain) and parameters.
struct ProblemSpec {
    std::string id;                    // poisson | forchheimer | nldiffusion
    std::vector<index_t> points;       // per axis
    double gamma = 1.0;                // forchheimer only

    double spacing() const;
    std::string to_json() const;
    static ProblemSpec from_json(const std::string& text);
};

CartesianGrid make_grid(const ProblemSpec& spec);
std::unique_ptr<NonlinearProblem> make_problem(const ProblemSpec& spec, const CartesianGrid& grid);

// Largest relative mismatch between jacobian(u) w and a centered difference
// of the residual over random unit directions. Step 1e-6 * (1 + |u|_inf).
double validate_jacobian(const NonlinearProblem& p, std::span<const double> u, int directions,
                         unsigned long long seed);

} // namespace dds
