#include "core/gmres.hpp"

#include <cassert>
#include <cmath>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace dds {

std::string GmresResult::to_json() const {
    nlohmann::json j;
    j["iterations"] = iterations;
    j["basis_dim"] = basis_dim;
    j["converged"] = converged;
    j["breakdown"] = breakdown;
    j["stored_basis_bytes"] = stored_basis_bytes;
    j["residual_history"] = residual_history;
    return j.dump();
}

GmresResult gmres(const LinearOperator& op, std::span<const double> b,
                  std::span<const double> x0, const GmresOptions& opts) {
    const std::size_t n = b.size();
    if (x0.size() != n) throw InvalidArgument("gmres: initial guess size mismatch");
    if (!(opts.rtol >= 0.0)) throw InvalidArgument("gmres: negative tolerance");

    GmresResult res;
    res.solution.assign(x0.begin(), x0.end());
    if (n == 0) {
        res.converged = true;
        res.residual_history.push_back(0.0);
        return res;
    }

    Vector r = op(x0);
    if (r.size() != n) throw InvalidArgument("gmres: operator output size mismatch");
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double r0_norm = norm2(r);
    res.residual_history.push_back(r0_norm);
    res.basis_dim = 1;
    res.stored_basis_bytes = static_cast<std::int64_t>(8) * static_cast<std::int64_t>(n);
    if (r0_norm == 0.0) {
        res.converged = true;
        return res;
    }

    const int maxit = std::min<std::int64_t>(opts.maxit, static_cast<std::int64_t>(n));
    std::vector<Vector> q; // orthonormal basis
    q.reserve(maxit + 1);
    {
        Vector q0(r);
        scale(q0, 1.0 / r0_norm);
        q.push_back(std::move(q0));
    }
    std::vector<std::vector<double>> hcols; // Givens-rotated Hessenberg columns (upper triangular part)
    std::vector<std::vector<double>> hraw;  // unrotated columns, kept when recording
    std::vector<double> cs, sn;             // Givens rotations
    std::vector<double> g{r0_norm};         // rotated rhs, last entry is the residual estimate

    const double target = opts.rtol * r0_norm;
    bool converged = false, breakdown = false;
    int k = 0;
    while (k < maxit) {
        Vector w = op(q[k]);
        if (w.size() != n) throw InvalidArgument("gmres: operator output size mismatch");
        const double w_scale = norm2(w);
#ifndef NDEBUG
        const Vector w_orig = w;
#endif
        std::vector<double> h(k + 2, 0.0);
        for (int i = 0; i <= k; ++i) {
            h[i] = dot(q[i], w);
            axpy(-h[i], q[i], w);
        }
        // Second orthogonalization pass ("twice is enough"): keeps the basis
        // orthonormal to machine precision even when the first sweep cancels
        // heavily, which matters for the iteration-count and span guarantees.
        for (int i = 0; i <= k; ++i) {
            const double c2 = dot(q[i], w);
            h[i] += c2;
            axpy(-c2, q[i], w);
        }
        h[k + 1] = norm2(w);
        if (opts.record_basis) hraw.push_back(h);

#ifndef NDEBUG
        // Arnoldi relation: op(q_k) == sum_i h_{i,k} q_i + remainder.
        {
            Vector check = w_orig;
            for (int i = 0; i <= k; ++i) axpy(-h[i], q[i], check);
            for (std::size_t i = 0; i < n; ++i) check[i] -= w[i];
            assert(norm2(check) <= 1e-10 * (w_scale + 1.0));
        }
#endif

        const bool lucky = h[k + 1] <= opts.breakdown_tol * std::max(w_scale, 1e-300);
        if (!lucky) {
            Vector qn(w);
            scale(qn, 1.0 / h[k + 1]);
            q.push_back(std::move(qn));
        }

        // Apply the accumulated rotations, then one new rotation to kill h[k+1].
        for (int i = 0; i < k; ++i) {
            const double t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        const double denom = std::hypot(h[k], h[k + 1]);
        double c = 1.0, s = 0.0;
        if (denom > 0.0) {
            c = h[k] / denom;
            s = h[k + 1] / denom;
        }
        cs.push_back(c);
        sn.push_back(s);
        h[k] = denom;
        h[k + 1] = 0.0;
        hcols.push_back(std::move(h));
        const double gk_old = g[k];
        g.push_back(-s * gk_old);
        g[k] = c * gk_old;

        ++k;
        res.basis_dim = static_cast<int>(q.size());
        const double est = std::abs(g[k]);
        res.residual_history.push_back(est);
        if (est <= target) converged = true;
        if (lucky) breakdown = true;
        if (converged || breakdown) break;
    }

    // Back substitution on the rotated Hessenberg.
    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
        double s = g[i];
        for (int j = i + 1; j < k; ++j) s -= hcols[j][i] * y[j];
        y[i] = s / hcols[i][i];
    }
    for (int i = 0; i < k; ++i) axpy(y[i], q[i], res.solution);

    res.iterations = k;
    res.converged = converged || (breakdown && std::abs(g[k]) <= std::max(target, 1e-13 * r0_norm));
    res.breakdown = breakdown;
    res.stored_basis_bytes =
        static_cast<std::int64_t>(8) * static_cast<std::int64_t>(n) * res.basis_dim;
    if (opts.record_basis) {
        res.basis = std::move(q);
        res.hessenberg = std::move(hraw);
    }
    return res;
}

} // namespace dds
