#include "core/history.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace dds {

namespace {
// Shortest round-trip representation keeps the CSV byte-stable across runs.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace

std::string ConvergenceHistory::to_csv() const {
    std::ostringstream os;
    os << "iter,err,res,cum_solves,cum_parallel_rounds,basis_bytes\n";
    for (const Row& r : rows)
        os << r.iter << ',' << fmt(r.err) << ',' << fmt(r.res) << ',' << r.cum_solves << ','
           << r.cum_parallel_rounds << ',' << r.basis_bytes << '\n';
    return os.str();
}

double OuterNewtonHistory::average_inner_gmres() const {
    if (rows.size() <= 1) return 0.0;
    double s = 0.0;
    int n = 0;
    for (const Row& r : rows)
        if (r.iter > 0) {
            s += r.inner_gmres;
            ++n;
        }
    return n ? s / n : 0.0;
}

std::string OuterNewtonHistory::to_csv() const {
    std::ostringstream os;
    os << "iter,err,res,inner_gmres,max_inner_newton,cum_cost,wall_ms";
    if (two_level) os << ",coarse_newton_iters";
    os << '\n';
    for (const Row& r : rows) {
        os << r.iter << ',' << fmt(r.err) << ',' << fmt(r.res) << ',' << r.inner_gmres << ','
           << r.max_inner_newton << ',' << r.cum_cost << ',' << fmt(r.wall_ms);
        if (two_level) os << ',' << r.coarse_newton_iters;
        os << '\n';
    }
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << content;
    if (!out) throw ConfigError("write failed: " + path);
}

} // namespace dds
