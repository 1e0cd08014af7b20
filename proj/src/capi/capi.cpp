#include "ddschwarz/ddschwarz.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "core/context.hpp"
#include "core/errors.hpp"
#include "core/grid.hpp"
#include "core/problems.hpp"
#include "core/runner.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
dds_status guarded(Fn&& fn) {
    try {
        fn();
        return DDS_OK;
    } catch (const dds::ConfigError& e) {
        g_last_error = e.what();
        return DDS_ERR_CONFIG;
    } catch (const dds::SingularMatrixError& e) {
        g_last_error = e.what();
        return DDS_ERR_SINGULAR;
    } catch (const dds::SolveFailure& e) {
        g_last_error = e.what();
        return DDS_ERR_SOLVE_FAILURE;
    } catch (const dds::InvalidArgument& e) {
        g_last_error = e.what();
        return DDS_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DDS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return DDS_ERR_INTERNAL;
    }
}

dds_status invalid(const char* msg) {
    g_last_error = msg;
    return DDS_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p != nullptr) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

// Problem defined by C callbacks over a fixed sparsity pattern.
class CallbackProblem final : public dds::NonlinearProblem {
public:
    CallbackProblem(dds::index_t n, dds::Pattern pattern, dds_residual_fn residual,
                    dds_jacobian_fn jacobian, void* user)
        : n_(n), pattern_(std::move(pattern)), residual_(residual), jacobian_(jacobian),
          user_(user) {}

    dds::index_t dimension() const override { return n_; }

    dds::Vector residual(std::span<const double> u) const override {
        dds::Vector out(n_, 0.0);
        residual_(u.data(), out.data(), user_);
        return out;
    }

    dds::CsrMatrix jacobian(std::span<const double> u) const override {
        std::vector<double> values(pattern_.nnz(), 0.0);
        jacobian_(u.data(), values.data(), user_);
        return dds::CsrMatrix(n_, n_, pattern_.row_ptr, pattern_.col_idx, std::move(values));
    }

    dds::Pattern sparsity() const override { return pattern_; }

private:
    dds::index_t n_;
    dds::Pattern pattern_;
    dds_residual_fn residual_;
    dds_jacobian_fn jacobian_;
    void* user_;
};

} // namespace

struct dds_grid {
    dds::CartesianGrid grid;
};

struct dds_problem {
    std::unique_ptr<dds::CartesianGrid> grid; // owned by builtin problems, null for custom ones
    std::unique_ptr<dds::NonlinearProblem> problem;
};

struct dds_context {
    dds::CartesianGrid grid;
    dds::SchwarzContext ctx;
};

struct dds_run_result {
    dds::RunOutput out;
};

namespace {
const dds::MethodRecord* record_at(const dds_run_result* r, int i) {
    if (r == nullptr || i < 0 || i >= static_cast<int>(r->out.records.size())) return nullptr;
    return &r->out.records[static_cast<std::size_t>(i)];
}
} // namespace

extern "C" {

const char* dds_version(void) { return "1.0.0"; }

const char* dds_last_error(void) { return g_last_error.c_str(); }

void dds_string_free(char* s) { std::free(s); }

// ---- Grid -----------------------------------------------------------------

dds_status dds_grid_create(int dim, const int32_t* points_per_axis, double spacing,
                           dds_grid** out) {
    if (out == nullptr) return invalid("dds_grid_create: out is NULL");
    *out = nullptr;
    if (points_per_axis == nullptr) return invalid("dds_grid_create: points_per_axis is NULL");
    return guarded([&] {
        std::vector<dds::index_t> pts(points_per_axis, points_per_axis + dim);
        *out = new dds_grid{dds::build_grid(dim, pts, spacing)};
    });
}

void dds_grid_destroy(dds_grid* g) { delete g; }

int64_t dds_grid_size(const dds_grid* g) { return g == nullptr ? 0 : g->grid.size(); }

// ---- Problems -------------------------------------------------------------

dds_status dds_problem_create(const char* spec_json, dds_problem** out) {
    if (out == nullptr) return invalid("dds_problem_create: out is NULL");
    *out = nullptr;
    if (spec_json == nullptr) return invalid("dds_problem_create: spec_json is NULL");
    return guarded([&] {
        const dds::ProblemSpec spec = dds::ProblemSpec::from_json(spec_json);
        auto handle = std::make_unique<dds_problem>();
        handle->grid = std::make_unique<dds::CartesianGrid>(dds::make_grid(spec));
        handle->problem = dds::make_problem(spec, *handle->grid);
        *out = handle.release();
    });
}

dds_status dds_problem_create_custom(int64_t dimension, const int32_t* row_offsets,
                                     const int32_t* cols, dds_residual_fn residual,
                                     dds_jacobian_fn jacobian, void* user, dds_problem** out) {
    if (out == nullptr) return invalid("dds_problem_create_custom: out is NULL");
    *out = nullptr;
    if (row_offsets == nullptr || cols == nullptr)
        return invalid("dds_problem_create_custom: sparsity arrays are NULL");
    if (residual == nullptr || jacobian == nullptr)
        return invalid("dds_problem_create_custom: callbacks are NULL");
    if (dimension <= 0 || dimension > INT32_MAX)
        return invalid("dds_problem_create_custom: dimension out of range");
    return guarded([&] {
        const auto n = static_cast<dds::index_t>(dimension);
        dds::Pattern pattern;
        pattern.rows = n;
        pattern.cols = n;
        pattern.row_ptr.assign(row_offsets, row_offsets + n + 1);
        pattern.col_idx.assign(cols, cols + pattern.row_ptr.back());
        // Structure check: a zero-valued matrix over the pattern runs the CSR
        // invariants (offsets, ranges, strictly increasing columns).
        dds::CsrMatrix(n, n, pattern.row_ptr, pattern.col_idx,
                       std::vector<double>(pattern.col_idx.size(), 0.0));
        auto handle = std::make_unique<dds_problem>();
        handle->problem =
            std::make_unique<CallbackProblem>(n, std::move(pattern), residual, jacobian, user);
        *out = handle.release();
    });
}

void dds_problem_destroy(dds_problem* p) { delete p; }

int64_t dds_problem_dimension(const dds_problem* p) {
    return p == nullptr ? 0 : p->problem->dimension();
}

dds_status dds_problem_residual(const dds_problem* p, const double* u, double* out) {
    if (p == nullptr || u == nullptr || out == nullptr)
        return invalid("dds_problem_residual: NULL argument");
    return guarded([&] {
        const auto n = static_cast<std::size_t>(p->problem->dimension());
        const dds::Vector r = p->problem->residual(std::span<const double>(u, n));
        std::memcpy(out, r.data(), n * sizeof(double));
    });
}

// ---- Decomposition context ------------------------------------------------

dds_status dds_context_create(const dds_grid* g, const dds_problem* p,
                              const int32_t* subdomains_per_axis, int overlap_layers, int threads,
                              dds_context** out) {
    if (out == nullptr) return invalid("dds_context_create: out is NULL");
    *out = nullptr;
    if (g == nullptr || p == nullptr || subdomains_per_axis == nullptr)
        return invalid("dds_context_create: NULL argument");
    if (threads < 1) return invalid("dds_context_create: threads must be at least 1");
    return guarded([&] {
        auto handle = std::make_unique<dds_context>(dds_context{g->grid, dds::SchwarzContext{}});
        std::vector<dds::index_t> counts(subdomains_per_axis,
                                         subdomains_per_axis + handle->grid.dim());
        handle->ctx = dds::build_schwarz_context(handle->grid, counts, overlap_layers,
                                                 p->problem->sparsity(), threads);
        *out = handle.release();
    });
}

void dds_context_destroy(dds_context* c) { delete c; }

int dds_context_subdomain_count(const dds_context* c) {
    return c == nullptr ? 0 : c->ctx.subdomains();
}

int64_t dds_context_skeleton_size(const dds_context* c) {
    return c == nullptr ? 0 : c->ctx.skeleton_size();
}

dds_status dds_context_summary_json(const dds_context* c, char** out_json) {
    if (out_json == nullptr) return invalid("dds_context_summary_json: out_json is NULL");
    *out_json = nullptr;
    if (c == nullptr) return invalid("dds_context_summary_json: context is NULL");
    return guarded([&] {
        *out_json = dup_string(dds::decomposition_summary_json(c->ctx.decomposition(),
                                                               c->ctx.skeleton));
    });
}

// ---- Experiments ----------------------------------------------------------

dds_status dds_run(const char* config_json, const char* out_dir, int threads_override,
                   long long seed_override, dds_run_result** out) {
    if (out == nullptr) return invalid("dds_run: out is NULL");
    *out = nullptr;
    if (config_json == nullptr) return invalid("dds_run: config_json is NULL");
    return guarded([&] {
        dds::RunConfig cfg = dds::RunConfig::from_json_text(config_json);
        if (threads_override > 0) cfg.threads = threads_override;
        if (seed_override >= 0) cfg.seed = static_cast<unsigned long long>(seed_override);
        auto handle = std::make_unique<dds_run_result>();
        handle->out = out_dir != nullptr ? dds::run_experiment_to_dir(cfg, out_dir)
                                         : dds::run_experiment(cfg);
        *out = handle.release();
    });
}

void dds_run_result_destroy(dds_run_result* r) { delete r; }

int dds_run_result_method_count(const dds_run_result* r) {
    return r == nullptr ? 0 : static_cast<int>(r->out.records.size());
}

const char* dds_run_result_method_id(const dds_run_result* r, int i) {
    const auto* rec = record_at(r, i);
    return rec == nullptr ? nullptr : rec->method.c_str();
}

int dds_run_result_converged(const dds_run_result* r, int i) {
    const auto* rec = record_at(r, i);
    return rec != nullptr && rec->converged ? 1 : 0;
}

int dds_run_result_diverged(const dds_run_result* r, int i) {
    const auto* rec = record_at(r, i);
    return rec != nullptr && rec->diverged ? 1 : 0;
}

int dds_run_result_iterations(const dds_run_result* r, int i) {
    const auto* rec = record_at(r, i);
    return rec == nullptr ? 0 : rec->iterations;
}

double dds_run_result_final_error(const dds_run_result* r, int i) {
    const auto* rec = record_at(r, i);
    return rec == nullptr ? -1.0 : rec->final_err;
}

double dds_run_result_final_residual(const dds_run_result* r, int i) {
    const auto* rec = record_at(r, i);
    return rec == nullptr ? -1.0 : rec->final_res;
}

dds_status dds_run_result_history_csv(const dds_run_result* r, int i, char** out_csv) {
    if (out_csv == nullptr) return invalid("dds_run_result_history_csv: out_csv is NULL");
    *out_csv = nullptr;
    const auto* rec = record_at(r, i);
    if (rec == nullptr) return invalid("dds_run_result_history_csv: index out of range");
    *out_csv = dup_string(rec->csv);
    return DDS_OK;
}

dds_status dds_run_result_summary_json(const dds_run_result* r, char** out_json) {
    if (out_json == nullptr) return invalid("dds_run_result_summary_json: out_json is NULL");
    *out_json = nullptr;
    if (r == nullptr) return invalid("dds_run_result_summary_json: result is NULL");
    *out_json = dup_string(r->out.summary_json);
    return DDS_OK;
}

// ---- Self checks ----------------------------------------------------------

dds_status dds_verify(int* all_passed, char** out_report) {
    if (all_passed == nullptr) return invalid("dds_verify: all_passed is NULL");
    *all_passed = 0;
    if (out_report != nullptr) *out_report = nullptr;
    return guarded([&] {
        std::ostringstream report;
        const bool ok = dds::run_verify(report);
        *all_passed = ok ? 1 : 0;
        if (out_report != nullptr) *out_report = dup_string(report.str());
    });
}

} // extern "C"
