// Command-line front end for the ddschwarz shared library. Talks to the
// library exclusively through its C interface.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ddschwarz/ddschwarz.h"

namespace {

int fail(const std::string& context) {
    std::cerr << "error: " << context << ": " << dds_last_error() << "\n";
    return 1;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads,
            long long seed) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open configuration file '" << config_path << "'\n";
        return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    dds_run_result* result = nullptr;
    const dds_status st =
        dds_run(buf.str().c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), threads, seed,
                &result);
    if (st != DDS_OK) return fail("run failed");

    const int count = dds_run_result_method_count(result);
    std::printf("%-20s %-10s %6s %14s %14s\n", "method", "status", "iters", "final_error",
                "final_residual");
    for (int i = 0; i < count; ++i) {
        const char* status = dds_run_result_converged(result, i)  ? "converged"
                             : dds_run_result_diverged(result, i) ? "diverged"
                                                                  : "maxit";
        std::printf("%-20s %-10s %6d %14.6e %14.6e\n", dds_run_result_method_id(result, i), status,
                    dds_run_result_iterations(result, i), dds_run_result_final_error(result, i),
                    dds_run_result_final_residual(result, i));
    }
    if (!out_dir.empty())
        std::printf("wrote %d histories, summary.json and decomposition.json to %s\n", count,
                    out_dir.c_str());
    dds_run_result_destroy(result);
    return 0;
}

int cmd_verify() {
    int all_passed = 0;
    char* report = nullptr;
    const dds_status st = dds_verify(&all_passed, &report);
    if (st != DDS_OK) return fail("verify failed");
    if (report != nullptr) {
        std::cout << report;
        dds_string_free(report);
    }
    std::cout << (all_passed ? "all checks passed" : "CHECKS FAILED") << "\n";
    return all_passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-decomposition solvers for sparse nonlinear systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;     // 0 keeps the configured value
    long long seed = -1; // negative keeps the configured value

    CLI::App* run = app.add_subcommand("run", "Run the methods in a JSON configuration");
    run->add_option("config", config_path, "configuration file")->required();
    run->add_option("--out", out_dir, "output directory for CSV histories and summaries");
    run->add_option("--threads", threads, "override the configured thread count");
    run->add_option("--seed", seed, "override the configured random seed");

    CLI::App* verify = app.add_subcommand("verify", "Run the library's invariant battery");
    CLI::App* version = app.add_subcommand("version", "Print the library version");

    CLI11_PARSE(app, argc, argv);

    if (version->parsed()) {
        std::cout << dds_version() << "\n";
        return 0;
    }
    if (verify->parsed()) return cmd_verify();
    return cmd_run(config_path, out_dir, threads, seed);
}
