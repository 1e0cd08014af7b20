// End-to-end tests for the experiment runner: config parsing, method
// dispatch, deterministic outputs, and the on-disk layout produced by
// run_experiment_to_dir.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "core/errors.hpp"
#include "core/runner.hpp"

#include "doctest.h"
#include <nlohmann/json.hpp>

using dds::MethodRecord;
using dds::RunConfig;
using dds::RunOutput;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string poisson_config(const std::string& methods_json) {
    return std::string(R"({
      "problem": {"id": "poisson", "points": [99]},
      "decomposition": {"subdomains": [4], "overlap_layers": 2},
      "methods": )") +
           methods_json + R"(,
      "tolerance": 1e-10,
      "stopping": "error",
      "maxit": 400
    })";
}

std::string flow_config(const std::string& methods_json) {
    return std::string(R"({
      "problem": {"id": "forchheimer", "points": [60], "gamma": 1.0},
      "decomposition": {"subdomains": [3], "overlap_layers": 2},
      "methods": )") +
           methods_json + R"(,
      "tolerance": 1e-10,
      "stopping": "error",
      "maxit": 300
    })";
}

}  // namespace

TEST_CASE("config round trip keeps every field") {
    const std::string text = R"({
      "problem": {"id": "forchheimer", "points": [120], "gamma": 2.0},
      "decomposition": {"subdomains": [5], "overlap_layers": 3},
      "methods": ["nras", "raspen"],
      "tolerance": 1e-9,
      "stopping": "residual",
      "maxit": 77,
      "initial_guess": {"type": "random", "seed": 99},
      "threads": 2,
      "timings": false,
      "gmres": {"rtol": 1e-7, "maxit": 123},
      "newton": {"gmres_rtol": 1e-11, "line_search": "fallback",
                 "inner_tol": 1e-13, "inner_maxit": 40},
      "two_level": {"gmres_rtol": 1e-8, "coarse_tol": 1e-11}
    })";
    const RunConfig cfg = RunConfig::from_json_text(text);
    CHECK(cfg.problem.id == "forchheimer");
    CHECK(cfg.problem.points == std::vector<int>{120});
    CHECK(cfg.problem.gamma == doctest::Approx(2.0));
    CHECK(cfg.subdomains == std::vector<int>{5});
    CHECK(cfg.overlap_layers == 3);
    CHECK(cfg.methods == std::vector<std::string>{"nras", "raspen"});
    CHECK(cfg.tol == doctest::Approx(1e-9));
    CHECK(cfg.mode == dds::StoppingMode::Residual);
    CHECK(cfg.maxit == 77);
    CHECK(cfg.guess_type == "random");
    CHECK(cfg.seed == 99);
    CHECK(cfg.threads == 2);
    CHECK(cfg.gmres_rtol == doctest::Approx(1e-7));
    CHECK(cfg.gmres_maxit == 123);
    CHECK(cfg.newton_gmres_rtol == doctest::Approx(1e-11));
    CHECK(cfg.line_search == "fallback");
    CHECK(cfg.inner_tol == doctest::Approx(1e-13));
    CHECK(cfg.inner_maxit == 40);
    CHECK(cfg.two_level_gmres_rtol == doctest::Approx(1e-8));
    CHECK(cfg.coarse_tol == doctest::Approx(1e-11));

    // Serializing and reparsing reproduces the same configuration.
    const RunConfig again = RunConfig::from_json_text(cfg.to_json());
    CHECK(again.to_json() == cfg.to_json());
}

TEST_CASE("config rejections carry useful messages") {
    SUBCASE("unknown method lists the valid identifiers") {
        try {
            RunConfig::from_json_text(poisson_config(R"(["rasx"])"));
            FAIL("expected ConfigError");
        } catch (const dds::ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("rasx") != std::string::npos);
            CHECK(msg.find("gmres_sras") != std::string::npos);
            CHECK(msg.find("two_level_sraspen") != std::string::npos);
        }
    }
    SUBCASE("unknown top-level key") {
        std::string text = poisson_config(R"(["ras"])");
        text.insert(text.rfind('}'), R"(, "mystery": 3)");
        CHECK_THROWS_AS(RunConfig::from_json_text(text), dds::ConfigError);
    }
    SUBCASE("unknown nested key") {
        std::string text = poisson_config(R"(["ras"])");
        text.insert(text.rfind('}'), R"(, "gmres": {"rtol": 1e-8, "restart": 30})");
        CHECK_THROWS_AS(RunConfig::from_json_text(text), dds::ConfigError);
    }
    SUBCASE("bad stopping mode") {
        std::string text = poisson_config(R"(["ras"])");
        const auto pos = text.find("\"error\"");
        text.replace(pos, 7, "\"errors\"");
        CHECK_THROWS_AS(RunConfig::from_json_text(text), dds::ConfigError);
    }
    SUBCASE("bad guess type") {
        std::string text = poisson_config(R"(["ras"])");
        text.insert(text.rfind('}'), R"(, "initial_guess": {"type": "ones"})");
        CHECK_THROWS_AS(RunConfig::from_json_text(text), dds::ConfigError);
    }
    SUBCASE("bad line search value") {
        std::string text = poisson_config(R"(["newton"])");
        text.insert(text.rfind('}'), R"(, "newton": {"line_search": "maybe"})");
        CHECK_THROWS_AS(RunConfig::from_json_text(text), dds::ConfigError);
    }
    SUBCASE("not json at all") {
        CHECK_THROWS_AS(RunConfig::from_json_text("not json"), dds::ConfigError);
    }
    SUBCASE("empty method list") {
        CHECK_THROWS_AS(RunConfig::from_json_text(poisson_config(R"([])")), dds::ConfigError);
    }
}

TEST_CASE("linear-only methods reject nonlinear problems") {
    const RunConfig cfg = RunConfig::from_json_text(flow_config(R"(["gmres_ras"])"));
    CHECK_THROWS_AS(dds::run_experiment(cfg), dds::ConfigError);
}

TEST_CASE("linear run produces converged records with sane fields") {
    const RunConfig cfg =
        RunConfig::from_json_text(poisson_config(R"(["ras", "sras", "gmres_ras", "gmres_sras"])"));
    const RunOutput out = dds::run_experiment(cfg);
    REQUIRE(out.records.size() == 4);
    for (const MethodRecord& rec : out.records) {
        CAPTURE(rec.method);
        CHECK(rec.converged);
        CHECK(!rec.diverged);
        CHECK(rec.iterations > 0);
        CHECK(rec.final_err >= 0.0);
        CHECK(rec.final_err <= 1e-10);
        CHECK(rec.subdomain_solves > 0);
        CHECK(rec.parallel_rounds > 0);
        CHECK(!rec.csv.empty());
        // Every history starts with a header row naming the iteration column.
        CHECK(rec.csv.rfind("iter,", 0) == 0);
    }
    // GMRES on the skeleton stores a strictly smaller basis than on the volume.
    const MethodRecord& vol = out.records[2];
    const MethodRecord& sub = out.records[3];
    CHECK(vol.basis_bytes > 0);
    CHECK(sub.basis_bytes > 0);
    CHECK(sub.basis_bytes < vol.basis_bytes);

    const json summary = json::parse(out.summary_json);
    CHECK(summary.at("n_volume").get<int>() == 99);
    CHECK(summary.at("subdomain_count").get<int>() == 4);
    CHECK(summary.at("methods").size() == 4);
    CHECK(summary.at("methods")[0].at("method").get<std::string>() == "ras");

    const json decomp = json::parse(out.decomposition_json);
    CHECK(decomp.at("N_v").get<int>() == 99);
}

TEST_CASE("nonlinear run covers sweep, Newton, and two-level methods") {
    const RunConfig cfg = RunConfig::from_json_text(
        flow_config(R"(["nras", "nsras", "newton", "raspen", "sraspen",
                        "two_level_nras", "two_level_raspen"])"));
    const RunOutput out = dds::run_experiment(cfg);
    REQUIRE(out.records.size() == 7);
    for (const MethodRecord& rec : out.records) {
        CAPTURE(rec.method);
        CHECK(rec.converged);
        CHECK(rec.final_err <= 1e-10);
    }
    // Newton-family histories carry the cost column; timings are off by
    // default so every wall-clock entry is exactly zero.
    for (const MethodRecord& rec : out.records) {
        std::istringstream lines(rec.csv);
        std::string header;
        std::getline(lines, header);
        if (rec.method == "newton" || rec.method == "raspen" || rec.method == "sraspen") {
            CHECK(header.find("cum_cost") != std::string::npos);
            CHECK(header.find("wall_ms") != std::string::npos);
        }
        if (rec.method == "two_level_raspen") {
            CHECK(header.find("coarse_newton_iters") != std::string::npos);
        }
    }
}

TEST_CASE("identical configs give byte-identical outputs") {
    const RunConfig cfg = RunConfig::from_json_text(
        flow_config(R"(["nras", "raspen", "sraspen"])"));
    const RunOutput a = dds::run_experiment(cfg);
    const RunOutput b = dds::run_experiment(cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].csv == b.records[i].csv);
    }
    CHECK(a.summary_json == b.summary_json);
    CHECK(a.decomposition_json == b.decomposition_json);
}

TEST_CASE("random initial guesses are seed-reproducible and seed-sensitive") {
    std::string base = poisson_config(R"(["ras"])");
    base.insert(base.rfind('}'), R"(, "initial_guess": {"type": "random", "seed": 7})");
    const RunOutput a = dds::run_experiment(RunConfig::from_json_text(base));
    const RunOutput b = dds::run_experiment(RunConfig::from_json_text(base));
    CHECK(a.records[0].csv == b.records[0].csv);

    std::string other = poisson_config(R"(["ras"])");
    other.insert(other.rfind('}'), R"(, "initial_guess": {"type": "random", "seed": 8})");
    const RunOutput c = dds::run_experiment(RunConfig::from_json_text(other));
    CHECK(a.records[0].csv != c.records[0].csv);
}

TEST_CASE("run_experiment_to_dir writes histories and summaries") {
    const fs::path dir = fs::temp_directory_path() / "dds_runner_test_out";
    fs::remove_all(dir);
    const RunConfig cfg = RunConfig::from_json_text(poisson_config(R"(["ras", "gmres_sras"])"));
    const RunOutput out = dds::run_experiment_to_dir(cfg, dir.string());
    CHECK(fs::exists(dir / "ras.csv"));
    CHECK(fs::exists(dir / "gmres_sras.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "decomposition.json"));

    std::ifstream in(dir / "summary.json");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == out.summary_json);

    std::ifstream csv(dir / "ras.csv");
    std::stringstream cbuf;
    cbuf << csv.rdbuf();
    CHECK(cbuf.str() == out.records[0].csv);
    fs::remove_all(dir);
}

TEST_CASE("verify report passes on a healthy build") {
    std::ostringstream report;
    const bool ok = dds::run_verify(report);
    CHECK(ok);
    CHECK(report.str().find("FAIL") == std::string::npos);
    CHECK(report.str().find("PASS") != std::string::npos);
}
