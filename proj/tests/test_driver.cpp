// Copyright 2026 The nmqoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nmqoc/config.hpp"
#include "nmqoc/driver.hpp"
#include "nmqoc/io.hpp"

using namespace nmqoc;
using nlohmann::json;
using Catch::Approx;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("nmqoc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

json basic_lorentzian(double alpha, double gamma, double omega_big) {
    return json{{"bath", {{"type", "lorentzian"},
                          {"alpha", alpha},
                          {"gamma", gamma},
                          {"omega_big", omega_big}}},
                {"target", "z"},
                {"t_f", 2.0},
                {"dt", 1e-3}};
}

std::string slurp(const std::filesystem::path& path) { return io::read_text_file(path.string()); }

}  // namespace

TEST_CASE("config defaults and presets") {
    const ExperimentConfig cfg = parse_config(basic_lorentzian(0.1, 0.1, 5.0));
    REQUIRE(cfg.omega0 == 1.0);
    REQUIRE(cfg.lower_bound == -1.0);
    REQUIRE(cfg.upper_bound == 1.0);
    REQUIRE(cfg.dt == 1e-3);
    REQUIRE(cfg.krotov.lambda == 1e3);
    REQUIRE(cfg.krotov.max_iterations == 5000);
    REQUIRE(cfg.krotov.error_threshold == 1e-12);
    REQUIRE(cfg.krotov.stall_window == 50);
    REQUIRE(cfg.steps() == 2000);

    auto large = basic_lorentzian(0.1, 0.1, 1.0);
    large["bounds"] = "large";
    const ExperimentConfig big = parse_config(large);
    REQUIRE(big.lower_bound == -20.0);
    REQUIRE(big.upper_bound == 20.0);
}

TEST_CASE("config validation errors carry the field name") {
    auto check_field = [](json doc, const std::string& field) {
        try {
            parse_config(doc);
            FAIL("expected ConfigError for field " + field);
        } catch (const ConfigError& e) {
            REQUIRE(e.field == field);
        }
    };

    auto equal_bounds = basic_lorentzian(0.1, 0.1, 1.0);
    equal_bounds["bounds"] = {{"lower", 0.5}, {"upper", 0.5}};
    check_field(equal_bounds, "bounds");

    auto bad_key = basic_lorentzian(0.1, 0.1, 1.0);
    bad_key["alpha"] = 0.1;
    check_field(bad_key, "alpha");

    auto bad_target = basic_lorentzian(0.1, 0.1, 1.0);
    bad_target["target"] = "hadamard";
    check_field(bad_target, "target");

    auto bad_grid = basic_lorentzian(0.1, 0.1, 1.0);
    bad_grid["t_f"] = 2.0005;
    check_field(bad_grid, "dt");

    auto bad_bath = basic_lorentzian(-0.1, 0.1, 1.0);
    check_field(bad_bath, "bath");

    auto wrong_axis = basic_lorentzian(0.1, 0.1, 1.0);
    wrong_axis["sweep"] = {{"alpha_o", {1e-3}}};
    check_field(wrong_axis, "sweep.alpha_o");

    check_field(json{{"t_f", 2.0}}, "bath");
}

TEST_CASE("ohmic config round trip") {
    json doc = {{"bath", {{"type", "ohmic"}, {"alpha_o", 1e-3}, {"omega_c", 5.0},
                          {"fit_terms", 4}}},
                {"target", "z"},
                {"t_f", 2.0}};
    const ExperimentConfig cfg = parse_config(doc);
    REQUIRE(cfg.is_ohmic());
    const auto& ohmic = std::get<OhmicFitSettings>(cfg.bath);
    REQUIRE(ohmic.bath.omega_c == 5.0);
    REQUIRE(ohmic.effective_horizon(cfg.t_f) == Approx(3.0));
}

TEST_CASE("run driver writes the artifact set for a trivial bath") {
    const auto dir = temp_dir("run_zero");
    auto doc = basic_lorentzian(0.0, 1.0, 0.0);
    doc["outputs"] = {{"directory", dir.string()}};
    const ExperimentConfig cfg = parse_config(doc);

    REQUIRE(driver::execute_run(cfg) == 0);
    for (const char* name : {"record.json", "pulse.csv", "iterations.csv", "decomposition.json"})
        REQUIRE(std::filesystem::exists(dir / name));

    const json record = json::parse(slurp(dir / "record.json"));
    REQUIRE(record.at("E0").get<double>() < 1e-10);
    REQUIRE(record.at("stop_reason") == "threshold");
    REQUIRE(record.at("iterations_run") == 0);
    REQUIRE(record.at("final_pulse").at("samples").size() == 2000);

    const json decomposition = json::parse(slurp(dir / "decomposition.json"));
    REQUIRE(std::abs(decomposition.at("initial").at("kappa").get<double>()) < 1e-12);

    // one header line plus one line per sample
    const std::string pulse = slurp(dir / "pulse.csv");
    REQUIRE(std::count(pulse.begin(), pulse.end(), '\n') == 2001);
}

TEST_CASE("identical configs give byte-identical artifacts") {
    auto doc = basic_lorentzian(0.1, 1.0, 1.0);
    doc["krotov"] = {{"max_iterations", 25}};
    const auto dir_a = temp_dir("det_a");
    const auto dir_b = temp_dir("det_b");

    auto cfg = parse_config(doc);
    cfg.outputs.directory = dir_a.string();
    REQUIRE(driver::execute_run(cfg) == 0);
    cfg.outputs.directory = dir_b.string();
    REQUIRE(driver::execute_run(cfg) == 0);

    for (const char* name : {"record.json", "pulse.csv", "iterations.csv", "decomposition.json"})
        REQUIRE(slurp(dir_a / name) == slurp(dir_b / name));
}

TEST_CASE("fit-bath writes a reusable cache and rejects analytic baths") {
    const auto dir = temp_dir("fitbath");
    json doc = {{"bath", {{"type", "ohmic"}, {"alpha_o", 0.01}, {"omega_c", 5.0},
                          {"fit_terms", 4}, {"fit_horizon", 10.0}}},
                {"t_f", 2.0},
                {"outputs", {{"directory", dir.string()}}}};
    const ExperimentConfig cfg = parse_config(doc);
    REQUIRE(driver::execute_fit_bath(cfg) == 0);

    const json terms_doc = json::parse(slurp(dir / "terms.json"));
    REQUIRE(terms_doc.at("terms").size() == 4);
    REQUIRE(terms_doc.at("report").at("relative_l2_residual").get<double>() < 1e-3);
    for (const auto& term : terms_doc.at("terms")) REQUIRE(term.at("q_re").get<double>() < 0.0);

    // reuse through the cache reference: same kernel values, no refit
    auto reuse = doc;
    reuse["bath"]["terms_cache"] = (dir / "terms.json").string();
    const ExperimentConfig cached_cfg = parse_config(reuse);
    const auto prepared = driver::prepare_bath(cached_cfg);
    REQUIRE_FALSE(prepared.fit_report.has_value());
    const auto refit = driver::prepare_bath(cfg);
    for (double tau : {0.0, 0.5, 2.0})
        REQUIRE(std::abs(evaluate_terms(prepared.terms, tau) -
                         evaluate_terms(refit.terms, tau)) < 1e-14);

    // analytic bath: validation error with the field recorded
    const auto dir2 = temp_dir("fitbath_lor");
    auto lorentzian = basic_lorentzian(0.1, 0.1, 1.0);
    lorentzian["outputs"] = {{"directory", dir2.string()}};
    REQUIRE(driver::execute_fit_bath(parse_config(lorentzian)) == 1);
    const json error = json::parse(slurp(dir2 / "error.json"));
    REQUIRE(error.at("error") == "ConfigError");
    REQUIRE(error.at("field") == "bath.type");
}

TEST_CASE("fit-bath surfaces FitFailed for an impossible request") {
    const auto dir = temp_dir("fitbath_k1");
    json doc = {{"bath", {{"type", "ohmic"}, {"alpha_o", 0.01}, {"omega_c", 5.0},
                          {"fit_terms", 1}, {"fit_horizon", 10.0}}},
                {"t_f", 2.0},
                {"outputs", {{"directory", dir.string()}}}};
    REQUIRE(driver::execute_fit_bath(parse_config(doc)) == 1);
    const json error = json::parse(slurp(dir / "error.json"));
    REQUIRE(error.at("error") == "FitFailed");
}

TEST_CASE("sweep runs every cell, records failures, and is order independent") {
    const auto dir = temp_dir("sweep");
    auto doc = basic_lorentzian(0.1, 1.0, 1.0);
    doc["krotov"] = {{"max_iterations", 5}};
    doc["sweep"] = {{"t_f", {2.0, 0.5}}};  // 0.5 admits no odd rotation in bounds
    doc["outputs"] = {{"directory", dir.string()}};

    ExperimentConfig cfg = parse_config(doc);
    cfg.threads = 2;
    REQUIRE(driver::execute_sweep(cfg) == 0);

    const json summary = json::parse(slurp(dir / "summary.json"));
    REQUIRE(summary.at("cells").size() == 2);
    REQUIRE(summary.at("cells")[0].at("ok") == true);
    REQUIRE(summary.at("cells")[1].at("ok") == false);
    REQUIRE(summary.at("cells")[1].at("error_type") == "NoAdmissibleGuess");
    REQUIRE(std::filesystem::exists(dir / "records/cell_0000.json"));
    REQUIRE_FALSE(std::filesystem::exists(dir / "records/cell_0001.json"));
    REQUIRE(std::filesystem::exists(dir / "series_final_error.csv"));

    const std::string cells_a = slurp(dir / "cells.csv");
    // rerun single-threaded into a fresh directory
    const auto dir_b = temp_dir("sweep_b");
    cfg.threads = 1;
    cfg.outputs.directory = dir_b.string();
    REQUIRE(driver::execute_sweep(cfg) == 0);
    REQUIRE(cells_a == slurp(dir_b / "cells.csv"));
}

TEST_CASE("sweep with all cells failing exits nonzero") {
    const auto dir = temp_dir("sweep_fail");
    auto doc = basic_lorentzian(0.1, 1.0, 1.0);
    doc["sweep"] = {{"t_f", {0.5}}};
    doc["outputs"] = {{"directory", dir.string()}};
    REQUIRE(driver::execute_sweep(parse_config(doc)) == 1);
}

TEST_CASE("propagate driver emits the trajectory table") {
    const auto dir = temp_dir("prop");
    auto doc = basic_lorentzian(0.1, 0.1, 5.0);
    doc["outputs"] = {{"directory", dir.string()}};
    REQUIRE(driver::execute_propagate(parse_config(doc)) == 0);

    const std::string traj = slurp(dir / "trajectory.csv");
    REQUIRE(std::count(traj.begin(), traj.end(), '\n') == 2002);  // header + 2001 nodes
    const std::string header = traj.substr(0, traj.find('\n'));
    REQUIRE(header.rfind("t,re_f,im_f,g00_re,g00_im", 0) == 0);
    REQUIRE(std::filesystem::exists(dir / "pulse.csv"));
}

TEST_CASE("run driver reports config errors as machine-readable JSON") {
    const auto dir = temp_dir("run_err");
    auto doc = basic_lorentzian(0.1, 0.1, 1.0);
    doc["bounds"] = {{"lower", 1.0}, {"upper", 1.0}};
    ExperimentConfig cfg;
    REQUIRE_THROWS_AS(parse_config(doc), ConfigError);
    // drive the same failure through the executable path: build a config that
    // passes parsing but fails downstream (gate time too short for parity)
    auto doc2 = basic_lorentzian(0.1, 0.1, 1.0);
    doc2["t_f"] = 0.5;
    doc2["outputs"] = {{"directory", dir.string()}};
    REQUIRE(driver::execute_run(parse_config(doc2)) == 1);
    const json error = json::parse(slurp(dir / "error.json"));
    REQUIRE(error.at("error") == "NoAdmissibleGuess");
}

TEST_CASE("emit-trajectory flag adds the trajectory artifact to run") {
    const auto dir = temp_dir("run_traj");
    auto doc = basic_lorentzian(0.0, 1.0, 0.0);
    doc["outputs"] = {{"directory", dir.string()}, {"emit_trajectory", true}};
    REQUIRE(driver::execute_run(parse_config(doc)) == 0);
    REQUIRE(std::filesystem::exists(dir / "trajectory.csv"));
}
