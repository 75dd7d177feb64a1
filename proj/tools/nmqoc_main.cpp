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

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "nmqoc/nmqoc.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    int threads = -1;
    bool emit_trajectory = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("config", flags.config_path, "experiment config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out_dir, "output directory (overrides the config)");
    cmd->add_option("--threads", flags.threads, "worker threads for sweeps (0 = all cores)");
    cmd->add_flag("--emit-trajectory", flags.emit_trajectory,
                  "also write the final-pulse trajectory CSV");
}

int load_and_execute(const CommonFlags& flags,
                     int (*execute)(const nmqoc::ExperimentConfig&)) {
    nmqoc::ExperimentConfig cfg;
    try {
        cfg = nmqoc::load_config_file(flags.config_path);
    } catch (const std::exception& e) {
        const std::string dir = flags.out_dir.empty() ? "." : flags.out_dir;
        return nmqoc::driver::fail_with_error_json(dir, e);
    }
    if (!flags.out_dir.empty()) cfg.outputs.directory = flags.out_dir;
    if (flags.threads >= 0) cfg.threads = flags.threads;
    if (flags.emit_trajectory) cfg.outputs.emit_trajectory = true;
    return execute(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-Markovian open-qubit gate optimization"};
    app.require_subcommand(1);

    CommonFlags run_flags, sweep_flags, fit_flags, prop_flags;
    CLI::App* run = app.add_subcommand("run", "optimize a single configuration");
    add_common(run, run_flags);
    CLI::App* sweep = app.add_subcommand("sweep", "optimize every cell of a parameter grid");
    add_common(sweep, sweep_flags);
    CLI::App* fit = app.add_subcommand("fit-bath", "fit the bath kernel and cache the terms");
    add_common(fit, fit_flags);
    CLI::App* propagate =
        app.add_subcommand("propagate", "propagate the initial-guess pulse, no optimization");
    add_common(propagate, prop_flags);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return load_and_execute(run_flags, nmqoc::driver::execute_run);
    if (sweep->parsed()) return load_and_execute(sweep_flags, nmqoc::driver::execute_sweep);
    if (fit->parsed()) return load_and_execute(fit_flags, nmqoc::driver::execute_fit_bath);
    if (propagate->parsed()) return load_and_execute(prop_flags, nmqoc::driver::execute_propagate);
    return 2;
}
