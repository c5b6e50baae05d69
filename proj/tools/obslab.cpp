/*
 Copyright 2026 The obslab Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "obslab/cli.hpp"
#include "obslab/obslab.hpp"

namespace {

struct Parsed {
    std::string config_path;
    obslab::cli::Options opt;
};

void add_common_flags(CLI::App* cmd, Parsed& p, bool with_config) {
    if (with_config) {
        cmd->add_option("--config", p.config_path, "scenario config file (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
    }
    cmd->add_option("--out", p.opt.out_dir, "output directory");
    cmd->add_option("--dt", p.opt.dt, "override integration step (s)");
    cmd->add_option("--theta", p.opt.theta, "override observer gain theta");
    cmd->add_option("--seed", p.opt.seed, "override RNG seed");
    cmd->add_option("--trials", p.opt.trials, "override campaign trial count");
    cmd->add_flag("--quiet", p.opt.quiet, "suppress progress output");
}

int run_with_config(const Parsed& p, int (*cmd)(const obslab::ScenarioConfig&,
                                                const obslab::cli::Options&, std::ostream&,
                                                std::ostream&)) {
    obslab::ScenarioConfig cfg;
    try {
        cfg = obslab::load_scenario(p.config_path);
    } catch (const obslab::InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return obslab::cli::exit_config;
    }
    return cmd(cfg, p.opt, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"saturated high-gain velocity observer for rigid manipulators"};
    app.require_subcommand(1);

    Parsed synth_p, sim_p, verify_p, demo_p;
    CLI::App* synth = app.add_subcommand("synthesize", "gain synthesis report for a scenario");
    add_common_flags(synth, synth_p, true);
    CLI::App* sim = app.add_subcommand("simulate", "co-simulate plant and observer, write CSV");
    add_common_flags(sim, sim_p, true);
    CLI::App* verify = app.add_subcommand("verify", "run the convergence verification checks");
    add_common_flags(verify, verify_p, true);
    CLI::App* demo = app.add_subcommand("pendubot-demo",
                                        "run the built-in Pendubot scenario end to end");
    add_common_flags(demo, demo_p, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : obslab::cli::exit_config;
    }

    const char* env_dir = std::getenv("OBSLAB_OUT_DIR");
    for (Parsed* p : {&synth_p, &sim_p, &verify_p, &demo_p}) {
        if (env_dir != nullptr) p->opt.env_out_dir = std::string(env_dir);
    }

    try {
        if (synth->parsed()) return run_with_config(synth_p, obslab::cli::cmd_synthesize);
        if (sim->parsed()) return run_with_config(sim_p, obslab::cli::cmd_simulate);
        if (verify->parsed()) return run_with_config(verify_p, obslab::cli::cmd_verify);
        if (demo->parsed()) return obslab::cli::cmd_demo(demo_p.opt, std::cout, std::cerr);
    } catch (const obslab::DivergenceError& e) {
        std::cerr << e.what() << "\n";
        return obslab::cli::exit_divergence;
    } catch (const obslab::InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return obslab::cli::exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return obslab::cli::exit_error;
    }
    return obslab::cli::exit_error;
}
