// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "confreach/io.hpp"
#include "confreach/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kIo = 3 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal perception bounds and reach tubes for the mountain car"};
    app.require_subcommand(1, 1);

    std::string config_path;
    bool paper_scale = false;
    std::string out_dir;
    std::uint64_t seed = 0;

    std::vector<CLI::App*> subs;
    for (const char* name : {"generate", "calibrate", "verify", "report"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "pipeline config (JSON)")->required();
        sub->add_flag("--paper-scale", paper_scale, "full-scale protocol: 4000 trajectories, 200 subdivisions, M=1..7");
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        confreach::ConfigOverrides ov;
        ov.paper_scale = paper_scale;
        if (!out_dir.empty()) ov.out_dir = out_dir;
        for (auto* sub : subs) {
            if (sub->parsed() && sub->count("--seed") > 0) ov.seed = seed;
        }
        const auto cfg = confreach::load_config(config_path, ov);

        if (subs[0]->parsed()) {
            confreach::cmd_generate(cfg);
            std::cout << "wrote datasets to " << (cfg.out_dir / "data").string() << "\n";
        } else if (subs[1]->parsed()) {
            confreach::cmd_calibrate(cfg);
            std::cout << "wrote bounds to " << (cfg.out_dir / "bounds").string() << "\n";
        } else if (subs[2]->parsed()) {
            const auto outcome = confreach::cmd_verify(cfg);
            std::cout << "wrote tubes to " << (cfg.out_dir / "tubes").string() << "\n";
            if (!outcome.all_feasible) {
                for (const auto& m : outcome.infeasible) std::cerr << "verification infeasible: " << m << "\n";
                return kInfeasible;
            }
        } else {
            const auto rep = confreach::cmd_report(cfg);
            std::cout << confreach::read_file(cfg.out_dir / "report" / "report.txt");
        }
    } catch (const confreach::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const confreach::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const confreach::InputError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kOk;
}
