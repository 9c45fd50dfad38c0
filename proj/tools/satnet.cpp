// satnet command-line front end.
//
//   satnet run <config> [--set section.key=value]... [--workers N] [--out DIR]
//   satnet validate <config>
//   satnet list-scenarios
//
// Exit codes: 0 ok, 2 config error, 3 infeasible, 4 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "satnet/satnet.hpp"

namespace {

enum Exit { ok = 0, config_error = 2, infeasible = 3, io_error = 4 };

void print_errors(const satnet::ConfigErrors& e) {
    std::cerr << "config error (" << e.errors().size() << "):\n";
    for (const auto& line : e.errors()) std::cerr << "  " << line << '\n';
}

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const satnet::ConfigErrors& e) {
        print_errors(e);
        return config_error;
    } catch (const satnet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const satnet::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return infeasible;
    } catch (const satnet::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return io_error;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return io_error;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Satellite entanglement-distribution network simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    int workers = 0;
    std::string out_dir;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run a scenario and write its CSV tables and manifest");
    run->add_option("config", config_path, "scenario config (YAML)")->required();
    run->add_option("--set", overrides, "override a config value, e.g. --set clock.timestep_s=10")
        ->take_all()
        ->allow_extra_args(false);
    run->add_option("--workers", workers, "worker threads for sweeps")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "output directory (overrides output_dir)");
    run->add_flag("-q,--quiet", quiet, "no progress output");

    auto* validate = app.add_subcommand("validate", "check a config and print its normalized form");
    validate->add_option("config", config_path, "scenario config (YAML)")->required();

    app.add_subcommand("list-scenarios", "list the scenario kinds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    if (app.got_subcommand("list-scenarios")) {
        for (const auto& s : satnet::scenario_catalog) std::cout << s.name << "\t" << s.summary << '\n';
        return ok;
    }

    if (app.got_subcommand("validate")) {
        return guarded([&] {
            const auto cfg = satnet::load_scenario(config_path);
            std::cout << satnet::to_json(cfg).dump(2) << '\n';
            return static_cast<int>(ok);
        });
    }

    return guarded([&] {
        auto cfg = satnet::load_scenario(config_path, overrides);
        if (workers > 0) cfg.workers = static_cast<unsigned>(workers);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        satnet::RunOptions opts;
        if (!quiet) {
            opts.progress = [last = -1](std::size_t done, std::size_t total) mutable {
                const int pct = static_cast<int>(100 * done / total);
                if (pct / 5 != last / 5 || done == total) {
                    std::fprintf(stderr, "\r%zu/%zu cells (%d%%)", done, total, pct);
                    if (done == total) std::fputc('\n', stderr);
                    last = pct;
                }
            };
        }
        const auto report = satnet::run_scenario(cfg, opts);
        std::cout << "manifest " << report.manifest_hash << '\n';
        for (const auto& f : report.files) std::cout << f.string() << '\n';
        return static_cast<int>(ok);
    });
}
