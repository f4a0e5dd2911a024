// Command-line harness: replicated runs of one model variant.

#include "aa4mm/config.hpp"
#include "aa4mm/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

void write_file(const std::string& path, auto&& body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    body(out);
    if (!out)
        throw std::runtime_error("error while writing '" + path + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-level boids/flocks co-simulation: replicated runs of one variant"};

    aa4mm::ConfigOverrides cli;
    std::string config_path;
    std::string out_path;
    unsigned threads = 0;

    app.add_option("--variant", cli.variant, "m | M | M1 | M2 | M3")
        ->check(CLI::IsMember({"m", "M", "M1", "M2", "M3"}));
    app.add_option("--birds", cli.birds, "number of birds (default 100)");
    app.add_option("--ticks", cli.ticks, "horizon in micro ticks (default 500)");
    app.add_option("--reps", cli.reps, "number of replications (default 1)");
    app.add_option("--seed", cli.seed, "base seed; replication k uses seed + k (default 0)");
    app.add_option("--sample-interval", cli.sample_interval, "ticks between samples (default: macro period)");
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", out_path, "per-run CSV; the aggregate goes to <out>_aggregate.csv")->required();
    app.add_option("--event-log", cli.event_log, "write the event log of replication 0 here");
    app.add_option("--threads", threads, "worker threads for replications (default: all cores)");
    app.footer("std_count in the aggregate file is the population standard deviation.");

    CLI11_PARSE(app, argc, argv);
    cli.out = out_path;

    try {
        const auto file = config_path.empty() ? nlohmann::json() : aa4mm::load_config_file(config_path);
        const auto cfg = aa4mm::resolve_config(file, cli);

        const auto records = aa4mm::run_replicated(cfg, threads);
        write_file(cfg.out_path, [&](std::ostream& os) { aa4mm::write_records_csv(os, cfg.variant.name, records); });
        write_file(aa4mm::aggregate_path_for(cfg.out_path), [&](std::ostream& os) {
            aa4mm::write_aggregate_csv(os, cfg.variant.name, aa4mm::aggregate(records));
        });

        if (!cfg.event_log_path.empty()) {
            const auto first = aa4mm::run_one(cfg, 0);
            write_file(cfg.event_log_path, [&](std::ostream& os) { first.log.write(os); });
        }
    } catch (const aa4mm::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const aa4mm::DeadlockError& e) {
        std::cerr << e.what() << "\n--- event log ---\n" << e.log_dump;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
