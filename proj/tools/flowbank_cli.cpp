#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flowbank/harness.hpp"

namespace {

namespace hn = flowbank::harness;

int cmd_run(const std::string& config_file, bool seed_set, std::uint64_t seed, int threads,
            const std::string& out, const std::string& format) {
    hn::Campaign campaign = hn::load_campaign(config_file);
    if (seed_set) campaign.master_seed = seed;
    if (threads >= 0) campaign.threads = threads;
    if (!out.empty()) campaign.output_dir = out;
    campaign.validate();

    const hn::CampaignResult result = hn::run_campaign(campaign);
    hn::write_outputs(campaign, result, campaign.output_dir);

    if (format == "json")
        std::cout << hn::render_table_json(campaign, result.aggregates);
    else if (format == "csv")
        std::cout << hn::render_table_csv(result.aggregates);
    else
        std::cout << hn::render_table_text(campaign, result.aggregates);
    std::cerr << "wrote " << campaign.output_dir << "/{trials.csv,aggregate.csv,manifest.json}\n";
    return 0;
}

int cmd_table(const std::string& results_dir, const std::string& format) {
    const hn::StoredResults stored = hn::read_results(results_dir);
    const auto rows = hn::aggregate_trials(stored.campaign, stored.trials);
    if (format == "json")
        std::cout << hn::render_table_json(stored.campaign, rows);
    else if (format == "csv")
        std::cout << hn::render_table_csv(rows);
    else
        std::cout << hn::render_table_text(stored.campaign, rows);
    return 0;
}

int cmd_geff(const std::string& results_dir, const std::string& format) {
    const hn::StoredResults stored = hn::read_results(results_dir);
    const auto rows = hn::aggregate_trials(stored.campaign, stored.trials);
    if (format == "json")
        std::cout << hn::render_geff_json(stored.campaign, rows);
    else
        std::cout << hn::render_geff_csv(rows);
    return 0;
}

int cmd_validate(const std::string& config_file) {
    const hn::Campaign campaign = hn::load_campaign(config_file);
    std::cout << "ok: " << campaign.name << "\n"
              << "fingerprint: " << hn::fingerprint(campaign) << "\n"
              << "cells: " << campaign.cells.size() << ", trajectories: " << campaign.trajectories
              << ", runs per trajectory: " << campaign.runs_per_trajectory << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Particle-flow Gaussian sum filter benchmark harness"};
    app.require_subcommand(1);

    std::string config_file;
    std::string results_dir;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    int threads = -1;

    CLI::App* run = app.add_subcommand("run", "Execute a campaign config and write results");
    run->add_option("config", config_file, "campaign config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    CLI::Option* seed_opt = run->add_option("--seed", seed, "override the master seed");
    run->add_option("--threads", threads, "worker threads (0 = FLOWBANK_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
    run->add_option("--out", out, "override the output directory");
    run->add_option("--format", format, "summary format printed to stdout")
        ->check(CLI::IsMember({"csv", "json"}));

    CLI::App* table = app.add_subcommand("table", "Render the per-cell aggregate table");
    table->add_option("results", results_dir, "results directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    table->add_option("--format", format, "output format (default: text)")
        ->check(CLI::IsMember({"csv", "json"}));

    CLI::App* geff = app.add_subcommand("geff", "Emit per-step average effective mixture size");
    geff->add_option("results", results_dir, "results directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    geff->add_option("--format", format, "output format (default: csv)")
        ->check(CLI::IsMember({"csv", "json"}));

    CLI::App* validate = app.add_subcommand("validate", "Parse and validate a campaign config");
    validate->add_option("config", config_file, "campaign config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_file, seed_opt->count() > 0, seed, threads, out, format);
        if (table->parsed()) return cmd_table(results_dir, format);
        if (geff->parsed()) return cmd_geff(results_dir, format);
        if (validate->parsed()) return cmd_validate(config_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
