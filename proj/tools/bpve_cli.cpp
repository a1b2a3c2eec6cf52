#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpve/config.hpp"
#include "bpve/errors.hpp"
#include "bpve/experiments.hpp"

using namespace bpve;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::string format = "json";
    std::optional<std::uint64_t> seed;
    std::optional<long long> replicates;
    std::optional<int> workers;
};

int run_command(const std::string& command, const CliOptions& opts) {
    ScenarioConfig config =
        opts.config_path.empty() ? default_config() : parse_config_file(opts.config_path);
    if (opts.seed) config.seed = *opts.seed;
    if (opts.replicates) config.replicates = *opts.replicates;
    if (opts.workers) config.workers = *opts.workers;
    config.validate();

    const ReportWriter writer(opts.out_dir, opts.format);
    std::vector<VerificationReport> reports;
    if (command == "yaglom")
        reports.push_back(run_yaglom(config, &writer));
    else if (command == "fdd")
        reports.push_back(run_theorem1_fdd(config, &writer));
    else if (command == "entrance")
        reports.push_back(run_entrance_law(config, &writer));
    else if (command == "theorem2")
        reports.push_back(run_theorem2(config, &writer));
    else if (command == "reverse")
        reports.push_back(run_reverse(config, &writer));
    else if (command == "diag")
        reports.push_back(run_diagnostics(config, &writer));
    else if (command == "all")
        reports = run_all(config, &writer);

    if (command != "all") writer.write_reports(reports);
    bool all = true;
    for (const auto& rep : reports) {
        print_report(rep);
        all = all && rep.all_passed();
    }
    std::printf("%s: %s\n", config.name.c_str(), all ? "all checks passed" : "CHECKS FAILED");
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branching processes in nearly degenerate varying environment: "
                 "exact engine, Monte Carlo simulators, and limit-theorem checks"};
    app.require_subcommand(1);

    CliOptions opts;
    std::vector<CLI::App*> subs;
    for (const char* name : {"yaglom", "fdd", "entrance", "theorem2", "reverse", "diag", "all"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "scenario config file");
        sub->add_option("--seed", opts.seed, "override the scenario seed");
        sub->add_option("--replicates", opts.replicates, "override the replicate count");
        sub->add_option("--workers", opts.workers, "worker threads (0 = hardware)");
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--format", opts.format, "report format: json or csv");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);
    try {
        for (auto* sub : subs)
            if (sub->parsed()) return run_command(sub->get_name(), opts);
        return 2;
    } catch (const ConfigError& err) {
        std::fprintf(stderr, "configuration error: %s\n", err.what());
        return 2;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
}
