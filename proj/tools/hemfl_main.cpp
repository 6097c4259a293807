// hemfl: run federated-learning algorithm suites and score them with use-case weighted HEM.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hemfl/errors.hpp"
#include "hemfl/hem.hpp"
#include "hemfl/pipeline.hpp"
#include "hemfl/report.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || item.front() == '-') throw hemfl::ConfigError("invalid seed '" + item + "'");
        seeds.push_back(v);
    }
    if (seeds.empty()) throw hemfl::ConfigError("--seeds needs at least one value");
    return seeds;
}

hemfl::ImportanceVector resolve_importance(hemfl::ImportanceVector base, const std::string& use_case,
                                           const std::string& overrides) {
    if (!use_case.empty()) base = hemfl::preset(hemfl::use_case_from_string(use_case), base.personalization);
    if (!overrides.empty()) base = hemfl::parse_importance_overrides(overrides, base);
    base.validate();
    return base;
}

int report_problems(const std::vector<std::string>& problems, const std::string& path) {
    if (problems.empty()) {
        std::cerr << "verify: " << path << " OK\n";
        return 0;
    }
    for (const auto& p : problems) std::cerr << "verify: " << path << ": " << p << '\n';
    return 1;
}

int verify_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hemfl::FormatError("cannot open report " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw hemfl::FormatError(path + " is not valid JSON: " + e.what());
    }
    return report_problems(hemfl::verify_report(doc), path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated-learning simulator and holistic evaluation (HEM) toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_text, use_case, importance, report_path;
    bool verify_after = false, table = false;

    auto* run = app.add_subcommand("run", "Run every configured algorithm and seed, then write report.json");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    run->add_option("--seeds", seeds_text, "Comma-separated seeds (overrides seeds)");
    run->add_option("--use-case", use_case, "Preset importance: iot, smartphone or institution");
    run->add_option("--importance", importance, "Importance overrides, e.g. accuracy=3,fairness=High");
    run->add_flag("--verify", verify_after, "Re-derive every stored index from the raw measurements afterwards");

    auto* hem = app.add_subcommand("hem", "Re-score a report under a different importance vector");
    hem->add_option("report", report_path, "Report JSON")->required();
    hem->add_option("--use-case", use_case, "Preset importance: iot, smartphone or institution");
    hem->add_option("--importance", importance, "Importance overrides, e.g. accuracy=3,fairness=High");
    hem->add_flag("--table", table, "Print a ranking table instead of JSON");

    auto* inspect = app.add_subcommand("partition-inspect", "Print the client class assignment table");
    inspect->add_option("--config", config_path, "Experiment config (JSON)")->required();
    inspect->add_option("--seeds", seeds_text, "Seed used for sample dealing (first value)");

    auto* verify = app.add_subcommand("verify", "Check that a report's indices and scores match its raw measurements");
    verify->add_option("report", report_path, "Report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            hemfl::ExperimentConfig cfg = hemfl::load_config(config_path);
            if (!seeds_text.empty()) cfg.seeds = parse_seeds(seeds_text);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            cfg.importance = resolve_importance(cfg.importance, use_case, importance);
            hemfl::SuiteOptions options{cfg.output_dir, &std::cerr};
            const auto result = hemfl::run_suite(cfg, options);
            hemfl::print_ranking(std::cout, result.report);
            const auto report_file = cfg.output_dir / "report.json";
            std::cerr << "[hemfl] report written to " << report_file.string() << '\n';
            int status = 0;
            for (const auto& e : result.report.algorithms)
                if (!e.completed()) status = 2;
            if (verify_after && verify_file(report_file.string()) != 0) status = 3;
            return status;
        }
        if (*hem) {
            hemfl::Report report = hemfl::read_report(report_path);
            hemfl::score(report, resolve_importance(report.importance, use_case, importance));
            if (table)
                hemfl::print_ranking(std::cout, report);
            else
                std::cout << hemfl::to_json(report).dump(2) << '\n';
            return 0;
        }
        if (*inspect) {
            hemfl::ExperimentConfig cfg = hemfl::load_config(config_path);
            if (!seeds_text.empty()) cfg.seeds = parse_seeds(seeds_text);
            hemfl::print_partition_table(std::cout, cfg);
            return 0;
        }
        if (*verify) return verify_file(report_path);
    } catch (const hemfl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 64;
    } catch (const hemfl::ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << '\n';
        return 64;
    } catch (const hemfl::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return 65;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
