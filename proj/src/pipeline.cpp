#include "hemfl/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>

#include "hemfl/errors.hpp"
#include "hemfl/parallel.hpp"

namespace hemfl {

namespace {

std::string file_stem(const std::string& name, std::uint64_t seed) {
    std::string out;
    for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out + "_seed" + std::to_string(seed);
}

SeedRun to_seed_run(const ExperimentLog& log, std::uint64_t seed) {
    SeedRun run;
    run.seed = seed;
    run.completed = log.completed;
    run.error = log.error;
    run.trajectory = trajectory_of(log);
    for (const auto& r : log.records) run.wall_clock_seconds += r.wall_clock_seconds;
    for (auto it = log.records.rbegin(); it != log.records.rend(); ++it) {
        if (it->evaluated) {
            run.final_client_accuracies = it->client_accuracies;
            break;
        }
    }
    if (run.completed && run.trajectory.rounds.empty()) {
        run.completed = false;
        run.error = "no evaluated rounds";
    }
    return run;
}

}  // namespace

std::vector<ClientShard> build_shards(const ExperimentConfig& cfg, const TrainTestData& data, std::uint64_t run_seed) {
    try {
        return partition(data, run_partition_spec(cfg, run_seed));
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

SuiteResult run_suite(const ExperimentConfig& cfg, const SuiteOptions& options) {
    const TrainTestData data = build_dataset(cfg.dataset);
    std::vector<std::vector<ClientShard>> shards_by_seed;
    for (std::uint64_t seed : cfg.seeds) {
        shards_by_seed.push_back(build_shards(cfg, data, seed));
        for (const auto& shard : shards_by_seed.back())
            if (shard.train.empty() || shard.test.empty())
                throw ConfigError("client " + std::to_string(shard.client_id) +
                                  " receives no train or test samples; enlarge the dataset or reduce num_clients");
    }

    const std::size_t n_seeds = cfg.seeds.size();
    const std::size_t jobs = cfg.algorithms.size() * n_seeds;
    std::vector<ExperimentLog> logs(jobs);
    std::mutex progress_mutex;
    parallel_for(jobs, cfg.threads, [&](std::size_t job) {
        const auto& algo = cfg.algorithms[job / n_seeds];
        const std::size_t s = job % n_seeds;
        const FedSimConfig fs = make_fedsim_config(cfg, algo, cfg.seeds[s]);
        logs[job] = run_experiment(fs, shards_by_seed[s]);
        if (options.progress) {
            std::lock_guard lock(progress_mutex);
            const auto& log = logs[job];
            *options.progress << "[hemfl] " << algo.name << " seed=" << cfg.seeds[s] << " rounds=" << log.records.size()
                              << (log.completed ? " completed" : " DIVERGED: " + log.error) << std::endl;
        }
    });

    SuiteResult result;
    Report& report = result.report;
    report.fingerprint = cfg.fingerprint();
    report.metrics = cfg.metrics;
    report.importance = cfg.importance;
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
        const auto& algo = cfg.algorithms[a];
        AlgorithmEntry e;
        e.name = algo.name;
        e.strategy = algo.strategy;
        e.personalizer = algo.personalizer;
        e.base = algo.base;
        for (std::size_t s = 0; s < n_seeds; ++s) e.runs.push_back(to_seed_run(logs[a * n_seeds + s], cfg.seeds[s]));
        report.algorithms.push_back(std::move(e));
    }
    derive_components(report);
    score(report, cfg.importance);

    if (!options.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(options.output_dir / "logs");
        fs::create_directories(options.output_dir / "rounds");
        for (std::size_t job = 0; job < jobs; ++job) {
            const auto stem = file_stem(cfg.algorithms[job / n_seeds].name, cfg.seeds[job % n_seeds]);
            std::ofstream(options.output_dir / "logs" / (stem + ".json")) << to_json(logs[job]).dump(2) << '\n';
            std::ofstream csv(options.output_dir / "rounds" / (stem + ".csv"));
            write_round_csv(csv, logs[job]);
        }
        write_report_atomic(report, options.output_dir / "report.json");
    }
    result.logs = std::move(logs);
    return result;
}

void print_partition_table(std::ostream& out, const ExperimentConfig& cfg) {
    const TrainTestData data = build_dataset(cfg.dataset);
    const auto shards = build_shards(cfg, data, cfg.seeds.front());
    out << "client_id\tclass_list\ttrain_samples\ttest_samples\n";
    std::size_t train_total = 0, test_total = 0;
    for (const auto& s : shards) {
        out << s.client_id << "\t{";
        for (std::size_t i = 0; i < s.class_list.size(); ++i) out << (i ? "," : "") << s.class_list[i];
        out << "}\t" << s.train.size() << '\t' << s.test.size() << '\n';
        train_total += s.train.size();
        test_total += s.test.size();
    }
    out << "total\t-\t" << train_total << '\t' << test_total << '\n';
    out << "dataset\t-\t" << data.train.size() << '\t' << data.test.size() << '\n';
}

void print_ranking(std::ostream& out, const Report& report) {
    out << "use case: " << report.importance.use_case << "  (accuracy=" << report.importance.accuracy
        << " convergence=" << report.importance.convergence << " comp_efficiency=" << report.importance.comp_efficiency
        << " fairness=" << report.importance.fairness << " personalization=" << report.importance.personalization
        << ")\n";
    out << std::left << std::setw(4) << "#" << std::setw(20) << "algorithm" << std::setw(8) << "HEM"
        << "band\n";
    int pos = 1;
    for (const auto& name : report.ranking) {
        const AlgorithmEntry* e = report.find(name);
        out << std::left << std::setw(4) << pos++ << std::setw(20) << name << std::setw(8) << std::fixed
            << std::setprecision(4) << *e->hem_score << to_string(*e->band) << '\n';
    }
    for (const auto& e : report.algorithms)
        if (!e.hem_score) out << "-   " << std::setw(20) << e.name << "unscored: " << e.note << '\n';
    out.unsetf(std::ios::fixed);
}

}  // namespace hemfl
