#include "hemfl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "hemfl/errors.hpp"
#include "hemfl/rng.hpp"

namespace hemfl {

using nlohmann::json;

namespace {

// Typed access to one JSON object; every key must be consumed before finish().
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }
    /// Marks an optional key as known without reading it.
    void allow(const std::string& key) { seen_.insert(key); }

    /// Importance level given as a number or a Low/Moderate/High name.
    double level(const std::string& key, double fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) {
            try {
                return parse_importance_level(v.get<std::string>());
            } catch (const ArgumentError& e) {
                throw ConfigError(where(key) + ": " + e.what());
            }
        }
        throw ConfigError(where(key) + " must be a level name or number");
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        return convert<T>(node_.at(key), key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) throw ConfigError(where(key) + " is required");
        return convert<T>(node_.at(key), key);
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) return Section(empty_object(), path_ + "." + key);
        return Section(node_.at(key), path_ + "." + key);
    }

    void finish() const {
        for (const auto& [key, value] : node_.items())
            if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
    }

    std::string where(const std::string& key = {}) const {
        return key.empty() ? "'" + path_ + "'" : "'" + path_ + "." + key + "'";
    }

private:
    static const json& empty_object() {
        static const json obj = json::object();
        return obj;
    }

    template <typename T>
    T convert(const json& v, const std::string& key) const {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw ConfigError(where(key) + " must be non-negative");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<std::filesystem::path> file_list(const json& v, const std::string& where,
                                             const std::filesystem::path& base_dir) {
    if (!v.is_array()) throw ConfigError("'" + where + "' must be an array of paths");
    std::vector<std::filesystem::path> out;
    for (const auto& item : v) {
        if (!item.is_string()) throw ConfigError("'" + where + "' must contain strings");
        std::filesystem::path p = item.get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw ConfigError("file not found: " + p.string());
        out.push_back(p);
    }
    if (out.empty()) throw ConfigError("'" + where + "' must not be empty");
    return out;
}

template <typename Fn>
auto wrap(Fn&& fn) {
    try {
        return fn();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

DatasetConfig parse_dataset(Section s, const std::filesystem::path& base_dir) {
    DatasetConfig d;
    const auto source = s.get<std::string>("source", "synthetic");
    if (source == "synthetic") {
        d.source = DataSource::synthetic;
        d.num_classes = s.get<int>("num_classes", d.num_classes);
        d.n_features = s.get<int>("n_features", d.n_features);
        d.train_per_class = s.get<int>("train_per_class", d.train_per_class);
        d.test_per_class = s.get<int>("test_per_class", d.test_per_class);
        d.class_separation = s.get<double>("class_separation", d.class_separation);
        d.seed = s.get<std::uint64_t>("seed", d.seed);
        if (d.num_classes < 1 || d.n_features < 1 || d.train_per_class < 1 || d.test_per_class < 1)
            throw ConfigError("dataset counts must be positive");
        if (!(d.class_separation > 0.0)) throw ConfigError("dataset.class_separation must be positive");
    } else if (source == "cifar10") {
        d.source = DataSource::cifar10;
        d.num_classes = kCifarClasses;
        d.n_features = static_cast<int>(kCifarPixels);
        if (!s.has("train_files") || !s.has("test_files"))
            throw ConfigError("cifar10 dataset requires train_files and test_files");
        d.train_files = file_list(s.raw("train_files"), "dataset.train_files", base_dir);
        d.test_files = file_list(s.raw("test_files"), "dataset.test_files", base_dir);
    } else {
        throw ConfigError("dataset.source must be 'synthetic' or 'cifar10'");
    }
    s.finish();
    return d;
}

AlgorithmConfig parse_algorithm(Section s) {
    AlgorithmConfig a;
    a.name = s.require<std::string>("name");
    if (a.name.empty()) throw ConfigError("algorithm name must not be empty");
    auto strat = s.child("strategy");
    a.strategy.kind = wrap([&] { return strategy_kind_from_string(strat.require<std::string>("kind")); });
    if (a.strategy.kind == StrategyKind::feddyn)
        a.strategy.feddyn_alpha = strat.get<double>("feddyn_alpha", a.strategy.feddyn_alpha);
    if (a.strategy.kind == StrategyKind::scaffold)
        a.strategy.server_lr = strat.get<double>("server_lr", a.strategy.server_lr);
    strat.finish();

    auto pers = s.child("personalizer");
    a.personalizer.kind = wrap([&] { return personalizer_kind_from_string(pers.get<std::string>("kind", "none")); });
    if (a.personalizer.kind != PersonalizerKind::none)
        a.personalizer.support_fraction = pers.get<double>("support_fraction", a.personalizer.support_fraction);
    if (a.personalizer.kind == PersonalizerKind::maml) {
        a.personalizer.inner_lr = pers.get<double>("inner_lr", a.personalizer.inner_lr);
        a.personalizer.inner_steps = pers.get<int>("inner_steps", a.personalizer.inner_steps);
        a.personalizer.mode = wrap([&] { return maml_mode_from_string(pers.get<std::string>("mode", "train")); });
    }
    pers.finish();
    a.base = s.get<std::string>("base", "");
    s.finish();
    wrap([&] {
        a.strategy.validate();
        a.personalizer.validate();
        return 0;
    });
    return a;
}

void resolve_bases(std::vector<AlgorithmConfig>& algos) {
    std::set<std::string> names;
    for (const auto& a : algos)
        if (!names.insert(a.name).second) throw ConfigError("duplicate algorithm name '" + a.name + "'");
    for (auto& a : algos) {
        if (a.personalizer.kind == PersonalizerKind::none) {
            if (!a.base.empty()) throw ConfigError("algorithm '" + a.name + "' is not personalized but names a base");
            continue;
        }
        if (a.base.empty()) {
            for (const auto& b : algos) {
                if (b.personalizer.kind == PersonalizerKind::none && b.strategy.kind == a.strategy.kind) {
                    a.base = b.name;
                    break;
                }
            }
            if (a.base.empty())
                throw ConfigError("personalized algorithm '" + a.name + "' has no non-personalized " +
                                  to_string(a.strategy.kind) + " entry to compare against");
        }
        const auto it = std::find_if(algos.begin(), algos.end(), [&](const auto& b) { return b.name == a.base; });
        if (it == algos.end()) throw ConfigError("algorithm '" + a.name + "' names unknown base '" + a.base + "'");
        if (it->personalizer.kind != PersonalizerKind::none)
            throw ConfigError("base of '" + a.name + "' must be non-personalized");
    }
}

json strategy_json(const StrategyConfig& s) {
    json j = {{"kind", to_string(s.kind)}};
    if (s.kind == StrategyKind::feddyn) j["feddyn_alpha"] = s.feddyn_alpha;
    if (s.kind == StrategyKind::scaffold) j["server_lr"] = s.server_lr;
    return j;
}

json personalizer_json(const PersonalizerConfig& p) {
    json j = {{"kind", to_string(p.kind)}};
    if (p.kind != PersonalizerKind::none) j["support_fraction"] = p.support_fraction;
    if (p.kind == PersonalizerKind::maml) {
        j["inner_lr"] = p.inner_lr;
        j["inner_steps"] = p.inner_steps;
        j["mode"] = to_string(p.mode);
    }
    return j;
}

}  // namespace

const AlgorithmConfig& ExperimentConfig::algorithm(const std::string& name) const {
    for (const auto& a : algorithms)
        if (a.name == name) return a;
    throw ArgumentError("unknown algorithm '" + name + "'");
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    Section root(doc, "config");

    cfg.dataset = parse_dataset(root.child("dataset"), base_dir);

    auto part = root.child("partition");
    cfg.partition.num_clients = part.get<int>("num_clients", cfg.partition.num_clients);
    cfg.partition.classes_per_client = part.get<int>("classes_per_client", cfg.partition.classes_per_client);
    cfg.partition.seed = part.get<std::uint64_t>("seed", cfg.partition.seed);
    part.finish();
    if (cfg.partition.num_clients < 1) throw ConfigError("partition.num_clients must be >= 1");
    if (cfg.partition.classes_per_client < 1 || cfg.partition.classes_per_client > cfg.dataset.num_classes)
        throw ConfigError("partition.classes_per_client must lie in [1, num_classes]");

    auto model = root.child("model");
    cfg.model.kind = wrap([&] { return model_kind_from_string(model.get<std::string>("kind", "linear")); });
    if (cfg.model.kind == ModelKind::mlp) cfg.model.hidden_units = model.require<int>("hidden_units");
    cfg.model.init_scale = model.get<double>("init_scale", cfg.model.init_scale);
    cfg.model.init_seed = model.get<std::uint64_t>("init_seed", cfg.model.init_seed);
    model.finish();
    cfg.model.n_features = cfg.dataset.n_features;
    cfg.model.num_classes = cfg.dataset.num_classes;
    wrap([&] {
        cfg.model.validate();
        return 0;
    });

    auto train = root.child("training");
    auto& t = cfg.training;
    t.sgd.learning_rate = train.get<double>("learning_rate", t.sgd.learning_rate);
    t.sgd.batch_size = train.get<int>("batch_size", t.sgd.batch_size);
    t.sgd.local_epochs = train.get<int>("local_epochs", t.sgd.local_epochs);
    t.sgd.weight_decay = train.get<double>("weight_decay", t.sgd.weight_decay);
    t.rounds = train.get<int>("rounds", t.rounds);
    t.participation = train.get<double>("participation", t.participation);
    t.eval_every = train.get<int>("eval_every", t.eval_every);
    train.allow("early_stop_accuracy");
    if (train.has("early_stop_accuracy")) t.early_stop_accuracy = train.require<double>("early_stop_accuracy");
    t.aggregation_cost = train.get<double>("aggregation_cost", t.aggregation_cost);
    cfg.threads = train.get<unsigned>("threads", cfg.threads);
    train.finish();
    wrap([&] {
        t.sgd.validate();
        return 0;
    });
    if (t.rounds < 1) throw ConfigError("training.rounds must be >= 1");
    if (!(t.participation > 0.0 && t.participation <= 1.0)) throw ConfigError("training.participation must lie in (0, 1]");
    if (t.eval_every < 1) throw ConfigError("training.eval_every must be >= 1");

    root.allow("algorithms");
    if (!root.has("algorithms")) throw ConfigError("'config.algorithms' is required");
    const json& algos = root.raw("algorithms");
    if (!algos.is_array() || algos.empty()) throw ConfigError("'config.algorithms' must be a non-empty array");
    for (std::size_t i = 0; i < algos.size(); ++i)
        cfg.algorithms.push_back(parse_algorithm(Section(algos[i], "config.algorithms[" + std::to_string(i) + "]")));
    resolve_bases(cfg.algorithms);

    auto metrics = root.child("metrics");
    auto& m = cfg.metrics;
    m.target_accuracy = metrics.get<double>("target_accuracy", m.target_accuracy);
    m.round_budget = metrics.get<int>("round_budget", t.rounds);
    m.accuracy_window = metrics.get<int>("accuracy_window", m.accuracy_window);
    m.tta_clock = wrap([&] { return tta_clock_from_string(metrics.get<std::string>("tta_clock", "cost_units")); });
    m.entropy = wrap([&] { return entropy_mode_from_string(metrics.get<std::string>("entropy", "raw")); });
    metrics.finish();
    wrap([&] {
        m.validate();
        return 0;
    });

    auto hem = root.child("hem");
    const double pers_level = hem.level("personalization", level::moderate);
    hem.allow("use_case");
    hem.allow("importance");
    if (hem.has("use_case") && hem.has("importance"))
        throw ConfigError("hem: give either use_case or importance, not both");
    if (hem.has("importance")) {
        Section imp(hem.raw("importance"), "config.hem.importance");
        ImportanceVector v;
        v.accuracy = imp.level("accuracy", 0.0);
        v.convergence = imp.level("convergence", 0.0);
        v.comp_efficiency = imp.level("comp_efficiency", 0.0);
        v.fairness = imp.level("fairness", 0.0);
        v.personalization = imp.level("personalization", pers_level);
        imp.finish();
        cfg.importance = v;
    } else {
        const auto name = hem.get<std::string>("use_case", "institution");
        cfg.importance = wrap([&] { return preset(use_case_from_string(name), pers_level); });
    }
    hem.finish();
    wrap([&] {
        cfg.importance.validate();
        return 0;
    });

    if (root.has("seeds")) {
        const json& seeds = root.raw("seeds");
        if (!seeds.is_array() || seeds.empty()) throw ConfigError("'config.seeds' must be a non-empty array");
        cfg.seeds.clear();
        for (const auto& s : seeds) {
            if (!s.is_number_unsigned()) throw ConfigError("'config.seeds' entries must be non-negative integers");
            cfg.seeds.push_back(s.get<std::uint64_t>());
        }
    } else {
        root.allow("seeds");
    }

    auto out = root.child("output");
    cfg.output_dir = out.get<std::string>("dir", cfg.output_dir.string());
    out.finish();
    root.finish();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

nlohmann::json ExperimentConfig::canonical_json() const {
    json ds;
    if (dataset.source == DataSource::synthetic) {
        ds = {{"source", "synthetic"},
              {"num_classes", dataset.num_classes},
              {"n_features", dataset.n_features},
              {"train_per_class", dataset.train_per_class},
              {"test_per_class", dataset.test_per_class},
              {"class_separation", dataset.class_separation},
              {"seed", dataset.seed}};
    } else {
        json train_files = json::array(), test_files = json::array();
        for (const auto& p : dataset.train_files) train_files.push_back(p.filename().string());
        for (const auto& p : dataset.test_files) test_files.push_back(p.filename().string());
        ds = {{"source", "cifar10"}, {"train_files", train_files}, {"test_files", test_files}};
    }
    json algos = json::array();
    for (const auto& a : algorithms)
        algos.push_back({{"name", a.name},
                         {"strategy", strategy_json(a.strategy)},
                         {"personalizer", personalizer_json(a.personalizer)},
                         {"base", a.base}});
    json train = {{"learning_rate", training.sgd.learning_rate},
                     {"batch_size", training.sgd.batch_size},
                     {"local_epochs", training.sgd.local_epochs},
                     {"weight_decay", training.sgd.weight_decay},
                     {"rounds", training.rounds},
                     {"participation", training.participation},
                     {"eval_every", training.eval_every},
                     {"aggregation_cost", training.aggregation_cost}};
    if (training.early_stop_accuracy) train["early_stop_accuracy"] = *training.early_stop_accuracy;
    json m = {{"kind", to_string(model.kind)}, {"init_scale", model.init_scale}, {"init_seed", model.init_seed}};
    if (model.kind == ModelKind::mlp) m["hidden_units"] = model.hidden_units;
    return {{"dataset", ds},
            {"partition",
             {{"num_clients", partition.num_clients},
              {"classes_per_client", partition.classes_per_client},
              {"seed", partition.seed}}},
            {"model", m},
            {"training", train},
            {"algorithms", algos},
            {"metrics",
             {{"target_accuracy", metrics.target_accuracy},
              {"round_budget", metrics.round_budget},
              {"accuracy_window", metrics.accuracy_window},
              {"tta_clock", to_string(metrics.tta_clock)},
              {"entropy", to_string(metrics.entropy)}}},
            {"hem",
             {{"use_case", importance.use_case},
              {"importance",
               {{"accuracy", importance.accuracy},
                {"convergence", importance.convergence},
                {"comp_efficiency", importance.comp_efficiency},
                {"fairness", importance.fairness},
                {"personalization", importance.personalization}}}}},
            {"seeds", seeds}};
}

std::string ExperimentConfig::fingerprint() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json().dump())));
    return buf;
}

PartitionSpec run_partition_spec(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    PartitionSpec p = cfg.partition;
    p.seed = derive_seed(cfg.partition.seed, run_seed);
    return p;
}

FedSimConfig make_fedsim_config(const ExperimentConfig& cfg, const AlgorithmConfig& algo, std::uint64_t run_seed) {
    FedSimConfig f;
    f.algorithm_name = algo.name;
    f.fingerprint = cfg.fingerprint();
    f.model = cfg.model;
    f.model.init_seed = derive_seed(cfg.model.init_seed, run_seed);
    f.sgd = cfg.training.sgd;
    f.strategy = algo.strategy;
    f.personalizer = algo.personalizer;
    f.rounds = cfg.training.rounds;
    f.participation = cfg.training.participation;
    f.eval_every = cfg.training.eval_every;
    f.early_stop_accuracy = cfg.training.early_stop_accuracy;
    f.aggregation_cost = cfg.training.aggregation_cost;
    f.threads = 1;
    f.seed = derive_seed(run_seed, 0x72756e);  // "run"
    return f;
}

TrainTestData build_dataset(const DatasetConfig& cfg) {
    if (cfg.source == DataSource::cifar10) return {load_cifar10_files(cfg.train_files), load_cifar10_files(cfg.test_files)};
    const Dataset all = generate_synthetic(cfg.num_classes, cfg.n_features, cfg.train_per_class + cfg.test_per_class,
                                           cfg.class_separation, cfg.seed);
    return split_per_class(all, cfg.train_per_class);
}

}  // namespace hemfl
