#include "hemfl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hemfl/errors.hpp"

namespace hemfl {

using nlohmann::json;

bool AlgorithmEntry::completed() const {
    if (runs.empty()) return components.has_value();
    return std::all_of(runs.begin(), runs.end(), [](const SeedRun& r) { return r.completed; });
}

const AlgorithmEntry* Report::find(const std::string& name) const {
    for (const auto& a : algorithms)
        if (a.name == name) return &a;
    return nullptr;
}

namespace {

template <typename T>
double mean_of(const std::vector<T>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Measurements measure(const AlgorithmEntry& entry, const MetricConfig& cfg) {
    Measurements m;
    for (const auto& run : entry.runs) {
        m.rounds_to_target.push_back(rounds_to_target(run.trajectory, cfg));
        m.accuracy_index.push_back(accuracy_index(run.trajectory, cfg));
        m.convergence_index.push_back(convergence_index(run.trajectory, cfg));
        m.tta.push_back(tta(run.trajectory, cfg));
        m.entropy.push_back(fairness_entropy(run.final_client_accuracies, cfg.entropy));
    }
    m.mean_accuracy_index = mean_of(m.accuracy_index);
    m.mean_convergence_index = mean_of(m.convergence_index);
    m.mean_tta = mean_of(m.tta);
    m.mean_entropy = mean_of(m.entropy);
    return m;
}

// Per-seed MPI against the base entry's run with the same seed.
std::vector<double> seed_mpis(const AlgorithmEntry& pfl, const AlgorithmEntry& base) {
    std::vector<double> out;
    for (const auto& run : pfl.runs) {
        const auto it = std::find_if(base.runs.begin(), base.runs.end(),
                                     [&](const SeedRun& b) { return b.seed == run.seed; });
        if (it == base.runs.end())
            throw UndefinedMpiError("base '" + base.name + "' has no run for seed " + std::to_string(run.seed));
        out.push_back(compute_mpi(run.final_client_accuracies, it->final_client_accuracies));
    }
    return out;
}

}  // namespace

void derive_components(Report& report) {
    report.metrics.validate();
    for (auto& e : report.algorithms) {
        if (e.runs.empty()) throw FormatError("algorithm '" + e.name + "' has no raw measurements to derive from");
        e.measurements.reset();
        e.components.reset();
        e.note.clear();
        if (!e.completed()) {
            for (const auto& r : e.runs)
                if (!r.completed) {
                    e.note = "diverged (seed " + std::to_string(r.seed) + "): " + r.error;
                    break;
                }
            continue;
        }
        e.measurements = measure(e, report.metrics);
    }
    for (auto& e : report.algorithms) {
        if (!e.measurements || !e.is_personalized()) continue;
        const AlgorithmEntry* base = report.find(e.base);
        if (base == nullptr || !base->measurements) {
            e.note = "personalization undefined: base '" + e.base + "' unavailable";
            continue;
        }
        try {
            e.measurements->mpi = seed_mpis(e, *base);
            e.measurements->mean_mpi = mean_of(e.measurements->mpi);
        } catch (const UndefinedMpiError& err) {
            e.measurements->mpi.clear();
            e.note = std::string("personalization undefined: ") + err.what();
        }
    }

    ScoreMap ttas, entropies, mpis;
    for (const auto& e : report.algorithms) {
        if (!e.measurements) continue;
        ttas[e.name] = e.measurements->mean_tta;
        entropies[e.name] = e.measurements->mean_entropy;
        if (e.measurements->mean_mpi) mpis[e.name] = *e.measurements->mean_mpi;
    }
    if (ttas.empty()) return;
    const ScoreMap efficiency = comp_efficiency_indices(ttas);
    const ScoreMap fairness = fairness_indices(entropies);
    const ScoreMap personalization = mpis.empty() ? ScoreMap{} : personalization_indices(mpis);
    for (auto& e : report.algorithms) {
        if (!e.measurements) continue;
        ComponentIndices c;
        c.accuracy = e.measurements->mean_accuracy_index;
        c.convergence = e.measurements->mean_convergence_index;
        c.comp_efficiency = efficiency.at(e.name);
        c.fairness = fairness.at(e.name);
        if (auto it = personalization.find(e.name); it != personalization.end()) c.personalization = it->second;
        e.components = c;
    }
}

void score(Report& report, const ImportanceVector& importance) {
    importance.validate();
    report.importance = importance;
    ScoreMap scores;
    for (auto& e : report.algorithms) {
        e.hem_score.reset();
        e.band.reset();
        if (!e.components) continue;
        e.hem_score = compose_hem(*e.components, importance);
        e.band = band(*e.hem_score);
        scores[e.name] = *e.hem_score;
    }
    report.ranking = rank(scores);
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json strategy_to_json(const StrategyConfig& s) {
    return {{"kind", to_string(s.kind)}, {"feddyn_alpha", s.feddyn_alpha}, {"server_lr", s.server_lr}};
}

json personalizer_to_json(const PersonalizerConfig& p) {
    return {{"kind", to_string(p.kind)},
            {"inner_lr", p.inner_lr},
            {"inner_steps", p.inner_steps},
            {"support_fraction", p.support_fraction},
            {"mode", to_string(p.mode)}};
}

json importance_to_json(const ImportanceVector& v) {
    return {{"use_case", v.use_case},
            {"accuracy", v.accuracy},
            {"convergence", v.convergence},
            {"comp_efficiency", v.comp_efficiency},
            {"fairness", v.fairness},
            {"personalization", v.personalization}};
}

json run_to_json(const SeedRun& r) {
    return {{"seed", r.seed},
            {"completed", r.completed},
            {"error", r.error},
            {"rounds", r.trajectory.rounds},
            {"mean_accuracy", r.trajectory.mean_accuracy},
            {"cumulative_cost", r.trajectory.cumulative_cost},
            {"cumulative_wall_clock", r.trajectory.cumulative_wall_clock},
            {"final_client_accuracies", r.final_client_accuracies},
            {"wall_clock_seconds", r.wall_clock_seconds}};
}

json measurements_to_json(const Measurements& m) {
    return {{"rounds_to_target", m.rounds_to_target},
            {"accuracy_index", m.accuracy_index},
            {"convergence_index", m.convergence_index},
            {"tta", m.tta},
            {"entropy", m.entropy},
            {"mpi", m.mpi},
            {"mean",
             {{"accuracy_index", m.mean_accuracy_index},
              {"convergence_index", m.mean_convergence_index},
              {"tta", m.mean_tta},
              {"entropy", m.mean_entropy},
              {"mpi", optional_number(m.mean_mpi)}}}};
}

json components_to_json(const ComponentIndices& c) {
    return {{"accuracy", c.accuracy},
            {"convergence", c.convergence},
            {"comp_efficiency", c.comp_efficiency},
            {"fairness", c.fairness},
            {"personalization", optional_number(c.personalization)}};
}

// Strict readers that turn library exceptions into FormatError with a path.
const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

template <typename T>
T read(const json& obj, const char* key, const std::string& where) {
    try {
        return field(obj, key, where).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(where + "." + key + ": " + e.what());
    }
}

std::optional<double> read_optional(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw FormatError(where + "." + key + ": expected a number or null");
    return v.get<double>();
}

template <typename Fn>
auto as_format_error(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const ArgumentError& e) {
        throw FormatError(where + ": " + e.what());
    }
}

ImportanceVector importance_from_json(const json& j, const std::string& where) {
    ImportanceVector v;
    v.use_case = read<std::string>(j, "use_case", where);
    v.accuracy = read<double>(j, "accuracy", where);
    v.convergence = read<double>(j, "convergence", where);
    v.comp_efficiency = read<double>(j, "comp_efficiency", where);
    v.fairness = read<double>(j, "fairness", where);
    v.personalization = read<double>(j, "personalization", where);
    as_format_error(where, [&] {
        v.validate();
        return 0;
    });
    return v;
}

SeedRun run_from_json(const json& j, const std::string& where) {
    SeedRun r;
    r.seed = read<std::uint64_t>(j, "seed", where);
    r.completed = read<bool>(j, "completed", where);
    r.error = read<std::string>(j, "error", where);
    r.trajectory.rounds = read<std::vector<int>>(j, "rounds", where);
    r.trajectory.mean_accuracy = read<std::vector<double>>(j, "mean_accuracy", where);
    r.trajectory.cumulative_cost = read<std::vector<double>>(j, "cumulative_cost", where);
    r.trajectory.cumulative_wall_clock = read<std::vector<double>>(j, "cumulative_wall_clock", where);
    r.final_client_accuracies = read<std::vector<double>>(j, "final_client_accuracies", where);
    r.wall_clock_seconds = read<double>(j, "wall_clock_seconds", where);
    const std::size_t n = r.trajectory.rounds.size();
    if (r.trajectory.mean_accuracy.size() != n || r.trajectory.cumulative_cost.size() != n ||
        r.trajectory.cumulative_wall_clock.size() != n)
        throw FormatError(where + ": trajectory arrays differ in length");
    return r;
}

Measurements measurements_from_json(const json& j, const std::string& where) {
    Measurements m;
    m.rounds_to_target = read<std::vector<int>>(j, "rounds_to_target", where);
    m.accuracy_index = read<std::vector<double>>(j, "accuracy_index", where);
    m.convergence_index = read<std::vector<double>>(j, "convergence_index", where);
    m.tta = read<std::vector<double>>(j, "tta", where);
    m.entropy = read<std::vector<double>>(j, "entropy", where);
    m.mpi = read<std::vector<double>>(j, "mpi", where);
    const json& mean = field(j, "mean", where);
    const std::string mw = where + ".mean";
    m.mean_accuracy_index = read<double>(mean, "accuracy_index", mw);
    m.mean_convergence_index = read<double>(mean, "convergence_index", mw);
    m.mean_tta = read<double>(mean, "tta", mw);
    m.mean_entropy = read<double>(mean, "entropy", mw);
    m.mean_mpi = read_optional(mean, "mpi", mw);
    return m;
}

ComponentIndices components_from_json(const json& j, const std::string& where) {
    ComponentIndices c;
    c.accuracy = read<double>(j, "accuracy", where);
    c.convergence = read<double>(j, "convergence", where);
    c.comp_efficiency = read<double>(j, "comp_efficiency", where);
    c.fairness = read<double>(j, "fairness", where);
    c.personalization = j.contains("personalization") ? read_optional(j, "personalization", where) : std::nullopt;
    for (double v : {c.accuracy, c.convergence, c.comp_efficiency, c.fairness, c.personalization.value_or(0.0)})
        if (!(v >= 0.0 && v <= 1.0)) throw FormatError(where + ": component index outside [0, 1]");
    return c;
}

}  // namespace

json to_json(const Report& report) {
    json algos = json::array();
    for (const auto& e : report.algorithms) {
        json runs = json::array();
        for (const auto& r : e.runs) runs.push_back(run_to_json(r));
        algos.push_back({{"name", e.name},
                         {"strategy", strategy_to_json(e.strategy)},
                         {"personalizer", personalizer_to_json(e.personalizer)},
                         {"base", e.base.empty() ? json(nullptr) : json(e.base)},
                         {"status", e.completed() ? "completed" : "diverged"},
                         {"note", e.note},
                         {"runs", runs},
                         {"measurements", e.measurements ? measurements_to_json(*e.measurements) : json(nullptr)},
                         {"components", e.components ? components_to_json(*e.components) : json(nullptr)},
                         {"hem_score", optional_number(e.hem_score)},
                         {"band", e.band ? json(to_string(*e.band)) : json(nullptr)}});
    }
    return {{"schema_version", report.schema_version},
            {"config_fingerprint", report.fingerprint},
            {"metrics",
             {{"target_accuracy", report.metrics.target_accuracy},
              {"round_budget", report.metrics.round_budget},
              {"accuracy_window", report.metrics.accuracy_window},
              {"tta_clock", to_string(report.metrics.tta_clock)},
              {"entropy", to_string(report.metrics.entropy)}}},
            {"importance", importance_to_json(report.importance)},
            {"algorithms", algos},
            {"ranking", report.ranking}};
}

Report report_from_json(const json& doc) {
    if (!doc.is_object()) throw FormatError("report: top level must be an object");
    Report r;
    r.schema_version = read<int>(doc, "schema_version", "report");
    if (r.schema_version != kReportSchemaVersion)
        throw FormatError("report: unsupported schema_version " + std::to_string(r.schema_version) + " (expected " +
                          std::to_string(kReportSchemaVersion) + ")");
    r.fingerprint = read<std::string>(doc, "config_fingerprint", "report");
    const json& m = field(doc, "metrics", "report");
    r.metrics.target_accuracy = read<double>(m, "target_accuracy", "report.metrics");
    r.metrics.round_budget = read<int>(m, "round_budget", "report.metrics");
    r.metrics.accuracy_window = read<int>(m, "accuracy_window", "report.metrics");
    as_format_error("report.metrics", [&] {
        r.metrics.tta_clock = tta_clock_from_string(read<std::string>(m, "tta_clock", "report.metrics"));
        r.metrics.entropy = entropy_mode_from_string(read<std::string>(m, "entropy", "report.metrics"));
        r.metrics.validate();
        return 0;
    });
    r.importance = importance_from_json(field(doc, "importance", "report"), "report.importance");

    const json& algos = field(doc, "algorithms", "report");
    if (!algos.is_array() || algos.empty()) throw FormatError("report.algorithms must be a non-empty array");
    for (std::size_t i = 0; i < algos.size(); ++i) {
        const json& a = algos[i];
        const std::string where = "report.algorithms[" + std::to_string(i) + "]";
        AlgorithmEntry e;
        e.name = read<std::string>(a, "name", where);
        as_format_error(where, [&] {
            const json& s = field(a, "strategy", where);
            e.strategy.kind = strategy_kind_from_string(read<std::string>(s, "kind", where + ".strategy"));
            e.strategy.feddyn_alpha = read<double>(s, "feddyn_alpha", where + ".strategy");
            e.strategy.server_lr = read<double>(s, "server_lr", where + ".strategy");
            const json& p = field(a, "personalizer", where);
            e.personalizer.kind = personalizer_kind_from_string(read<std::string>(p, "kind", where + ".personalizer"));
            e.personalizer.inner_lr = read<double>(p, "inner_lr", where + ".personalizer");
            e.personalizer.inner_steps = read<int>(p, "inner_steps", where + ".personalizer");
            e.personalizer.support_fraction = read<double>(p, "support_fraction", where + ".personalizer");
            e.personalizer.mode = maml_mode_from_string(read<std::string>(p, "mode", where + ".personalizer"));
            return 0;
        });
        const json& base = field(a, "base", where);
        e.base = base.is_null() ? "" : read<std::string>(a, "base", where);
        e.note = read<std::string>(a, "note", where);
        const json& runs = field(a, "runs", where);
        if (!runs.is_array()) throw FormatError(where + ".runs must be an array");
        for (std::size_t k = 0; k < runs.size(); ++k)
            e.runs.push_back(run_from_json(runs[k], where + ".runs[" + std::to_string(k) + "]"));
        const json& meas = field(a, "measurements", where);
        if (!meas.is_null()) e.measurements = measurements_from_json(meas, where + ".measurements");
        const json& comp = field(a, "components", where);
        if (!comp.is_null()) e.components = components_from_json(comp, where + ".components");
        e.hem_score = read_optional(a, "hem_score", where);
        const json& b = field(a, "band", where);
        if (!b.is_null()) e.band = as_format_error(where, [&] { return band_from_string(read<std::string>(a, "band", where)); });
        r.algorithms.push_back(std::move(e));
    }
    r.ranking = read<std::vector<std::string>>(doc, "ranking", "report");
    return r;
}

Report read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open report " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("report " + path.string() + " is not valid JSON: " + e.what());
    }
    return report_from_json(doc);
}

void write_report_atomic(const Report& report, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << to_json(report).dump(2) << '\n';
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::string> verify_report(const json& doc) {
    std::vector<std::string> problems;
    Report stored;
    try {
        stored = report_from_json(doc);
    } catch (const std::exception& e) {
        return {e.what()};
    }
    Report recomputed = stored;
    try {
        derive_components(recomputed);
        score(recomputed, stored.importance);
    } catch (const std::exception& e) {
        return {std::string("recomputation failed: ") + e.what()};
    }
    const json expected = to_json(recomputed);
    for (const auto& op : json::diff(doc, expected))
        problems.push_back(op["path"].get<std::string>() + ": stored value differs from recomputation");
    return problems;
}

}  // namespace hemfl
