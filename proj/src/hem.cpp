#include "hemfl/hem.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "hemfl/errors.hpp"

namespace hemfl {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

void require_level(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw ArgumentError(std::string("importance for ") + name + " must be a finite non-negative number");
}

}  // namespace

double parse_importance_level(std::string_view text) {
    text = trim(text);
    const std::string name = lower(text);
    if (name == "low") return level::low;
    if (name == "moderate") return level::moderate;
    if (name == "high") return level::high;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ArgumentError("importance level '" + std::string(text) + "' is neither Low/Moderate/High nor a number");
    require_level(value, "level");
    return value;
}

void ImportanceVector::validate() const {
    require_level(accuracy, "accuracy");
    require_level(convergence, "convergence");
    require_level(comp_efficiency, "comp_efficiency");
    require_level(fairness, "fairness");
    require_level(personalization, "personalization");
    if (accuracy + convergence + comp_efficiency + fairness + personalization <= 0.0)
        throw ArgumentError("importance vector has no positive level");
}

std::string to_string(UseCase uc) {
    switch (uc) {
        case UseCase::iot: return "iot";
        case UseCase::smartphone: return "smartphone";
        case UseCase::institution: return "institution";
    }
    return "?";
}

UseCase use_case_from_string(const std::string& name) {
    const auto n = lower(name);
    if (n == "iot") return UseCase::iot;
    if (n == "smartphone") return UseCase::smartphone;
    if (n == "institution") return UseCase::institution;
    throw ArgumentError("unknown use case '" + name + "' (expected iot, smartphone or institution)");
}

ImportanceVector preset(UseCase uc, double personalization) {
    using namespace level;
    switch (uc) {
        case UseCase::iot: return {"iot", high, low, high, high, personalization};
        case UseCase::smartphone: return {"smartphone", moderate, high, high, moderate, personalization};
        case UseCase::institution: return {"institution", high, low, low, high, personalization};
    }
    throw ArgumentError("unknown use case");
}

ImportanceVector parse_importance_overrides(std::string_view spec, ImportanceVector base) {
    bool changed = false;
    while (!spec.empty()) {
        const auto comma = spec.find(',');
        const std::string_view item = trim(spec.substr(0, comma));
        spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw ArgumentError("importance entry '" + std::string(item) + "' lacks '='");
        const std::string key = lower(trim(item.substr(0, eq)));
        const double value = parse_importance_level(item.substr(eq + 1));
        if (key == "accuracy") base.accuracy = value;
        else if (key == "convergence") base.convergence = value;
        else if (key == "comp_efficiency") base.comp_efficiency = value;
        else if (key == "fairness") base.fairness = value;
        else if (key == "personalization") base.personalization = value;
        else throw ArgumentError("unknown importance component '" + key + "'");
        changed = true;
    }
    if (changed) base.use_case = "custom";
    return base;
}

double compose_hem(const ComponentIndices& indices, const ImportanceVector& importance) {
    importance.validate();
    const auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(std::string("component index ") + name + " outside [0, 1]");
    };
    check(indices.accuracy, "accuracy");
    check(indices.convergence, "convergence");
    check(indices.comp_efficiency, "comp_efficiency");
    check(indices.fairness, "fairness");

    double weighted = indices.accuracy * importance.accuracy + indices.convergence * importance.convergence +
                      indices.comp_efficiency * importance.comp_efficiency + indices.fairness * importance.fairness;
    double total = importance.accuracy + importance.convergence + importance.comp_efficiency + importance.fairness;
    if (indices.personalization) {
        check(*indices.personalization, "personalization");
        weighted += *indices.personalization * importance.personalization;
        total += importance.personalization;
    }
    if (total <= 0.0) throw ArgumentError("compose_hem: all applicable importance levels are zero");
    return weighted / total;
}

std::string to_string(Band b) {
    switch (b) {
        case Band::excellent: return "Excellent";
        case Band::good: return "Good";
        case Band::acceptable: return "Acceptable";
        case Band::low: return "Low";
    }
    return "?";
}

Band band_from_string(const std::string& name) {
    for (Band b : {Band::excellent, Band::good, Band::acceptable, Band::low})
        if (to_string(b) == name) return b;
    throw ArgumentError("unknown band '" + name + "'");
}

Band band(double hem) {
    if (!(hem >= 0.0 && hem <= 1.0)) throw ArgumentError("band: HEM score outside [0, 1]");
    if (hem > 0.8) return Band::excellent;
    if (hem >= 0.7) return Band::good;
    if (hem >= 0.5) return Band::acceptable;
    return Band::low;
}

std::vector<std::string> rank(const ScoreMap& scores) {
    std::vector<std::pair<std::string, double>> items(scores.begin(), scores.end());
    // map iteration is already lexicographic, so a stable sort keeps name order on ties
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [name, score] : items) out.push_back(std::move(name));
    return out;
}

}  // namespace hemfl
