#include "hemfl/personalization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hemfl/errors.hpp"
#include "hemfl/rng.hpp"

namespace hemfl {

std::string to_string(PersonalizerKind kind) {
    switch (kind) {
        case PersonalizerKind::none: return "none";
        case PersonalizerKind::maml: return "maml";
        case PersonalizerKind::proto: return "proto";
    }
    return "?";
}

PersonalizerKind personalizer_kind_from_string(const std::string& name) {
    if (name == "none") return PersonalizerKind::none;
    if (name == "maml") return PersonalizerKind::maml;
    if (name == "proto") return PersonalizerKind::proto;
    throw ArgumentError("unknown personalizer kind '" + name + "'");
}

std::string to_string(MamlMode mode) { return mode == MamlMode::train ? "train" : "eval"; }

MamlMode maml_mode_from_string(const std::string& name) {
    if (name == "train") return MamlMode::train;
    if (name == "eval") return MamlMode::eval;
    throw ArgumentError("unknown maml mode '" + name + "'");
}

void PersonalizerConfig::validate() const {
    if (kind == PersonalizerKind::none) return;
    if (!(support_fraction > 0.0 && support_fraction < 1.0))
        throw ArgumentError("personalizer: support_fraction must lie in (0, 1)");
    if (kind == PersonalizerKind::maml) {
        if (!(inner_lr >= 0.0) || !std::isfinite(inner_lr)) throw ArgumentError("personalizer: inner_lr must be >= 0");
        if (inner_steps < 0) throw ArgumentError("personalizer: inner_steps must be >= 0");
    }
}

SupportQuerySplit split_support_query(const Dataset& train, std::span<const int> class_list, double support_fraction,
                                      std::uint64_t seed) {
    if (!(support_fraction > 0.0 && support_fraction < 1.0))
        throw ArgumentError("split_support_query: support_fraction must lie in (0, 1)");
    auto by_class = train.rows_by_class();
    std::vector<std::size_t> support_rows, query_rows;
    std::vector<bool> listed(by_class.size(), false);
    for (int c : class_list) {
        if (c < 0 || c >= train.num_classes()) throw ArgumentError("split_support_query: class id out of range");
        listed[static_cast<std::size_t>(c)] = true;
        auto& rows = by_class[static_cast<std::size_t>(c)];
        if (rows.empty())
            throw PreconditionError("client has no training rows of class " + std::to_string(c));
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(rows);
        auto take = static_cast<std::size_t>(std::lround(support_fraction * static_cast<double>(rows.size())));
        take = std::clamp<std::size_t>(take, 1, rows.size() > 1 ? rows.size() - 1 : 1);
        support_rows.insert(support_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
        query_rows.insert(query_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    }
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (!listed[c]) query_rows.insert(query_rows.end(), by_class[c].begin(), by_class[c].end());
    std::sort(support_rows.begin(), support_rows.end());
    std::sort(query_rows.begin(), query_rows.end());
    return {train.subset(support_rows), train.subset(query_rows)};
}

std::vector<double> maml_adapt(std::span<const double> params, const ModelSpec& spec, const Dataset& support,
                               double inner_lr, int steps, double weight_decay) {
    if (support.empty()) throw ArgumentError("maml_adapt: empty support set");
    if (steps < 0) throw ArgumentError("maml_adapt: negative step count");
    std::vector<double> theta(params.begin(), params.end());
    if (steps == 0) return theta;
    std::vector<std::size_t> rows(support.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    for (int s = 0; s < steps; ++s) {
        const auto lg = loss_and_grad(theta, spec, support, rows, weight_decay);
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= inner_lr * lg.grad[k];
    }
    for (double v : theta)
        if (!std::isfinite(v)) throw NumericError("maml_adapt diverged");
    return theta;
}

LocalObjective maml_objective(const ModelSpec& spec, const Dataset& train, const Dataset& support, double inner_lr,
                              double weight_decay) {
    if (support.empty()) throw ArgumentError("maml_objective: empty support set");
    return [&spec, &train, &support, inner_lr, weight_decay](std::span<const double> theta,
                                                             std::span<const std::size_t> rows) {
        if (inner_lr == 0.0) {
            auto lg = loss_and_grad(theta, spec, train, rows, weight_decay);
            return ObjectiveEval{lg.loss, std::move(lg.grad), static_cast<double>(rows.size())};
        }
        std::vector<std::size_t> support_rows(support.size());
        std::iota(support_rows.begin(), support_rows.end(), std::size_t{0});
        const auto inner = loss_and_grad(theta, spec, support, support_rows, weight_decay);
        std::vector<double> adapted(theta.begin(), theta.end());
        for (std::size_t k = 0; k < adapted.size(); ++k) adapted[k] -= inner_lr * inner.grad[k];
        auto outer = loss_and_grad(adapted, spec, train, rows, weight_decay);
        return ObjectiveEval{outer.loss, std::move(outer.grad), static_cast<double>(support.size() + rows.size())};
    };
}

LocalRun maml_client_update(std::span<const double> w, const ModelSpec& spec, const Dataset& train,
                            const Dataset& support, const SgdConfig& cfg, double inner_lr, std::uint64_t seed) {
    return run_local_sgd(w, train.size(), cfg, seed, maml_objective(spec, train, support, inner_lr, cfg.weight_decay));
}

ProtoClassifier::ProtoClassifier(std::vector<double> params, ModelSpec spec, std::vector<int> classes,
                                 std::vector<std::vector<double>> prototypes)
    : params_(std::move(params)), spec_(spec), classes_(std::move(classes)), prototypes_(std::move(prototypes)) {
    if (classes_.empty() || classes_.size() != prototypes_.size())
        throw ArgumentError("ProtoClassifier: need one prototype per class");
    if (!std::is_sorted(classes_.begin(), classes_.end())) throw ArgumentError("ProtoClassifier: classes not sorted");
}

int ProtoClassifier::predict(std::span<const double> x) const {
    const auto z = embed(params_, spec_, x);
    std::size_t best = 0;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        double dist = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double diff = z[j] - prototypes_[i][j];
            dist += diff * diff;
        }
        if (i == 0 || dist < best_dist) {
            best = i;
            best_dist = dist;
        }
    }
    return classes_[best];
}

double ProtoClassifier::accuracy(const Dataset& test) const {
    if (test.empty()) throw ArgumentError("ProtoClassifier::accuracy: empty test set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (predict(test.row(i)) == test.label(i)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

ProtoClassifier proto_adapt(std::span<const double> params, const ModelSpec& spec, const Dataset& support,
                            std::span<const int> class_list) {
    std::vector<int> classes(class_list.begin(), class_list.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const std::size_t dim = embedding_dim(spec);
    std::vector<std::vector<double>> protos(classes.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(classes.size(), 0);
    for (std::size_t i = 0; i < support.size(); ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), support.label(i));
        if (it == classes.end() || *it != support.label(i)) continue;
        const auto slot = static_cast<std::size_t>(it - classes.begin());
        const auto z = embed(params, spec, support.row(i));
        for (std::size_t j = 0; j < dim; ++j) protos[slot][j] += z[j];
        ++counts[slot];
    }
    for (std::size_t s = 0; s < classes.size(); ++s) {
        if (counts[s] == 0)
            throw PreconditionError("proto_adapt: support has no example of class " + std::to_string(classes[s]));
        for (double& v : protos[s]) v /= static_cast<double>(counts[s]);
    }
    return ProtoClassifier(std::vector<double>(params.begin(), params.end()), spec, std::move(classes),
                           std::move(protos));
}

double personalized_accuracy(const PersonalizerConfig& cfg, std::span<const double> params, const ModelSpec& spec,
                             const SupportQuerySplit& split, std::span<const int> class_list, const Dataset& test,
                             double weight_decay) {
    switch (cfg.kind) {
        case PersonalizerKind::none: return evaluate(params, spec, test);
        case PersonalizerKind::maml:
            return evaluate(maml_adapt(params, spec, split.support, cfg.inner_lr, cfg.inner_steps, weight_decay), spec,
                            test);
        case PersonalizerKind::proto: return proto_adapt(params, spec, split.support, class_list).accuracy(test);
    }
    throw ArgumentError("unknown personalizer");
}

double compute_mpi(std::span<const double> pfl_accuracies, std::span<const double> base_accuracies) {
    if (pfl_accuracies.size() != base_accuracies.size())
        throw ArgumentError("compute_mpi: accuracy lists differ in length");
    std::vector<double> gains;
    for (std::size_t i = 0; i < base_accuracies.size(); ++i) {
        const double base = base_accuracies[i];
        if (base < 0.01) continue;
        gains.push_back(100.0 * (pfl_accuracies[i] - base) / base);
    }
    if (gains.empty()) throw UndefinedMpiError("compute_mpi: every client has base accuracy below 0.01");
    std::sort(gains.begin(), gains.end());
    const std::size_t mid = gains.size() / 2;
    return gains.size() % 2 == 1 ? gains[mid] : 0.5 * (gains[mid - 1] + gains[mid]);
}

}  // namespace hemfl
