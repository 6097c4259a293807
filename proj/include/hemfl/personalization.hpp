#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hemfl/data.hpp"
#include "hemfl/model.hpp"

namespace hemfl {

enum class PersonalizerKind { none, maml, proto };
/// When MAML adaptation enters: inside local training (meta-gradient) plus at evaluation, or at evaluation only.
enum class MamlMode { train, eval };

std::string to_string(PersonalizerKind kind);
PersonalizerKind personalizer_kind_from_string(const std::string& name);
std::string to_string(MamlMode mode);
MamlMode maml_mode_from_string(const std::string& name);

struct PersonalizerConfig {
    PersonalizerKind kind = PersonalizerKind::none;
    double inner_lr = 0.05;        // maml
    int inner_steps = 5;           // maml, evaluation-time adaptation steps
    double support_fraction = 0.5;
    MamlMode mode = MamlMode::train;

    void validate() const;
    bool trains_with_meta_gradient() const {
        return kind == PersonalizerKind::maml && mode == MamlMode::train;
    }
};

struct SupportQuerySplit {
    Dataset support;
    Dataset query;
};

/// Stratified per-class split of a client's training shard.
///
/// Each listed class contributes max(1, round(fraction * count)) shuffled
/// rows to support, keeping at least one for query when the class has two or
/// more rows. Throws PreconditionError if a listed class has no rows.
SupportQuerySplit split_support_query(const Dataset& train, std::span<const int> class_list, double support_fraction,
                                      std::uint64_t seed);

/// First-order adaptation: `steps` full-batch gradient steps on the support loss.
std::vector<double> maml_adapt(std::span<const double> params, const ModelSpec& spec, const Dataset& support,
                               double inner_lr, int steps, double weight_decay = 0.0);

/// First-order meta-objective: the gradient of the batch loss at theta - inner_lr * grad L_support(theta).
/// Costs |support| + |batch| units per call, or |batch| when inner_lr is zero.
LocalObjective maml_objective(const ModelSpec& spec, const Dataset& train, const Dataset& support, double inner_lr,
                              double weight_decay);

/// Meta-training client update: E epochs of mini-batch steps w <- w - lr * grad L_batch(w - inner_lr * grad L_support(w)).
LocalRun maml_client_update(std::span<const double> w, const ModelSpec& spec, const Dataset& train,
                            const Dataset& support, const SgdConfig& cfg, double inner_lr, std::uint64_t seed);

/// Nearest-prototype head over the model's penultimate representation.
class ProtoClassifier {
public:
    ProtoClassifier(std::vector<double> params, ModelSpec spec, std::vector<int> classes,
                    std::vector<std::vector<double>> prototypes);

    /// argmin_c ||embed(x) - p_c||^2, ties to the lowest class id.
    int predict(std::span<const double> x) const;
    double accuracy(const Dataset& test) const;

    std::span<const int> classes() const { return classes_; }
    const std::vector<double>& prototype(std::size_t i) const { return prototypes_[i]; }

private:
    std::vector<double> params_;
    ModelSpec spec_;
    std::vector<int> classes_;  // ascending
    std::vector<std::vector<double>> prototypes_;
};

/// Prototypes are the mean support embedding per class in class_list.
ProtoClassifier proto_adapt(std::span<const double> params, const ModelSpec& spec, const Dataset& support,
                            std::span<const int> class_list);

/// Accuracy of the model a client deploys under the given personalizer.
double personalized_accuracy(const PersonalizerConfig& cfg, std::span<const double> params, const ModelSpec& spec,
                             const SupportQuerySplit& split, std::span<const int> class_list, const Dataset& test,
                             double weight_decay = 0.0);

/// Median over clients of 100 * (pfl - base) / base, skipping clients with base < 0.01.
double compute_mpi(std::span<const double> pfl_accuracies, std::span<const double> base_accuracies);

}  // namespace hemfl
