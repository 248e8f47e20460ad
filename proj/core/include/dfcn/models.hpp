#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfcn/data.hpp"
#include "dfcn/forest.hpp"
#include "dfcn/masking.hpp"
#include "dfcn/nn.hpp"

namespace dfcn {

enum class ModelKind { DFCN, FCN, DAE, SDAE, RF };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
const std::vector<ModelKind>& all_model_kinds();
bool is_network(ModelKind kind);

struct TrainingConfig {
    std::size_t epochs = 150;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    // DAE reconstruction pre-training epochs; 0 = same as `epochs`.
    std::size_t pretrain_epochs = 0;
    // Number of independently masked copies of the validation set used for
    // epoch-level checkpoint selection.
    std::size_t val_mask_copies = 4;
};

// How RF bootstrap samples are masked: a fresh mask for every bootstrap draw,
// or one mask per original sample shared by all trees.
enum class RfMasking { PerDraw, PerSample };

struct ForestConfig {
    std::size_t trees = 500;
    forest::TreeConfig tree;
    RfMasking masking = RfMasking::PerDraw;
};

struct ModelSpec {
    ModelKind kind = ModelKind::DFCN;
    double imp = 0.0;  // 0 = no input masking
    double lambda = 1.0;
    nn::ReconMode recon_mode = nn::ReconMode::Intersection;
    nn::Architecture architecture;
    TrainingConfig training;
    ForestConfig forest;
    std::uint64_t seed = 0;

    // Throws ConfigError when imp is outside [0, 1] or a bottleneck kind has
    // no bottleneck.
    void validate() const;

    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& j);
};

// Defaults per kind: wide network for DFCN/FCN, bottleneck for DAE/SDAE.
ModelSpec default_spec(ModelKind kind, std::size_t n_features, double imp = 0.0, std::uint64_t seed = 0);

struct EpochLog {
    std::size_t phase = 0;  // 1 = DAE pre-training, 2 = classifier training (or single phase)
    std::size_t epoch = 0;
    double classification = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
    std::optional<double> val_auc;
};

struct TrainedModel {
    ModelSpec spec;
    std::variant<nn::NetworkParams, forest::Forest> body;
    Normalizer normalizer;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;

    const nn::NetworkParams& network() const { return std::get<nn::NetworkParams>(body); }
    const forest::Forest& forest() const { return std::get<forest::Forest>(body); }
    bool is_forest() const { return std::holds_alternative<forest::Forest>(body); }
    std::size_t n_features() const;
};

// Observer called after every optimizer step with (phase, global step, params).
using StepObserver = std::function<void(std::size_t, std::size_t, const nn::NetworkParams&)>;

struct TrainHooks {
    StepObserver on_step;
};

// Both datasets must already be normalized; `normalizer` is stored in the model.
TrainedModel train_dfcn(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                        const Normalizer& normalizer = {}, const TrainHooks& hooks = {});
TrainedModel train_fcn(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                       const Normalizer& normalizer = {}, const TrainHooks& hooks = {});
TrainedModel train_dae(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                       const Normalizer& normalizer = {}, const TrainHooks& hooks = {});
TrainedModel train_sdae(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                        const Normalizer& normalizer = {}, const TrainHooks& hooks = {});
TrainedModel train_rf(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                      const Normalizer& normalizer = {});

// Dispatches on spec.kind.
TrainedModel train_model(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                         const Normalizer& normalizer = {}, const TrainHooks& hooks = {});

// Positive-class probability for one (normalized, masked) input vector.
double predict(const TrainedModel& model, std::span<const double> values);
double predict(const TrainedModel& model, const MaskedSample& sample);

// Scores for many samples at once.
std::vector<double> predict_batch(const TrainedModel& model, std::span<const MaskedSample> samples);

struct ImpResult {
    double imp = 0.0;
    double auc = 0.0;
    std::uint64_t seed = 0;
};

struct ImpSelection {
    std::optional<TrainedModel> best;
    std::size_t best_index = 0;
    std::vector<ImpResult> table;  // one row per grid value, grid order
    std::string tie_policy = "lowest-imp";
};

// Trains one model per IMP (seed derived from base.seed and the grid value),
// scores each on the masked validation set and keeps the highest AUC. Ties go
// to the lower IMP. `jobs` bounds the worker threads (0 = hardware). A failed
// training run throws TrainingError naming the IMP.
ImpSelection select_best_imp(const ModelSpec& base, std::span<const double> imp_grid, const Dataset& train,
                             const Dataset& val, const MaskedEvalSet& masked_val, const Normalizer& normalizer = {},
                             std::size_t jobs = 1);

// Seed used for a (kind, imp) sweep cell.
std::uint64_t sweep_seed(std::uint64_t master, ModelKind kind, double imp);

}  // namespace dfcn
