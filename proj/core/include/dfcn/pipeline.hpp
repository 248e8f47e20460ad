#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfcn/data.hpp"
#include "dfcn/models.hpp"
#include "dfcn/stats.hpp"

namespace dfcn {

struct ExperimentConfig {
    std::filesystem::path train_csv;
    std::filesystem::path test_csv;
    std::filesystem::path out_dir = "dfcn-out";
    std::uint64_t seed = 2021;

    std::vector<double> imp_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<ModelKind> kinds{ModelKind::DFCN, ModelKind::FCN, ModelKind::DAE, ModelKind::SDAE, ModelKind::RF};

    double lambda = 1.0;
    nn::ReconMode recon_mode = nn::ReconMode::Intersection;
    // input_dim is replaced by the dataset width.
    nn::Architecture wide = nn::wide_architecture(28);
    nn::Architecture bottleneck = nn::bottleneck_architecture(28);
    TrainingConfig training;
    ForestConfig forest;

    std::size_t validation_size = 102;
    bool stratify_by_view = true;
    // Unset seeds derive from `seed`.
    std::optional<std::uint64_t> split_seed;
    std::optional<std::uint64_t> validation_plan_seed;
    std::optional<std::uint64_t> test_plan_seed;
    std::filesystem::path test_plan_file;  // reuse a saved plan instead of generating one

    std::map<std::string, std::vector<std::string>> subsets{{"A", subset_a_names()}, {"B", subset_b_names()}};

    // Input CSVs already hold normalized values; skip z-scoring.
    bool prenormalized = false;
    std::vector<std::string> features = default_feature_names();
    std::vector<std::string> missing_tokens{"NA", "NaN"};
    std::size_t jobs = 1;
    bool write_normalized_data = true;

    std::uint64_t resolved_split_seed() const;
    std::uint64_t resolved_validation_plan_seed() const;
    std::uint64_t resolved_test_plan_seed() const;

    // Spec of one sweep cell (seed from sweep_seed).
    ModelSpec spec_for(ModelKind kind, double imp) const;

    // Throws ConfigError. Files are checked only when the command needs them.
    void validate(bool need_train, bool need_test) const;

    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys are an error.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

// Training data after loading, normalization and the validation split.
struct PreparedTraining {
    Normalizer normalizer;
    Dataset train;       // normalized, validation records removed
    Dataset validation;  // normalized
};

PreparedTraining prepare_training(const ExperimentConfig& config);
Dataset load_test_set(const ExperimentConfig& config);

struct SweepRow {
    ModelKind kind = ModelKind::DFCN;
    double imp = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> masked_val_auc;
    std::string status = "ok";  // or the failure message
    std::string checkpoint;     // relative to out_dir
};

struct SweepResult {
    std::vector<SweepRow> rows;  // kind-major, grid order
    // kind -> row index of the optimum / of IMP 0 (when present)
    std::map<std::string, std::size_t> optimal;
    std::map<std::string, std::size_t> nim;
};

// Writes config.json, data/, plans/validation_plan.json, checkpoints/,
// sweep/manifest.json, sweep/table.csv and sweep/selection.json.
SweepResult cmd_sweep(const ExperimentConfig& config);

// name -> checkpoint path. Empty means the sweep selection (optimal and NIM
// model per kind).
using CheckpointList = std::vector<std::pair<std::string, std::filesystem::path>>;

CheckpointList selected_checkpoints(const std::filesystem::path& out_dir, bool include_nim);

// Writes ablation/per_n_auc.csv, ablation/significance.json,
// ablation/worse_counts.csv, ablation/summary.json and ablation/scores.csv.
stats::SignificanceReport cmd_ablation(const ExperimentConfig& config, const CheckpointList& checkpoints = {});

// subset: a key of config.subsets or "all". Writes subset/<name>/.
stats::SubsetTable cmd_subset(const ExperimentConfig& config, const std::string& subset, bool retrain,
                              const CheckpointList& checkpoints = {});

// Recomputes plot-ready series from the score dumps into report/. Returns
// the files written.
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& out_dir);

struct GradCheckSummary {
    std::size_t configurations = 0;
    std::size_t failures = 0;
    double max_relative_error = 0.0;
    std::vector<std::string> lines;
};

// Random architectures, samples, eligible sets and lambdas.
GradCheckSummary cmd_gradcheck(std::size_t configurations, std::uint64_t seed, double tolerance = 1e-5);

// Synthetic cohort CSV for a named profile (bhh, jbh).
Dataset cmd_gen_data(const std::string& profile, std::uint64_t seed, const std::filesystem::path& out_csv);

}  // namespace dfcn
