#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace dfcn {

// Per-feature presence flags. uint8_t rather than vector<bool> so spans work.
using Flags = std::vector<std::uint8_t>;

enum class SplitTag { Train, Validation, Test };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& name);

struct FeatureRecord {
    std::vector<double> values;
    Flags known;
    int label = 0;
    std::string subject_id;
    // Chest x-ray projection ("PA", "AP", ...); empty when the file has no view column.
    std::string view;
};

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<FeatureRecord> records;
    SplitTag split = SplitTag::Train;

    std::size_t n_features() const { return feature_names.size(); }
    std::size_t size() const { return records.size(); }
    std::size_t positives() const;
    std::size_t negatives() const { return size() - positives(); }
    bool has_views() const;

    // Throws DataError if a record's dimensionality, flags or label are off.
    void validate() const;
};

// The 28 inputs: 27 laboratory parameters followed by the chest x-ray score.
const std::vector<std::string>& default_feature_names();

struct LoadOptions {
    // Compared case-insensitively after trimming whitespace. The empty cell is
    // always treated as missing.
    std::vector<std::string> missing_tokens{"NA", "NaN"};
    std::string label_column = "label";
    std::string id_column = "subject_id";
    std::string view_column = "view";
};

// Reads raw (un-normalized) values. Missing cells become known=false, value 0.
// Header columns may appear in any order; every schema name must be present.
Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& schema,
                     const LoadOptions& options = {});

// Per-feature z-score statistics over observed values, population convention
// (divide by n, not n - 1).
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::size_t n_features() const { return mean.size(); }

    // mean 0, std 1: used when the input files already hold normalized values.
    static Normalizer identity(std::size_t n_features);

    nlohmann::json to_json() const;
    static Normalizer from_json(const nlohmann::json& j);
};

Normalizer fit_normalizer(const Dataset& train);

// Observed values -> (v - mean) / std; missing values -> exactly 0.
Dataset apply_normalizer(const Dataset& ds, const Normalizer& normalizer);

// Inverse transform of the observed cells; missing cells stay 0.
Dataset invert_normalizer(const Dataset& ds, const Normalizer& normalizer);

// One quota entry per stratum. An empty view matches every record.
struct StratumQuota {
    std::string view;
    int label = 0;
    std::size_t count = 0;
};

// Label-balanced quotas for n_val records. With stratify_by_view and view
// metadata present, pairs are spread over views: PA/AP data reproduces the
// 43/43 + 8/8 layout for n_val = 102, other view sets are allocated by
// record share (largest remainder).
std::vector<StratumQuota> default_validation_quotas(const Dataset& train, std::size_t n_val,
                                                    bool stratify_by_view);

// Returns (remaining train, validation). Both keep the input order; their
// union is the input and they are disjoint.
std::pair<Dataset, Dataset> split_validation(const Dataset& train, std::uint64_t seed,
                                             const std::vector<StratumQuota>& quotas);

std::pair<Dataset, Dataset> split_validation(const Dataset& train, std::uint64_t seed,
                                             std::size_t n_val, bool stratify_by_view = true);

struct InputSubset {
    std::string name;
    std::vector<std::size_t> indices;  // sorted, unique

    static InputSubset from_names(std::string name, const std::vector<std::string>& members,
                                  const std::vector<std::string>& feature_names);
    static InputSubset all(std::size_t n_features);
};

// Feature names of the two clinical subsets (6 and 7 inputs).
const std::vector<std::string>& subset_a_names();
const std::vector<std::string>& subset_b_names();

// Features outside the subset become known=false with value 0. With
// require_complete, records missing any in-subset feature are dropped.
Dataset restrict_to_subset(const Dataset& ds, const InputSubset& subset, bool require_complete);

// Serializes values (empty cell for missing) plus label/subject_id/view.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);

}  // namespace dfcn
