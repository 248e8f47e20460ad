#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dfcn/data.hpp"
#include "dfcn/rng.hpp"

namespace dfcn {

// A record after masking. `target` keeps the pre-mask (normalized) values so
// the reconstruction term can compare against them.
struct MaskedSample {
    std::vector<double> values;
    std::vector<double> target;
    Flags train_mask;  // 1 = masked by this pass (independent of `known`)
    Flags known;
    int label = 0;
    std::optional<std::size_t> combo_id;
    std::size_t combo_length = 0;
    std::size_t record_index = 0;

    std::size_t n_features() const { return values.size(); }
    // Positions that are both observed and masked.
    std::size_t eligible_count() const;
};

// Each feature is masked independently with probability `imp`. Masked and
// unknown positions hold 0.
MaskedSample apply_random_mask(const FeatureRecord& record, double imp, Rng& rng);

// No masking: values as-is, train_mask all clear.
MaskedSample unmasked(const FeatureRecord& record);

struct InputCombination {
    std::vector<std::size_t> kept;  // sorted, unique; every other input is masked

    std::size_t length() const { return kept.size(); }
    bool operator==(const InputCombination&) const = default;
};

enum class PlanMode { Validation, Test };

std::string to_string(PlanMode mode);
PlanMode plan_mode_from_string(const std::string& name);

struct CombinationPlan {
    std::size_t n_features = 0;
    PlanMode mode = PlanMode::Validation;
    std::uint64_t seed = 0;
    std::vector<InputCombination> combinations;  // grouped by ascending length

    std::map<std::size_t, std::size_t> per_length_counts() const;
    std::size_t size() const { return combinations.size(); }

    nlohmann::json to_json() const;
    static CombinationPlan from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static CombinationPlan load(const std::filesystem::path& path);
};

// Requested number of combinations of length k before capping at C(n, k):
// validation = every singleton, the full set, 15 per length in between;
// test = 1000 per length.
std::size_t requested_per_length(std::size_t n_features, std::size_t length, PlanMode mode);

// Binomial coefficient, saturating at SIZE_MAX.
std::size_t binomial(std::size_t n, std::size_t k);

// Lengths where C(n, k) <= request are enumerated exhaustively in
// lexicographic order; otherwise distinct combinations are drawn uniformly
// without replacement.
CombinationPlan generate_combination_plan(std::size_t n_features, PlanMode mode, std::uint64_t seed);

// Plan restricted to a feature subset: combinations are generated over the
// subset's positions and mapped back to dataset indices.
CombinationPlan generate_subset_plan(const InputSubset& subset, std::size_t n_features, PlanMode mode,
                                     std::uint64_t seed);

// Records x combinations, stored as index pairs and materialized on demand
// (the full test set runs to millions of samples). Entries are ordered
// combination-major, then record order; a pair is dropped when none of the
// kept inputs is observed for that record.
class MaskedEvalSet {
public:
    struct Entry {
        std::uint32_t record;
        std::uint32_t combo;
    };

    MaskedEvalSet(Dataset dataset, CombinationPlan plan, std::vector<Entry> entries);

    std::size_t size() const { return entries_.size(); }
    std::size_t n_features() const { return dataset_.n_features(); }
    std::size_t positives() const { return positives_; }

    const Entry& entry(std::size_t i) const { return entries_[i]; }
    std::span<const Entry> entries() const { return entries_; }
    int label(std::size_t i) const { return dataset_.records[entries_[i].record].label; }
    std::size_t length(std::size_t i) const { return plan_.combinations[entries_[i].combo].length(); }

    // Writes the masked input vector for entry i into `out` (n_features long).
    void fill_inputs(std::size_t i, std::span<double> out) const;
    MaskedSample sample(std::size_t i) const;
    std::vector<MaskedSample> materialize() const;

    const Dataset& dataset() const { return dataset_; }
    const CombinationPlan& plan() const { return plan_; }

    std::vector<int> labels() const;
    std::vector<std::size_t> lengths() const;

private:
    Dataset dataset_;
    CombinationPlan plan_;
    std::vector<Entry> entries_;
    // combo index -> per-feature kept flag
    std::vector<Flags> kept_flags_;
    std::size_t positives_ = 0;
};

MaskedEvalSet build_masked_eval_set(const Dataset& ds, const CombinationPlan& plan);

}  // namespace dfcn
