#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dfcn/masking.hpp"
#include "dfcn/models.hpp"
#include "dfcn/stats.hpp"

namespace dfcn {

// Runs fn(i) for i in [0, n) on at most `jobs` threads (0 = hardware
// concurrency). Work is handed out by an atomic counter; the first exception
// thrown is rethrown on the calling thread after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

std::size_t resolve_jobs(std::size_t jobs);

// Positive-class score for every entry of the evaluation set, in entry order.
std::vector<double> score_eval_set(const TrainedModel& model, const MaskedEvalSet& set, std::size_t jobs = 1);

stats::PerNReport evaluate_per_n(const TrainedModel& model, const MaskedEvalSet& set, std::size_t jobs = 1);

stats::SignificanceReport significance_matrix(const std::vector<std::string>& names,
                                              const std::vector<const TrainedModel*>& models,
                                              const MaskedEvalSet& set, std::size_t jobs = 1);

// Complete-case evaluation of each model on `test` restricted to `subset`.
stats::SubsetTable evaluate_subset(const std::vector<std::string>& names,
                                   const std::vector<const TrainedModel*>& models, const Dataset& test,
                                   const InputSubset& subset);

// Raw score dump: one row per evaluation sample, one score column per model.
struct ScoreDump {
    std::vector<std::string> models;
    std::vector<std::string> subject_ids;
    std::vector<std::size_t> combo_ids;
    std::vector<std::size_t> lengths;
    std::vector<int> labels;
    std::vector<std::vector<double>> scores;  // [model][sample]

    std::size_t size() const { return labels.size(); }

    static ScoreDump from_eval_set(const MaskedEvalSet& set, std::vector<std::string> models,
                                   std::vector<std::vector<double>> scores);

    // Columns: sample_id,subject_id,combo_id,length,label,<model...>
    void write_csv(const std::filesystem::path& path) const;
    static ScoreDump read_csv(const std::filesystem::path& path);
};

}  // namespace dfcn
