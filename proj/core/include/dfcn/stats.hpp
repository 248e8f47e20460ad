#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dfcn::stats {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// AUC plus the structural components needed for DeLong's covariance:
//   v10[i] = (#negatives scored below positive i + 1/2 #tied) / n_neg
//   v01[j] = (#positives scored above negative j + 1/2 #tied) / n_pos
// both in input order of their class.
struct RocResult {
    double auc = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    std::vector<RocPoint> points;  // (0,0) .. (1,1), one point per distinct threshold
    std::vector<double> v10;
    std::vector<double> v01;
};

// Mann-Whitney estimator with ties counted 1/2. Throws StatsError unless both
// classes are present.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels, bool with_points = true);

struct DeLongComparison {
    double auc_a = 0.0;
    double auc_b = 0.0;
    double variance = 0.0;  // Var(auc_a - auc_b)
    double z = 0.0;
    double p = 1.0;  // two-sided
};

// Paired test on the same samples. Zero variance with equal AUCs gives p = 1;
// zero variance with different AUCs throws StatsError.
DeLongComparison delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const int> labels);

// Same test from precomputed placements (both computed on identical labels).
DeLongComparison delong_test(const RocResult& a, const RocResult& b);

double two_sided_normal_p(double z);

struct PerNEntry {
    std::size_t length = 0;
    std::size_t samples = 0;
    std::size_t positives = 0;
    double auc = 0.0;
    bool valid = false;  // false when the group has a single class
};

struct PerNReport {
    std::vector<PerNEntry> entries;  // ascending length, only lengths present in the data
    double mean_auc = 0.0;           // over valid entries
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// Groups samples by combination length and computes one AUC per group.
PerNReport evaluate_per_n(std::span<const double> scores, std::span<const int> labels,
                          std::span<const std::size_t> lengths);

struct SignificanceReport {
    std::vector<std::string> models;
    std::vector<std::size_t> lengths;
    // [n][model]
    std::vector<std::vector<double>> auc;
    // [n][a][b] two-sided DeLong p, 1 on the diagonal
    std::vector<std::vector<std::vector<double>>> p;
    // [model][n]: rivals with lower AUC and p < alpha
    std::vector<std::vector<std::size_t>> worse_counts;
    std::vector<double> mean_auc;  // per model, over the lengths
    double alpha = 0.05;

    nlohmann::json to_json() const;
};

// `scores[m]` holds model m's scores for every sample. Rival B counts as
// worse than A at length n iff auc_A > auc_B and p < alpha.
SignificanceReport significance_matrix(const std::vector<std::string>& models,
                                       const std::vector<std::span<const double>>& scores,
                                       std::span<const int> labels, std::span<const std::size_t> lengths,
                                       double alpha = 0.05);

struct SubsetRow {
    std::string model;
    double auc = 0.0;
    double p_vs_best = 1.0;
    bool significantly_lower = false;
};

struct SubsetTable {
    std::string subset;
    std::size_t samples = 0;
    std::size_t positives = 0;
    std::size_t best = 0;
    std::vector<SubsetRow> rows;

    nlohmann::json to_json() const;
};

// AUC per model and a DeLong comparison of each against the section maximum.
SubsetTable evaluate_subset(const std::string& subset, const std::vector<std::string>& models,
                            const std::vector<std::span<const double>>& scores, std::span<const int> labels,
                            double alpha = 0.05);

}  // namespace dfcn::stats
