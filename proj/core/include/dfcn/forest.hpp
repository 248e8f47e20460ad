#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dfcn/rng.hpp"

namespace dfcn::forest {

struct TreeConfig {
    std::size_t max_depth = 0;           // 0 = unlimited
    std::size_t min_leaf = 2;            // minimum samples on each side of a split
    std::size_t features_per_split = 0;  // 0 = floor(sqrt(d)), at least 1
};

// Row-major design matrix view.
struct Samples {
    std::span<const double> values;  // n x d
    std::span<const int> labels;     // n
    std::size_t n_features = 0;

    std::size_t size() const { return labels.size(); }
    double at(std::size_t row, std::size_t feature) const { return values[row * n_features + feature]; }
};

class DecisionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double positive_probability = 0.0;

        bool is_leaf() const { return feature < 0; }
    };

    // Gini-impurity CART on all rows of `data`. Split rule: x[feature] <= threshold goes left.
    static DecisionTree grow(const Samples& data, const TreeConfig& config, Rng& rng);

    // Single leaf with the given positive-class probability.
    static DecisionTree constant(double positive_probability);

    double predict(std::span<const double> x) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t depth() const;
    const std::vector<Node>& nodes() const { return nodes_; }

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j);

private:
    std::vector<Node> nodes_;
};

class Forest {
public:
    Forest() = default;
    explicit Forest(std::vector<DecisionTree> trees);

    // Arithmetic mean of the trees' positive-class probabilities.
    double predict(std::span<const double> x) const;

    // Same scores for n row-major samples; tree-major traversal keeps each
    // tree cache-resident. Per-sample sums run in tree order, so results are
    // bit-identical to predict().
    void predict_rows(std::span<const double> rows, std::size_t n_features, std::span<double> out) const;

    const std::vector<DecisionTree>& trees() const { return trees_; }
    std::size_t size() const { return trees_.size(); }

    nlohmann::json to_json() const;
    static Forest from_json(const nlohmann::json& j);

private:
    // Split: children at child and child + 1 (x > threshold goes to child + 1).
    // Leaf: threshold +inf and child pointing at itself, so extra steps stay put.
    struct FlatNode {
        double threshold;
        std::int32_t feature;
        std::int32_t child;
    };

    std::vector<DecisionTree> trees_;
    std::vector<FlatNode> flat_;
    std::vector<double> leaf_value_;  // per flat node
    std::vector<std::size_t> roots_;
    std::vector<std::size_t> depths_;
};

}  // namespace dfcn::forest
