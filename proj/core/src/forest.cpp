#include "dfcn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dfcn/error.hpp"

namespace dfcn::forest {

namespace {

double gini(double positives, double total) {
    if (total <= 0.0) return 0.0;
    const double p = positives / total;
    return 2.0 * p * (1.0 - p);
}

struct Builder {
    const Samples& data;
    const TreeConfig& config;
    Rng& rng;
    std::vector<DecisionTree::Node>& nodes;
    std::size_t mtry;

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;
    };

    std::int32_t build(std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, std::size_t depth) {
        const std::size_t n = end - begin;
        std::size_t pos = 0;
        for (std::size_t i = begin; i < end; ++i) pos += data.labels[rows[i]] == 1 ? 1 : 0;

        const auto index = static_cast<std::int32_t>(nodes.size());
        nodes.push_back({});
        nodes[static_cast<std::size_t>(index)].positive_probability =
            static_cast<double>(pos) / static_cast<double>(n);

        const bool pure = pos == 0 || pos == n;
        const bool depth_reached = config.max_depth != 0 && depth >= config.max_depth;
        if (pure || depth_reached || n < 2 * config.min_leaf) return index;

        const Split split = best_split(rows, begin, end, pos);
        if (split.feature < 0) return index;

        const auto f = static_cast<std::size_t>(split.feature);
        const auto middle = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                           rows.begin() + static_cast<std::ptrdiff_t>(end),
                                           [&](std::size_t r) { return data.at(r, f) <= split.threshold; });
        const auto mid = static_cast<std::size_t>(middle - rows.begin());

        nodes[static_cast<std::size_t>(index)].feature = split.feature;
        nodes[static_cast<std::size_t>(index)].threshold = split.threshold;
        const auto left = build(rows, begin, mid, depth + 1);
        const auto right = build(rows, mid, end, depth + 1);
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    // Draws features in random order until `mtry` non-constant ones have been
    // evaluated; constant features do not count against the budget.
    Split best_split(const std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, std::size_t pos) {
        const std::size_t d = data.n_features;
        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), 0);
        shuffle(std::span<std::size_t>(features), rng);

        const std::size_t n = end - begin;
        const double total = static_cast<double>(n);
        Split best;
        best.impurity = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, int>> column(n);
        std::size_t evaluated = 0;
        for (const std::size_t f : features) {
            if (evaluated >= mtry) break;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = rows[begin + i];
                column[i] = {data.at(r, f), data.labels[r]};
            }
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;
            ++evaluated;

            double left_pos = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_pos += column[i].second == 1 ? 1.0 : 0.0;
                if (column[i].first == column[i + 1].first) continue;
                const std::size_t left_n = i + 1;
                if (left_n < config.min_leaf || n - left_n < config.min_leaf) continue;
                const double ln = static_cast<double>(left_n);
                const double rn = total - ln;
                const double rpos = static_cast<double>(pos) - left_pos;
                const double impurity = (ln * gini(left_pos, ln) + rn * gini(rpos, rn)) / total;
                if (impurity < best.impurity) {
                    best.impurity = impurity;
                    best.feature = static_cast<int>(f);
                    const double a = column[i].first;
                    const double b = column[i + 1].first;
                    double threshold = a + (b - a) / 2.0;
                    if (threshold >= b) threshold = a;
                    best.threshold = threshold;
                }
            }
        }
        return best;
    }
};

}  // namespace

DecisionTree DecisionTree::grow(const Samples& data, const TreeConfig& config, Rng& rng) {
    if (data.size() == 0) throw Error("cannot grow a tree on zero samples");
    if (data.values.size() != data.size() * data.n_features) throw DimensionError("tree samples are ragged");
    DecisionTree tree;
    std::size_t mtry = config.features_per_split;
    if (mtry == 0) mtry = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(data.n_features))));
    mtry = std::clamp<std::size_t>(mtry, 1, std::max<std::size_t>(1, data.n_features));
    TreeConfig effective = config;
    effective.min_leaf = std::max<std::size_t>(1, config.min_leaf);
    Builder builder{data, effective, rng, tree.nodes_, mtry};
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    builder.build(rows, 0, rows.size(), 0);
    return tree;
}

DecisionTree DecisionTree::constant(double positive_probability) {
    DecisionTree tree;
    tree.nodes_.push_back({});
    tree.nodes_.back().positive_probability = positive_probability;
    return tree;
}

double DecisionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& node = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                 : node.right);
    }
    return nodes_[i].positive_probability;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> depth_of(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, depth_of[i]);
        if (nodes_[i].is_leaf()) continue;
        depth_of[static_cast<std::size_t>(nodes_[i].left)] = depth_of[i] + 1;
        depth_of[static_cast<std::size_t>(nodes_[i].right)] = depth_of[i] + 1;
    }
    return deepest;
}

nlohmann::json DecisionTree::to_json() const {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<double> prob;
    for (const auto& n : nodes_) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        prob.push_back(n.positive_probability);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", prob}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<std::int32_t>>();
    const auto right = j.at("right").get<std::vector<std::int32_t>>();
    const auto prob = j.at("value").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || prob.size() != n)
        throw Error("malformed tree in checkpoint");
    DecisionTree tree;
    for (std::size_t i = 0; i < n; ++i) {
        if (feature[i] >= 0 && (left[i] <= static_cast<std::int32_t>(i) || right[i] <= static_cast<std::int32_t>(i) ||
                                static_cast<std::size_t>(std::max(left[i], right[i])) >= n))
            throw Error("tree node " + std::to_string(i) + " has invalid children");
        tree.nodes_.push_back({feature[i], threshold[i], left[i], right[i], prob[i]});
    }
    return tree;
}

Forest::Forest(std::vector<DecisionTree> trees) : trees_(std::move(trees)) {
    // Breadth-first relayout with sibling pairs stored next to each other.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (const auto& tree : trees_) {
        const auto& nodes = tree.nodes();
        const std::size_t root = flat_.size();
        roots_.push_back(root);
        depths_.push_back(tree.depth());
        std::vector<std::pair<std::size_t, std::size_t>> queue{{0, root}};  // (source, destination)
        flat_.push_back({});
        leaf_value_.push_back(0.0);
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const auto [src, dst] = queue[q];
            const auto& node = nodes[src];
            if (node.is_leaf()) {
                flat_[dst] = {kInf, 0, static_cast<std::int32_t>(dst)};
                leaf_value_[dst] = node.positive_probability;
                continue;
            }
            const std::size_t child = flat_.size();
            flat_.insert(flat_.end(), 2, FlatNode{});
            leaf_value_.insert(leaf_value_.end(), 2, 0.0);
            flat_[dst] = {node.threshold, node.feature, static_cast<std::int32_t>(child)};
            queue.emplace_back(static_cast<std::size_t>(node.left), child);
            queue.emplace_back(static_cast<std::size_t>(node.right), child + 1);
        }
    }
}

double Forest::predict(std::span<const double> x) const {
    if (trees_.empty()) throw Error("empty forest");
    double sum = 0.0;
    for (std::size_t t = 0; t < roots_.size(); ++t) {
        std::size_t i = roots_[t];
        for (std::size_t level = 0; level < depths_[t]; ++level) {
            const auto& node = flat_[i];
            i = static_cast<std::size_t>(node.child) + (x[static_cast<std::size_t>(node.feature)] > node.threshold);
        }
        sum += leaf_value_[i];
    }
    return sum / static_cast<double>(trees_.size());
}

void Forest::predict_rows(std::span<const double> rows, std::size_t n_features, std::span<double> out) const {
    if (trees_.empty()) throw Error("empty forest");
    if (rows.size() != out.size() * n_features) throw Error("predict_rows: rows and output sizes disagree");
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = out.size();
    const FlatNode* nodes = flat_.data();
    // Several independent traversals per step hide the load latency.
    constexpr std::size_t kLanes = 8;
    for (std::size_t t = 0; t < roots_.size(); ++t) {
        const std::size_t root = roots_[t];
        const std::size_t depth = depths_[t];
        std::size_t s = 0;
        for (; s + kLanes <= n; s += kLanes) {
            std::size_t idx[kLanes];
            const double* x[kLanes];
            for (std::size_t l = 0; l < kLanes; ++l) {
                idx[l] = root;
                x[l] = rows.data() + (s + l) * n_features;
            }
            for (std::size_t level = 0; level < depth; ++level)
                for (std::size_t l = 0; l < kLanes; ++l) {
                    const FlatNode& node = nodes[idx[l]];
                    idx[l] = static_cast<std::size_t>(node.child) + (x[l][node.feature] > node.threshold);
                }
            for (std::size_t l = 0; l < kLanes; ++l) out[s + l] += leaf_value_[idx[l]];
        }
        for (; s < n; ++s) {
            const double* xs = rows.data() + s * n_features;
            std::size_t i = root;
            for (std::size_t level = 0; level < depth; ++level) {
                const FlatNode& node = nodes[i];
                i = static_cast<std::size_t>(node.child) + (xs[node.feature] > node.threshold);
            }
            out[s] += leaf_value_[i];
        }
    }
    for (auto& v : out) v /= static_cast<double>(trees_.size());
}

nlohmann::json Forest::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"trees", trees}};
}

Forest Forest::from_json(const nlohmann::json& j) {
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(DecisionTree::from_json(t));
    return Forest(std::move(trees));
}

}  // namespace dfcn::forest
