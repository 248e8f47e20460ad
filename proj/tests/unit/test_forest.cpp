#include <gtest/gtest.h>

#include <vector>

#include "dfcn/forest.hpp"
#include "dfcn/rng.hpp"

using namespace dfcn;
using namespace dfcn::forest;

namespace {

struct Table {
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t d = 0;
    Samples view() const { return {values, labels, d}; }
};

Table noisy_table(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Table t;
    t.d = d;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(uniform_index(rng, 2));
        t.labels.push_back(y);
        for (std::size_t f = 0; f < d; ++f) t.values.push_back(standard_normal(rng) + (f < 2 ? 1.2 * y : 0.0));
    }
    return t;
}

}  // namespace

TEST(Tree, StumpSplitsAtMidpoint) {
    const Table t{{1.0, 2.0, 3.0, 4.0}, {0, 0, 1, 1}, 1};
    Rng rng(1);
    const auto tree = DecisionTree::grow(t.view(), TreeConfig{}, rng);
    ASSERT_EQ(tree.node_count(), 3u);
    EXPECT_EQ(tree.nodes()[0].feature, 0);
    EXPECT_DOUBLE_EQ(tree.nodes()[0].threshold, 2.5);
    EXPECT_EQ(tree.predict(std::vector<double>{2.5}), 0.0);
    EXPECT_EQ(tree.predict(std::vector<double>{2.6}), 1.0);
}

TEST(Tree, PureOrConstantDataIsALeaf) {
    Rng rng(1);
    const Table pure{{1.0, 2.0, 3.0}, {1, 1, 1}, 1};
    EXPECT_EQ(DecisionTree::grow(pure.view(), TreeConfig{}, rng).node_count(), 1u);
    const Table flat{{5.0, 5.0, 5.0, 5.0}, {0, 1, 0, 1}, 1};
    const auto leaf = DecisionTree::grow(flat.view(), TreeConfig{}, rng);
    EXPECT_EQ(leaf.node_count(), 1u);
    EXPECT_DOUBLE_EQ(leaf.predict(std::vector<double>{0.0}), 0.5);
}

TEST(Tree, MinLeafIsRespected) {
    const auto t = noisy_table(300, 4, 2);
    Rng rng(3);
    TreeConfig cfg;
    cfg.min_leaf = 5;
    const auto tree = DecisionTree::grow(t.view(), cfg, rng);
    // Count training rows reaching each leaf.
    std::vector<std::size_t> hits(tree.node_count(), 0);
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
        std::size_t k = 0;
        while (!tree.nodes()[k].is_leaf()) {
            const auto& n = tree.nodes()[k];
            k = static_cast<std::size_t>(t.values[i * t.d + static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                                              : n.right);
        }
        ++hits[k];
    }
    for (std::size_t k = 0; k < hits.size(); ++k)
        if (tree.nodes()[k].is_leaf()) {
            EXPECT_GE(hits[k], 5u);
        }
}

TEST(Tree, MaxDepthIsRespected) {
    const auto t = noisy_table(300, 4, 4);
    Rng rng(3);
    TreeConfig cfg;
    cfg.max_depth = 3;
    EXPECT_LE(DecisionTree::grow(t.view(), cfg, rng).depth(), 3u);
}

TEST(Tree, JsonRoundTrip) {
    const auto t = noisy_table(100, 3, 5);
    Rng rng(1);
    const auto tree = DecisionTree::grow(t.view(), TreeConfig{}, rng);
    EXPECT_EQ(DecisionTree::from_json(tree.to_json()).to_json().dump(), tree.to_json().dump());
}

TEST(ForestTest, BatchAndSinglePredictionsAgreeExactly) {
    const auto t = noisy_table(200, 5, 6);
    Rng rng(2);
    std::vector<DecisionTree> trees;
    for (int k = 0; k < 25; ++k) trees.push_back(DecisionTree::grow(t.view(), TreeConfig{}, rng));
    const Forest forest(trees);
    const auto probe = noisy_table(97, 5, 7);
    std::vector<double> batch(97);
    forest.predict_rows(probe.values, 5, batch);
    for (std::size_t i = 0; i < 97; ++i) {
        const std::span<const double> x(probe.values.data() + i * 5, 5);
        double sum = 0.0;
        for (const auto& tree : trees) sum += tree.predict(x);
        EXPECT_EQ(forest.predict(x), sum / 25.0);
        EXPECT_EQ(batch[i], sum / 25.0);
    }
}

TEST(ForestTest, JsonRoundTripPreservesPredictions) {
    const auto t = noisy_table(120, 3, 8);
    Rng rng(2);
    std::vector<DecisionTree> trees;
    for (int k = 0; k < 5; ++k) trees.push_back(DecisionTree::grow(t.view(), TreeConfig{}, rng));
    const Forest forest(trees);
    const auto back = Forest::from_json(forest.to_json());
    const std::vector<double> x{0.3, -1.0, 2.0};
    EXPECT_EQ(back.predict(x), forest.predict(x));
}
