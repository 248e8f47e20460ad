#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

#include "dfcn/error.hpp"
#include "dfcn/masking.hpp"
#include "dfcn/synthetic.hpp"

using namespace dfcn;

namespace {

// Every nonempty subset of {0..n-1} grouped by size, each group sorted
// lexicographically.
std::vector<std::vector<std::size_t>> power_set(std::size_t n) {
    std::vector<std::vector<std::size_t>> all;
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i)
            if (bits & (1u << i)) s.push_back(i);
        all.push_back(s);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    return all;
}

FeatureRecord record(std::vector<double> v, Flags known, int label = 1) {
    FeatureRecord r;
    r.values = std::move(v);
    r.known = std::move(known);
    r.label = label;
    return r;
}

}  // namespace

TEST(Binomial, SmallValues) {
    EXPECT_EQ(binomial(28, 0), 1u);
    EXPECT_EQ(binomial(28, 1), 28u);
    EXPECT_EQ(binomial(28, 2), 378u);
    EXPECT_EQ(binomial(28, 14), 40116600u);
    EXPECT_EQ(binomial(5, 7), 0u);
}

TEST(Plan, ValidationCountIs419) {
    const auto plan = generate_combination_plan(28, PlanMode::Validation, 1);
    EXPECT_EQ(plan.size(), 419u);
    const auto counts = plan.per_length_counts();
    EXPECT_EQ(counts.at(1), 28u);
    EXPECT_EQ(counts.at(28), 1u);
    for (std::size_t k = 2; k <= 27; ++k) EXPECT_EQ(counts.at(k), 15u) << k;
}

TEST(Plan, TestCountIs23813) {
    const auto plan = generate_combination_plan(28, PlanMode::Test, 1);
    EXPECT_EQ(plan.size(), 23813u);
    const auto counts = plan.per_length_counts();
    EXPECT_EQ(counts.at(1), 28u);
    EXPECT_EQ(counts.at(2), 378u);
    EXPECT_EQ(counts.at(3), 1000u);
    EXPECT_EQ(counts.at(26), 378u);
    EXPECT_EQ(counts.at(27), 28u);
    EXPECT_EQ(counts.at(28), 1u);
}

TEST(Plan, SmallNEnumeratesPowerSet) {
    for (std::size_t n = 1; n <= 8; ++n) {
        const auto plan = generate_combination_plan(n, PlanMode::Test, 5);
        const auto oracle = power_set(n);
        ASSERT_EQ(plan.size(), oracle.size()) << n;
        for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_EQ(plan.combinations[i].kept, oracle[i]);
    }
}

TEST(Plan, CombinationsAreDistinctSortedAndSeeded) {
    const auto a = generate_combination_plan(28, PlanMode::Test, 9);
    const auto b = generate_combination_plan(28, PlanMode::Test, 9);
    const auto c = generate_combination_plan(28, PlanMode::Test, 10);
    EXPECT_EQ(a.combinations, b.combinations);
    EXPECT_NE(a.combinations, c.combinations);
    std::set<std::vector<std::size_t>> seen;
    for (const auto& combo : a.combinations) {
        EXPECT_TRUE(std::is_sorted(combo.kept.begin(), combo.kept.end()));
        EXPECT_TRUE(seen.insert(combo.kept).second);
        EXPECT_LT(combo.kept.back(), 28u);
    }
}

TEST(Plan, JsonRoundTripAndValidation) {
    const auto plan = generate_combination_plan(6, PlanMode::Validation, 2);
    const auto back = CombinationPlan::from_json(plan.to_json());
    EXPECT_EQ(back.combinations, plan.combinations);
    auto bad = plan.to_json();
    bad["combinations"][0] = {7};
    EXPECT_THROW(CombinationPlan::from_json(bad), Error);

    const auto path = std::filesystem::temp_directory_path() / "dfcn_plan_roundtrip.json";
    plan.save(path);
    EXPECT_EQ(CombinationPlan::load(path).combinations, plan.combinations);
    std::filesystem::remove(path);
}

TEST(Plan, SubsetPlanUsesSubsetIndices) {
    const auto subset = InputSubset::from_names("s", {"f1", "f3", "f4"}, {"f0", "f1", "f2", "f3", "f4"});
    const auto plan = generate_subset_plan(subset, 5, PlanMode::Validation, 1);
    EXPECT_EQ(plan.size(), 7u);
    for (const auto& c : plan.combinations)
        for (const auto k : c.kept) EXPECT_TRUE(k == 1 || k == 3 || k == 4);
}

TEST(RandomMask, ZeroAndOneProbability) {
    Rng rng(1);
    const auto r = record({1.0, 2.0, 3.0}, {1, 0, 1});
    const auto none = apply_random_mask(r, 0.0, rng);
    EXPECT_EQ(none.values, (std::vector<double>{1.0, 0.0, 3.0}));
    EXPECT_EQ(none.eligible_count(), 0u);
    const auto all = apply_random_mask(r, 1.0, rng);
    EXPECT_EQ(all.values, (std::vector<double>{0.0, 0.0, 0.0}));
    EXPECT_EQ(all.target, (std::vector<double>{1.0, 0.0, 3.0}));
    EXPECT_EQ(all.eligible_count(), 2u);
}

TEST(RandomMask, RateMatchesProbability) {
    Rng rng(2);
    const auto r = record(std::vector<double>(28, 1.0), Flags(28, 1));
    std::size_t masked = 0, total = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto s = apply_random_mask(r, 0.3, rng);
        for (const auto m : s.train_mask) masked += m;
        total += 28;
    }
    EXPECT_NEAR(static_cast<double>(masked) / static_cast<double>(total), 0.3, 0.01);
}

TEST(EvalSet, CrossProductWithDrops) {
    Dataset ds;
    ds.feature_names = {"a", "b", "c"};
    ds.records.push_back(record({1.0, 2.0, 3.0}, {1, 1, 1}, 1));
    ds.records.push_back(record({4.0, 0.0, 0.0}, {1, 0, 0}, 0));
    const auto plan = generate_combination_plan(3, PlanMode::Test, 1);  // 7 combinations
    const auto set = build_masked_eval_set(ds, plan);
    // Record 1 only survives combinations containing feature 0 (4 of 7).
    EXPECT_EQ(set.size(), 7u + 4u);
    EXPECT_EQ(set.positives(), 7u);
    // Combination-major order.
    EXPECT_EQ(set.entry(0).combo, 0u);
    EXPECT_EQ(set.entry(1).combo, 0u);
    EXPECT_EQ(set.entry(1).record, 1u);
    const auto s = set.sample(0);  // combination {0}, record 0
    EXPECT_EQ(s.values, (std::vector<double>{1.0, 0.0, 0.0}));
    EXPECT_EQ(s.combo_length, 1u);
    std::vector<double> buf(3);
    for (std::size_t i = 0; i < set.size(); ++i) {
        set.fill_inputs(i, buf);
        EXPECT_EQ(buf, set.sample(i).values);
    }
}

TEST(EvalSet, DimensionMismatchThrows) {
    Dataset ds;
    ds.feature_names = {"a", "b"};
    ds.records.push_back(record({1.0, 2.0}, {1, 1}));
    EXPECT_THROW(build_masked_eval_set(ds, generate_combination_plan(3, PlanMode::Test, 1)), DimensionError);
}

TEST(EvalSet, AllMissingRecordsGiveEmptySetError) {
    Dataset ds;
    ds.feature_names = {"a", "b"};
    ds.records.push_back(record({0.0, 0.0}, {0, 0}));
    EXPECT_THROW(build_masked_eval_set(ds, generate_combination_plan(2, PlanMode::Test, 1)), Error);
}

TEST(EvalSet, ValidationSizeOnSyntheticSite) {
    const auto ds = synthetic::generate(synthetic::training_site_profile(), 1);
    const auto plan = generate_combination_plan(28, PlanMode::Validation, 4);
    const auto set = build_masked_eval_set(ds, plan);
    EXPECT_LE(set.size(), ds.size() * plan.size());
    EXPECT_GT(set.size(), ds.size() * plan.size() * 9 / 10);
}
