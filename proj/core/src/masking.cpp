#include "dfcn/masking.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"

namespace dfcn {

std::size_t MaskedSample::eligible_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < known.size(); ++i) n += (known[i] && train_mask[i]) ? 1 : 0;
    return n;
}

MaskedSample apply_random_mask(const FeatureRecord& record, double imp, Rng& rng) {
    MaskedSample s;
    const std::size_t d = record.values.size();
    s.values.resize(d);
    s.target.resize(d);
    s.train_mask.assign(d, 0);
    s.known = record.known;
    s.label = record.label;
    for (std::size_t i = 0; i < d; ++i) {
        const double v = record.known[i] ? record.values[i] : 0.0;
        s.target[i] = v;
        const bool masked = bernoulli(rng, imp);
        s.train_mask[i] = masked ? 1 : 0;
        s.values[i] = masked ? 0.0 : v;
    }
    return s;
}

MaskedSample unmasked(const FeatureRecord& record) {
    MaskedSample s;
    const std::size_t d = record.values.size();
    s.values.resize(d);
    for (std::size_t i = 0; i < d; ++i) s.values[i] = record.known[i] ? record.values[i] : 0.0;
    s.target = s.values;
    s.train_mask.assign(d, 0);
    s.known = record.known;
    s.label = record.label;
    return s;
}

std::string to_string(PlanMode mode) { return mode == PlanMode::Validation ? "validation" : "test"; }

PlanMode plan_mode_from_string(const std::string& name) {
    if (name == "validation") return PlanMode::Validation;
    if (name == "test") return PlanMode::Test;
    throw Error("unknown plan mode '" + name + "'");
}

std::map<std::size_t, std::size_t> CombinationPlan::per_length_counts() const {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& c : combinations) ++counts[c.length()];
    return counts;
}

nlohmann::json CombinationPlan::to_json() const {
    nlohmann::json combos = nlohmann::json::array();
    for (const auto& c : combinations) combos.push_back(c.kept);
    return {{"n_features", n_features}, {"mode", to_string(mode)}, {"seed", seed}, {"combinations", combos}};
}

CombinationPlan CombinationPlan::from_json(const nlohmann::json& j) {
    CombinationPlan plan;
    plan.n_features = j.at("n_features").get<std::size_t>();
    plan.mode = plan_mode_from_string(j.at("mode").get<std::string>());
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("combinations")) {
        InputCombination combo{c.get<std::vector<std::size_t>>()};
        if (combo.kept.empty() || combo.kept.size() > plan.n_features)
            throw Error("plan combination has invalid length " + std::to_string(combo.kept.size()));
        if (!std::is_sorted(combo.kept.begin(), combo.kept.end()) ||
            std::adjacent_find(combo.kept.begin(), combo.kept.end()) != combo.kept.end() ||
            combo.kept.back() >= plan.n_features)
            throw Error("plan combination indices must be sorted, unique and < n_features");
        plan.combinations.push_back(std::move(combo));
    }
    return plan;
}

void CombinationPlan::save(const std::filesystem::path& path) const {
    io::write_file_atomic(path, to_json().dump() + "\n");
}

CombinationPlan CombinationPlan::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(io::read_file(path)));
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t result = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i stays integral at every step
        const std::size_t factor = n - k + i;
        if (result > std::numeric_limits<std::size_t>::max() / factor) return std::numeric_limits<std::size_t>::max();
        result = result * factor / i;
    }
    return result;
}

std::size_t requested_per_length(std::size_t n_features, std::size_t length, PlanMode mode) {
    if (mode == PlanMode::Test) return 1000;
    if (length == 1 || length == n_features) return binomial(n_features, length);
    return 15;
}

namespace {

void enumerate_all(std::size_t n, std::size_t k, std::vector<InputCombination>& out) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        out.push_back({idx});
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(rng, n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

CombinationPlan generate_combination_plan(std::size_t n_features, PlanMode mode, std::uint64_t seed) {
    if (n_features == 0) throw Error("combination plan needs at least one feature");
    CombinationPlan plan;
    plan.n_features = n_features;
    plan.mode = mode;
    plan.seed = seed;
    Rng rng(seed);
    for (std::size_t k = 1; k <= n_features; ++k) {
        const std::size_t available = binomial(n_features, k);
        const std::size_t wanted = requested_per_length(n_features, k, mode);
        if (available <= wanted) {
            enumerate_all(n_features, k, plan.combinations);
            continue;
        }
        std::set<std::vector<std::size_t>> seen;
        while (seen.size() < wanted) {
            auto combo = random_subset(n_features, k, rng);
            if (seen.insert(combo).second) plan.combinations.push_back({std::move(combo)});
        }
    }
    return plan;
}

CombinationPlan generate_subset_plan(const InputSubset& subset, std::size_t n_features, PlanMode mode,
                                     std::uint64_t seed) {
    auto local = generate_combination_plan(subset.indices.size(), mode, seed);
    local.n_features = n_features;
    for (auto& combo : local.combinations) {
        for (auto& i : combo.kept) i = subset.indices.at(i);
    }
    return local;
}

MaskedEvalSet::MaskedEvalSet(Dataset dataset, CombinationPlan plan, std::vector<Entry> entries)
    : dataset_(std::move(dataset)), plan_(std::move(plan)), entries_(std::move(entries)) {
    kept_flags_.reserve(plan_.combinations.size());
    for (const auto& combo : plan_.combinations) {
        Flags flags(dataset_.n_features(), 0);
        for (const auto i : combo.kept) flags.at(i) = 1;
        kept_flags_.push_back(std::move(flags));
    }
    for (const auto& e : entries_) positives_ += dataset_.records[e.record].label == 1 ? 1 : 0;
}

void MaskedEvalSet::fill_inputs(std::size_t i, std::span<double> out) const {
    const auto& e = entries_[i];
    const auto& rec = dataset_.records[e.record];
    const auto& kept = kept_flags_[e.combo];
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = (kept[f] && rec.known[f]) ? rec.values[f] : 0.0;
}

MaskedSample MaskedEvalSet::sample(std::size_t i) const {
    const auto& e = entries_[i];
    const auto& rec = dataset_.records[e.record];
    const auto& kept = kept_flags_[e.combo];
    MaskedSample s;
    const std::size_t d = n_features();
    s.values.resize(d);
    fill_inputs(i, s.values);
    s.target.resize(d);
    s.train_mask.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
        s.target[f] = rec.known[f] ? rec.values[f] : 0.0;
        s.train_mask[f] = kept[f] ? 0 : 1;
    }
    s.known = rec.known;
    s.label = rec.label;
    s.combo_id = e.combo;
    s.combo_length = plan_.combinations[e.combo].length();
    s.record_index = e.record;
    return s;
}

std::vector<MaskedSample> MaskedEvalSet::materialize() const {
    std::vector<MaskedSample> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(sample(i));
    return out;
}

std::vector<int> MaskedEvalSet::labels() const {
    std::vector<int> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = label(i);
    return out;
}

std::vector<std::size_t> MaskedEvalSet::lengths() const {
    std::vector<std::size_t> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = length(i);
    return out;
}

MaskedEvalSet build_masked_eval_set(const Dataset& ds, const CombinationPlan& plan) {
    if (plan.n_features != ds.n_features())
        throw DimensionError("plan covers " + std::to_string(plan.n_features) + " features, dataset has " +
                             std::to_string(ds.n_features()));
    std::vector<MaskedEvalSet::Entry> entries;
    for (std::size_t c = 0; c < plan.combinations.size(); ++c) {
        const auto& kept = plan.combinations[c].kept;
        for (const auto i : kept)
            if (i >= ds.n_features()) throw DimensionError("plan index out of range");
        for (std::size_t r = 0; r < ds.size(); ++r) {
            const auto& known = ds.records[r].known;
            const bool any = std::any_of(kept.begin(), kept.end(), [&](std::size_t i) { return known[i] != 0; });
            if (any) entries.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
        }
    }
    if (entries.empty()) throw DataError("masked evaluation set is empty");
    return MaskedEvalSet(ds, plan, std::move(entries));
}

}  // namespace dfcn
