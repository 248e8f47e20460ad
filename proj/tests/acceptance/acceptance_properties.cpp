// Property-based acceptance gate. Needs no external data; prints one
// PASS/FAIL line per criterion and exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "dfcn/masking.hpp"
#include "dfcn/models.hpp"
#include "dfcn/pipeline.hpp"
#include "dfcn/rng.hpp"
#include "dfcn/stats.hpp"
#include "dfcn/synthetic.hpp"

using namespace dfcn;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr std::size_t kValidationCombinations = 419;
constexpr std::size_t kTestCombinations = 23813;
constexpr std::size_t kPowerSetMaxN = 8;
constexpr std::size_t kAucInstances = 1000;
constexpr std::size_t kAucMaxSamples = 200;
constexpr std::size_t kBootstrapInstances = 50;
constexpr std::size_t kBootstrapSamples = 40;
constexpr std::size_t kBootstrapReplicates = 10000;
constexpr double kBootstrapRelTolerance = 0.10;
constexpr std::size_t kGradConfigurations = 120;
constexpr double kGradTolerance = 1e-5;

int failures = 0;

void report(bool ok, const char* id, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

// ---------------------------------------------------------------- oracles

std::vector<std::vector<std::size_t>> power_set_oracle(std::size_t n) {
    std::vector<std::vector<std::size_t>> all;
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i)
            if (bits & (1u << i)) s.push_back(i);
        all.push_back(s);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return all;
}

// Quadratic pair counting, ties worth one half. Counts half-units so the
// numerator is an exact integer.
double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
    long long half_units = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) (y[i] ? pos : neg)++;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            half_units += s[i] > s[j] ? 2 : s[i] == s[j] ? 1 : 0;
        }
    }
    return static_cast<double>(half_units) / 2.0 / static_cast<double>(pos * neg);
}

double pair_auc_indexed(const std::vector<double>& s, const std::vector<std::size_t>& pos,
                        const std::vector<std::size_t>& neg) {
    double sum = 0.0;
    for (const auto i : pos)
        for (const auto j : neg) sum += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    return sum / static_cast<double>(pos.size() * neg.size());
}

// Paired bootstrap of auc_a - auc_b, resampling within each class so every
// replicate keeps the original class sizes.
double bootstrap_variance(const std::vector<double>& a, const std::vector<double>& b, const std::vector<int>& y,
                          std::size_t replicates, Rng& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    std::vector<std::size_t> bp(pos.size()), bn(neg.size());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t r = 0; r < replicates; ++r) {
        for (auto& v : bp) v = pos[uniform_index(rng, pos.size())];
        for (auto& v : bn) v = neg[uniform_index(rng, neg.size())];
        const double diff = pair_auc_indexed(a, bp, bn) - pair_auc_indexed(b, bp, bn);
        sum += diff;
        sum_sq += diff * diff;
    }
    const double n = static_cast<double>(replicates);
    const double mean = sum / n;
    return (sum_sq - n * mean * mean) / (n - 1.0);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- criteria

void combination_counts() {
    const auto val = generate_combination_plan(28, PlanMode::Validation, 17);
    const auto test = generate_combination_plan(28, PlanMode::Test, 17);
    bool small_ok = true;
    for (std::size_t n = 1; n <= kPowerSetMaxN; ++n) {
        const auto plan = generate_combination_plan(n, PlanMode::Test, n);
        const auto oracle = power_set_oracle(n);
        if (plan.size() != oracle.size()) {
            small_ok = false;
            continue;
        }
        for (std::size_t i = 0; i < oracle.size(); ++i) small_ok = small_ok && plan.combinations[i].kept == oracle[i];
    }
    const bool ok = val.size() == kValidationCombinations && test.size() == kTestCombinations && small_ok;
    report(ok, "combination-counts",
           "validation " + std::to_string(val.size()) + " (want 419), test " + std::to_string(test.size()) +
               " (want 23813), power set n<=8 " + (small_ok ? "match" : "MISMATCH"));
}

void auc_oracle() {
    Rng rng(606);
    std::size_t mismatches = 0;
    for (std::size_t inst = 0; inst < kAucInstances; ++inst) {
        const std::size_t n = 2 + uniform_index(rng, kAucMaxSamples - 1);
        std::vector<double> s(n);
        std::vector<int> y(n);
        // Coarse grids make ties common.
        const double grid = static_cast<double>(1 + uniform_index(rng, 20));
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(uniform_index(rng, 2));
            s[i] = std::round(uniform01(rng) * grid) / grid;
        }
        y[0] = 1;
        y[1] = 0;
        if (stats::roc_auc(s, y, false).auc != pair_count_auc(s, y)) ++mismatches;
    }
    report(mismatches == 0, "auc-oracle",
           std::to_string(kAucInstances) + " instances of <= 200 samples, exact mismatches " +
               std::to_string(mismatches));
}

void delong_soundness() {
    Rng rng(707);
    bool self_ok = true, swap_ok = true;
    double worst = 0.0;
    for (std::size_t inst = 0; inst < kBootstrapInstances; ++inst) {
        std::vector<double> a(kBootstrapSamples), b(kBootstrapSamples);
        std::vector<int> y(kBootstrapSamples, 0);
        std::fill(y.begin(), y.begin() + kBootstrapSamples / 2, 1);
        shuffle(std::span<int>(y), rng);
        // Two moderately correlated scorers with random separations.
        const double shift_a = 0.5 + uniform01(rng);
        const double shift_b = uniform01(rng);
        for (std::size_t i = 0; i < kBootstrapSamples; ++i) {
            a[i] = shift_a * y[i] + standard_normal(rng);
            b[i] = 0.5 * a[i] + shift_b * y[i] + standard_normal(rng);
        }
        const auto self = stats::delong_test(a, a, y);
        self_ok = self_ok && self.p == 1.0;
        const auto ab = stats::delong_test(a, b, y);
        const auto ba = stats::delong_test(b, a, y);
        swap_ok = swap_ok && ab.p == ba.p && ab.z == -ba.z && ab.variance == ba.variance;
        const double boot = bootstrap_variance(a, b, y, kBootstrapReplicates, rng);
        worst = std::max(worst, std::abs(ab.variance / boot - 1.0));
    }
    report(self_ok && swap_ok && worst <= kBootstrapRelTolerance, "delong-soundness",
           std::string("self p=1 ") + (self_ok ? "yes" : "NO") + ", swap symmetric " + (swap_ok ? "yes" : "NO") +
               ", worst |var/bootstrap - 1| = " + fmt(worst) + " over 50 instances (tolerance 0.10)");
}

void gradient_checks() {
    const auto summary = cmd_gradcheck(kGradConfigurations, 808, kGradTolerance);
    const std::regex eligible(R"(eligible (\d+)/(\d+) recon_weight (\S+))");
    std::size_t empty_sets = 0, full_sets = 0;
    for (const auto& line : summary.lines) {
        std::smatch m;
        if (!std::regex_search(line, m, eligible)) continue;
        if (std::stod(m[3].str()) == 0.0) continue;
        if (m[1].str() == "0") ++empty_sets;
        if (m[1].str() == m[2].str()) ++full_sets;
    }
    const bool ok = summary.configurations >= 100 && summary.failures == 0 && empty_sets > 0 && full_sets > 0;
    report(ok, "gradient-checks",
           std::to_string(summary.configurations) + " configurations, failures " + std::to_string(summary.failures) +
               ", max relative error " + fmt(summary.max_relative_error) + " (tolerance 1e-5), empty eligible " +
               std::to_string(empty_sets) + ", full eligible " + std::to_string(full_sets));
}

void nim_equivalence() {
    const auto raw = synthetic::generate(synthetic::training_site_profile(), 31);
    const auto normalizer = fit_normalizer(raw);
    const auto data = apply_normalizer(raw, normalizer);
    const auto [train, val] = split_validation(data, 5, 102, true);
    auto trajectory = [](std::vector<std::vector<double>>& out) {
        return TrainHooks{[&out](std::size_t, std::size_t, const nn::NetworkParams& p) {
            std::vector<double> flat;
            nn::for_each_tensor(p, [&](const std::string&, std::span<const double> t) {
                flat.insert(flat.end(), t.begin(), t.end());
            });
            out.push_back(std::move(flat));
        }};
    };
    std::vector<std::vector<double>> dfcn_steps, fcn_steps;
    auto spec = default_spec(ModelKind::DFCN, 28, 0.0, 4242);
    spec.training.epochs = 8;
    const auto a = train_dfcn(spec, train, val, normalizer, trajectory(dfcn_steps));
    spec.kind = ModelKind::FCN;
    const auto b = train_fcn(spec, train, val, normalizer, trajectory(fcn_steps));
    std::size_t first_diff = dfcn_steps.size();
    for (std::size_t s = 0; s < std::min(dfcn_steps.size(), fcn_steps.size()); ++s)
        if (dfcn_steps[s] != fcn_steps[s]) {
            first_diff = s;
            break;
        }
    std::vector<double> fa, fb;
    nn::for_each_tensor(a.network(), [&](const std::string&, std::span<const double> t) { fa.insert(fa.end(), t.begin(), t.end()); });
    nn::for_each_tensor(b.network(), [&](const std::string&, std::span<const double> t) { fb.insert(fb.end(), t.begin(), t.end()); });
    const bool ok = !dfcn_steps.empty() && dfcn_steps.size() == fcn_steps.size() && first_diff == dfcn_steps.size() &&
                    fa == fb;
    report(ok, "nim-equivalence",
           std::to_string(dfcn_steps.size()) + " optimizer steps compared, " +
               (first_diff == dfcn_steps.size() ? std::string("all bit-identical")
                                                : "first difference at step " + std::to_string(first_diff)));
}

void sweep_determinism() {
    const auto root = fs::temp_directory_path() / "dfcn_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    write_dataset_csv(root / "train.csv", synthetic::generate(synthetic::training_site_profile(), 77));
    ExperimentConfig config;
    config.train_csv = root / "train.csv";
    config.training.epochs = 2;
    config.training.pretrain_epochs = 2;
    config.training.val_mask_copies = 1;
    config.forest.trees = 20;

    std::vector<fs::path> outs{root / "run1", root / "run2"};
    for (const auto& out : outs) {
        config.out_dir = out;
        cmd_sweep(config);
    }
    std::size_t compared = 0, differing = 0;
    auto compare = [&](const fs::path& rel) {
        ++compared;
        if (!fs::exists(outs[0] / rel) || read_file(outs[0] / rel) != read_file(outs[1] / rel)) ++differing;
    };
    compare("sweep/manifest.json");
    for (const auto& entry : fs::directory_iterator(outs[0] / "checkpoints"))
        compare(fs::relative(entry.path(), outs[0]));
    const bool ok = compared == 51 && differing == 0;
    report(ok, "sweep-determinism",
           std::to_string(compared) + " files compared (manifest + 50 checkpoints), differing " +
               std::to_string(differing));
    fs::remove_all(root);
}

template <typename F>
void guarded(const char* id, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(false, id, std::string("exception: ") + e.what());
    }
}

}  // namespace

int main() {
    guarded("combination-counts", combination_counts);
    guarded("auc-oracle", auc_oracle);
    guarded("delong-soundness", delong_soundness);
    guarded("gradient-checks", gradient_checks);
    guarded("nim-equivalence", nim_equivalence);
    guarded("sweep-determinism", sweep_determinism);
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
