// Acceptance gate against the public two-site cohort. Reads the CSVs named by
// DFCN_TRAIN_CSV and DFCN_TEST_CSV (optional DFCN_CONFIG for overrides such
// as `prenormalized`, DFCN_ACCEPT_OUT for the output directory). Without
// them every criterion is reported as SKIP and the exit code is 77.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "dfcn/checkpoint.hpp"
#include "dfcn/data.hpp"
#include "dfcn/error.hpp"
#include "dfcn/masking.hpp"
#include "dfcn/models.hpp"
#include "dfcn/pipeline.hpp"
#include "dfcn/stats.hpp"
#include "dfcn/synthetic.hpp"

using namespace dfcn;
namespace fs = std::filesystem;

namespace {

// Pinned targets and tolerances.
constexpr double kAucTolerance = 0.03;
constexpr double kDfcnMaskedValAuc = 0.843;
constexpr double kDfcnFullInputAuc = 0.924;
constexpr double kDfcnMeanPerNAuc = 0.857;
constexpr double kDfcnSubsetAAuc = 0.909;
constexpr double kDfcnSubsetBAuc = 0.919;
const std::vector<double> kDfcnOptimalImps{0.5, 0.6, 0.7};
constexpr std::size_t kMinWinningLengths = 20;
constexpr double kSweepMinutes = 30.0;
constexpr double kAlpha = 0.05;
constexpr std::size_t kSubsetASamples = 258, kSubsetAPositives = 179;
constexpr std::size_t kSubsetBSamples = 474, kSubsetBPositives = 286;

int failures = 0;

void report(bool ok, const std::string& id, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

bool within(double value, double target) { return std::abs(value - target) <= kAucTolerance + 1e-12; }

const char* env(const char* name) {
    const char* v = std::getenv(name);
    return v && *v ? v : nullptr;
}

std::size_t model_index(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("model '" + name + "' missing from the ablation report");
    return static_cast<std::size_t>(it - names.begin());
}

void missing_counts(const ExperimentConfig& config) {
    LoadOptions options;
    options.missing_tokens = config.missing_tokens;
    const auto train = load_dataset(config.train_csv, config.features, options);
    const auto test = load_dataset(config.test_csv, config.features, options);
    // The generator profiles carry the real cohorts' per-class missing counts.
    const std::pair<const Dataset*, synthetic::Profile> sites[] = {
        std::make_pair(&train, synthetic::training_site_profile()),
        std::make_pair(&test, synthetic::test_site_profile())};
    for (const auto& [ds, profile] : sites) {
        std::size_t wrong = 0;
        std::string first;
        bool sizes = ds->negatives() == profile.negatives && ds->positives() == profile.positives;
        for (std::size_t f = 0; f < config.features.size(); ++f) {
            std::size_t neg = 0, pos = 0;
            for (const auto& r : ds->records)
                if (!r.known[f]) (r.label ? pos : neg)++;
            if (neg != profile.missing_negative[f] || pos != profile.missing_positive[f]) {
                if (first.empty())
                    first = ", first mismatch " + config.features[f] + " " + std::to_string(neg) + "/" +
                            std::to_string(pos) + " vs " + std::to_string(profile.missing_negative[f]) + "/" +
                            std::to_string(profile.missing_positive[f]);
                ++wrong;
            }
        }
        report(sizes && wrong == 0, "missing-counts-" + profile.name,
               std::to_string(ds->negatives()) + " negatives, " + std::to_string(ds->positives()) +
                   " positives, features with wrong per-class missing counts " + std::to_string(wrong) + first);
    }
}

void subset_sizes(const ExperimentConfig& config) {
    const auto test = load_test_set(config);
    const std::tuple<std::string, std::size_t, std::size_t> targets[] = {
        {"A", kSubsetASamples, kSubsetAPositives}, {"B", kSubsetBSamples, kSubsetBPositives}};
    for (const auto& [name, samples, positives] : targets) {
        const auto subset = InputSubset::from_names(name, config.subsets.at(name), config.features);
        const auto complete = restrict_to_subset(test, subset, true);
        report(complete.size() == samples && complete.positives() == positives, "subset-size-" + name,
               std::to_string(complete.size()) + " complete cases (" + std::to_string(complete.positives()) +
                   " positive), want " + std::to_string(samples) + " (" + std::to_string(positives) + ")");
    }
}

void imp_sweep(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const auto sweep = cmd_sweep(config);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;

    const auto& dfcn = sweep.rows.at(sweep.optimal.at("DFCN"));
    const bool imp_ok = std::find(kDfcnOptimalImps.begin(), kDfcnOptimalImps.end(), dfcn.imp) != kDfcnOptimalImps.end();
    const double auc = dfcn.masked_val_auc.value_or(-1.0);
    std::string ordinal;
    bool ordinal_ok = true;
    for (const auto& [kind, idx] : sweep.optimal) {
        const auto& best = sweep.rows.at(idx);
        const auto& nim = sweep.rows.at(sweep.nim.at(kind));
        const bool beats = best.imp > 0.0 && best.masked_val_auc.value_or(-1.0) > nim.masked_val_auc.value_or(-1.0);
        ordinal_ok = ordinal_ok && beats;
        ordinal += " " + kind + " " + fmt(best.masked_val_auc.value_or(-1.0)) + ">" +
                   fmt(nim.masked_val_auc.value_or(-1.0)) + (beats ? "" : "(NO)");
    }
    report(imp_ok && within(auc, kDfcnMaskedValAuc), "imp-sweep-dfcn",
           "optimal imp " + fmt(dfcn.imp) + " (want 0.5-0.7), masked-val AUC " + fmt(auc) + " (want 0.843 +- 0.03)");
    report(ordinal_ok, "imp-sweep-beats-nim", "optimum vs NIM masked-val AUC:" + ordinal);
    report(minutes <= kSweepMinutes, "imp-sweep-runtime",
           std::to_string(sweep.rows.size()) + " models in " + fmt(minutes) + " min (limit 30)");
}

void ablation(const ExperimentConfig& config) {
    const auto rep = cmd_ablation(config);
    const auto dfcn = model_index(rep.models, "DFCN");
    const auto full = std::find(rep.lengths.begin(), rep.lengths.end(), config.features.size());
    if (full == rep.lengths.end()) throw Error("no full-length combination in the ablation report");
    const double full_auc = rep.auc[static_cast<std::size_t>(full - rep.lengths.begin())][dfcn];
    report(within(full_auc, kDfcnFullInputAuc), "full-input-auc",
           "DFCN " + fmt(full_auc) + " (want 0.924 +- 0.03)");
    report(within(rep.mean_auc[dfcn], kDfcnMeanPerNAuc), "mean-per-n-auc",
           "DFCN " + fmt(rep.mean_auc[dfcn]) + " (want 0.857 +- 0.03)");

    std::size_t wins = 0, lengths = 0;
    for (std::size_t n = 0; n < rep.lengths.size(); ++n) {
        if (rep.lengths[n] < 2 || rep.lengths[n] > 27) continue;
        ++lengths;
        bool best = true;
        for (const auto* rival : {"FCN", "DAE", "SDAE", "RF"})
            best = best && rep.auc[n][dfcn] >= rep.auc[n][model_index(rep.models, rival)];
        wins += best;
    }
    report(wins >= kMinWinningLengths, "per-n-robustness",
           "DFCN highest among masked-trained models at " + std::to_string(wins) + " of " + std::to_string(lengths) +
               " lengths 2..27 (need 20)");
}

std::vector<double> complete_case_scores(const TrainedModel& model, const Dataset& raw) {
    const auto ds = apply_normalizer(raw, model.normalizer);
    Rng rng(0);
    std::vector<MaskedSample> samples;
    for (const auto& r : ds.records) samples.push_back(apply_random_mask(r, 0.0, rng));
    return predict_batch(model, samples);
}

void subsets(const ExperimentConfig& config) {
    const auto all_input = load_model(selected_checkpoints(config.out_dir, false).front().second);
    const std::pair<std::string, double> targets[] = {{"A", kDfcnSubsetAAuc}, {"B", kDfcnSubsetBAuc}};
    for (const auto& [name, target] : targets) {
        const auto table = cmd_subset(config, name, true);
        const auto row = std::find_if(table.rows.begin(), table.rows.end(), [](const auto& r) { return r.model == "DFCN"; });
        const double auc = row == table.rows.end() ? -1.0 : row->auc;
        report(within(auc, target), "subset-" + name + "-auc",
               "all-input DFCN " + fmt(auc) + " on " + std::to_string(table.samples) + " samples (want " + fmt(target) +
                   " +- 0.03)");

        const auto subset = InputSubset::from_names(name, config.subsets.at(name), config.features);
        const auto raw = restrict_to_subset(load_test_set(config), subset, true);
        const auto retrained = load_model(config.out_dir / "subset" / name / "checkpoints" / "DFCN.json");
        std::vector<int> labels;
        for (const auto& r : raw.records) labels.push_back(r.label);
        const auto a = complete_case_scores(all_input, raw);
        const auto b = complete_case_scores(retrained, raw);
        const auto c = stats::delong_test(b, a, labels);
        const bool significant = c.auc_a > c.auc_b && c.p < kAlpha;
        report(!significant, "subset-" + name + "-retrain",
               "retrained DFCN " + fmt(c.auc_a) + " vs all-input " + fmt(c.auc_b) + ", DeLong p " + fmt(c.p) +
                   (significant ? " (retrained significantly better)" : ""));
    }
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
    const char* train = env("DFCN_TRAIN_CSV");
    const char* test = env("DFCN_TEST_CSV");
    if (!train || !test || !fs::exists(train) || !fs::exists(test)) {
        for (const auto* id : {"missing-counts", "subset-sizes", "imp-sweep-dfcn", "imp-sweep-beats-nim",
                               "imp-sweep-runtime", "full-input-auc", "mean-per-n-auc", "per-n-robustness",
                               "subset-A-auc", "subset-A-retrain", "subset-B-auc", "subset-B-retrain"})
            std::printf("SKIP %s: set DFCN_TRAIN_CSV and DFCN_TEST_CSV to the cohort CSVs\n", id);
        return 77;
    }
    ExperimentConfig config;
    if (const char* path = env("DFCN_CONFIG")) config = ExperimentConfig::load(path);
    config.train_csv = train;
    config.test_csv = test;
    config.out_dir = env("DFCN_ACCEPT_OUT") ? fs::path(env("DFCN_ACCEPT_OUT"))
                                            : fs::temp_directory_path() / "dfcn_acceptance_cohort";

    guarded("missing-counts", [&] { missing_counts(config); });
    guarded("subset-sizes", [&] { subset_sizes(config); });
    guarded("imp-sweep", [&] { imp_sweep(config); });
    guarded("ablation", [&] { ablation(config); });
    guarded("subsets", [&] { subsets(config); });
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
