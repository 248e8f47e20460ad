#include "dfcn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>

#include "dfcn/checkpoint.hpp"
#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"
#include "dfcn/masking.hpp"
#include "dfcn/rng.hpp"
#include "dfcn/scoring.hpp"
#include "dfcn/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dfcn {

// ---------------------------------------------------------------------------
// Config

std::uint64_t ExperimentConfig::resolved_split_seed() const {
    return split_seed.value_or(derive_seed(seed, "split"));
}
std::uint64_t ExperimentConfig::resolved_validation_plan_seed() const {
    return validation_plan_seed.value_or(derive_seed(seed, "plan/validation"));
}
std::uint64_t ExperimentConfig::resolved_test_plan_seed() const {
    return test_plan_seed.value_or(derive_seed(seed, "plan/test"));
}

ModelSpec ExperimentConfig::spec_for(ModelKind kind, double imp) const {
    ModelSpec s;
    s.kind = kind;
    s.imp = imp;
    s.lambda = lambda;
    s.recon_mode = recon_mode;
    const bool bottlenecked = kind == ModelKind::DAE || kind == ModelKind::SDAE;
    s.architecture = bottlenecked ? bottleneck : wide;
    s.architecture.input_dim = features.size();
    s.training = training;
    s.forest = forest;
    s.seed = sweep_seed(seed, kind, imp);
    return s;
}

void ExperimentConfig::validate(bool need_train, bool need_test) const {
    if (imp_grid.empty()) throw ConfigError("imp_grid is empty");
    for (const double v : imp_grid)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("imp_grid value " + io::format_double(v) + " outside [0, 1]");
    std::set<double> unique(imp_grid.begin(), imp_grid.end());
    if (unique.size() != imp_grid.size()) throw ConfigError("imp_grid has duplicate values");
    if (kinds.empty()) throw ConfigError("kinds is empty");
    if (features.empty()) throw ConfigError("features is empty");
    if (validation_size < 2) throw ConfigError("validation_size must be at least 2");
    for (const auto k : kinds) spec_for(k, imp_grid.front()).validate();
    auto require = [](const fs::path& p, const char* key) {
        if (p.empty()) throw ConfigError(std::string(key) + " is not set");
        if (!fs::exists(p)) throw ConfigError(std::string(key) + " does not exist: " + p.string());
    };
    if (need_train) require(train_csv, "train_csv");
    if (need_test) require(test_csv, "test_csv");
    if (!test_plan_file.empty() && !fs::exists(test_plan_file))
        throw ConfigError("test_plan_file does not exist: " + test_plan_file.string());
}

namespace {

json optional_seed(const std::optional<std::uint64_t>& s) { return s ? json(*s) : json(nullptr); }

ModelSpec template_spec(const ExperimentConfig& c) {
    ModelSpec s;
    s.training = c.training;
    s.forest = c.forest;
    return s;
}

}  // namespace

json ExperimentConfig::to_json() const {
    json kind_names = json::array();
    for (const auto k : kinds) kind_names.push_back(to_string(k));
    const auto spec = template_spec(*this).to_json();
    json training_json = spec.at("training");
    training_json.erase("optimizer");
    return {{"train_csv", train_csv.string()},
            {"test_csv", test_csv.string()},
            {"out_dir", out_dir.string()},
            {"seed", seed},
            {"imp_grid", imp_grid},
            {"kinds", kind_names},
            {"lambda", lambda},
            {"recon_mode", nn::to_string(recon_mode)},
            {"wide", wide.to_json()},
            {"bottleneck", bottleneck.to_json()},
            {"training", training_json},
            {"forest", spec.at("forest")},
            {"validation_size", validation_size},
            {"stratify_by_view", stratify_by_view},
            {"split_seed", optional_seed(split_seed)},
            {"validation_plan_seed", optional_seed(validation_plan_seed)},
            {"test_plan_seed", optional_seed(test_plan_seed)},
            {"test_plan_file", test_plan_file.string()},
            {"subsets", subsets},
            {"prenormalized", prenormalized},
            {"features", features},
            {"missing_tokens", missing_tokens},
            {"jobs", jobs},
            {"write_normalized_data", write_normalized_data}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    const auto known_keys = c.to_json();
    for (const auto& [key, _] : j.items())
        if (!known_keys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    try {
        if (j.contains("train_csv")) c.train_csv = j.at("train_csv").get<std::string>();
        if (j.contains("test_csv")) c.test_csv = j.at("test_csv").get<std::string>();
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
        c.seed = j.value("seed", c.seed);
        c.imp_grid = j.value("imp_grid", c.imp_grid);
        if (j.contains("kinds")) {
            c.kinds.clear();
            for (const auto& k : j.at("kinds")) c.kinds.push_back(model_kind_from_string(k.get<std::string>()));
        }
        c.lambda = j.value("lambda", c.lambda);
        if (j.contains("recon_mode")) c.recon_mode = nn::recon_mode_from_string(j.at("recon_mode").get<std::string>());
        if (j.contains("wide")) c.wide = nn::Architecture::from_json(j.at("wide"));
        if (j.contains("bottleneck")) c.bottleneck = nn::Architecture::from_json(j.at("bottleneck"));
        json spec{{"kind", "DFCN"}, {"imp", 0.0}};
        if (j.contains("training")) spec["training"] = j.at("training");
        if (j.contains("forest")) spec["forest"] = j.at("forest");
        const auto parsed = ModelSpec::from_json(spec);
        c.training = parsed.training;
        c.forest = parsed.forest;
        c.validation_size = j.value("validation_size", c.validation_size);
        c.stratify_by_view = j.value("stratify_by_view", c.stratify_by_view);
        auto seed_field = [&](const char* key, std::optional<std::uint64_t>& out) {
            if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<std::uint64_t>();
        };
        seed_field("split_seed", c.split_seed);
        seed_field("validation_plan_seed", c.validation_plan_seed);
        seed_field("test_plan_seed", c.test_plan_seed);
        if (j.contains("test_plan_file")) c.test_plan_file = j.at("test_plan_file").get<std::string>();
        if (j.contains("subsets"))
            c.subsets = j.at("subsets").get<std::map<std::string, std::vector<std::string>>>();
        c.prenormalized = j.value("prenormalized", c.prenormalized);
        c.features = j.value("features", c.features);
        c.missing_tokens = j.value("missing_tokens", c.missing_tokens);
        c.jobs = j.value("jobs", c.jobs);
        c.write_normalized_data = j.value("write_normalized_data", c.write_normalized_data);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.subsets.contains("all")) throw ConfigError("subset name 'all' is reserved");
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    auto c = from_json(j);
    // Relative paths are relative to the config file.
    const auto base = path.parent_path();
    auto rebase = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    rebase(c.train_csv);
    rebase(c.test_csv);
    rebase(c.out_dir);
    rebase(c.test_plan_file);
    return c;
}

// ---------------------------------------------------------------------------
// Data preparation

namespace {

LoadOptions load_options(const ExperimentConfig& c) {
    LoadOptions o;
    o.missing_tokens = c.missing_tokens;
    return o;
}

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

json id_list(const Dataset& ds) {
    json ids = json::array();
    for (const auto& r : ds.records) ids.push_back(r.subject_id);
    return ids;
}

std::string slug(const std::string& name) {
    std::string s;
    for (const char ch : name) {
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-')
            s += ch;
        else if (!s.empty() && s.back() != '_')
            s += '_';
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s.empty() ? "model" : s;
}

std::string checkpoint_name(ModelKind kind, double imp) {
    return "checkpoints/" + to_string(kind) + "_imp" + io::format_double(imp) + ".json";
}

std::string csv_double(double v) { return io::format_double(v); }

// Normalizes `raw` once per distinct normalizer.
class NormalizedCache {
public:
    explicit NormalizedCache(const Dataset& raw) : raw_(raw) {}

    const Dataset& get(const Normalizer& n) {
        const auto key = n.to_json().dump();
        for (const auto& [k, ds] : entries_)
            if (k == key) return ds;
        entries_.emplace_back(key, apply_normalizer(raw_, n));
        return entries_.back().second;
    }

private:
    const Dataset& raw_;
    std::vector<std::pair<std::string, Dataset>> entries_;
};

std::vector<TrainedModel> load_checkpoints(const CheckpointList& list) {
    std::vector<std::string> missing;
    for (const auto& [name, path] : list)
        if (!fs::exists(path)) missing.push_back(name + " (" + path.string() + ")");
    if (!missing.empty()) {
        std::string msg = "missing checkpoints:";
        for (const auto& m : missing) msg += " " + m;
        throw Error(msg);
    }
    std::vector<TrainedModel> models;
    for (const auto& [name, path] : list) models.push_back(load_model(path));
    return models;
}

}  // namespace

PreparedTraining prepare_training(const ExperimentConfig& config) {
    const Dataset raw = load_dataset(config.train_csv, config.features, load_options(config));
    auto [train_raw, val_raw] =
        split_validation(raw, config.resolved_split_seed(), config.validation_size, config.stratify_by_view);
    PreparedTraining p;
    p.normalizer = config.prenormalized ? Normalizer::identity(raw.n_features()) : fit_normalizer(train_raw);
    p.train = apply_normalizer(train_raw, p.normalizer);
    p.validation = apply_normalizer(val_raw, p.normalizer);
    return p;
}

Dataset load_test_set(const ExperimentConfig& config) {
    Dataset ds = load_dataset(config.test_csv, config.features, load_options(config));
    for (auto& r : ds.records) r.view.clear();
    return ds;
}

namespace {

void write_prepared(const ExperimentConfig& config, const PreparedTraining& p) {
    const auto dir = config.out_dir / "data";
    write_json(dir / "metadata.json",
               {{"prenormalized", config.prenormalized},
                {"normalizer", p.normalizer.to_json()},
                {"split_seed", config.resolved_split_seed()},
                {"split", {{"train", id_list(p.train)}, {"validation", id_list(p.validation)}}}});
    if (config.write_normalized_data) {
        write_dataset_csv(dir / "train_normalized.csv", p.train);
        write_dataset_csv(dir / "validation_normalized.csv", p.validation);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweep

SweepResult cmd_sweep(const ExperimentConfig& config) {
    config.validate(true, false);
    fs::create_directories(config.out_dir);
    write_json(config.out_dir / "config.json", config.to_json());

    const auto prepared = prepare_training(config);
    write_prepared(config, prepared);
    const std::size_t d = prepared.train.n_features();
    const auto plan = generate_combination_plan(d, PlanMode::Validation, config.resolved_validation_plan_seed());
    plan.save(config.out_dir / "plans" / "validation_plan.json");
    const auto masked_val = build_masked_eval_set(prepared.validation, plan);
    const auto val_labels = masked_val.labels();

    SweepResult result;
    for (const auto kind : config.kinds)
        for (const double imp : config.imp_grid) {
            SweepRow row;
            row.kind = kind;
            row.imp = imp;
            row.seed = sweep_seed(config.seed, kind, imp);
            result.rows.push_back(row);
        }

    parallel_for(result.rows.size(), config.jobs, [&](std::size_t i) {
        auto& row = result.rows[i];
        try {
            const auto spec = config.spec_for(row.kind, row.imp);
            const auto model = train_model(spec, prepared.train, prepared.validation, prepared.normalizer);
            const auto scores = score_eval_set(model, masked_val, 1);
            row.masked_val_auc = stats::roc_auc(scores, val_labels, false).auc;
            row.checkpoint = checkpoint_name(row.kind, row.imp);
            save_model(config.out_dir / row.checkpoint, model);
        } catch (const std::exception& e) {
            row.status = std::string("failed: ") + e.what();
            row.masked_val_auc.reset();
            row.checkpoint.clear();
        }
    });

    // Selection per kind, ascending IMP so ties keep the lower value.
    std::vector<std::string> failed_kinds;
    for (const auto kind : config.kinds) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < result.rows.size(); ++i)
            if (result.rows[i].kind == kind && result.rows[i].masked_val_auc) idx.push_back(i);
        if (idx.empty()) {
            failed_kinds.push_back(to_string(kind));
            continue;
        }
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return result.rows[a].imp < result.rows[b].imp; });
        std::size_t best = idx.front();
        for (const auto i : idx)
            if (*result.rows[i].masked_val_auc > *result.rows[best].masked_val_auc) best = i;
        result.optimal[to_string(kind)] = best;
        for (const auto i : idx)
            if (result.rows[i].imp == 0.0) result.nim[to_string(kind)] = i;
    }

    json rows = json::array();
    for (const auto& r : result.rows)
        rows.push_back({{"kind", to_string(r.kind)},
                        {"imp", r.imp},
                        {"seed", r.seed},
                        {"masked_val_auc", r.masked_val_auc ? json(*r.masked_val_auc) : json(nullptr)},
                        {"status", r.status},
                        {"checkpoint", r.checkpoint}});
    write_json(config.out_dir / "sweep" / "manifest.json",
               {{"validation_records", prepared.validation.size()},
                {"validation_samples", masked_val.size()},
                {"validation_positives", masked_val.positives()},
                {"validation_plan_combinations", plan.size()},
                {"tie_policy", "lowest-imp"},
                {"rows", rows}});

    auto row_json = [&](std::size_t i) {
        const auto& r = result.rows[i];
        return json{{"imp", r.imp}, {"masked_val_auc", *r.masked_val_auc}, {"checkpoint", r.checkpoint}};
    };
    json selection = json::object();
    std::ostringstream table;
    table << "kind,optimal_imp,optimal_auc,nim_auc\n";
    for (const auto kind : config.kinds) {
        const auto name = to_string(kind);
        if (!result.optimal.contains(name)) continue;
        json entry{{"optimal", row_json(result.optimal.at(name))}};
        const auto& opt = result.rows[result.optimal.at(name)];
        table << name << ',' << csv_double(opt.imp) << ',' << csv_double(*opt.masked_val_auc) << ',';
        if (result.nim.contains(name)) {
            entry["nim"] = row_json(result.nim.at(name));
            table << csv_double(*result.rows[result.nim.at(name)].masked_val_auc);
        }
        table << '\n';
        selection[name] = entry;
    }
    write_json(config.out_dir / "sweep" / "selection.json", selection);
    io::write_file_atomic(config.out_dir / "sweep" / "table.csv", table.str());

    if (!failed_kinds.empty()) {
        std::string msg = "every model failed for:";
        for (const auto& k : failed_kinds) msg += " " + k;
        throw TrainingError(msg + " (see sweep/manifest.json)");
    }
    return result;
}

CheckpointList selected_checkpoints(const fs::path& out_dir, bool include_nim) {
    const auto path = out_dir / "sweep" / "selection.json";
    if (!fs::exists(path)) throw Error("no sweep selection at " + path.string() + "; run `dfcn sweep` first");
    const auto selection = read_json(path);
    CheckpointList list;
    for (const auto kind : all_model_kinds()) {
        const auto name = to_string(kind);
        if (!selection.contains(name)) continue;
        const auto& entry = selection.at(name);
        list.emplace_back(name, out_dir / entry.at("optimal").at("checkpoint").get<std::string>());
    }
    if (include_nim) {
        for (const auto kind : all_model_kinds()) {
            const auto name = to_string(kind);
            if (!selection.contains(name) || !selection.at(name).contains("nim")) continue;
            list.emplace_back("NIM " + name,
                              out_dir / selection.at(name).at("nim").at("checkpoint").get<std::string>());
        }
    }
    if (list.empty()) throw Error("sweep selection at " + path.string() + " is empty");
    return list;
}

// ---------------------------------------------------------------------------
// Ablation

stats::SignificanceReport cmd_ablation(const ExperimentConfig& config, const CheckpointList& checkpoints) {
    config.validate(false, true);
    const auto list = checkpoints.empty() ? selected_checkpoints(config.out_dir, true) : checkpoints;
    const auto models = load_checkpoints(list);
    std::vector<std::string> names;
    for (const auto& [name, _] : list) names.push_back(name);
    {
        std::set<std::string> unique(names.begin(), names.end());
        if (unique.size() != names.size()) throw ConfigError("model names must be unique");
    }

    const Dataset raw = load_test_set(config);
    const std::size_t d = raw.n_features();
    CombinationPlan plan;
    if (!config.test_plan_file.empty()) {
        plan = CombinationPlan::load(config.test_plan_file);
        if (plan.n_features != d)
            throw DimensionError("test plan has " + std::to_string(plan.n_features) + " features, data has " +
                                 std::to_string(d));
    } else {
        plan = generate_combination_plan(d, PlanMode::Test, config.resolved_test_plan_seed());
    }
    plan.save(config.out_dir / "plans" / "test_plan.json");

    // Entries depend only on the known flags, so every normalization yields
    // the same entry list.
    std::vector<std::pair<std::string, MaskedEvalSet>> sets;
    auto set_for = [&](const Normalizer& n) -> const MaskedEvalSet& {
        const auto key = n.to_json().dump();
        for (const auto& [k, s] : sets)
            if (k == key) return s;
        sets.emplace_back(key, build_masked_eval_set(apply_normalizer(raw, n), plan));
        return sets.back().second;
    };
    std::vector<std::vector<double>> scores;
    for (const auto& m : models) {
        if (m.n_features() != d)
            throw DimensionError("model expects " + std::to_string(m.n_features()) + " inputs, test data has " +
                                 std::to_string(d));
        scores.push_back(score_eval_set(m, set_for(m.normalizer), config.jobs));
    }
    const MaskedEvalSet& reference = sets.front().second;
    const auto labels = reference.labels();
    const auto lengths = reference.lengths();
    std::vector<std::span<const double>> views(scores.begin(), scores.end());
    const auto report = stats::significance_matrix(names, views, labels, lengths);

    const auto dir = config.out_dir / "ablation";
    std::vector<stats::PerNReport> per_n;
    for (const auto& s : scores) per_n.push_back(stats::evaluate_per_n(s, labels, lengths));
    {
        std::ostringstream out;
        out << "length,samples,positives";
        for (const auto& n : names) out << ',' << io::csv_field(n);
        out << '\n';
        for (std::size_t k = 0; k < per_n.front().entries.size(); ++k) {
            const auto& e = per_n.front().entries[k];
            out << e.length << ',' << e.samples << ',' << e.positives;
            for (const auto& r : per_n) out << ',' << (r.entries[k].valid ? csv_double(r.entries[k].auc) : "");
            out << '\n';
        }
        io::write_file_atomic(dir / "per_n_auc.csv", out.str());
    }
    write_json(dir / "significance.json", report.to_json());
    {
        std::ostringstream out;
        out << "length";
        for (const auto& n : names) out << ',' << io::csv_field(n);
        out << '\n';
        for (std::size_t k = 0; k < report.lengths.size(); ++k) {
            out << report.lengths[k];
            for (std::size_t m = 0; m < names.size(); ++m) out << ',' << report.worse_counts[m][k];
            out << '\n';
        }
        io::write_file_atomic(dir / "worse_counts.csv", out.str());
    }
    json summary_models = json::object();
    for (std::size_t m = 0; m < names.size(); ++m) {
        json full = nullptr;
        for (const auto& e : per_n[m].entries)
            if (e.length == d && e.valid) full = e.auc;
        summary_models[names[m]] = {{"checkpoint", list[m].second.string()},
                                    {"mean_per_n_auc", per_n[m].mean_auc},
                                    {"full_input_auc", full},
                                    {"warnings", per_n[m].warnings}};
    }
    write_json(dir / "summary.json",
               {{"samples", reference.size()},
                {"positives", reference.positives()},
                {"test_records", raw.size()},
                {"plan_combinations", plan.size()},
                {"models", summary_models}});
    ScoreDump::from_eval_set(reference, names, std::move(scores)).write_csv(dir / "scores.csv");
    return report;
}

// ---------------------------------------------------------------------------
// Subsets

namespace {

InputSubset resolve_subset(const ExperimentConfig& config, const std::string& name) {
    if (name == "all") return InputSubset::all(config.features.size());
    const auto it = config.subsets.find(name);
    if (it == config.subsets.end()) {
        std::string known = "all";
        for (const auto& [k, _] : config.subsets) known += ", " + k;
        throw ConfigError("unknown subset '" + name + "' (known: " + known + ")");
    }
    auto subset = InputSubset::from_names(name, it->second, config.features);
    return subset;
}

}  // namespace

stats::SubsetTable cmd_subset(const ExperimentConfig& config, const std::string& subset_name, bool retrain,
                              const CheckpointList& checkpoints) {
    config.validate(retrain, true);
    const auto subset = resolve_subset(config, subset_name);
    const auto list = checkpoints.empty() ? selected_checkpoints(config.out_dir, false) : checkpoints;
    auto models = load_checkpoints(list);
    std::vector<std::string> names;
    for (const auto& [name, _] : list) names.push_back(name);

    const auto dir = config.out_dir / "subset" / slug(subset_name);
    const Dataset raw = restrict_to_subset(load_test_set(config), subset, true);

    json retrained = json::array();
    if (retrain) {
        const auto prepared = prepare_training(config);
        const auto train = restrict_to_subset(prepared.train, subset, false);
        const auto val = restrict_to_subset(prepared.validation, subset, false);
        const auto plan = generate_subset_plan(subset, train.n_features(), PlanMode::Validation,
                                               derive_seed(config.resolved_validation_plan_seed(), "subset/" + subset_name));
        plan.save(dir / "validation_plan.json");
        const auto masked_val = build_masked_eval_set(val, plan);
        for (const auto kind : config.kinds) {
            auto base = config.spec_for(kind, 0.0);
            base.seed = derive_seed(config.seed, "subset/" + subset_name);
            auto sel = select_best_imp(base, config.imp_grid, train, val, masked_val, prepared.normalizer, config.jobs);
            const auto name = to_string(kind) + " (subset " + subset_name + ")";
            const auto ckpt = "checkpoints/" + to_string(kind) + ".json";
            save_model(dir / ckpt, *sel.best);
            json table = json::array();
            for (const auto& r : sel.table) table.push_back({{"imp", r.imp}, {"masked_val_auc", r.auc}, {"seed", r.seed}});
            retrained.push_back({{"model", name},
                                 {"imp", sel.table[sel.best_index].imp},
                                 {"checkpoint", ckpt},
                                 {"sweep", table}});
            names.push_back(name);
            models.push_back(std::move(*sel.best));
        }
    }

    NormalizedCache cache(raw);
    std::vector<int> labels;
    for (const auto& r : raw.records) labels.push_back(r.label);
    std::vector<std::vector<double>> scores;
    for (const auto& m : models) {
        const auto& ds = cache.get(m.normalizer);
        std::vector<MaskedSample> samples;
        samples.reserve(ds.size());
        for (const auto& r : ds.records) samples.push_back(unmasked(r));
        scores.push_back(predict_batch(m, samples));
    }
    std::vector<std::span<const double>> views(scores.begin(), scores.end());
    const auto table = stats::evaluate_subset(subset.name, names, views, labels);

    std::ostringstream out;
    out << "model,auc,p_vs_best,significantly_lower\n";
    for (const auto& r : table.rows)
        out << io::csv_field(r.model) << ',' << csv_double(r.auc) << ',' << csv_double(r.p_vs_best) << ','
            << (r.significantly_lower ? 1 : 0) << '\n';
    io::write_file_atomic(dir / "table.csv", out.str());
    auto table_json = table.to_json();
    table_json["features"] = json::array();
    for (const auto f : subset.indices) table_json["features"].push_back(config.features[f]);
    table_json["retrained"] = retrained;
    write_json(dir / "table.json", table_json);

    ScoreDump dump;
    dump.models = names;
    for (const auto& r : raw.records) {
        dump.subject_ids.push_back(r.subject_id);
        dump.combo_ids.push_back(0);
        dump.lengths.push_back(subset.indices.size());
        dump.labels.push_back(r.label);
    }
    dump.scores = std::move(scores);
    dump.write_csv(dir / "scores.csv");
    return table;
}

// ---------------------------------------------------------------------------
// Report

std::vector<fs::path> cmd_report(const fs::path& out_dir) {
    const auto ablation_scores = out_dir / "ablation" / "scores.csv";
    std::vector<fs::path> subset_dumps;
    if (fs::exists(out_dir / "subset"))
        for (const auto& entry : fs::directory_iterator(out_dir / "subset"))
            if (fs::exists(entry.path() / "scores.csv")) subset_dumps.push_back(entry.path() / "scores.csv");
    std::sort(subset_dumps.begin(), subset_dumps.end());
    if (!fs::exists(ablation_scores) && subset_dumps.empty())
        throw Error("nothing to report in " + out_dir.string() +
                    ": run `dfcn sweep` and then `dfcn ablation` and/or `dfcn subset` with --out " + out_dir.string());

    const auto dir = out_dir / "report";
    std::vector<fs::path> written;
    auto emit = [&](const fs::path& path, const std::string& content) {
        io::write_file_atomic(path, content);
        written.push_back(path);
    };

    if (fs::exists(ablation_scores)) {
        const auto dump = ScoreDump::read_csv(ablation_scores);
        std::vector<std::span<const double>> views(dump.scores.begin(), dump.scores.end());
        const auto sig = stats::significance_matrix(dump.models, views, dump.labels, dump.lengths);
        for (std::size_t m = 0; m < dump.models.size(); ++m) {
            const auto per_n = stats::evaluate_per_n(dump.scores[m], dump.labels, dump.lengths);
            std::ostringstream out;
            out << "length,samples,positives,auc\n";
            for (const auto& e : per_n.entries)
                out << e.length << ',' << e.samples << ',' << e.positives << ','
                    << (e.valid ? csv_double(e.auc) : "") << '\n';
            emit(dir / ("per_n_" + slug(dump.models[m]) + ".csv"), out.str());

            std::ostringstream steps;
            steps << "length,rivals_significantly_worse\n";
            for (std::size_t k = 0; k < sig.lengths.size(); ++k)
                steps << sig.lengths[k] << ',' << sig.worse_counts[m][k] << '\n';
            emit(dir / ("significance_" + slug(dump.models[m]) + ".csv"), steps.str());
        }
        std::ostringstream mean;
        mean << "model,mean_per_n_auc\n";
        for (std::size_t m = 0; m < dump.models.size(); ++m)
            mean << io::csv_field(dump.models[m]) << ',' << csv_double(sig.mean_auc[m]) << '\n';
        emit(dir / "mean_auc.csv", mean.str());
    }

    for (const auto& path : subset_dumps) {
        const auto subset = path.parent_path().filename().string();
        const auto dump = ScoreDump::read_csv(path);
        std::ostringstream aucs;
        aucs << "model,auc\n";
        for (std::size_t m = 0; m < dump.models.size(); ++m) {
            const auto roc = stats::roc_auc(dump.scores[m], dump.labels, true);
            std::ostringstream out;
            out << "fpr,tpr\n";
            for (const auto& p : roc.points) out << csv_double(p.fpr) << ',' << csv_double(p.tpr) << '\n';
            emit(dir / ("roc_" + subset + "_" + slug(dump.models[m]) + ".csv"), out.str());
            aucs << io::csv_field(dump.models[m]) << ',' << csv_double(roc.auc) << '\n';
        }
        emit(dir / ("subset_" + subset + "_auc.csv"), aucs.str());
    }
    return written;
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckSummary cmd_gradcheck(std::size_t configurations, std::uint64_t seed, double tolerance) {
    GradCheckSummary summary;
    Rng rng(seed);
    const nn::Activation activations[] = {nn::Activation::Relu, nn::Activation::Tanh, nn::Activation::Linear};
    for (std::size_t c = 0; c < configurations; ++c) {
        nn::Architecture arch;
        arch.input_dim = 2 + uniform_index(rng, 5);
        arch.encoder.clear();
        const std::size_t depth = 1 + uniform_index(rng, 2);
        for (std::size_t l = 0; l < depth; ++l) arch.encoder.push_back(2 + uniform_index(rng, 5));
        arch.classifier_hidden.assign(uniform_index(rng, 2), 2 + uniform_index(rng, 4));
        arch.decoder_hidden.assign(uniform_index(rng, 2), 2 + uniform_index(rng, 4));
        arch.hidden = activations[uniform_index(rng, 3)];
        auto params = nn::init_network(arch, rng());
        // Nonzero biases so every parameter is exercised.
        nn::for_each_tensor(params, [&](const std::string&, std::span<double> t) {
            for (auto& v : t) v += 0.1 * standard_normal(rng);
        });

        const std::size_t d = arch.input_dim;
        MaskedSample s;
        s.label = static_cast<int>(uniform_index(rng, 2));
        s.values.assign(d, 0.0);
        s.target.assign(d, 0.0);
        s.known.assign(d, 1);
        s.train_mask.assign(d, 0);
        // Cycle through empty, full and random eligible sets.
        const std::size_t pattern = c % 4;
        for (std::size_t f = 0; f < d; ++f) {
            const double x = standard_normal(rng);
            if (pattern >= 2) s.known[f] = bernoulli(rng, 0.8) ? 1 : 0;
            if (pattern == 1) s.train_mask[f] = 1;
            if (pattern >= 2) s.train_mask[f] = bernoulli(rng, 0.5) ? 1 : 0;
            s.target[f] = s.known[f] ? x : 0.0;
            s.values[f] = (s.known[f] && !s.train_mask[f]) ? x : 0.0;
        }
        const double lambda = c % 5 == 0 ? 0.0 : 2.0 * uniform01(rng);
        nn::Objective objective;
        switch (uniform_index(rng, 4)) {
            case 0: objective = nn::Objective::reconstruction_only(); break;
            case 1: objective = nn::Objective::frozen_encoder_classifier(); break;
            default: objective = nn::Objective::composite(lambda); break;
        }
        const auto mode = uniform_index(rng, 4) == 0 ? nn::ReconMode::Union : nn::ReconMode::Intersection;
        nn::GradCheckOptions options;
        options.tolerance = tolerance;
        const auto report = nn::grad_check(params, s, objective, options, mode);

        ++summary.configurations;
        summary.max_relative_error = std::max(summary.max_relative_error, report.max_relative_error);
        if (!report.passed) ++summary.failures;
        std::ostringstream line;
        line << "config " << c << ": dims " << d;
        for (const auto w : arch.encoder) line << '-' << w;
        line << " eligible " << s.eligible_count() << '/' << d << " recon_weight "
             << io::format_double(objective.recon_weight) << " max_rel " << report.max_relative_error
             << (report.passed ? " ok" : " FAIL at " + report.worst_parameter);
        summary.lines.push_back(line.str());
    }
    return summary;
}

Dataset cmd_gen_data(const std::string& profile, std::uint64_t seed, const fs::path& out_csv) {
    auto ds = synthetic::generate(synthetic::profile_by_name(profile), seed);
    write_dataset_csv(out_csv, ds);
    return ds;
}

}  // namespace dfcn
