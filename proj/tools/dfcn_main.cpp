// dfcn: command-line front end for sweeps, ablation and subset evaluation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"
#include "dfcn/pipeline.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string kinds;
    std::string imp_grid;
    std::optional<std::size_t> jobs;
    std::string train;
    std::string test;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> trees;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON experiment config");
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--kinds", f.kinds, "Comma-separated model kinds (DFCN,FCN,DAE,SDAE,RF)");
    cmd->add_option("--imp-grid", f.imp_grid, "Comma-separated masking probabilities");
    cmd->add_option("--jobs", f.jobs, "Worker threads (0 = all cores)");
    cmd->add_option("--train", f.train, "Training CSV");
    cmd->add_option("--test", f.test, "Test CSV");
    cmd->add_option("--epochs", f.epochs, "Training epochs per phase");
    cmd->add_option("--trees", f.trees, "Random forest size");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

dfcn::ExperimentConfig resolve_config(const CommonFlags& f) {
    dfcn::ExperimentConfig c = f.config.empty() ? dfcn::ExperimentConfig{} : dfcn::ExperimentConfig::load(f.config);
    if (f.seed) c.seed = *f.seed;
    if (!f.out.empty()) c.out_dir = f.out;
    if (!f.kinds.empty()) {
        c.kinds.clear();
        for (const auto& k : split_list(f.kinds)) c.kinds.push_back(dfcn::model_kind_from_string(k));
    }
    if (!f.imp_grid.empty()) {
        c.imp_grid.clear();
        for (const auto& v : split_list(f.imp_grid)) {
            try {
                std::size_t used = 0;
                c.imp_grid.push_back(std::stod(v, &used));
                if (used != v.size()) throw std::invalid_argument(v);
            } catch (const std::exception&) {
                throw dfcn::ConfigError("--imp-grid: not a number: '" + v + "'");
            }
        }
    }
    if (f.jobs) c.jobs = *f.jobs;
    if (!f.train.empty()) c.train_csv = f.train;
    if (!f.test.empty()) c.test_csv = f.test;
    if (f.epochs) c.training.epochs = *f.epochs;
    if (f.trees) c.forest.trees = *f.trees;
    return c;
}

dfcn::CheckpointList parse_checkpoints(const std::vector<std::string>& specs) {
    dfcn::CheckpointList list;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            list.emplace_back(std::filesystem::path(s).stem().string(), s);
        } else {
            list.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
    }
    return list;
}

int report_error(const std::string& type, const std::string& message, int code) {
    std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Denoising fully connected networks for tabular data with missing inputs"};
    app.require_subcommand(1);

    CommonFlags sweep_flags, ablation_flags, subset_flags;
    auto* sweep = app.add_subcommand("sweep", "Train every kind over the IMP grid and select on masked validation");
    add_common(sweep, sweep_flags);

    auto* ablation = app.add_subcommand("ablation", "Score selected models on the masked test set");
    add_common(ablation, ablation_flags);
    std::vector<std::string> ablation_ckpts;
    std::string plan_file;
    ablation->add_option("--checkpoint", ablation_ckpts, "name=path of a model (repeatable; default: sweep selection)");
    ablation->add_option("--plan", plan_file, "Reuse a saved test combination plan");

    auto* subset = app.add_subcommand("subset", "Complete-case evaluation on a clinical input subset");
    add_common(subset, subset_flags);
    std::string subset_name = "A";
    bool retrain = false;
    std::vector<std::string> subset_ckpts;
    subset->add_option("--subset", subset_name, "Subset name from the config, or 'all'");
    subset->add_flag("--retrain", retrain, "Also train subset-only models over the IMP grid");
    subset->add_option("--checkpoint", subset_ckpts, "name=path of a model (repeatable; default: sweep optima)");

    auto* report = app.add_subcommand("report", "Write plot-ready CSV series from the score dumps");
    std::string report_dir;
    report->add_option("--out", report_dir, "Output directory of earlier stages")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    std::size_t gc_configs = 100;
    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-5;
    bool gc_verbose = false;
    gradcheck->add_option("--configs", gc_configs, "Number of random configurations");
    gradcheck->add_option("--seed", gc_seed, "Seed");
    gradcheck->add_option("--tolerance", gc_tol, "Relative error tolerance");
    gradcheck->add_flag("--verbose", gc_verbose, "Print one line per configuration");

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic cohort CSV");
    std::string profile = "bhh";
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--profile", profile, "bhh (training site shape) or jbh (test site shape)");
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_option("--out", gen_out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) {
            const auto config = resolve_config(sweep_flags);
            const auto result = dfcn::cmd_sweep(config);
            json sel = json::object();
            for (const auto& [kind, row] : result.optimal)
                sel[kind] = {{"imp", result.rows[row].imp}, {"masked_val_auc", *result.rows[row].masked_val_auc}};
            std::size_t failed = 0;
            for (const auto& r : result.rows) failed += r.status != "ok";
            std::cout << json{{"models", result.rows.size()}, {"failed", failed}, {"optimal", sel}}.dump(2) << '\n';
        } else if (*ablation) {
            auto config = resolve_config(ablation_flags);
            if (!plan_file.empty()) config.test_plan_file = plan_file;
            const auto rep = dfcn::cmd_ablation(config, parse_checkpoints(ablation_ckpts));
            json mean = json::object();
            for (std::size_t m = 0; m < rep.models.size(); ++m) mean[rep.models[m]] = rep.mean_auc[m];
            std::cout << json{{"mean_per_n_auc", mean}}.dump(2) << '\n';
        } else if (*subset) {
            const auto config = resolve_config(subset_flags);
            const auto table = dfcn::cmd_subset(config, subset_name, retrain, parse_checkpoints(subset_ckpts));
            std::cout << table.to_json().dump(2) << '\n';
        } else if (*report) {
            const auto files = dfcn::cmd_report(report_dir);
            std::cout << json{{"files", files.size()}}.dump() << '\n';
        } else if (*gradcheck) {
            const auto s = dfcn::cmd_gradcheck(gc_configs, gc_seed, gc_tol);
            if (gc_verbose)
                for (const auto& line : s.lines) std::cout << line << '\n';
            std::cout << json{{"configurations", s.configurations},
                              {"failures", s.failures},
                              {"max_relative_error", s.max_relative_error}}
                             .dump()
                      << '\n';
            return s.failures == 0 ? 0 : 1;
        } else if (*gen) {
            const auto ds = dfcn::cmd_gen_data(profile, gen_seed, gen_out);
            std::cout << json{{"records", ds.size()}, {"positives", ds.positives()}, {"path", gen_out}}.dump() << '\n';
        }
    } catch (const dfcn::ConfigError& e) {
        return report_error("config", e.what(), 2);
    } catch (const dfcn::DataError& e) {
        return report_error("data", e.what(), 3);
    } catch (const dfcn::TrainingError& e) {
        return report_error("training", e.what(), 4);
    } catch (const std::exception& e) {
        return report_error("error", e.what(), 1);
    }
    return 0;
}
