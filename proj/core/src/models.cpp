#include "dfcn/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"
#include "dfcn/rng.hpp"
#include "dfcn/scoring.hpp"
#include "dfcn/stats.hpp"

namespace dfcn {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::DFCN: return "DFCN";
        case ModelKind::FCN: return "FCN";
        case ModelKind::DAE: return "DAE";
        case ModelKind::SDAE: return "SDAE";
        case ModelKind::RF: return "RF";
    }
    return "DFCN";
}

ModelKind model_kind_from_string(const std::string& name) {
    for (const auto k : all_model_kinds())
        if (to_string(k) == name) return k;
    throw ConfigError("unknown model kind '" + name + "' (expected DFCN, FCN, DAE, SDAE or RF)");
}

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> kinds{ModelKind::DFCN, ModelKind::FCN, ModelKind::DAE, ModelKind::SDAE,
                                              ModelKind::RF};
    return kinds;
}

bool is_network(ModelKind kind) { return kind != ModelKind::RF; }

void ModelSpec::validate() const {
    if (!(imp >= 0.0 && imp <= 1.0)) throw ConfigError("imp must lie in [0, 1], got " + io::format_double(imp));
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    if (!is_network(kind)) {
        if (forest.trees == 0) throw ConfigError("forest needs at least one tree");
        return;
    }
    if (training.epochs == 0 || training.batch_size == 0) throw ConfigError("epochs and batch size must be positive");
    if ((kind == ModelKind::DAE || kind == ModelKind::SDAE) && !architecture.has_bottleneck())
        throw ConfigError(to_string(kind) + " needs an encoding narrower than the input (" +
                          std::to_string(architecture.encoding_dim()) + " >= " +
                          std::to_string(architecture.input_dim) + ")");
}

nlohmann::json ModelSpec::to_json() const {
    return {{"kind", to_string(kind)},
            {"imp", imp},
            {"lambda", lambda},
            {"recon_mode", nn::to_string(recon_mode)},
            {"architecture", architecture.to_json()},
            {"output_activation", "softmax"},
            {"training",
             {{"epochs", training.epochs},
              {"learning_rate", training.learning_rate},
              {"batch_size", training.batch_size},
              {"pretrain_epochs", training.pretrain_epochs},
              {"val_mask_copies", training.val_mask_copies},
              {"optimizer", "adam"}}},
            {"forest",
             {{"trees", forest.trees},
              {"max_depth", forest.tree.max_depth},
              {"min_leaf", forest.tree.min_leaf},
              {"features_per_split", forest.tree.features_per_split},
              {"masking", forest.masking == RfMasking::PerDraw ? "per_draw" : "per_sample"}}},
            {"seed", seed}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    s.imp = j.at("imp").get<double>();
    s.lambda = j.value("lambda", s.lambda);
    s.recon_mode = nn::recon_mode_from_string(j.value("recon_mode", std::string("intersection")));
    if (j.contains("architecture")) s.architecture = nn::Architecture::from_json(j.at("architecture"));
    if (j.contains("training")) {
        const auto& t = j.at("training");
        s.training.epochs = t.value("epochs", s.training.epochs);
        s.training.learning_rate = t.value("learning_rate", s.training.learning_rate);
        s.training.batch_size = t.value("batch_size", s.training.batch_size);
        s.training.pretrain_epochs = t.value("pretrain_epochs", s.training.pretrain_epochs);
        s.training.val_mask_copies = t.value("val_mask_copies", s.training.val_mask_copies);
    }
    if (j.contains("forest")) {
        const auto& f = j.at("forest");
        s.forest.trees = f.value("trees", s.forest.trees);
        s.forest.tree.max_depth = f.value("max_depth", s.forest.tree.max_depth);
        s.forest.tree.min_leaf = f.value("min_leaf", s.forest.tree.min_leaf);
        s.forest.tree.features_per_split = f.value("features_per_split", s.forest.tree.features_per_split);
        const auto masking = f.value("masking", std::string("per_draw"));
        if (masking != "per_draw" && masking != "per_sample")
            throw ConfigError("forest masking must be per_draw or per_sample");
        s.forest.masking = masking == "per_draw" ? RfMasking::PerDraw : RfMasking::PerSample;
    }
    s.seed = j.value("seed", s.seed);
    return s;
}

ModelSpec default_spec(ModelKind kind, std::size_t n_features, double imp, std::uint64_t seed) {
    ModelSpec s;
    s.kind = kind;
    s.imp = imp;
    s.seed = seed;
    s.architecture = (kind == ModelKind::DAE || kind == ModelKind::SDAE) ? nn::bottleneck_architecture(n_features)
                                                                           : nn::wide_architecture(n_features);
    return s;
}

std::size_t TrainedModel::n_features() const {
    if (is_forest()) return spec.architecture.input_dim;
    return network().input_dim;
}

namespace {

void check_inputs(const ModelSpec& spec, const Dataset& train, ModelKind expected) {
    if (spec.kind != expected)
        throw ConfigError("spec kind " + to_string(spec.kind) + " passed to the " + to_string(expected) + " trainer");
    spec.validate();
    train.validate();
    if (train.size() == 0) throw DataError("empty training set");
    if (is_network(spec.kind) && spec.architecture.input_dim != train.n_features())
        throw DimensionError("architecture expects " + std::to_string(spec.architecture.input_dim) +
                             " inputs, training data has " + std::to_string(train.n_features()));
}

// Fixed, seed-derived masked copies of the validation set used to pick the
// best epoch.
struct ValidationProbe {
    std::vector<MaskedSample> samples;
    std::vector<int> labels;
    bool usable = false;

    ValidationProbe(const Dataset& val, double imp, std::size_t copies, std::uint64_t seed) {
        if (val.size() == 0 || val.positives() == 0 || val.negatives() == 0) return;
        Rng rng(seed);
        for (std::size_t c = 0; c < std::max<std::size_t>(1, copies); ++c) {
            for (const auto& r : val.records) {
                samples.push_back(apply_random_mask(r, imp, rng));
                labels.push_back(r.label);
            }
        }
        usable = true;
    }
};

double probe_auc(const nn::NetworkParams& params, const ValidationProbe& probe) {
    const auto batch = nn::make_batch(probe.samples);
    const Eigen::VectorXd p = nn::predict_positive(params, batch.inputs);
    return stats::roc_auc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), probe.labels, false)
        .auc;
}

struct PhaseSetup {
    std::size_t phase = 1;
    std::size_t epochs = 0;
    nn::Objective objective;
    nn::ParamGroup groups = nn::ParamGroup::All;
    bool select_on_validation = true;
    bool run_decoder = true;
};

// One training phase: fresh masks per sample per epoch, mini-batch Adam, and
// (optionally) the parameter snapshot with the best validation AUC retained.
void run_phase(const ModelSpec& spec, const PhaseSetup& setup, const Dataset& train, const ValidationProbe& probe,
               nn::NetworkParams& params, Rng& order_rng, Rng& mask_rng, TrainedModel& model, std::size_t& step,
               const TrainHooks& hooks) {
    nn::Adam adam({spec.training.learning_rate});
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    std::optional<nn::NetworkParams> best;
    double best_auc = -1.0;
    std::size_t best_epoch = 0;

    std::vector<MaskedSample> batch_samples;
    for (std::size_t epoch = 1; epoch <= setup.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), order_rng);
        double ce_sum = 0.0;
        double rec_sum = 0.0;
        double total_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += spec.training.batch_size) {
            const std::size_t end = std::min(order.size(), begin + spec.training.batch_size);
            batch_samples.clear();
            for (std::size_t k = begin; k < end; ++k)
                batch_samples.push_back(apply_random_mask(train.records[order[k]], spec.imp, mask_rng));
            const auto batch = nn::make_batch(batch_samples, spec.recon_mode);
            const auto cache = nn::forward(params, batch.inputs, setup.run_decoder);
            const auto l = nn::loss(cache, batch, setup.objective.recon_weight);
            if (!std::isfinite(l.total))
                throw TrainingError(to_string(spec.kind) + " phase " + std::to_string(setup.phase) + " epoch " +
                                    std::to_string(epoch) + " step " + std::to_string(step) +
                                    ": non-finite loss");
            const auto grads = nn::backward(params, cache, batch, setup.objective);
            nn::optimizer_step(params, grads, adam, setup.groups);
            ++step;
            if (hooks.on_step) hooks.on_step(setup.phase, step, params);
            const double w = static_cast<double>(end - begin);
            ce_sum += w * l.classification;
            rec_sum += w * l.reconstruction;
            total_sum += w * l.total;
        }
        const double n = static_cast<double>(order.size());
        EpochLog log{setup.phase, epoch, ce_sum / n, rec_sum / n, total_sum / n, std::nullopt};
        if (setup.select_on_validation && probe.usable) {
            const double auc = probe_auc(params, probe);
            log.val_auc = auc;
            if (auc > best_auc) {
                best_auc = auc;
                best = params;
                best_epoch = epoch;
            }
        }
        model.log.push_back(log);
    }
    if (setup.select_on_validation) {
        if (best) {
            params = std::move(*best);
            model.best_epoch = best_epoch;
        } else {
            model.best_epoch = setup.epochs;
        }
    }
}

TrainedModel train_joint(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                         const Normalizer& normalizer, const TrainHooks& hooks, const nn::Objective& objective) {
    TrainedModel model;
    model.spec = spec;
    model.normalizer = normalizer;
    auto params = nn::init_network(spec.architecture, derive_seed(spec.seed, "init"));
    Rng order_rng(derive_seed(spec.seed, "order"));
    Rng mask_rng(derive_seed(spec.seed, "mask"));
    const ValidationProbe probe(val, spec.imp, spec.training.val_mask_copies, derive_seed(spec.seed, "val"));
    std::size_t step = 0;
    PhaseSetup setup;
    setup.phase = 1;
    setup.epochs = spec.training.epochs;
    setup.objective = objective;
    setup.run_decoder = objective.recon_weight != 0.0;
    run_phase(spec, setup, train, probe, params, order_rng, mask_rng, model, step, hooks);
    model.body = std::move(params);
    return model;
}

}  // namespace

TrainedModel train_dfcn(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                        const Normalizer& normalizer, const TrainHooks& hooks) {
    check_inputs(spec, train, ModelKind::DFCN);
    return train_joint(spec, train, val, normalizer, hooks, nn::Objective::composite(spec.lambda));
}

TrainedModel train_fcn(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                       const Normalizer& normalizer, const TrainHooks& hooks) {
    check_inputs(spec, train, ModelKind::FCN);
    return train_joint(spec, train, val, normalizer, hooks, nn::Objective::classification_only());
}

TrainedModel train_sdae(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                        const Normalizer& normalizer, const TrainHooks& hooks) {
    check_inputs(spec, train, ModelKind::SDAE);
    return train_joint(spec, train, val, normalizer, hooks, nn::Objective::composite(spec.lambda));
}

TrainedModel train_dae(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                       const Normalizer& normalizer, const TrainHooks& hooks) {
    check_inputs(spec, train, ModelKind::DAE);
    TrainedModel model;
    model.spec = spec;
    model.normalizer = normalizer;
    auto params = nn::init_network(spec.architecture, derive_seed(spec.seed, "init"));
    Rng order_rng(derive_seed(spec.seed, "order"));
    Rng mask_rng(derive_seed(spec.seed, "mask"));
    const ValidationProbe probe(val, spec.imp, spec.training.val_mask_copies, derive_seed(spec.seed, "val"));
    std::size_t step = 0;

    PhaseSetup pretrain;
    pretrain.phase = 1;
    pretrain.epochs = spec.training.pretrain_epochs ? spec.training.pretrain_epochs : spec.training.epochs;
    pretrain.objective = nn::Objective::reconstruction_only();
    pretrain.groups = static_cast<nn::ParamGroup>(static_cast<unsigned>(nn::ParamGroup::Encoder) |
                                                  static_cast<unsigned>(nn::ParamGroup::Decoder));
    pretrain.select_on_validation = false;
    run_phase(spec, pretrain, train, probe, params, order_rng, mask_rng, model, step, hooks);

    PhaseSetup classify;
    classify.phase = 2;
    classify.epochs = spec.training.epochs;
    classify.objective = nn::Objective::frozen_encoder_classifier();
    classify.groups = nn::ParamGroup::Classifier;
    classify.run_decoder = false;
    run_phase(spec, classify, train, probe, params, order_rng, mask_rng, model, step, hooks);

    model.body = std::move(params);
    return model;
}

TrainedModel train_rf(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                      const Normalizer& normalizer) {
    check_inputs(spec, train, ModelKind::RF);
    const std::size_t n = train.size();
    const std::size_t d = train.n_features();

    auto masked_row = [&](const FeatureRecord& r, Rng& rng, double* out) {
        for (std::size_t f = 0; f < d; ++f) {
            const double v = r.known[f] ? r.values[f] : 0.0;
            out[f] = bernoulli(rng, spec.imp) ? 0.0 : v;
        }
    };

    // Masked once per original sample, shared by all trees.
    std::vector<double> per_sample;
    if (spec.forest.masking == RfMasking::PerSample) {
        per_sample.resize(n * d);
        Rng rng(derive_seed(spec.seed, "rf-sample-mask"));
        for (std::size_t i = 0; i < n; ++i) masked_row(train.records[i], rng, per_sample.data() + i * d);
    }

    std::vector<forest::DecisionTree> trees;
    trees.reserve(spec.forest.trees);
    std::vector<double> values(n * d);
    std::vector<int> labels(n);
    for (std::size_t t = 0; t < spec.forest.trees; ++t) {
        Rng rng(derive_seed(spec.seed, "tree/" + std::to_string(t)));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t draw = uniform_index(rng, n);
            labels[i] = train.records[draw].label;
            if (spec.forest.masking == RfMasking::PerDraw) {
                masked_row(train.records[draw], rng, values.data() + i * d);
            } else {
                std::copy_n(per_sample.data() + draw * d, d, values.data() + i * d);
            }
        }
        const forest::Samples samples{values, labels, d};
        trees.push_back(forest::DecisionTree::grow(samples, spec.forest.tree, rng));
    }

    TrainedModel model;
    model.spec = spec;
    model.spec.architecture.input_dim = d;
    model.normalizer = normalizer;
    model.body = forest::Forest(std::move(trees));
    if (val.size() > 0 && val.positives() > 0 && val.negatives() > 0) {
        const ValidationProbe probe(val, spec.imp, spec.training.val_mask_copies, derive_seed(spec.seed, "val"));
        const auto scores = predict_batch(model, probe.samples);
        model.log.push_back({1, 1, 0.0, 0.0, 0.0, stats::roc_auc(scores, probe.labels, false).auc});
    }
    model.best_epoch = 1;
    return model;
}

TrainedModel train_model(const ModelSpec& spec, const Dataset& train, const Dataset& val,
                         const Normalizer& normalizer, const TrainHooks& hooks) {
    switch (spec.kind) {
        case ModelKind::DFCN: return train_dfcn(spec, train, val, normalizer, hooks);
        case ModelKind::FCN: return train_fcn(spec, train, val, normalizer, hooks);
        case ModelKind::DAE: return train_dae(spec, train, val, normalizer, hooks);
        case ModelKind::SDAE: return train_sdae(spec, train, val, normalizer, hooks);
        case ModelKind::RF: return train_rf(spec, train, val, normalizer);
    }
    throw ConfigError("unknown model kind");
}

double predict(const TrainedModel& model, std::span<const double> values) {
    if (values.size() != model.n_features())
        throw DimensionError("model expects " + std::to_string(model.n_features()) + " inputs, got " +
                             std::to_string(values.size()));
    if (model.is_forest()) return model.forest().predict(values);
    const Eigen::Map<const Eigen::MatrixXd> x(values.data(), static_cast<Eigen::Index>(values.size()), 1);
    return nn::predict_positive(model.network(), x)(0);
}

double predict(const TrainedModel& model, const MaskedSample& sample) { return predict(model, sample.values); }

std::vector<double> predict_batch(const TrainedModel& model, std::span<const MaskedSample> samples) {
    std::vector<double> out(samples.size());
    if (samples.empty()) return out;
    for (const auto& s : samples)
        if (s.n_features() != model.n_features())
            throw DimensionError("model expects " + std::to_string(model.n_features()) + " inputs, got " +
                                 std::to_string(s.n_features()));
    if (model.is_forest()) {
        const std::size_t d = model.n_features();
        std::vector<double> rows;
        rows.reserve(samples.size() * d);
        for (const auto& s : samples) rows.insert(rows.end(), s.values.begin(), s.values.end());
        model.forest().predict_rows(rows, d, out);
        return out;
    }
    const auto batch = nn::make_batch(samples);
    const Eigen::VectorXd p = nn::predict_positive(model.network(), batch.inputs);
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = p(static_cast<Eigen::Index>(i));
    return out;
}

std::uint64_t sweep_seed(std::uint64_t master, ModelKind kind, double imp) {
    return derive_seed(master, to_string(kind) + "/imp=" + io::format_double(imp));
}

ImpSelection select_best_imp(const ModelSpec& base, std::span<const double> imp_grid, const Dataset& train,
                             const Dataset& val, const MaskedEvalSet& masked_val, const Normalizer& normalizer,
                             std::size_t jobs) {
    if (imp_grid.empty()) throw ConfigError("IMP grid is empty");
    std::vector<std::optional<TrainedModel>> models(imp_grid.size());
    std::vector<ImpResult> table(imp_grid.size());
    const auto labels = masked_val.labels();
    parallel_for(imp_grid.size(), jobs, [&](std::size_t i) {
        ModelSpec spec = base;
        spec.imp = imp_grid[i];
        spec.seed = sweep_seed(base.seed, base.kind, spec.imp);
        try {
            auto model = train_model(spec, train, val, normalizer);
            const auto scores = score_eval_set(model, masked_val, 1);
            table[i] = {spec.imp, stats::roc_auc(scores, labels, false).auc, spec.seed};
            models[i] = std::move(model);
        } catch (const Error& e) {
            throw TrainingError(to_string(base.kind) + " imp=" + io::format_double(spec.imp) + ": " + e.what());
        }
    });

    ImpSelection selection;
    selection.table = std::move(table);
    // Scan in ascending IMP so equal AUCs keep the lower IMP.
    std::vector<std::size_t> order(imp_grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp_grid[a] < imp_grid[b]; });
    std::size_t best = order.front();
    for (const auto i : order)
        if (selection.table[i].auc > selection.table[best].auc) best = i;
    selection.best_index = best;
    selection.best = std::move(models[best]);
    return selection;
}

}  // namespace dfcn
