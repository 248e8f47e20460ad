#include "dfcn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfcn/error.hpp"
#include "dfcn/rng.hpp"

namespace dfcn::synthetic {

Profile training_site_profile() {
    return Profile{
        "bhh",
        258,
        382,
        {0, 0, 0, 226, 0, 0, 0, 5, 5, 5, 5, 5, 207, 0, 0, 0, 0, 3, 0, 9, 0, 0, 74, 0, 36, 0, 0, 0},
        {0, 0, 0, 359, 0, 0, 0, 4, 4, 4, 4, 4, 370, 0, 0, 0, 0, 7, 0, 8, 0, 0, 158, 0, 212, 0, 0, 0},
        true,
    };
}

Profile test_site_profile() {
    return Profile{
        "jbh",
        197,
        291,
        {4, 4, 32, 3, 3, 12, 0, 9, 9, 9, 9, 9, 106, 102, 2, 1, 1, 7, 1, 31, 1, 1, 6, 1, 79, 1, 1, 0},
        {8, 9, 52, 2, 1, 20, 0, 5, 5, 5, 5, 5, 78, 72, 0, 2, 2, 7, 0, 52, 2, 2, 13, 0, 25, 2, 1, 0},
        false,
    };
}

Profile profile_by_name(const std::string& name) {
    if (name == "bhh" || name == "train") return training_site_profile();
    if (name == "jbh" || name == "test") return test_site_profile();
    throw ConfigError("unknown synthetic profile '" + name + "' (expected bhh or jbh)");
}

namespace {

// Feature groups that are measured on one panel and go missing together.
std::vector<std::vector<std::size_t>> missing_groups(std::size_t d) {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::uint8_t> grouped(d, 0);
    if (d == 28) {
        groups.push_back({7, 8, 9, 10, 11});
        groups.push_back({15, 16, 20, 21, 25});
        for (const auto& g : groups)
            for (const auto f : g) grouped[f] = 1;
    }
    for (std::size_t f = 0; f < d; ++f)
        if (!grouped[f]) groups.push_back({f});
    return groups;
}

struct FeatureModel {
    double effect;   // label shift in latent units
    double loading;  // shared severity loading
    double centre;
    double scale;
    bool probability;  // squash into (0, 1), like the x-ray score
};

std::vector<FeatureModel> feature_models(std::size_t d, std::uint64_t seed) {
    // Shapes are fixed per feature index so both sites share the same
    // generative process.
    Rng rng(derive_seed(seed, "feature-models"));
    std::vector<FeatureModel> models;
    for (std::size_t f = 0; f < d; ++f) {
        FeatureModel m;
        m.effect = 0.15 + 0.6 * uniform01(rng);
        if (uniform01(rng) < 0.4) m.effect = -m.effect;
        m.loading = 0.3 + 0.5 * uniform01(rng);
        m.centre = 5.0 + 95.0 * uniform01(rng);
        m.scale = 0.5 + 20.0 * uniform01(rng);
        m.probability = false;
        models.push_back(m);
    }
    if (d == 28) {
        models[6].effect = 1.1;    // C-reactive protein
        models[9].effect = -0.9;   // lymphocytes
        models[27].effect = 1.3;   // x-ray score
        models[27].probability = true;
    }
    return models;
}

}  // namespace

Dataset generate(const Profile& profile, std::uint64_t seed) {
    const std::size_t d = profile.missing_negative.size();
    if (profile.missing_positive.size() != d) throw ConfigError("profile missing-count vectors differ in length");
    const auto names = d == 28 ? default_feature_names() : [&] {
        std::vector<std::string> n;
        for (std::size_t f = 0; f < d; ++f) n.push_back("f" + std::to_string(f));
        return n;
    }();
    const auto models = feature_models(d, 0x5eed);
    Rng rng(seed);

    Dataset ds;
    ds.feature_names = names;
    const std::size_t n = profile.negatives + profile.positives;
    std::vector<int> labels(n, 0);
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(profile.negatives), labels.end(), 1);
    shuffle(std::span<int>(labels), rng);

    for (std::size_t i = 0; i < n; ++i) {
        FeatureRecord r;
        r.label = labels[i];
        r.subject_id = profile.name + "-" + std::to_string(i);
        const double severity = standard_normal(rng);
        const double sign = r.label == 1 ? 0.5 : -0.5;
        r.values.resize(d);
        r.known.assign(d, 1);
        for (std::size_t f = 0; f < d; ++f) {
            const auto& m = models[f];
            const double latent = sign * m.effect + m.loading * severity * sign * 2.0 * 0.5 +
                                  std::sqrt(1.0 - 0.5 * m.loading * m.loading) * standard_normal(rng);
            if (m.probability) {
                r.values[f] = 1.0 / (1.0 + std::exp(-1.5 * latent));
            } else {
                r.values[f] = std::max(0.01, m.centre + m.scale * latent);
            }
        }
        if (profile.with_views) r.view = uniform01(rng) < 0.84 ? "PA" : "AP";
        ds.records.push_back(std::move(r));
    }

    // Exact per-class missing counts, shared within panels.
    for (int label = 0; label <= 1; ++label) {
        const auto& counts = label == 1 ? profile.missing_positive : profile.missing_negative;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (ds.records[i].label == label) members.push_back(i);
        for (const auto& group : missing_groups(d)) {
            const std::size_t count = counts[group.front()];
            if (count > members.size()) throw ConfigError("missing count exceeds class size");
            for (const auto f : group)
                if (counts[f] != count) throw ConfigError("features in one panel need equal missing counts");
            auto pool = members;
            shuffle(std::span<std::size_t>(pool), rng);
            for (std::size_t k = 0; k < count; ++k) {
                for (const auto f : group) {
                    ds.records[pool[k]].known[f] = 0;
                    ds.records[pool[k]].values[f] = 0.0;
                }
            }
        }
    }
    return ds;
}

Dataset generate_simple(std::size_t n_records, std::size_t n_features, double missing_rate, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    for (std::size_t f = 0; f < n_features; ++f) ds.feature_names.push_back("f" + std::to_string(f));
    const auto models = feature_models(n_features, seed);
    for (std::size_t i = 0; i < n_records; ++i) {
        FeatureRecord r;
        r.label = i % 2 == 0 ? 1 : 0;
        r.subject_id = "s" + std::to_string(i);
        const double sign = r.label == 1 ? 0.5 : -0.5;
        r.values.resize(n_features);
        r.known.assign(n_features, 1);
        for (std::size_t f = 0; f < n_features; ++f) {
            r.values[f] = 2.0 * sign * std::abs(models[f].effect) + standard_normal(rng);
            if (bernoulli(rng, missing_rate)) {
                r.known[f] = 0;
                r.values[f] = 0.0;
            }
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace dfcn::synthetic
