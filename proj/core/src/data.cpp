#include "dfcn/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"
#include "dfcn/rng.hpp"

namespace dfcn {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::optional<double> parse_number(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += ", ";
        out += "'" + item + "'";
    }
    return out;
}

Dataset with_records(const Dataset& like, std::vector<FeatureRecord> records) {
    Dataset out;
    out.feature_names = like.feature_names;
    out.split = like.split;
    out.records = std::move(records);
    return out;
}

}  // namespace

std::string to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::Train: return "train";
        case SplitTag::Validation: return "validation";
        case SplitTag::Test: return "test";
    }
    return "train";
}

SplitTag split_tag_from_string(const std::string& name) {
    if (name == "train") return SplitTag::Train;
    if (name == "validation") return SplitTag::Validation;
    if (name == "test") return SplitTag::Test;
    throw DataError("unknown split tag '" + name + "'");
}

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [](const FeatureRecord& r) { return r.label == 1; }));
}

bool Dataset::has_views() const {
    return !records.empty() &&
           std::all_of(records.begin(), records.end(), [](const FeatureRecord& r) { return !r.view.empty(); });
}

void Dataset::validate() const {
    std::set<std::string> names(feature_names.begin(), feature_names.end());
    if (names.size() != feature_names.size()) throw DataError("duplicate feature names");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.values.size() != n_features() || r.known.size() != n_features())
            throw DimensionError("record " + std::to_string(i) + " has " + std::to_string(r.values.size()) +
                                 " values, expected " + std::to_string(n_features()));
        if (r.label != 0 && r.label != 1)
            throw DataError("record " + std::to_string(i) + " has non-binary label");
    }
}

const std::vector<std::string>& default_feature_names() {
    static const std::vector<std::string> names{
        "Alkaline Phosphatase",
        "Alanine Aminotransferase",
        "Aspartate Aminotransferase",
        "Bilirubin Direct",
        "Bilirubin Total",
        "Creatine Kinase",
        "C-Reactive Protein",
        "Absolute Basophil Count",
        "Absolute Eosinophil Count",
        "Absolute Lymphocyte Count",
        "Absolute Monocyte Count",
        "Absolute Neutrophil Count",
        "D-Dimer",
        "Ferritin",
        "Gamma-Glutamyl Transferase",
        "Hemoglobin",
        "Hematocrit",
        "Potassium",
        "Creatinine",
        "Lactate Dehydrogenase",
        "Absolute Leukocyte Count",
        "Mean Corpuscular Volume",
        "Magnesium",
        "Sodium",
        "Procalcitonin",
        "Thrombocyte Count",
        "Urea",
        "Chest X-Ray",
    };
    return names;
}

const std::vector<std::string>& subset_a_names() {
    static const std::vector<std::string> names{
        "C-Reactive Protein", "Absolute Lymphocyte Count", "Absolute Neutrophil Count",
        "Ferritin",           "Lactate Dehydrogenase",     "Chest X-Ray",
    };
    return names;
}

const std::vector<std::string>& subset_b_names() {
    static const std::vector<std::string> names{
        "C-Reactive Protein",        "Absolute Basophil Count",   "Absolute Eosinophil Count",
        "Absolute Lymphocyte Count", "Absolute Monocyte Count",   "Absolute Neutrophil Count",
        "Chest X-Ray",
    };
    return names;
}

Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& schema,
                     const LoadOptions& options) {
    const auto table = io::read_csv(path);

    std::map<std::string, std::size_t> schema_index;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (!schema_index.emplace(schema[i], i).second)
            throw DataError("schema lists feature '" + schema[i] + "' twice");
    }

    // column -> feature index, or one of the reserved columns
    constexpr std::size_t kLabel = static_cast<std::size_t>(-1);
    constexpr std::size_t kId = static_cast<std::size_t>(-2);
    constexpr std::size_t kView = static_cast<std::size_t>(-3);
    std::vector<std::size_t> column_role(table.header.size());
    std::vector<std::string> unknown;
    std::set<std::size_t> seen;
    bool has_label = false;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string name = trim(table.header[c]);
        if (name == options.label_column) {
            column_role[c] = kLabel;
            has_label = true;
        } else if (name == options.id_column) {
            column_role[c] = kId;
        } else if (name == options.view_column) {
            column_role[c] = kView;
        } else if (auto it = schema_index.find(name); it != schema_index.end()) {
            if (!seen.insert(it->second).second) throw DataError("column '" + name + "' appears twice");
            column_role[c] = it->second;
        } else {
            unknown.push_back(name);
        }
    }
    if (!unknown.empty()) throw DataError(path.string() + ": unknown column(s): " + join(unknown));
    if (!has_label) throw DataError(path.string() + ": missing label column '" + options.label_column + "'");
    std::vector<std::string> absent;
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (!seen.contains(i)) absent.push_back(schema[i]);
    if (!absent.empty()) throw DataError(path.string() + ": missing feature column(s): " + join(absent));

    std::set<std::string> missing_tokens;
    for (const auto& token : options.missing_tokens) missing_tokens.insert(lower(trim(token)));

    Dataset ds;
    ds.feature_names = schema;
    ds.records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path.string() + ": data row " + std::to_string(r + 1);
        if (row.size() != table.header.size())
            throw DataError(where + ": expected " + std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(row.size()));
        FeatureRecord rec;
        rec.values.assign(schema.size(), 0.0);
        rec.known.assign(schema.size(), 0);
        rec.subject_id = std::to_string(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::string cell = trim(row[c]);
            const std::size_t role = column_role[c];
            if (role == kId) {
                rec.subject_id = cell;
            } else if (role == kView) {
                rec.view = cell;
            } else if (role == kLabel) {
                const auto value = parse_number(cell);
                if (!value || (*value != 0.0 && *value != 1.0))
                    throw DataError(where + ", column '" + table.header[c] + "': non-binary label '" + cell + "'");
                rec.label = *value == 1.0 ? 1 : 0;
            } else {
                if (cell.empty() || missing_tokens.contains(lower(cell))) continue;
                const auto value = parse_number(cell);
                if (!value)
                    throw DataError(where + ", column '" + trim(table.header[c]) + "': malformed value '" + cell +
                                    "'");
                rec.values[role] = *value;
                rec.known[role] = 1;
            }
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Normalizer Normalizer::identity(std::size_t n_features) {
    return Normalizer{std::vector<double>(n_features, 0.0), std::vector<double>(n_features, 1.0)};
}

nlohmann::json Normalizer::to_json() const {
    return nlohmann::json{{"convention", "population"}, {"mean", mean}, {"stddev", stddev}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
    Normalizer n;
    n.mean = j.at("mean").get<std::vector<double>>();
    n.stddev = j.at("stddev").get<std::vector<double>>();
    if (n.mean.size() != n.stddev.size()) throw DataError("normalizer mean/stddev length mismatch");
    return n;
}

Normalizer fit_normalizer(const Dataset& train) {
    train.validate();
    const std::size_t d = train.n_features();
    Normalizer n;
    n.mean.assign(d, 0.0);
    n.stddev.assign(d, 0.0);
    for (std::size_t f = 0; f < d; ++f) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : train.records) {
            if (!r.known[f]) continue;
            sum += r.values[f];
            ++count;
        }
        if (count < 2)
            throw DataError("feature '" + train.feature_names[f] + "' has fewer than 2 observed values");
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (const auto& r : train.records) {
            if (!r.known[f]) continue;
            const double dev = r.values[f] - mean;
            ss += dev * dev;
        }
        const double sd = std::sqrt(ss / static_cast<double>(count));
        if (!(sd > 0.0)) throw DataError("feature '" + train.feature_names[f] + "' has zero variance");
        n.mean[f] = mean;
        n.stddev[f] = sd;
    }
    return n;
}

Dataset apply_normalizer(const Dataset& ds, const Normalizer& normalizer) {
    if (normalizer.n_features() != ds.n_features())
        throw DimensionError("normalizer has " + std::to_string(normalizer.n_features()) + " features, dataset has " +
                             std::to_string(ds.n_features()));
    ds.validate();
    Dataset out = ds;
    for (auto& r : out.records) {
        for (std::size_t f = 0; f < out.n_features(); ++f) {
            r.values[f] = r.known[f] ? (r.values[f] - normalizer.mean[f]) / normalizer.stddev[f] : 0.0;
        }
    }
    return out;
}

Dataset invert_normalizer(const Dataset& ds, const Normalizer& normalizer) {
    if (normalizer.n_features() != ds.n_features()) throw DimensionError("normalizer dimensionality mismatch");
    Dataset out = ds;
    for (auto& r : out.records) {
        for (std::size_t f = 0; f < out.n_features(); ++f) {
            r.values[f] = r.known[f] ? r.values[f] * normalizer.stddev[f] + normalizer.mean[f] : 0.0;
        }
    }
    return out;
}

std::vector<StratumQuota> default_validation_quotas(const Dataset& train, std::size_t n_val,
                                                    bool stratify_by_view) {
    const std::size_t pairs = n_val / 2;
    const std::size_t extra_positive = n_val % 2;
    if (!stratify_by_view || !train.has_views()) {
        return {{"", 0, pairs}, {"", 1, pairs + extra_positive}};
    }

    std::map<std::string, std::size_t> view_counts;
    for (const auto& r : train.records) ++view_counts[r.view];

    std::vector<std::pair<std::string, std::size_t>> alloc;
    if (view_counts.size() == 2 && view_counts.contains("PA") && view_counts.contains("AP")) {
        // 43 of every 51 balanced pairs are upright (PA), the rest bedside (AP).
        const std::size_t pa = static_cast<std::size_t>(std::llround(static_cast<double>(pairs) * 43.0 / 51.0));
        alloc = {{"PA", pa}, {"AP", pairs - pa}};
    } else {
        const double total = static_cast<double>(train.size());
        std::vector<std::pair<double, std::string>> remainders;
        std::size_t assigned = 0;
        for (const auto& [view, count] : view_counts) {
            const double exact = static_cast<double>(pairs) * static_cast<double>(count) / total;
            const auto floor_part = static_cast<std::size_t>(exact);
            alloc.emplace_back(view, floor_part);
            assigned += floor_part;
            remainders.emplace_back(exact - static_cast<double>(floor_part), view);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < pairs; ++i, ++assigned) {
            for (auto& [view, n] : alloc)
                if (view == remainders[i % remainders.size()].second) ++n;
        }
    }

    std::vector<StratumQuota> quotas;
    for (const auto& [view, n] : alloc) {
        if (n == 0) continue;
        quotas.push_back({view, 1, n});
        quotas.push_back({view, 0, n});
    }
    if (extra_positive) quotas.push_back({"", 1, 1});
    return quotas;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& train, std::uint64_t seed,
                                             const std::vector<StratumQuota>& quotas) {
    train.validate();
    std::size_t requested = 0;
    for (const auto& q : quotas) requested += q.count;
    if (requested > train.size())
        throw DataError("validation size " + std::to_string(requested) + " exceeds dataset size " +
                        std::to_string(train.size()));

    Rng rng(seed);
    std::vector<std::uint8_t> chosen(train.size(), 0);
    // View-specific strata first so a catch-all stratum cannot starve them.
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return !quotas[i].view.empty(); });
    for (const std::size_t qi : order) {
        const auto& q = quotas[qi];
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < train.size(); ++i) {
            const auto& r = train.records[i];
            if (!chosen[i] && r.label == q.label && (q.view.empty() || r.view == q.view)) pool.push_back(i);
        }
        if (pool.size() < q.count)
            throw DataError("stratum (view '" + q.view + "', label " + std::to_string(q.label) + ") has " +
                            std::to_string(pool.size()) + " records, need " + std::to_string(q.count));
        shuffle(std::span<std::size_t>(pool), rng);
        for (std::size_t k = 0; k < q.count; ++k) chosen[pool[k]] = 1;
    }

    std::vector<FeatureRecord> rest;
    std::vector<FeatureRecord> val;
    for (std::size_t i = 0; i < train.size(); ++i) (chosen[i] ? val : rest).push_back(train.records[i]);
    Dataset rest_ds = with_records(train, std::move(rest));
    Dataset val_ds = with_records(train, std::move(val));
    rest_ds.split = SplitTag::Train;
    val_ds.split = SplitTag::Validation;
    return {std::move(rest_ds), std::move(val_ds)};
}

std::pair<Dataset, Dataset> split_validation(const Dataset& train, std::uint64_t seed, std::size_t n_val,
                                             bool stratify_by_view) {
    return split_validation(train, seed, default_validation_quotas(train, n_val, stratify_by_view));
}

InputSubset InputSubset::from_names(std::string name, const std::vector<std::string>& members,
                                    const std::vector<std::string>& feature_names) {
    InputSubset subset{std::move(name), {}};
    std::vector<std::string> unmatched;
    for (const auto& m : members) {
        const auto it = std::find(feature_names.begin(), feature_names.end(), m);
        if (it == feature_names.end()) {
            unmatched.push_back(m);
            continue;
        }
        subset.indices.push_back(static_cast<std::size_t>(it - feature_names.begin()));
    }
    if (!unmatched.empty())
        throw DataError("subset '" + subset.name + "' names unknown feature(s): " + join(unmatched));
    std::sort(subset.indices.begin(), subset.indices.end());
    subset.indices.erase(std::unique(subset.indices.begin(), subset.indices.end()), subset.indices.end());
    return subset;
}

InputSubset InputSubset::all(std::size_t n_features) {
    InputSubset subset{"all", std::vector<std::size_t>(n_features)};
    std::iota(subset.indices.begin(), subset.indices.end(), 0);
    return subset;
}

Dataset restrict_to_subset(const Dataset& ds, const InputSubset& subset, bool require_complete) {
    std::vector<std::uint8_t> in_subset(ds.n_features(), 0);
    for (const auto i : subset.indices) {
        if (i >= ds.n_features())
            throw DimensionError("subset '" + subset.name + "' index " + std::to_string(i) + " out of range");
        in_subset[i] = 1;
    }
    std::vector<FeatureRecord> kept;
    for (const auto& r : ds.records) {
        if (require_complete) {
            const bool complete = std::all_of(subset.indices.begin(), subset.indices.end(),
                                              [&](std::size_t i) { return r.known[i] != 0; });
            if (!complete) continue;
        }
        FeatureRecord out = r;
        for (std::size_t f = 0; f < ds.n_features(); ++f) {
            if (in_subset[f]) continue;
            out.known[f] = 0;
            out.values[f] = 0.0;
        }
        kept.push_back(std::move(out));
    }
    if (kept.empty()) throw DataError("subset '" + subset.name + "' leaves no records");
    return with_records(ds, std::move(kept));
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ostringstream out;
    out << "subject_id";
    const bool views = ds.has_views();
    if (views) out << ",view";
    for (const auto& name : ds.feature_names) out << ',' << io::csv_field(name);
    out << ",label\n";
    for (const auto& r : ds.records) {
        out << io::csv_field(r.subject_id);
        if (views) out << ',' << io::csv_field(r.view);
        for (std::size_t f = 0; f < ds.n_features(); ++f) {
            out << ',';
            if (r.known[f]) out << io::format_double(r.values[f]);
        }
        out << ',' << r.label << '\n';
    }
    io::write_file_atomic(path, out.str());
}

}  // namespace dfcn
