#include "dfcn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dfcn/error.hpp"

namespace dfcn::stats {

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels, bool with_points) {
    if (scores.size() != labels.size()) throw StatsError("scores and labels differ in length");
    RocResult r;
    // class-local position of each sample
    std::vector<std::size_t> slot(scores.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            slot[i] = r.n_pos++;
        else if (labels[i] == 0)
            slot[i] = r.n_neg++;
        else
            throw StatsError("labels must be 0 or 1");
    }
    if (r.n_pos == 0 || r.n_neg == 0) throw StatsError("AUC needs at least one positive and one negative sample");

    // Contiguous (score, index) keys sort far faster than an indirect index sort.
    std::vector<std::pair<double, std::size_t>> keyed(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw StatsError("score " + std::to_string(i) + " is NaN");
        keyed[i] = {scores[i], i};
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = keyed[i].second;

    // Counts are half-integers well below 2^53, so the sums below are exact.
    r.v10.assign(r.n_pos, 0.0);
    r.v01.assign(r.n_neg, 0.0);
    double u = 0.0;
    double neg_below = 0.0;
    double pos_below = 0.0;
    const double n_pos = static_cast<double>(r.n_pos);
    const double n_neg = static_cast<double>(r.n_neg);
    for (std::size_t g = 0; g < order.size();) {
        std::size_t h = g;
        double pos_tied = 0.0;
        double neg_tied = 0.0;
        while (h < order.size() && scores[order[h]] == scores[order[g]]) {
            (labels[order[h]] == 1 ? pos_tied : neg_tied) += 1.0;
            ++h;
        }
        const double pos_count = neg_below + neg_tied / 2.0;
        const double neg_count = (n_pos - pos_below - pos_tied) + pos_tied / 2.0;
        for (std::size_t k = g; k < h; ++k) {
            const std::size_t i = order[k];
            if (labels[i] == 1) {
                r.v10[slot[i]] = pos_count / n_neg;
                u += pos_count;
            } else {
                r.v01[slot[i]] = neg_count / n_pos;
            }
        }
        neg_below += neg_tied;
        pos_below += pos_tied;
        g = h;
    }
    r.auc = u / (n_pos * n_neg);

    if (with_points) {
        r.points.push_back({0.0, 0.0});
        double tp = 0.0;
        double fp = 0.0;
        for (std::size_t g = order.size(); g > 0;) {
            std::size_t h = g;
            while (h > 0 && scores[order[h - 1]] == scores[order[g - 1]]) {
                (labels[order[h - 1]] == 1 ? tp : fp) += 1.0;
                --h;
            }
            r.points.push_back({fp / n_neg, tp / n_pos});
            g = h;
        }
    }
    return r;
}

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace {

double sample_variance_of_difference(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dev = (a[i] - b[i]) - mean;
        ss += dev * dev;
    }
    return ss / static_cast<double>(n - 1);
}

}  // namespace

DeLongComparison delong_test(const RocResult& a, const RocResult& b) {
    if (a.n_pos != b.n_pos || a.n_neg != b.n_neg || a.v10.size() != b.v10.size())
        throw StatsError("DeLong test needs both models scored on the same samples");
    DeLongComparison c;
    c.auc_a = a.auc;
    c.auc_b = b.auc;
    c.variance = sample_variance_of_difference(a.v10, b.v10) / static_cast<double>(a.n_pos) +
                 sample_variance_of_difference(a.v01, b.v01) / static_cast<double>(a.n_neg);
    const double diff = a.auc - b.auc;
    if (!(c.variance > 0.0)) {
        if (diff != 0.0)
            throw StatsError("DeLong variance is zero but AUCs differ (" + std::to_string(a.auc) + " vs " +
                             std::to_string(b.auc) + ")");
        c.z = 0.0;
        c.p = 1.0;
        c.variance = 0.0;
        return c;
    }
    c.z = diff / std::sqrt(c.variance);
    c.p = two_sided_normal_p(c.z);
    return c;
}

DeLongComparison delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const int> labels) {
    if (scores_a.size() != scores_b.size()) throw StatsError("score vectors differ in length");
    return delong_test(roc_auc(scores_a, labels, false), roc_auc(scores_b, labels, false));
}

namespace {

std::map<std::size_t, std::vector<std::size_t>> group_by_length(std::span<const std::size_t> lengths) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < lengths.size(); ++i) groups[lengths[i]].push_back(i);
    return groups;
}

template <typename T>
std::vector<T> gather(std::span<const T> values, const std::vector<std::size_t>& idx) {
    std::vector<T> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = values[idx[k]];
    return out;
}

}  // namespace

PerNReport evaluate_per_n(std::span<const double> scores, std::span<const int> labels,
                          std::span<const std::size_t> lengths) {
    if (scores.size() != labels.size() || scores.size() != lengths.size())
        throw StatsError("scores, labels and lengths differ in length");
    PerNReport report;
    double sum = 0.0;
    std::size_t valid = 0;
    for (const auto& [length, idx] : group_by_length(lengths)) {
        PerNEntry e;
        e.length = length;
        e.samples = idx.size();
        const auto y = gather(labels, idx);
        e.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
        if (e.positives == 0 || e.positives == e.samples) {
            report.warnings.push_back("length " + std::to_string(length) +
                                      " has a single class; excluded from the mean");
        } else {
            const auto s = gather(scores, idx);
            e.auc = roc_auc(s, y, false).auc;
            e.valid = true;
            sum += e.auc;
            ++valid;
        }
        report.entries.push_back(e);
    }
    if (valid == 0) throw StatsError("no length group has both classes");
    report.mean_auc = sum / static_cast<double>(valid);
    return report;
}

nlohmann::json PerNReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries) {
        rows.push_back({{"length", e.length},
                        {"samples", e.samples},
                        {"positives", e.positives},
                        {"auc", e.valid ? nlohmann::json(e.auc) : nlohmann::json(nullptr)}});
    }
    return {{"per_n", rows}, {"mean_auc", mean_auc}, {"warnings", warnings}};
}

SignificanceReport significance_matrix(const std::vector<std::string>& models,
                                       const std::vector<std::span<const double>>& scores,
                                       std::span<const int> labels, std::span<const std::size_t> lengths,
                                       double alpha) {
    if (models.size() < 2) throw StatsError("significance matrix needs at least two models");
    if (scores.size() != models.size()) throw StatsError("one score column per model expected");
    for (const auto& s : scores)
        if (s.size() != labels.size()) throw StatsError("score column length differs from labels");
    if (lengths.size() != labels.size()) throw StatsError("lengths differ from labels");

    const std::size_t m = models.size();
    SignificanceReport report;
    report.models = models;
    report.alpha = alpha;
    report.worse_counts.assign(m, {});
    report.mean_auc.assign(m, 0.0);

    for (const auto& [length, idx] : group_by_length(lengths)) {
        const auto y = gather(labels, idx);
        const auto pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
        if (pos == 0 || pos == y.size()) continue;
        std::vector<RocResult> roc;
        roc.reserve(m);
        for (std::size_t k = 0; k < m; ++k) roc.push_back(roc_auc(gather(scores[k], idx), y, false));

        std::vector<double> aucs(m);
        std::vector<std::vector<double>> p(m, std::vector<double>(m, 1.0));
        for (std::size_t a = 0; a < m; ++a) aucs[a] = roc[a].auc;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a + 1; b < m; ++b) {
                try {
                    p[a][b] = p[b][a] = delong_test(roc[a], roc[b]).p;
                } catch (const StatsError& e) {
                    throw StatsError("length " + std::to_string(length) + ", " + models[a] + " vs " + models[b] +
                                     ": " + e.what());
                }
            }
        }
        for (std::size_t a = 0; a < m; ++a) {
            std::size_t worse = 0;
            for (std::size_t b = 0; b < m; ++b)
                if (a != b && aucs[a] > aucs[b] && p[a][b] < alpha) ++worse;
            report.worse_counts[a].push_back(worse);
            report.mean_auc[a] += aucs[a];
        }
        report.lengths.push_back(length);
        report.auc.push_back(std::move(aucs));
        report.p.push_back(std::move(p));
    }
    if (report.lengths.empty()) throw StatsError("no length group has both classes");
    for (auto& v : report.mean_auc) v /= static_cast<double>(report.lengths.size());
    return report;
}

nlohmann::json SignificanceReport::to_json() const {
    nlohmann::json per_n = nlohmann::json::array();
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        nlohmann::json worse = nlohmann::json::array();
        for (std::size_t m = 0; m < models.size(); ++m) worse.push_back(worse_counts[m][i]);
        per_n.push_back({{"length", lengths[i]}, {"auc", auc[i]}, {"p", p[i]}, {"worse_counts", worse}});
    }
    return {{"models", models}, {"alpha", alpha}, {"mean_auc", mean_auc}, {"per_n", per_n}};
}

SubsetTable evaluate_subset(const std::string& subset, const std::vector<std::string>& models,
                            const std::vector<std::span<const double>>& scores, std::span<const int> labels,
                            double alpha) {
    if (models.empty() || scores.size() != models.size()) throw StatsError("one score column per model expected");
    SubsetTable table;
    table.subset = subset;
    table.samples = labels.size();
    table.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    std::vector<RocResult> roc;
    for (const auto& s : scores) roc.push_back(roc_auc(s, labels, false));
    for (std::size_t k = 1; k < roc.size(); ++k)
        if (roc[k].auc > roc[table.best].auc) table.best = k;
    for (std::size_t k = 0; k < models.size(); ++k) {
        SubsetRow row;
        row.model = models[k];
        row.auc = roc[k].auc;
        if (k != table.best) {
            try {
                row.p_vs_best = delong_test(roc[table.best], roc[k]).p;
            } catch (const StatsError& e) {
                throw StatsError(subset + ", " + models[k] + " vs best: " + e.what());
            }
            row.significantly_lower = row.auc < roc[table.best].auc && row.p_vs_best < alpha;
        }
        table.rows.push_back(row);
    }
    return table;
}

nlohmann::json SubsetTable::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"model", r.model},
                             {"auc", r.auc},
                             {"p_vs_best", r.p_vs_best},
                             {"significantly_lower", r.significantly_lower}});
    return {{"subset", subset}, {"samples", samples}, {"positives", positives}, {"best", rows[best].model},
            {"rows", rows_json}};
}

}  // namespace dfcn::stats
