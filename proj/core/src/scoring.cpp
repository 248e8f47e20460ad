#include "dfcn/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "dfcn/csv.hpp"
#include "dfcn/error.hpp"

namespace dfcn {

std::size_t resolve_jobs(std::size_t jobs) {
    if (jobs != 0) return jobs;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(resolve_jobs(jobs), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (!failed.load()) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) return;
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

std::vector<double> score_eval_set(const TrainedModel& model, const MaskedEvalSet& set, std::size_t jobs) {
    if (model.n_features() != set.n_features())
        throw DimensionError("model expects " + std::to_string(model.n_features()) + " inputs, evaluation set has " +
                             std::to_string(set.n_features()));
    constexpr std::size_t kChunk = 4096;
    const std::size_t d = set.n_features();
    std::vector<double> scores(set.size());
    const std::size_t chunks = (set.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(set.size(), begin + kChunk);
        Eigen::MatrixXd inputs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(end - begin));
        for (std::size_t i = begin; i < end; ++i)
            set.fill_inputs(i, std::span<double>(inputs.col(static_cast<Eigen::Index>(i - begin)).data(), d));
        if (model.is_forest()) {
            // Column-major d x B is B contiguous samples.
            model.forest().predict_rows(std::span<const double>(inputs.data(), d * (end - begin)), d,
                                        std::span<double>(scores.data() + begin, end - begin));
            return;
        }
        const Eigen::VectorXd p = nn::predict_positive(model.network(), inputs);
        for (std::size_t i = begin; i < end; ++i) scores[i] = p(static_cast<Eigen::Index>(i - begin));
    });
    return scores;
}

stats::PerNReport evaluate_per_n(const TrainedModel& model, const MaskedEvalSet& set, std::size_t jobs) {
    const auto scores = score_eval_set(model, set, jobs);
    const auto labels = set.labels();
    const auto lengths = set.lengths();
    return stats::evaluate_per_n(scores, labels, lengths);
}

stats::SignificanceReport significance_matrix(const std::vector<std::string>& names,
                                              const std::vector<const TrainedModel*>& models,
                                              const MaskedEvalSet& set, std::size_t jobs) {
    std::vector<std::vector<double>> columns;
    for (const auto* m : models) columns.push_back(score_eval_set(*m, set, jobs));
    std::vector<std::span<const double>> views(columns.begin(), columns.end());
    const auto labels = set.labels();
    const auto lengths = set.lengths();
    return stats::significance_matrix(names, views, labels, lengths);
}

stats::SubsetTable evaluate_subset(const std::vector<std::string>& names,
                                   const std::vector<const TrainedModel*>& models, const Dataset& test,
                                   const InputSubset& subset) {
    const Dataset restricted = restrict_to_subset(test, subset, true);
    std::vector<MaskedSample> samples;
    samples.reserve(restricted.size());
    std::vector<int> labels;
    for (const auto& r : restricted.records) {
        samples.push_back(unmasked(r));
        labels.push_back(r.label);
    }
    std::vector<std::vector<double>> columns;
    for (const auto* m : models) columns.push_back(predict_batch(*m, samples));
    std::vector<std::span<const double>> views(columns.begin(), columns.end());
    return stats::evaluate_subset(subset.name, names, views, labels);
}

ScoreDump ScoreDump::from_eval_set(const MaskedEvalSet& set, std::vector<std::string> models,
                                   std::vector<std::vector<double>> scores) {
    ScoreDump dump;
    dump.models = std::move(models);
    dump.scores = std::move(scores);
    dump.subject_ids.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& e = set.entry(i);
        dump.subject_ids.push_back(set.dataset().records[e.record].subject_id);
        dump.combo_ids.push_back(e.combo);
        dump.lengths.push_back(set.length(i));
        dump.labels.push_back(set.label(i));
    }
    for (const auto& col : dump.scores)
        if (col.size() != dump.size()) throw Error("score column length differs from evaluation set");
    return dump;
}

void ScoreDump::write_csv(const std::filesystem::path& path) const {
    auto tmp = path;
    tmp += ".tmp";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << "sample_id,subject_id,combo_id,length,label";
        for (const auto& m : models) out << ',' << io::csv_field(m);
        out << '\n';
        std::string line;
        for (std::size_t i = 0; i < size(); ++i) {
            line.clear();
            line += std::to_string(i);
            line += ',';
            line += io::csv_field(subject_ids[i]);
            line += ',';
            line += std::to_string(combo_ids[i]);
            line += ',';
            line += std::to_string(lengths[i]);
            line += ',';
            line += labels[i] == 1 ? '1' : '0';
            for (const auto& col : scores) {
                line += ',';
                line += io::format_double(col[i]);
            }
            line += '\n';
            out << line;
        }
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ScoreDump ScoreDump::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": empty score dump");
    const auto header = io::split_csv_line(line);
    if (header.size() < 6 || header[0] != "sample_id" || header[4] != "label")
        throw Error(path.string() + ": not a score dump");
    ScoreDump dump;
    dump.models.assign(header.begin() + 5, header.end());
    dump.scores.assign(dump.models.size(), {});
    auto parse_double = [&](const std::string& s) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(path.string() + ": bad number '" + s + "'");
        return v;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = io::split_csv_line(line);
        if (f.size() != header.size()) throw Error(path.string() + ": ragged row");
        dump.subject_ids.push_back(f[1]);
        dump.combo_ids.push_back(std::stoul(f[2]));
        dump.lengths.push_back(std::stoul(f[3]));
        dump.labels.push_back(f[4] == "1" ? 1 : 0);
        for (std::size_t m = 0; m < dump.models.size(); ++m) dump.scores[m].push_back(parse_double(f[5 + m]));
    }
    return dump;
}

}  // namespace dfcn
