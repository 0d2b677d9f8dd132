#include "causaltab/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "causaltab/errors.hpp"
#include "causaltab/rng.hpp"

namespace causaltab {

namespace {

// Distinct sub-streams of one seed.
constexpr std::uint64_t kSplitStream = 0;
constexpr std::uint64_t kOrderingStream = 1;

void validate_binary_labels(const std::vector<int>& labels) {
    for (int label : labels) {
        if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
    }
}

}  // namespace

std::vector<int> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open labels file: " + path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "label") continue;
        int v = 0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc() || ptr != line.data() + line.size() || (v != 0 && v != 1)) {
            throw DataError("labels file line " + std::to_string(line_no) +
                            ": expected 0 or 1, got '" + line + "'");
        }
        labels.push_back(v);
    }
    if (labels.empty()) throw DataError("labels file is empty: " + path.string());
    return labels;
}

SplitResult split(const LabeledTable& data, const SplitSpec& spec) {
    if (data.labels.size() != data.table.row_count()) {
        throw ShapeError("label count does not match table rows");
    }
    validate_binary_labels(data.labels);
    if (!(spec.train_fraction > 0.0) || spec.train_fraction > 1.0) {
        throw UsageError("train_fraction must lie in (0, 1]");
    }

    std::vector<std::size_t> normals;
    std::vector<std::size_t> anomalies;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        (data.labels[i] == 0 ? normals : anomalies).push_back(i);
    }
    if (normals.size() < 2) throw DataError("split needs at least two normal rows");
    if (anomalies.empty()) throw DataError("split needs at least one anomaly");

    const auto train_count = static_cast<std::size_t>(
        std::floor(spec.train_fraction * static_cast<double>(normals.size())));
    if (train_count < 1 || train_count >= normals.size()) {
        throw DataError("train_fraction leaves no training or no held-out normals");
    }

    auto gen = rng::make_rng(spec.seed, kSplitStream);
    std::vector<std::size_t> shuffled = normals;
    rng::shuffle(shuffled, gen);

    std::vector<std::size_t> train_rows(shuffled.begin(),
                                        shuffled.begin() + static_cast<std::ptrdiff_t>(train_count));
    std::sort(train_rows.begin(), train_rows.end());
    std::vector<bool> in_train(data.labels.size(), false);
    for (std::size_t r : train_rows) in_train[r] = true;

    SplitResult result;
    result.train_rows = train_rows;
    result.train.columns = data.table.columns;
    for (std::size_t r : train_rows) result.train.rows.push_back(data.table.rows[r]);

    result.test.table.columns = data.table.columns;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        if (in_train[i]) continue;
        result.test_rows.push_back(i);
        result.test.table.rows.push_back(data.table.rows[i]);
        result.test.labels.push_back(data.labels[i]);
    }
    return result;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    if (scores.empty()) throw MetricError("AUC-ROC needs at least one sample");
    validate_binary_labels(labels);
    for (double s : scores) {
        if (!std::isfinite(s)) throw DataError("scores must be finite");
    }
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw MetricError("AUC-ROC needs both classes present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks within tie groups; with ties counted half this equals the
    // pairwise Mann-Whitney statistic exactly.
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double average_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]] == 1) positive_rank_sum += average_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double f1_at_contamination(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    validate_binary_labels(labels);
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0 || positives == labels.size()) {
        throw MetricError("F1 needs both classes present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::size_t true_positives = 0;
    for (std::size_t t = 0; t < positives; ++t) {
        if (labels[order[t]] == 1) ++true_positives;
    }
    // Predicted positives equal actual positives, so precision == recall.
    return static_cast<double>(true_positives) / static_cast<double>(positives);
}

std::string_view to_string(OrderingStrategy s) {
    return s == OrderingStrategy::causal ? "causal" : "random";
}

std::string_view to_string(WeightingStrategy s) {
    return s == WeightingStrategy::factor_count ? "factor-count" : "uniform";
}

Ordering random_ordering(int d, std::uint64_t seed) {
    std::vector<int> sequence(static_cast<std::size_t>(d));
    std::iota(sequence.begin(), sequence.end(), 0);
    auto gen = rng::make_rng(seed, kOrderingStream);
    rng::shuffle(sequence, gen);
    return Ordering::from_sequence(sequence);
}

double CompareReport::mean_auc(const EvalConfig& config) const {
    double total = 0.0;
    std::size_t n = 0;
    for (const EvalRun& run : runs) {
        if (run.config.ordering == config.ordering && run.config.weighting == config.weighting) {
            total += run.auc;
            ++n;
        }
    }
    if (n == 0) throw UsageError("no runs recorded for the requested configuration");
    return total / static_cast<double>(n);
}

double CompareReport::mean_f1(const EvalConfig& config) const {
    double total = 0.0;
    std::size_t n = 0;
    for (const EvalRun& run : runs) {
        if (run.config.ordering == config.ordering && run.config.weighting == config.weighting) {
            total += run.f1;
            ++n;
        }
    }
    if (n == 0) throw UsageError("no runs recorded for the requested configuration");
    return total / static_cast<double>(n);
}

CompareReport compare_report(const LabeledTable& data, const FactorMapping& mapping,
                             const FactorCausalGraph& graph,
                             const std::vector<EvalConfig>& configs,
                             const std::vector<std::uint64_t>& seeds,
                             const CompareOptions& options) {
    if (configs.empty()) throw UsageError("compare_report needs at least one configuration");
    if (seeds.empty()) throw UsageError("compare_report needs at least one seed");
    if (mapping.column_count() != data.table.width()) {
        throw ShapeError("factor mapping does not match the table width");
    }

    const int d = data.table.width();
    const bool any_causal = std::any_of(configs.begin(), configs.end(), [](const EvalConfig& c) {
        return c.ordering == OrderingStrategy::causal;
    });

    OrderingSet causal_orderings;
    if (any_causal) {
        causal_orderings = enumerate_top_k(project(graph, mapping), options.top_k,
                                           {options.threshold_ratio, options.solution_cap});
    }
    const Eigen::VectorXd factor_count_alpha = compute_weights(mapping).cast<double>();
    const Eigen::VectorXd uniform_alpha = Eigen::VectorXd::Ones(d);

    struct Task {
        EvalConfig config;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const EvalConfig& config : configs) {
        for (std::uint64_t seed : seeds) tasks.push_back({config, seed});
    }

    std::vector<EvalRun> runs(tasks.size());
    auto run_task = [&](std::size_t t) {
        const Task& task = tasks[t];
        const SplitResult parts = split(data, {task.seed, options.train_fraction});

        OrderingSet orderings;
        if (task.config.ordering == OrderingStrategy::causal) {
            orderings = causal_orderings;
        } else {
            orderings.entries.push_back({random_ordering(d, task.seed), 0.0});
        }
        const Eigen::VectorXd& alpha = task.config.weighting == WeightingStrategy::factor_count
                                           ? factor_count_alpha
                                           : uniform_alpha;

        const SurrogateScorer scorer =
            SurrogateScorer::fit(parts.train, orderings, options.bins, options.smoothing);
        std::vector<double> scores;
        scores.reserve(parts.test.table.row_count());
        for (const Sample& row : parts.test.table.rows) {
            scores.push_back(score(scorer, row, orderings, alpha));
        }
        runs[t] = {task.config, task.seed, auc_roc(scores, parts.test.labels),
                   f1_at_contamination(scores, parts.test.labels)};
    };

    const int threads = std::max(1, options.threads);
    if (threads == 1 || tasks.size() <= 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        const std::size_t workers =
            std::min<std::size_t>(static_cast<std::size_t>(threads), tasks.size());
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                try {
                    for (std::size_t t = next.fetch_add(1); t < tasks.size();
                         t = next.fetch_add(1)) {
                        run_task(t);
                    }
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(tasks.size());  // stop handing out work
                }
            });
        }
        for (std::thread& worker : pool) worker.join();
        if (failure) std::rethrow_exception(failure);
    }

    CompareReport report;
    report.runs = std::move(runs);
    return report;
}

namespace {

nlohmann::json cell_json(const CompareReport& report, const EvalConfig& config) {
    nlohmann::json cell;
    cell["ordering"] = std::string(to_string(config.ordering));
    cell["weighting"] = std::string(to_string(config.weighting));
    auto& runs = cell["runs"] = nlohmann::json::array();
    for (const EvalRun& run : report.runs) {
        if (run.config.ordering != config.ordering || run.config.weighting != config.weighting) {
            continue;
        }
        runs.push_back({{"seed", run.seed}, {"auc", run.auc}, {"f1", run.f1}});
    }
    cell["mean_auc"] = report.mean_auc(config);
    cell["mean_f1"] = report.mean_f1(config);
    return cell;
}

std::vector<EvalConfig> distinct_configs(const CompareReport& report) {
    std::vector<EvalConfig> configs;
    for (const EvalRun& run : report.runs) {
        const bool known = std::any_of(configs.begin(), configs.end(), [&](const EvalConfig& c) {
            return c.ordering == run.config.ordering && c.weighting == run.config.weighting;
        });
        if (!known) configs.push_back(run.config);
    }
    return configs;
}

}  // namespace

void save_report_json(const CompareReport& report, const std::filesystem::path& path) {
    nlohmann::json doc;
    auto& cells = doc["cells"] = nlohmann::json::array();
    for (const EvalConfig& config : distinct_configs(report)) {
        cells.push_back(cell_json(report, config));
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report file: " + path.string());
    out << doc.dump(2) << '\n';
}

void save_report_csv(const CompareReport& report, const std::filesystem::path& path,
                     char delimiter) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report file: " + path.string());
    out << "ordering" << delimiter << "weighting" << delimiter << "seed" << delimiter << "auc"
        << delimiter << "f1\n";
    for (const EvalRun& run : report.runs) {
        out << to_string(run.config.ordering) << delimiter << to_string(run.config.weighting)
            << delimiter << run.seed << delimiter << render_number(run.auc) << delimiter
            << render_number(run.f1) << '\n';
    }
}

}  // namespace causaltab
