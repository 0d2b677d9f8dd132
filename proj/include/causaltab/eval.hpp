#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "causaltab/factors.hpp"
#include "causaltab/graph.hpp"
#include "causaltab/scoring.hpp"
#include "causaltab/table.hpp"

namespace causaltab {

struct LabeledTable {
    Table table;
    std::vector<int> labels;  // 1 marks an anomaly
};

/// One integer label per line (an optional leading "label" header is
/// skipped).
std::vector<int> load_labels(const std::filesystem::path& path);

struct SplitSpec {
    std::uint64_t seed = 0;
    double train_fraction = 0.5;  // fraction of normal rows used for training
};

struct SplitResult {
    Table train;        // normal rows only
    LabeledTable test;  // held-out normals plus every anomaly
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// Contamination-free split: a seeded sample of the normal rows trains, the
/// remaining normals and all anomalies test. Row order within each part
/// follows the input table.
SplitResult split(const LabeledTable& data, const SplitSpec& spec);

/// Probability that a random anomaly outscores a random normal, ties counted
/// half (the Mann-Whitney form of AUC-ROC).
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

/// F1 of the top-n prediction where n is the number of true anomalies; ties
/// at the threshold break by input order.
double f1_at_contamination(const std::vector<double>& scores, const std::vector<int>& labels);

enum class OrderingStrategy { causal, random };
enum class WeightingStrategy { factor_count, uniform };

std::string_view to_string(OrderingStrategy s);
std::string_view to_string(WeightingStrategy s);

struct EvalConfig {
    OrderingStrategy ordering = OrderingStrategy::causal;
    WeightingStrategy weighting = WeightingStrategy::factor_count;
};

struct EvalRun {
    EvalConfig config;
    std::uint64_t seed = 0;
    double auc = 0.0;
    double f1 = 0.0;
};

struct CompareOptions {
    std::size_t top_k = 10;
    double threshold_ratio = 0.9;
    std::size_t solution_cap = 100000;
    int bins = 10;
    double smoothing = 1.0;
    double train_fraction = 0.5;
    int threads = 1;
};

struct CompareReport {
    std::vector<EvalRun> runs;  // config-major, then seed order

    double mean_auc(const EvalConfig& config) const;
    double mean_f1(const EvalConfig& config) const;
};

/// Runs the configuration grid over the seeds: per run the data is split,
/// a scorer fitted on the training normals, and the test set scored. Causal
/// mode uses the top-K orderings of the projected preference matrix; random
/// mode draws one fresh uniform permutation per seed and uses it for both
/// fitting and scoring.
CompareReport compare_report(const LabeledTable& data, const FactorMapping& mapping,
                             const FactorCausalGraph& graph,
                             const std::vector<EvalConfig>& configs,
                             const std::vector<std::uint64_t>& seeds,
                             const CompareOptions& options = {});

void save_report_json(const CompareReport& report, const std::filesystem::path& path);
void save_report_csv(const CompareReport& report, const std::filesystem::path& path,
                     char delimiter = ',');

/// Uniform random permutation of d columns, deterministic in the seed.
Ordering random_ordering(int d, std::uint64_t seed);

}  // namespace causaltab
