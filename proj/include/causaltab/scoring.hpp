#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "causaltab/factors.hpp"
#include "causaltab/ordering.hpp"
#include "causaltab/table.hpp"

namespace causaltab {

/// Causal contribution weights: alpha[j] = number of factors that involve
/// column j.
using ColumnWeights = Eigen::VectorXi;

ColumnWeights compute_weights(const FactorMapping& mapping);

/// Maps one column's cells onto a finite code space:
///   categorical - training vocabulary, sorted;
///   numerical   - equal-mass quantile bins, right-closed, out-of-range
///                 values land in the extreme bins;
///   text        - whitespace token count hashed into `bins` buckets.
/// A missing code exists when training data contained missing cells; an
/// unknown code always exists and absorbs everything else unseen.
class ColumnDiscretizer {
public:
    static ColumnDiscretizer fit(const Table& table, int column, int bins);

    int code_of(const Cell& cell) const;
    int code_count() const;
    int unknown_code() const { return code_count() - 1; }
    bool has_missing_code() const { return has_missing_; }
    int missing_code() const;

    ColumnKind kind() const { return kind_; }
    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::vector<double>& edges() const { return edges_; }
    int structural_codes() const;

    nlohmann::json to_json() const;
    static ColumnDiscretizer from_json(const nlohmann::json& doc);

private:
    ColumnKind kind_ = ColumnKind::categorical;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> vocab_index_;
    std::vector<double> edges_;
    int text_buckets_ = 0;
    bool has_missing_ = false;
};

/// Count-based Markov-1 autoregressive model over serialized column
/// orderings: for each fitted ordering, each column is modeled by a
/// Laplace-smoothed categorical distribution conditioned on the discretized
/// value of the immediately preceding column (the first column by its
/// marginal). Immutable once fitted.
class SurrogateScorer {
public:
    static SurrogateScorer fit(const Table& train, const OrderingSet& orderings, int bins = 10,
                               double smoothing = 1.0);

    /// Per-column negative log-likelihoods of the sample under one fitted
    /// ordering, indexed by column. The ordering must be one the scorer was
    /// fitted with.
    Eigen::VectorXd column_nll(const Sample& sample, const Ordering& ordering) const;

    int ordering_index(const Ordering& ordering) const;  // -1 when unknown
    const std::vector<Ordering>& orderings() const { return orderings_; }
    const ColumnDiscretizer& discretizer(int column) const;
    int width() const { return width_; }
    int bins() const { return bins_; }
    double smoothing() const { return smoothing_; }

    /// Smoothed probability table for (ordering, rank): one row per context
    /// code of the preceding column (a single row at rank 0), one column per
    /// code of the column at that rank. Every row sums to one.
    Eigen::MatrixXd conditional(int ordering_idx, int rank) const;

    void save(const std::filesystem::path& path) const;
    static SurrogateScorer load(const std::filesystem::path& path);

private:
    int width_ = 0;
    int bins_ = 10;
    double smoothing_ = 1.0;
    std::vector<ColumnDiscretizer> discretizers_;
    std::vector<Ordering> orderings_;
    // counts_[z][rank]: contexts x codes observation counts (one context row
    // at rank 0).
    std::vector<std::vector<Eigen::MatrixXi>> counts_;
};

/// Weighted anomaly score: mean over the orderings of the alpha-weighted
/// column NLL sums. Higher means more anomalous.
double score(const SurrogateScorer& scorer, const Sample& sample, const OrderingSet& orderings,
             const Eigen::VectorXd& alpha);

/// The same aggregation applied to a precomputed (orderings x columns) NLL
/// matrix.
double aggregate_score(const Eigen::MatrixXd& nll, const Eigen::VectorXd& alpha);

struct ScoreReport {
    Eigen::VectorXd alpha;
    std::vector<Eigen::MatrixXd> nll;  // per sample: orderings x columns
    std::vector<double> scores;
    std::vector<int> zero_weight_columns;
};

ScoreReport score_table(const SurrogateScorer& scorer, const Table& table,
                        const OrderingSet& orderings, const Eigen::VectorXd& alpha);

/// Writes one JSON record per (sample, ordering):
/// {"sample": i, "ordering": z, "text": "...",
///  "spans": [[column, byte_begin, byte_end], ...]}
/// where each span covers the rendered value of one column.
void export_sequences(const Table& table, const OrderingSet& orderings,
                      const std::filesystem::path& path);

/// Per-sample per-ordering per-column NLLs from an external scorer.
struct ExternalNll {
    std::size_t samples = 0;
    std::size_t orderings = 0;
    std::size_t columns = 0;
    std::vector<Eigen::MatrixXd> nll;  // per sample: orderings x columns
};

/// Reads a delimited file with header (sample, ordering, column, nll) and
/// validates that every triple in the full grid is present exactly once.
ExternalNll import_external_nll(const std::filesystem::path& path, std::size_t samples,
                                std::size_t orderings, std::size_t columns,
                                char delimiter = ',');

/// Scores file: one (sample, score) row per table row.
void write_scores(const ScoreReport& report, const std::filesystem::path& path,
                  char delimiter = ',');

/// Per-column breakdown with the same schema the external-NLL import reads:
/// (sample, ordering, column, nll).
void write_breakdown(const ScoreReport& report, const std::filesystem::path& path,
                     char delimiter = ',');

}  // namespace causaltab
