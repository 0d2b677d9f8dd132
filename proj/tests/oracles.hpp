#pragma once

// Independent brute-force oracles used to freeze expected values. These stay
// deliberately naive: exhaustive enumeration and pairwise counting, no
// pruning, no shared code with the implementations they check.

#include <algorithm>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double lop_objective(const Eigen::MatrixXd& w, const std::vector<int>& ranks) {
    const int d = static_cast<int>(w.rows());
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (ranks[static_cast<std::size_t>(i)] < ranks[static_cast<std::size_t>(j)]) {
                total += w(i, j);
            }
        }
    }
    return total;
}

struct LopOracle {
    double optimum = 0.0;
    std::vector<int> witness;  // lexicographically smallest optimal rank vector
};

/// Exhaustive search over all d! rank vectors in lexicographic order.
inline LopOracle solve_lop(const Eigen::MatrixXd& w) {
    const int d = static_cast<int>(w.rows());
    std::vector<int> ranks(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) ranks[static_cast<std::size_t>(i)] = i;
    LopOracle best;
    best.optimum = lop_objective(w, ranks);
    best.witness = ranks;
    while (std::next_permutation(ranks.begin(), ranks.end())) {
        const double objective = lop_objective(w, ranks);
        if (objective > best.optimum) {
            best.optimum = objective;
            best.witness = ranks;
        }
    }
    return best;
}

/// All rank vectors whose objective reaches tau, sorted by objective
/// descending then rank vector ascending.
inline std::vector<std::pair<std::vector<int>, double>> threshold_set(const Eigen::MatrixXd& w,
                                                                      double tau) {
    const int d = static_cast<int>(w.rows());
    std::vector<int> ranks(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) ranks[static_cast<std::size_t>(i)] = i;
    std::vector<std::pair<std::vector<int>, double>> hits;
    do {
        const double objective = lop_objective(w, ranks);
        if (objective >= tau) hits.emplace_back(ranks, objective);
    } while (std::next_permutation(ranks.begin(), ranks.end()));
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return hits;
}

/// Pairwise Mann-Whitney AUC: wins count 1, ties 0.5.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / pairs;
}

/// Top-n F1 computed the long way round, with explicit precision and recall.
inline double f1_topn(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::size_t n_anomalies = 0;
    for (int label : labels) n_anomalies += label == 1 ? 1u : 0u;
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t tp = 0;
    for (std::size_t t = 0; t < n_anomalies; ++t) tp += labels[order[t]] == 1 ? 1u : 0u;
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(n_anomalies);
    const double recall = static_cast<double>(tp) / static_cast<double>(n_anomalies);
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace oracle
