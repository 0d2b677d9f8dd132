#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causaltab/graph.hpp"
#include "causaltab/table.hpp"

namespace causaltab {

/// Column-level precedence weights: entry (i, j) is the aggregated evidence
/// that column i should precede column j. Non-negative, zero diagonal.
using PreferenceMatrix = Eigen::MatrixXd;

/// Throws DomainError when entries are negative, non-finite, or the diagonal
/// is non-zero.
void validate_preference(const PreferenceMatrix& w);

/// Projects factor-level edge weights onto column pairs: for every edge
/// f_u -> f_v, every (c_i, c_j) in M(f_u) x M(f_v) with c_i != c_j gains
/// |weight|.
PreferenceMatrix project(const FactorCausalGraph& graph, const FactorMapping& mapping);

/// Total weight of satisfied precedences under the ordering. This is the
/// canonical evaluation: a fixed row-major pass so equal orderings always
/// produce bit-equal objectives.
double lop_objective(const PreferenceMatrix& w, const Ordering& ordering);

struct LopSolution {
    double optimum = 0.0;
    Ordering witness;
};

/// Exact maximizer of lop_objective over all permutations via
/// branch-and-bound on rank assignments. The witness is the optimal ordering
/// with the lexicographically smallest rank vector.
LopSolution solve_lop(const PreferenceMatrix& w);

struct ScoredOrdering {
    Ordering ordering;
    double objective = 0.0;
};

/// Orderings within the acceptance threshold, best first; ties broken by
/// ascending rank vector.
struct OrderingSet {
    std::vector<ScoredOrdering> entries;
    double optimum = 0.0;
    double threshold = 0.0;

    std::size_t size() const { return entries.size(); }
};

struct EnumerationOptions {
    double threshold_ratio = 0.9;
    std::size_t solution_cap = 100000;
};

/// Solves the LOP, enumerates every permutation whose objective reaches
/// threshold_ratio x optimum, and keeps the k best. Enumerations larger than
/// solution_cap raise ResourceError, except in the degenerate all-zero case
/// where all permutations tie at zero and the k lexicographically smallest
/// are returned directly.
OrderingSet enumerate_top_k(const PreferenceMatrix& w, std::size_t k,
                            const EnumerationOptions& options = {});

/// JSON: {"optimum": r, "threshold": t,
///        "orderings": [{"ranks": [...], "objective": o}, ...]} (0-based ranks).
void save_orderings(const OrderingSet& set, const std::filesystem::path& path);
OrderingSet load_orderings(const std::filesystem::path& path);

/// JSON: {"columns": [...], "w": [[...], ...]}.
void save_preference(const PreferenceMatrix& w, const std::vector<std::string>& columns,
                     const std::filesystem::path& path);
PreferenceMatrix load_preference(const std::filesystem::path& path,
                                 std::vector<std::string>* columns = nullptr);

}  // namespace causaltab
