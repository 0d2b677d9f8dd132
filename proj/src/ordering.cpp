#include "causaltab/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "causaltab/errors.hpp"

namespace causaltab {

void validate_preference(const PreferenceMatrix& w) {
    if (w.rows() != w.cols() || w.rows() < 1) {
        throw DomainError("preference matrix must be square and non-empty");
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            const double v = w(i, j);
            if (!std::isfinite(v)) throw DomainError("preference matrix entries must be finite");
            if (v < 0.0) throw DomainError("preference matrix entries must be non-negative");
            if (i == j && v != 0.0) throw DomainError("preference matrix diagonal must be zero");
        }
    }
}

PreferenceMatrix project(const FactorCausalGraph& graph, const FactorMapping& mapping) {
    const int d = mapping.column_count();
    for (const std::string& name : graph.factors) {
        if (std::find(mapping.factor_names.begin(), mapping.factor_names.end(), name) ==
            mapping.factor_names.end()) {
            throw MappingError("graph factor '" + name + "' is absent from the factor mapping");
        }
    }
    std::vector<int> row_of_factor;
    row_of_factor.reserve(graph.factors.size());
    for (const std::string& name : graph.factors) {
        const auto it = std::find(mapping.factor_names.begin(), mapping.factor_names.end(), name);
        row_of_factor.push_back(static_cast<int>(it - mapping.factor_names.begin()));
    }

    PreferenceMatrix w = PreferenceMatrix::Zero(d, d);
    for (const CausalEdge& edge : graph.edges) {
        const int u = row_of_factor[static_cast<std::size_t>(edge.from)];
        const int v = row_of_factor[static_cast<std::size_t>(edge.to)];
        const double strength = std::abs(edge.weight);
        for (int i = 0; i < d; ++i) {
            if (mapping.matrix(u, i) == 0) continue;
            for (int j = 0; j < d; ++j) {
                if (i == j || mapping.matrix(v, j) == 0) continue;
                w(i, j) += strength;
            }
        }
    }
    return w;
}

double lop_objective(const PreferenceMatrix& w, const Ordering& ordering) {
    const int d = static_cast<int>(w.rows());
    if (ordering.size() != d) throw UsageError("ordering size does not match matrix dimension");
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (ordering.rank_of(i) < ordering.rank_of(j)) total += w(i, j);
        }
    }
    return total;
}

namespace {

// Depth-first search over rank assignments, columns taken in index order and
// ranks tried ascending, so complete solutions appear in lexicographic
// rank-vector order. `suffix_bound[t]` is an optimistic completion bound for
// every pair not yet resolved once columns 0..t carry ranks.
class RankSearch {
public:
    RankSearch(const PreferenceMatrix& w, double prune_epsilon)
        : w_(w), d_(static_cast<int>(w.rows())), epsilon_(prune_epsilon) {
        suffix_bound_.assign(static_cast<std::size_t>(d_) + 1, 0.0);
        for (int t = d_ - 1; t >= 0; --t) {
            double level = 0.0;
            for (int i = 0; i < t; ++i) level += std::max(w_(i, t), w_(t, i));
            suffix_bound_[static_cast<std::size_t>(t)] =
                suffix_bound_[static_cast<std::size_t>(t) + 1] + level;
        }
        ranks_.assign(static_cast<std::size_t>(d_), -1);
        rank_used_.assign(static_cast<std::size_t>(d_), false);
    }

    /// Visits every complete rank vector whose optimistic bound stays at or
    /// above the threshold reported by `threshold()`; `leaf` receives the
    /// canonical objective.
    template <typename Threshold, typename Leaf>
    void run(Threshold threshold, Leaf leaf) {
        descend(0, 0.0, threshold, leaf);
    }

private:
    template <typename Threshold, typename Leaf>
    void descend(int column, double partial, Threshold threshold, Leaf leaf) {
        if (column == d_) {
            leaf(ranks_, canonical_objective());
            return;
        }
        for (int rank = 0; rank < d_; ++rank) {
            if (rank_used_[static_cast<std::size_t>(rank)]) continue;
            double gained = partial;
            for (int prev = 0; prev < column; ++prev) {
                gained += ranks_[static_cast<std::size_t>(prev)] < rank ? w_(prev, column)
                                                                        : w_(column, prev);
            }
            const double bound = gained + suffix_bound_[static_cast<std::size_t>(column) + 1];
            if (bound < threshold() - epsilon_) continue;
            ranks_[static_cast<std::size_t>(column)] = rank;
            rank_used_[static_cast<std::size_t>(rank)] = true;
            descend(column + 1, gained, threshold, leaf);
            rank_used_[static_cast<std::size_t>(rank)] = false;
            ranks_[static_cast<std::size_t>(column)] = -1;
        }
    }

    double canonical_objective() const {
        double total = 0.0;
        for (int i = 0; i < d_; ++i) {
            for (int j = 0; j < d_; ++j) {
                if (ranks_[static_cast<std::size_t>(i)] < ranks_[static_cast<std::size_t>(j)]) {
                    total += w_(i, j);
                }
            }
        }
        return total;
    }

    const PreferenceMatrix& w_;
    int d_;
    double epsilon_;
    std::vector<double> suffix_bound_;
    std::vector<int> ranks_;
    std::vector<bool> rank_used_;
};

double prune_epsilon_for(const PreferenceMatrix& w) {
    double mass = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < w.cols(); ++j) mass += std::max(w(i, j), w(j, i));
    }
    return 1e-9 * std::max(1.0, mass);
}

}  // namespace

LopSolution solve_lop(const PreferenceMatrix& w) {
    validate_preference(w);
    const int d = static_cast<int>(w.rows());
    if (d == 1) return {0.0, Ordering::identity(1)};

    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> best_ranks;
    RankSearch search(w, prune_epsilon_for(w));
    search.run([&] { return best; },
               [&](const std::vector<int>& ranks, double objective) {
                   // Strict improvement keeps the first (lexicographically
                   // smallest) witness among equal objectives.
                   if (objective > best) {
                       best = objective;
                       best_ranks = ranks;
                   }
               });
    return {best, Ordering(std::move(best_ranks))};
}

OrderingSet enumerate_top_k(const PreferenceMatrix& w, std::size_t k,
                            const EnumerationOptions& options) {
    if (k < 1) throw UsageError("enumerate_top_k requires k >= 1");
    if (!(options.threshold_ratio > 0.0) || options.threshold_ratio > 1.0) {
        throw UsageError("threshold_ratio must lie in (0, 1]");
    }
    const LopSolution solution = solve_lop(w);
    const int d = static_cast<int>(w.rows());

    OrderingSet set;
    set.optimum = solution.optimum;
    set.threshold = options.threshold_ratio * solution.optimum;

    if (solution.optimum == 0.0) {
        // Every permutation ties at zero: emit the k lexicographically
        // smallest rank vectors without materializing all d! of them.
        std::vector<int> ranks(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) ranks[static_cast<std::size_t>(i)] = i;
        do {
            set.entries.push_back({Ordering(ranks), 0.0});
        } while (set.entries.size() < k && std::next_permutation(ranks.begin(), ranks.end()));
        return set;
    }

    std::vector<ScoredOrdering> found;
    RankSearch search(w, prune_epsilon_for(w));
    search.run([&] { return set.threshold; },
               [&](const std::vector<int>& ranks, double objective) {
                   if (objective >= set.threshold) {
                       if (found.size() >= options.solution_cap) {
                           throw ResourceError(
                               "threshold enumeration exceeded the solution cap of " +
                               std::to_string(options.solution_cap));
                       }
                       found.push_back({Ordering(ranks), objective});
                   }
               });

    std::sort(found.begin(), found.end(), [](const ScoredOrdering& a, const ScoredOrdering& b) {
        if (a.objective != b.objective) return a.objective > b.objective;
        return a.ordering.ranks() < b.ordering.ranks();
    });
    if (found.size() > k) {
        found.erase(found.begin() + static_cast<std::ptrdiff_t>(k), found.end());
    }
    set.entries = std::move(found);
    return set;
}

void save_orderings(const OrderingSet& set, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["optimum"] = set.optimum;
    doc["threshold"] = set.threshold;
    auto& entries = doc["orderings"] = nlohmann::json::array();
    for (const ScoredOrdering& entry : set.entries) {
        entries.push_back({{"ranks", entry.ordering.ranks()}, {"objective", entry.objective}});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write orderings file: " + path.string());
    out << doc.dump(2) << '\n';
}

OrderingSet load_orderings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open orderings file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("orderings file " + path.string() + ": " + e.what());
    }
    OrderingSet set;
    set.optimum = doc.at("optimum").get<double>();
    set.threshold = doc.at("threshold").get<double>();
    for (const auto& entry : doc.at("orderings")) {
        set.entries.push_back({Ordering(entry.at("ranks").get<std::vector<int>>()),
                               entry.at("objective").get<double>()});
    }
    if (set.entries.empty()) throw SchemaError("orderings file lists no orderings");
    return set;
}

void save_preference(const PreferenceMatrix& w, const std::vector<std::string>& columns,
                     const std::filesystem::path& path) {
    if (static_cast<Eigen::Index>(columns.size()) != w.rows()) {
        throw ShapeError("column name count does not match preference matrix dimension");
    }
    nlohmann::json doc;
    doc["columns"] = columns;
    auto& rows = doc["w"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
        rows.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write preference file: " + path.string());
    out << doc.dump(2) << '\n';
}

PreferenceMatrix load_preference(const std::filesystem::path& path,
                                 std::vector<std::string>* columns) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open preference file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("preference file " + path.string() + ": " + e.what());
    }
    const auto names = doc.at("columns").get<std::vector<std::string>>();
    const auto rows = doc.at("w");
    const auto d = static_cast<Eigen::Index>(names.size());
    if (static_cast<Eigen::Index>(rows.size()) != d) {
        throw ShapeError("preference matrix row count does not match columns");
    }
    PreferenceMatrix w(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != d) {
            throw ShapeError("preference matrix is not square");
        }
        for (Eigen::Index j = 0; j < d; ++j) w(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    validate_preference(w);
    if (columns) *columns = names;
    return w;
}

}  // namespace causaltab
