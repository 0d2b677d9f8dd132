#include "causaltab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "causaltab/errors.hpp"
#include "causaltab/numerics.hpp"

namespace causaltab {

namespace {

constexpr double kMinExpectedCount = 5.0;
constexpr double kSparseCellFraction = 0.2;

std::vector<int> distinct_codes(const Eigen::MatrixXi& data, int column,
                                std::vector<int>& code_of_row) {
    std::vector<int> levels;
    levels.reserve(8);
    for (Eigen::Index r = 0; r < data.rows(); ++r) levels.push_back(data(r, column));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    code_of_row.resize(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        code_of_row[static_cast<std::size_t>(r)] = static_cast<int>(
            std::lower_bound(levels.begin(), levels.end(), data(r, column)) - levels.begin());
    }
    return levels;
}

}  // namespace

int FactorCausalGraph::factor_index(std::string_view name) const {
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (factors[i] == name) return static_cast<int>(i);
    }
    return -1;
}

FactorCausalGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open graph file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("graph file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("factors") || !doc.contains("edges")) {
        throw SchemaError("graph file must hold {\"factors\": [...], \"edges\": [...]}");
    }

    FactorCausalGraph graph;
    for (const auto& f : doc.at("factors")) {
        if (!f.is_string()) throw SchemaError("graph factors must be strings");
        graph.factors.push_back(f.get<std::string>());
    }
    std::set<std::string> unique(graph.factors.begin(), graph.factors.end());
    if (unique.size() != graph.factors.size()) {
        throw SchemaError("graph factors contain duplicates");
    }

    for (const auto& e : doc.at("edges")) {
        if (!e.is_array() || e.size() != 3 || !e[0].is_string() || !e[1].is_string() ||
            !e[2].is_number()) {
            throw SchemaError("graph edges must be [from, to, weight] triples");
        }
        CausalEdge edge;
        edge.from = graph.factor_index(e[0].get<std::string>());
        edge.to = graph.factor_index(e[1].get<std::string>());
        if (edge.from < 0 || edge.to < 0) {
            throw SchemaError("graph edge references unknown factor");
        }
        if (edge.from == edge.to) {
            throw SchemaError("graph contains self-edge on '" + e[0].get<std::string>() + "'");
        }
        edge.weight = e[2].get<double>();
        if (!std::isfinite(edge.weight)) {
            throw SchemaError("graph edge weight must be finite");
        }
        graph.edges.push_back(edge);
    }
    return graph;
}

void save_graph(const FactorCausalGraph& graph, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["factors"] = graph.factors;
    auto& edges = doc["edges"] = nlohmann::json::array();
    for (const CausalEdge& e : graph.edges) {
        edges.push_back({graph.factors[static_cast<std::size_t>(e.from)],
                         graph.factors[static_cast<std::size_t>(e.to)], e.weight});
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write graph file: " + path.string());
    out << doc.dump(2) << '\n';
}

GTestResult g_independence_test(const Eigen::MatrixXi& data, int x, int y,
                                const std::vector<int>& conditioning) {
    const Eigen::Index m = data.rows();
    std::vector<int> xc;
    std::vector<int> yc;
    const std::vector<int> x_levels = distinct_codes(data, x, xc);
    const std::vector<int> y_levels = distinct_codes(data, y, yc);
    const int nx = static_cast<int>(x_levels.size());
    const int ny = static_cast<int>(y_levels.size());

    // One flat stratum id per row, mixed radix over conditioning codes.
    std::vector<std::int64_t> stratum(static_cast<std::size_t>(m), 0);
    for (int c : conditioning) {
        std::vector<int> cc;
        const std::vector<int> levels = distinct_codes(data, c, cc);
        const auto radix = static_cast<std::int64_t>(levels.size());
        for (Eigen::Index r = 0; r < m; ++r) {
            auto& s = stratum[static_cast<std::size_t>(r)];
            s = s * radix + cc[static_cast<std::size_t>(r)];
        }
    }

    // (stratum, x, y) keys sorted for a deterministic summation order.
    std::vector<std::int64_t> keys(static_cast<std::size_t>(m));
    const auto cell_count = static_cast<std::int64_t>(nx) * ny;
    for (Eigen::Index r = 0; r < m; ++r) {
        keys[static_cast<std::size_t>(r)] =
            stratum[static_cast<std::size_t>(r)] * cell_count +
            static_cast<std::int64_t>(xc[static_cast<std::size_t>(r)]) * ny +
            yc[static_cast<std::size_t>(r)];
    }
    std::sort(keys.begin(), keys.end());

    GTestResult result;
    std::size_t total_cells = 0;
    std::size_t sparse_cells = 0;

    std::size_t i = 0;
    while (i < keys.size()) {
        const std::int64_t s = keys[i] / cell_count;
        std::size_t j = i;
        std::vector<double> row_counts(static_cast<std::size_t>(nx), 0.0);
        std::vector<double> col_counts(static_cast<std::size_t>(ny), 0.0);
        std::vector<std::pair<std::int64_t, double>> cells;  // cell key -> count
        double n_s = 0.0;
        while (j < keys.size() && keys[j] / cell_count == s) {
            const std::int64_t cell = keys[j] % cell_count;
            std::size_t run = j;
            while (run < keys.size() && keys[run] == keys[j]) ++run;
            const double count = static_cast<double>(run - j);
            cells.emplace_back(cell, count);
            row_counts[static_cast<std::size_t>(cell / ny)] += count;
            col_counts[static_cast<std::size_t>(cell % ny)] += count;
            n_s += count;
            j = run;
        }

        long long rs = 0;
        long long cs = 0;
        for (double c : row_counts) rs += c > 0.0 ? 1 : 0;
        for (double c : col_counts) cs += c > 0.0 ? 1 : 0;
        result.dof += (rs - 1) * (cs - 1);

        for (int a = 0; a < nx; ++a) {
            if (row_counts[static_cast<std::size_t>(a)] <= 0.0) continue;
            for (int b = 0; b < ny; ++b) {
                if (col_counts[static_cast<std::size_t>(b)] <= 0.0) continue;
                ++total_cells;
                const double expected =
                    row_counts[static_cast<std::size_t>(a)] * col_counts[static_cast<std::size_t>(b)] / n_s;
                if (expected < kMinExpectedCount) ++sparse_cells;
            }
        }

        for (const auto& [cell, count] : cells) {
            const double ex = row_counts[static_cast<std::size_t>(cell / ny)];
            const double ey = col_counts[static_cast<std::size_t>(cell % ny)];
            result.statistic += 2.0 * count * std::log(count * n_s / (ex * ey));
        }
        i = j;
    }

    if (total_cells > 0 &&
        static_cast<double>(sparse_cells) > kSparseCellFraction * static_cast<double>(total_cells)) {
        result.untestable = true;
    }
    result.statistic = std::max(result.statistic, 0.0);
    result.p_value = result.dof >= 1
                         ? chi_squared_sf(result.statistic, static_cast<double>(result.dof))
                         : 1.0;
    return result;
}

double empirical_mutual_information(const Eigen::MatrixXi& data, int x, int y) {
    const double m = static_cast<double>(data.rows());
    std::vector<int> xc;
    std::vector<int> yc;
    const int nx = static_cast<int>(distinct_codes(data, x, xc).size());
    const int ny = static_cast<int>(distinct_codes(data, y, yc).size());

    std::vector<double> joint(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0.0);
    std::vector<double> px(static_cast<std::size_t>(nx), 0.0);
    std::vector<double> py(static_cast<std::size_t>(ny), 0.0);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        const auto a = static_cast<std::size_t>(xc[static_cast<std::size_t>(r)]);
        const auto b = static_cast<std::size_t>(yc[static_cast<std::size_t>(r)]);
        joint[a * static_cast<std::size_t>(ny) + b] += 1.0;
        px[a] += 1.0;
        py[b] += 1.0;
    }
    double mi = 0.0;
    for (int a = 0; a < nx; ++a) {
        for (int b = 0; b < ny; ++b) {
            const double n_ab = joint[static_cast<std::size_t>(a) * static_cast<std::size_t>(ny) +
                                      static_cast<std::size_t>(b)];
            if (n_ab <= 0.0) continue;
            mi += (n_ab / m) * std::log(n_ab * m /
                                        (px[static_cast<std::size_t>(a)] * py[static_cast<std::size_t>(b)]));
        }
    }
    return std::max(mi, 0.0);
}

namespace {

// Next k-combination of ascending indices drawn from [0, n); returns false
// when exhausted.
bool next_combination(std::vector<int>& comb, int n) {
    const int k = static_cast<int>(comb.size());
    for (int i = k - 1; i >= 0; --i) {
        if (comb[static_cast<std::size_t>(i)] < n - (k - i)) {
            ++comb[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k; ++j) {
                comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
            }
            return true;
        }
    }
    return false;
}

struct Orientation {
    // flags(i, j): the edge admits direction i -> j. Adjacent pairs start
    // with both directions admitted (undirected).
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> flags;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> conflicted;

    explicit Orientation(int k) {
        flags.setConstant(k, k, false);
        conflicted.setConstant(k, k, false);
    }
    bool adjacent(int i, int j) const { return flags(i, j) || flags(j, i); }
    bool unoriented(int i, int j) const {
        return flags(i, j) && flags(j, i) && !conflicted(i, j);
    }
    bool directed(int i, int j) const { return flags(i, j) && !flags(j, i); }
    // Strips the reverse direction; only called on unoriented edges.
    void orient(int from, int to) { flags(to, from) = false; }
};

}  // namespace

PcResult discover_pc(const FactorValueMatrix& values, const PcOptions& options) {
    const Eigen::Index m = values.values.rows();
    const int k = values.factor_count();
    if (m < 20) {
        throw InsufficientDataError("PC discovery needs at least 20 samples, got " +
                                    std::to_string(m));
    }
    if (!(options.alpha > 0.0) || !(options.alpha < 1.0)) {
        throw UsageError("alpha must lie strictly between 0 and 1");
    }
    if (options.max_cond < 0) throw UsageError("max_cond must be non-negative");

    PcResult result;
    result.graph.factors = values.factor_names;

    // Factors without at least two observed values carry no signal.
    std::vector<bool> testable(static_cast<std::size_t>(k), false);
    for (int i = 0; i < k; ++i) {
        std::vector<int> codes;
        if (distinct_codes(values.values, i, codes).size() >= 2) {
            testable[static_cast<std::size_t>(i)] = true;
        } else {
            result.excluded_factors.push_back(values.factor_names[static_cast<std::size_t>(i)]);
        }
    }

    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> adj;
    adj.setConstant(k, k, false);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            if (testable[static_cast<std::size_t>(i)] && testable[static_cast<std::size_t>(j)]) {
                adj(i, j) = adj(j, i) = true;
            }
        }
    }

    std::map<std::pair<int, int>, std::vector<int>> sepsets;
    auto sepset_key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };

    // Stable skeleton phase: conditioning candidates come from the adjacency
    // snapshot taken at the start of each level.
    for (int level = 0; level <= options.max_cond; ++level) {
        const auto snapshot = adj;
        auto snapshot_neighbors = [&](int node, int excluded) {
            std::vector<int> out;
            for (int other = 0; other < k; ++other) {
                if (other != node && other != excluded && snapshot(node, other)) out.push_back(other);
            }
            return out;
        };

        bool any_candidate = false;
        for (int i = 0; i < k && !any_candidate; ++i) {
            for (int j = 0; j < k; ++j) {
                if (i != j && snapshot(i, j) &&
                    static_cast<int>(snapshot_neighbors(i, j).size()) >= level) {
                    any_candidate = true;
                    break;
                }
            }
        }
        if (!any_candidate) break;

        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                if (i == j || !adj(i, j)) continue;
                if (level == 0 && j < i) continue;  // the empty set is side-symmetric
                const std::vector<int> candidates = snapshot_neighbors(i, j);
                if (static_cast<int>(candidates.size()) < level) continue;

                std::vector<int> comb(static_cast<std::size_t>(level));
                for (int t = 0; t < level; ++t) comb[static_cast<std::size_t>(t)] = t;
                bool removed = false;
                do {
                    std::vector<int> cond;
                    cond.reserve(static_cast<std::size_t>(level));
                    for (int idx : comb) cond.push_back(candidates[static_cast<std::size_t>(idx)]);
                    const GTestResult test = g_independence_test(values.values, i, j, cond);
                    if (!test.untestable && test.p_value > options.alpha) {
                        adj(i, j) = adj(j, i) = false;
                        sepsets[sepset_key(i, j)] = cond;
                        removed = true;
                        break;
                    }
                } while (level > 0 && next_combination(comb, static_cast<int>(candidates.size())));
                if (removed) continue;
            }
        }
    }

    // Collider phase: collect orientation demands from unshielded triples,
    // then apply them all at once so the outcome is traversal-independent.
    std::set<std::pair<int, int>> demands;
    for (int a = 0; a < k; ++a) {
        for (int c = a + 1; c < k; ++c) {
            if (adj(a, c)) continue;
            const auto it = sepsets.find(sepset_key(a, c));
            for (int b = 0; b < k; ++b) {
                if (b == a || b == c || !adj(a, b) || !adj(b, c)) continue;
                const bool separator_contains_b =
                    it != sepsets.end() &&
                    std::find(it->second.begin(), it->second.end(), b) != it->second.end();
                if (it != sepsets.end() && !separator_contains_b) {
                    demands.insert({a, b});
                    demands.insert({c, b});
                }
            }
        }
    }

    Orientation orientation(k);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            if (!adj(i, j)) continue;
            const bool fwd = demands.count({i, j}) > 0;
            const bool bwd = demands.count({j, i}) > 0;
            if (fwd && bwd) {
                orientation.flags(i, j) = orientation.flags(j, i) = true;
                orientation.conflicted(i, j) = orientation.conflicted(j, i) = true;
            } else if (fwd) {
                orientation.flags(i, j) = true;
            } else if (bwd) {
                orientation.flags(j, i) = true;
            } else {
                orientation.flags(i, j) = orientation.flags(j, i) = true;
            }
        }
    }

    // Meek rules 1-3 to a fixpoint (rule 4 needs background knowledge).
    bool changed = true;
    while (changed) {
        changed = false;
        for (int b = 0; b < k; ++b) {
            for (int c = 0; c < k; ++c) {
                if (b == c || !orientation.unoriented(b, c)) continue;
                // R1: a -> b, b - c, a and c non-adjacent  =>  b -> c
                bool fire = false;
                for (int a = 0; a < k && !fire; ++a) {
                    if (a != c && orientation.directed(a, b) && !orientation.adjacent(a, c)) {
                        fire = true;
                    }
                }
                // R2: b -> x -> c with b - c  =>  b -> c
                for (int x = 0; x < k && !fire; ++x) {
                    if (x != b && x != c && orientation.directed(b, x) && orientation.directed(x, c)) {
                        fire = true;
                    }
                }
                // R3: b - x, b - y, x -> c, y -> c, x and y non-adjacent  =>  b -> c
                for (int x = 0; x < k && !fire; ++x) {
                    if (x == b || x == c || !orientation.unoriented(b, x) ||
                        !orientation.directed(x, c)) {
                        continue;
                    }
                    for (int y = x + 1; y < k && !fire; ++y) {
                        if (y == b || y == c || !orientation.unoriented(b, y) ||
                            !orientation.directed(y, c)) {
                            continue;
                        }
                        if (!orientation.adjacent(x, y)) fire = true;
                    }
                }
                if (fire) {
                    orientation.orient(b, c);
                    changed = true;
                }
            }
        }
    }

    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            if (!adj(i, j)) continue;
            const double weight = empirical_mutual_information(values.values, i, j);
            if (orientation.flags(i, j)) result.graph.edges.push_back({i, j, weight});
            if (orientation.flags(j, i)) result.graph.edges.push_back({j, i, weight});
        }
    }
    return result;
}

}  // namespace causaltab
