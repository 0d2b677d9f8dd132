#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "causaltab/factors.hpp"

namespace causaltab {

struct CausalEdge {
    int from = 0;
    int to = 0;
    double weight = 0.0;
};

/// Weighted directed graph over factors. No self-edges; both directions of a
/// pair may coexist (unresolved orientation or genuine feedback). The weight
/// sign carries promoting/inhibiting semantics, the magnitude strength.
struct FactorCausalGraph {
    std::vector<std::string> factors;
    std::vector<CausalEdge> edges;

    int factor_index(std::string_view name) const;
};

/// JSON schema: {"factors": [...], "edges": [[from, to, weight], ...]} with
/// factor names as endpoints.
FactorCausalGraph load_graph(const std::filesystem::path& path);
void save_graph(const FactorCausalGraph& graph, const std::filesystem::path& path);

struct PcOptions {
    double alpha = 0.05;
    int max_cond = 3;
};

struct PcResult {
    FactorCausalGraph graph;
    /// Factors with fewer than two observed values, excluded from testing.
    std::vector<std::string> excluded_factors;
};

/// PC-style structure discovery over discrete factor values: stable skeleton
/// phase with G-test conditional-independence tests up to max_cond, collider
/// orientation, Meek rules. Directed edges carry the empirical mutual
/// information (natural log) of their endpoints; edges the CPDAG leaves
/// undirected are emitted in both directions with the full weight.
PcResult discover_pc(const FactorValueMatrix& values, const PcOptions& options = {});

struct GTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    long long dof = 0;
    /// Set when expected counts are too sparse to trust the test; callers
    /// must then keep the edge.
    bool untestable = false;
};

/// G-test of independence between columns x and y of a discrete data matrix,
/// stratified by the conditioning columns. Degrees of freedom count observed
/// levels per stratum.
GTestResult g_independence_test(const Eigen::MatrixXi& data, int x, int y,
                                const std::vector<int>& conditioning);

/// Empirical mutual information (natural log) between two discrete columns.
double empirical_mutual_information(const Eigen::MatrixXi& data, int x, int y);

}  // namespace causaltab
