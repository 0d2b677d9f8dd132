#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causaltab/table.hpp"

namespace causaltab {

/// One high-level concept annotated over the table. Values are integers
/// drawn from possible_values; description and annotation_criteria are
/// informational only.
struct FactorDef {
    std::string name;
    std::vector<int> possible_values;
    std::vector<std::string> column_based;
    std::string description;
    std::string annotation_criteria;
};

/// Binary factor-to-column incidence: matrix(i, j) == 1 iff factor i lists
/// column j. Many-to-many.
struct FactorMapping {
    std::vector<std::string> factor_names;
    std::vector<std::string> column_names;
    Eigen::MatrixXi matrix;  // k x d

    int factor_count() const { return static_cast<int>(matrix.rows()); }
    int column_count() const { return static_cast<int>(matrix.cols()); }
};

/// Annotated factor values, one row per training sample, one column per
/// factor (in FactorDef order).
struct FactorValueMatrix {
    std::vector<std::string> factor_names;
    Eigen::MatrixXi values;  // m x k

    std::size_t sample_count() const { return static_cast<std::size_t>(values.rows()); }
    int factor_count() const { return static_cast<int>(values.cols()); }
};

struct FactorModel {
    std::vector<FactorDef> defs;
    FactorMapping mapping;
    FactorValueMatrix values;
};

/// Factor definitions from a JSON document of the form
/// {"factors": {name: {description, possible_values, annotation_criteria,
/// column_based}}}. Factor order is the document order.
std::vector<FactorDef> load_factor_defs(const std::filesystem::path& path);

/// Builds the incidence matrix from the defs' column_based lists, validating
/// every referenced column against the table.
FactorMapping build_mapping(const std::vector<FactorDef>& defs, const Table& table);

/// Annotated values from a delimited file whose header names the factors
/// (any order; columns are aligned to the defs order).
FactorValueMatrix load_factor_values(const std::filesystem::path& path,
                                     const std::vector<FactorDef>& defs,
                                     std::size_t expected_rows, char delimiter = ',');

FactorModel load_factor_model(const std::filesystem::path& defs_path,
                              const std::filesystem::path& values_path, const Table& table,
                              char delimiter = ',');

/// Indices of factors whose mapping row marks the column, ascending.
std::vector<int> inverse_map(const FactorMapping& mapping, int column);

}  // namespace causaltab
