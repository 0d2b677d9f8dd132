#include "causaltab/factors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "causaltab/errors.hpp"

namespace causaltab {

namespace {

int parse_int_strict(const std::string& raw, const std::string& context) {
    std::string_view t = raw;
    while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == ' ' || t.back() == '\t' || t.back() == '\r')) t.remove_suffix(1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw DomainError(context + ": '" + raw + "' is not an integer");
    }
    return v;
}

}  // namespace

std::vector<FactorDef> load_factor_defs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open factor definitions: " + path.string());
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("factor definitions " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("factors") || !doc.at("factors").is_object()) {
        throw SchemaError("factor definitions must be {\"factors\": {...}}");
    }

    std::vector<FactorDef> defs;
    for (const auto& [name, body] : doc.at("factors").items()) {
        FactorDef def;
        def.name = name;
        if (!body.is_object() || !body.contains("possible_values") || !body.contains("column_based")) {
            throw SchemaError("factor '" + name + "' needs possible_values and column_based");
        }
        for (const auto& v : body.at("possible_values")) {
            if (!v.is_number_integer()) {
                throw DomainError("factor '" + name + "': possible_values must be integers");
            }
            def.possible_values.push_back(v.get<int>());
        }
        if (def.possible_values.empty()) {
            throw SchemaError("factor '" + name + "': possible_values is empty");
        }
        std::unordered_set<int> distinct(def.possible_values.begin(), def.possible_values.end());
        if (distinct.size() != def.possible_values.size()) {
            throw SchemaError("factor '" + name + "': possible_values contains duplicates");
        }
        for (const auto& c : body.at("column_based")) {
            def.column_based.push_back(c.get<std::string>());
        }
        if (def.column_based.empty()) {
            throw SchemaError("factor '" + name + "': column_based is empty");
        }
        if (body.contains("description")) def.description = body.at("description").get<std::string>();
        if (body.contains("annotation_criteria")) {
            def.annotation_criteria = body.at("annotation_criteria").get<std::string>();
        }
        defs.push_back(std::move(def));
    }
    if (defs.empty()) throw SchemaError("factor definitions declare no factors");
    return defs;
}

FactorMapping build_mapping(const std::vector<FactorDef>& defs, const Table& table) {
    FactorMapping mapping;
    for (const ColumnSpec& spec : table.columns) mapping.column_names.push_back(spec.name);
    const int k = static_cast<int>(defs.size());
    const int d = table.width();
    mapping.matrix = Eigen::MatrixXi::Zero(k, d);
    for (int i = 0; i < k; ++i) {
        const FactorDef& def = defs[static_cast<std::size_t>(i)];
        mapping.factor_names.push_back(def.name);
        for (const std::string& column : def.column_based) {
            const int j = table.column_index(column);
            if (j < 0) {
                throw MappingError("factor '" + def.name + "' references unknown column '" +
                                   column + "'");
            }
            mapping.matrix(i, j) = 1;
        }
    }
    return mapping;
}

FactorValueMatrix load_factor_values(const std::filesystem::path& path,
                                     const std::vector<FactorDef>& defs,
                                     std::size_t expected_rows, char delimiter) {
    auto records = read_delimited(path, delimiter);
    if (records.empty()) throw StructuralError("empty factor values file: " + path.string());

    const std::vector<std::string>& header = records.front();
    const int k = static_cast<int>(defs.size());
    if (static_cast<int>(header.size()) != k) {
        throw ShapeError("factor values header has " + std::to_string(header.size()) +
                         " factors, definitions declare " + std::to_string(k));
    }
    // Header may list factors in any order; columns are realigned to defs order.
    std::vector<int> source_column(static_cast<std::size_t>(k), -1);
    for (int i = 0; i < k; ++i) {
        const std::string& name = defs[static_cast<std::size_t>(i)].name;
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw SchemaError("factor values file has no column for factor '" + name + "'");
        }
        source_column[static_cast<std::size_t>(i)] =
            static_cast<int>(std::distance(header.begin(), it));
    }

    const std::size_t m = records.size() - 1;
    if (m != expected_rows) {
        throw ShapeError("factor values file has " + std::to_string(m) +
                         " rows, training table has " + std::to_string(expected_rows));
    }

    FactorValueMatrix out;
    for (const FactorDef& def : defs) out.factor_names.push_back(def.name);
    out.values = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(m), k);
    for (std::size_t r = 0; r < m; ++r) {
        const auto& record = records[r + 1];
        if (record.size() != header.size()) {
            throw StructuralError("factor values record " + std::to_string(r + 2) + " has " +
                                  std::to_string(record.size()) + " fields, expected " +
                                  std::to_string(header.size()));
        }
        for (int i = 0; i < k; ++i) {
            const FactorDef& def = defs[static_cast<std::size_t>(i)];
            const std::string& raw = record[static_cast<std::size_t>(source_column[static_cast<std::size_t>(i)])];
            const int v = parse_int_strict(raw, "factor '" + def.name + "', row " + std::to_string(r + 1));
            if (std::find(def.possible_values.begin(), def.possible_values.end(), v) ==
                def.possible_values.end()) {
                throw DomainError("factor '" + def.name + "', row " + std::to_string(r + 1) +
                                  ": value " + std::to_string(v) + " outside possible_values");
            }
            out.values(static_cast<Eigen::Index>(r), i) = v;
        }
    }
    return out;
}

FactorModel load_factor_model(const std::filesystem::path& defs_path,
                              const std::filesystem::path& values_path, const Table& table,
                              char delimiter) {
    FactorModel model;
    model.defs = load_factor_defs(defs_path);
    model.mapping = build_mapping(model.defs, table);
    model.values = load_factor_values(values_path, model.defs, table.row_count(), delimiter);
    return model;
}

std::vector<int> inverse_map(const FactorMapping& mapping, int column) {
    if (column < 0 || column >= mapping.column_count()) {
        throw UsageError("column index out of range: " + std::to_string(column));
    }
    std::vector<int> factors;
    for (int i = 0; i < mapping.factor_count(); ++i) {
        if (mapping.matrix(i, column) != 0) factors.push_back(i);
    }
    return factors;
}

}  // namespace causaltab
