#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace causaltab {

enum class ColumnKind { numerical, categorical, text };

/// Parses "numerical" / "categorical" / "text"; anything else is a SchemaError.
ColumnKind parse_column_kind(std::string_view name);
std::string_view to_string(ColumnKind kind);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::categorical;
    int index = 0;  // 0-based position in the raw file
};

/// One table entry: a number, a category token, free text, or missing.
class Cell {
public:
    enum class Tag { number, category, text, missing };

    Cell() = default;
    static Cell number(double v);
    static Cell category(std::string token);
    static Cell text(std::string body);
    static Cell missing();

    Tag tag() const { return tag_; }
    bool is_missing() const { return tag_ == Tag::missing; }
    double value() const;              // number cells only
    const std::string& token() const;  // category and text cells only

private:
    Tag tag_ = Tag::missing;
    double value_ = 0.0;
    std::string token_;
};

using Sample = std::vector<Cell>;

struct Table {
    std::vector<ColumnSpec> columns;
    std::vector<Sample> rows;

    int width() const { return static_cast<int>(columns.size()); }
    std::size_t row_count() const { return rows.size(); }
    /// Index of the named column, -1 when absent.
    int column_index(std::string_view name) const;
};

/// A permutation of column indices: column -> rank (0-based, each rank used
/// exactly once). Immutable after construction.
class Ordering {
public:
    explicit Ordering(std::vector<int> ranks);
    static Ordering identity(int d);
    /// Builds from the column sequence read off by rank.
    static Ordering from_sequence(const std::vector<int>& columns_by_rank);

    int size() const { return static_cast<int>(ranks_.size()); }
    int rank_of(int column) const { return ranks_[static_cast<std::size_t>(column)]; }
    int column_at(int rank) const { return columns_by_rank_[static_cast<std::size_t>(rank)]; }
    const std::vector<int>& ranks() const { return ranks_; }

    friend bool operator==(const Ordering& a, const Ordering& b) { return a.ranks_ == b.ranks_; }

private:
    std::vector<int> ranks_;
    std::vector<int> columns_by_rank_;
};

struct CsvOptions {
    char delimiter = ',';
    bool has_header = true;
};

/// Spreadsheet-style placeholder name for a column index: A..Z, AA, AB, ...
std::string placeholder_name(int index);

/// Shortest decimal form that round-trips to the same double ('.' separator,
/// no locale).
std::string render_number(double value);

/// True when a raw field denotes a missing value: empty after trimming, or
/// the token "unknown" in any case.
bool is_missing_token(std::string_view raw);

/// Reads an RFC-4180-style delimited file into raw string records.
/// Quoted fields may contain the delimiter, quotes ("" escapes) and newlines.
std::vector<std::vector<std::string>> read_delimited(const std::filesystem::path& path,
                                                     char delimiter = ',');

/// Loads a delimited file into a Table. Without a header, columns get
/// placeholder names. Without a schema, kinds are inferred per column:
/// numerical when every non-missing cell parses as a finite number, text when
/// any value contains whitespace, categorical otherwise.
Table load_table(const std::filesystem::path& path, const CsvOptions& opts = {},
                 const std::optional<std::vector<ColumnSpec>>& schema = std::nullopt);

/// Column schema from a JSON array of {"name": ..., "kind": ...} objects.
std::vector<ColumnSpec> load_schema(const std::filesystem::path& path);

/// Byte span of one column's rendered value inside a serialized sample.
struct FieldSpan {
    int column = 0;
    std::size_t value_begin = 0;
    std::size_t value_end = 0;  // exclusive
};

/// Renders a sample as "name is value" fragments joined by ", ", visiting
/// columns in ordering rank. Missing cells render as "Unknown".
std::string serialize(const Sample& sample, const Table& table, const Ordering& ordering);

/// Same as serialize but also reports the value span of every column.
std::string serialize_with_spans(const Sample& sample, const Table& table,
                                 const Ordering& ordering, std::vector<FieldSpan>& spans);

}  // namespace causaltab
