#include "causaltab/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "causaltab/errors.hpp"

namespace causaltab {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view raw) {
    const std::string_view t = trim(raw);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool has_whitespace(std::string_view s) {
    return std::any_of(s.begin(), s.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Cell parse_cell(const std::string& raw, ColumnKind kind, std::size_t record, const std::string& column) {
    if (is_missing_token(raw)) return Cell::missing();
    switch (kind) {
        case ColumnKind::numerical: {
            const auto v = parse_number(raw);
            if (!v) {
                throw DataError("record " + std::to_string(record) + ", column '" + column +
                                "': '" + raw + "' is not numeric");
            }
            return Cell::number(*v);
        }
        case ColumnKind::categorical:
            return Cell::category(raw);
        case ColumnKind::text:
            return Cell::text(raw);
    }
    throw Error(ErrorClass::internal, "unreachable column kind");
}

}  // namespace

ColumnKind parse_column_kind(std::string_view name) {
    if (name == "numerical") return ColumnKind::numerical;
    if (name == "categorical") return ColumnKind::categorical;
    if (name == "text") return ColumnKind::text;
    throw SchemaError("unknown column kind: '" + std::string(name) + "'");
}

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numerical: return "numerical";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::text: return "text";
    }
    return "?";
}

Cell Cell::number(double v) {
    Cell c;
    c.tag_ = Tag::number;
    c.value_ = v;
    return c;
}

Cell Cell::category(std::string token) {
    Cell c;
    c.tag_ = Tag::category;
    c.token_ = std::move(token);
    return c;
}

Cell Cell::text(std::string body) {
    Cell c;
    c.tag_ = Tag::text;
    c.token_ = std::move(body);
    return c;
}

Cell Cell::missing() { return Cell(); }

double Cell::value() const {
    if (tag_ != Tag::number) throw UsageError("Cell::value called on a non-number cell");
    return value_;
}

const std::string& Cell::token() const {
    if (tag_ != Tag::category && tag_ != Tag::text) {
        throw UsageError("Cell::token called on a cell without text payload");
    }
    return token_;
}

int Table::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Ordering::Ordering(std::vector<int> ranks) : ranks_(std::move(ranks)) {
    const int d = static_cast<int>(ranks_.size());
    if (d == 0) throw UsageError("an ordering needs at least one column");
    columns_by_rank_.assign(ranks_.size(), -1);
    for (int col = 0; col < d; ++col) {
        const int r = ranks_[static_cast<std::size_t>(col)];
        if (r < 0 || r >= d || columns_by_rank_[static_cast<std::size_t>(r)] != -1) {
            throw UsageError("ordering ranks are not a permutation of 0.." + std::to_string(d - 1));
        }
        columns_by_rank_[static_cast<std::size_t>(r)] = col;
    }
}

Ordering Ordering::identity(int d) {
    std::vector<int> ranks(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) ranks[static_cast<std::size_t>(i)] = i;
    return Ordering(std::move(ranks));
}

Ordering Ordering::from_sequence(const std::vector<int>& columns_by_rank) {
    const int d = static_cast<int>(columns_by_rank.size());
    std::vector<int> ranks(columns_by_rank.size(), -1);
    for (int r = 0; r < d; ++r) {
        const int col = columns_by_rank[static_cast<std::size_t>(r)];
        if (col < 0 || col >= d || ranks[static_cast<std::size_t>(col)] != -1) {
            throw UsageError("column sequence is not a permutation");
        }
        ranks[static_cast<std::size_t>(col)] = r;
    }
    return Ordering(std::move(ranks));
}

std::string placeholder_name(int index) {
    if (index < 0) throw UsageError("column index must be non-negative");
    std::string name;
    int n = index + 1;  // bijective base 26
    while (n > 0) {
        n -= 1;
        name.push_back(static_cast<char>('A' + n % 26));
        n /= 26;
    }
    std::reverse(name.begin(), name.end());
    return name;
}

std::string render_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw Error(ErrorClass::internal, "number rendering failed");
    return std::string(buf, ptr);
}

bool is_missing_token(std::string_view raw) {
    const std::string_view t = trim(raw);
    if (t.empty()) return true;
    if (t.size() != 7) return false;
    static constexpr std::string_view kUnknown = "unknown";
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(t[i])) != kUnknown[i]) return false;
    }
    return true;
}

std::vector<std::vector<std::string>> read_delimited(const std::filesystem::path& path,
                                                     char delimiter) {
    const std::string body = read_file(path);
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool record_has_content = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        field_was_quoted = false;
        record_has_content = true;
    };
    auto end_record = [&] {
        if (record_has_content || !field.empty() || field_was_quoted) {
            end_field();
            records.push_back(std::move(record));
            record.clear();
            record_has_content = false;
        }
    };

    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < body.size() && body[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == delimiter) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw StructuralError("unterminated quoted field in " + path.string());
    if (!field.empty() && field.back() == '\r') field.pop_back();
    end_record();
    return records;
}

Table load_table(const std::filesystem::path& path, const CsvOptions& opts,
                 const std::optional<std::vector<ColumnSpec>>& schema) {
    auto records = read_delimited(path, opts.delimiter);
    if (records.empty()) throw StructuralError("empty table file: " + path.string());

    const std::size_t d = records.front().size();
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].size() != d) {
            throw StructuralError("record " + std::to_string(r + 1) + " has " +
                                  std::to_string(records[r].size()) + " fields, expected " +
                                  std::to_string(d));
        }
    }

    std::vector<std::string> names;
    std::size_t first_data_row = 0;
    if (opts.has_header) {
        names = records.front();
        first_data_row = 1;
    } else {
        for (std::size_t j = 0; j < d; ++j) names.push_back(placeholder_name(static_cast<int>(j)));
    }

    Table table;
    if (schema) {
        if (schema->size() != d) {
            throw SchemaError("schema declares " + std::to_string(schema->size()) +
                              " columns, file has " + std::to_string(d));
        }
        for (std::size_t j = 0; j < d; ++j) {
            const ColumnSpec& spec = (*schema)[j];
            if (opts.has_header && spec.name != names[j]) {
                throw SchemaError("schema column '" + spec.name + "' does not match header '" +
                                  names[j] + "'");
            }
            table.columns.push_back({spec.name, spec.kind, static_cast<int>(j)});
        }
    } else {
        // Kind inference over the data rows.
        for (std::size_t j = 0; j < d; ++j) {
            bool all_numeric = true;
            bool any_whitespace = false;
            bool any_value = false;
            for (std::size_t r = first_data_row; r < records.size(); ++r) {
                const std::string& raw = records[r][j];
                if (is_missing_token(raw)) continue;
                any_value = true;
                if (!parse_number(raw)) all_numeric = false;
                if (has_whitespace(raw)) any_whitespace = true;
            }
            ColumnKind kind = ColumnKind::categorical;
            if (any_value && all_numeric) {
                kind = ColumnKind::numerical;
            } else if (any_whitespace) {
                kind = ColumnKind::text;
            }
            table.columns.push_back({names[j], kind, static_cast<int>(j)});
        }
    }

    std::unordered_set<std::string> seen;
    for (const ColumnSpec& spec : table.columns) {
        if (!seen.insert(spec.name).second) {
            throw SchemaError("duplicate column name: '" + spec.name + "'");
        }
    }

    table.rows.reserve(records.size() - first_data_row);
    for (std::size_t r = first_data_row; r < records.size(); ++r) {
        Sample row;
        row.reserve(d);
        for (std::size_t j = 0; j < d; ++j) {
            row.push_back(parse_cell(records[r][j], table.columns[j].kind, r + 1,
                                     table.columns[j].name));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<ColumnSpec> load_schema(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("schema file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw SchemaError("schema file must hold a JSON array");
    std::vector<ColumnSpec> specs;
    int index = 0;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("name") || !entry.contains("kind")) {
            throw SchemaError("schema entries need 'name' and 'kind'");
        }
        specs.push_back({entry.at("name").get<std::string>(),
                         parse_column_kind(entry.at("kind").get<std::string>()), index});
        ++index;
    }
    return specs;
}

std::string serialize(const Sample& sample, const Table& table, const Ordering& ordering) {
    std::vector<FieldSpan> spans;
    return serialize_with_spans(sample, table, ordering, spans);
}

std::string serialize_with_spans(const Sample& sample, const Table& table,
                                 const Ordering& ordering, std::vector<FieldSpan>& spans) {
    const int d = table.width();
    if (ordering.size() != d) throw UsageError("ordering size does not match table width");
    if (static_cast<int>(sample.size()) != d) {
        throw UsageError("sample size does not match table width");
    }
    spans.clear();
    spans.reserve(static_cast<std::size_t>(d));
    std::string out;
    for (int rank = 0; rank < d; ++rank) {
        const int col = ordering.column_at(rank);
        if (rank > 0) out += ", ";
        out += table.columns[static_cast<std::size_t>(col)].name;
        out += " is ";
        const std::size_t begin = out.size();
        const Cell& cell = sample[static_cast<std::size_t>(col)];
        switch (cell.tag()) {
            case Cell::Tag::number: out += render_number(cell.value()); break;
            case Cell::Tag::category:
            case Cell::Tag::text: out += cell.token(); break;
            case Cell::Tag::missing: out += "Unknown"; break;
        }
        spans.push_back({col, begin, out.size()});
    }
    return out;
}

}  // namespace causaltab
