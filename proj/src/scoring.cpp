#include "causaltab/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "causaltab/errors.hpp"

namespace causaltab {

namespace {

int whitespace_token_count(const std::string& body) {
    int count = 0;
    bool in_token = false;
    for (char c : body) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

}  // namespace

ColumnWeights compute_weights(const FactorMapping& mapping) {
    return mapping.matrix.colwise().sum();
}

ColumnDiscretizer ColumnDiscretizer::fit(const Table& table, int column, int bins) {
    if (column < 0 || column >= table.width()) throw UsageError("column index out of range");
    if (bins < 1) throw UsageError("bins must be at least 1");

    ColumnDiscretizer disc;
    disc.kind_ = table.columns[static_cast<std::size_t>(column)].kind;
    disc.text_buckets_ = bins;

    std::vector<double> numeric;
    std::set<std::string> tokens;
    for (const Sample& row : table.rows) {
        const Cell& cell = row[static_cast<std::size_t>(column)];
        if (cell.is_missing()) {
            disc.has_missing_ = true;
            continue;
        }
        if (disc.kind_ == ColumnKind::numerical) {
            numeric.push_back(cell.value());
        } else if (disc.kind_ == ColumnKind::categorical) {
            tokens.insert(cell.token());
        }
    }

    if (disc.kind_ == ColumnKind::numerical) {
        std::sort(numeric.begin(), numeric.end());
        const std::size_t n = numeric.size();
        for (int i = 1; i < bins && n > 0; ++i) {
            disc.edges_.push_back(numeric[static_cast<std::size_t>(i) * n / static_cast<std::size_t>(bins)]);
        }
        disc.edges_.erase(std::unique(disc.edges_.begin(), disc.edges_.end()), disc.edges_.end());
    } else if (disc.kind_ == ColumnKind::categorical) {
        disc.vocab_.assign(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i < disc.vocab_.size(); ++i) {
            disc.vocab_index_[disc.vocab_[i]] = static_cast<int>(i);
        }
    }
    return disc;
}

int ColumnDiscretizer::structural_codes() const {
    switch (kind_) {
        case ColumnKind::numerical: return static_cast<int>(edges_.size()) + 1;
        case ColumnKind::categorical: return static_cast<int>(vocab_.size());
        case ColumnKind::text: return text_buckets_;
    }
    return 0;
}

int ColumnDiscretizer::code_count() const {
    return structural_codes() + (has_missing_ ? 1 : 0) + 1;
}

int ColumnDiscretizer::missing_code() const {
    if (!has_missing_) throw UsageError("column has no missing code");
    return structural_codes();
}

int ColumnDiscretizer::code_of(const Cell& cell) const {
    if (cell.is_missing()) return has_missing_ ? missing_code() : unknown_code();
    switch (kind_) {
        case ColumnKind::numerical: {
            if (cell.tag() != Cell::Tag::number) {
                throw UsageError("cell type does not match numerical column");
            }
            const double x = cell.value();
            // Right-closed bins: bin index = number of edges strictly below x.
            return static_cast<int>(std::lower_bound(edges_.begin(), edges_.end(), x) -
                                    edges_.begin());
        }
        case ColumnKind::categorical: {
            if (cell.tag() != Cell::Tag::category) {
                throw UsageError("cell type does not match categorical column");
            }
            const auto it = vocab_index_.find(cell.token());
            return it == vocab_index_.end() ? unknown_code() : it->second;
        }
        case ColumnKind::text: {
            if (cell.tag() != Cell::Tag::text) {
                throw UsageError("cell type does not match text column");
            }
            return whitespace_token_count(cell.token()) % text_buckets_;
        }
    }
    throw Error(ErrorClass::internal, "unreachable column kind");
}

nlohmann::json ColumnDiscretizer::to_json() const {
    nlohmann::json doc;
    doc["kind"] = std::string(to_string(kind_));
    doc["has_missing"] = has_missing_;
    doc["buckets"] = text_buckets_;
    doc["vocab"] = vocab_;
    doc["edges"] = edges_;
    return doc;
}

ColumnDiscretizer ColumnDiscretizer::from_json(const nlohmann::json& doc) {
    ColumnDiscretizer disc;
    disc.kind_ = parse_column_kind(doc.at("kind").get<std::string>());
    disc.has_missing_ = doc.at("has_missing").get<bool>();
    disc.text_buckets_ = doc.at("buckets").get<int>();
    disc.vocab_ = doc.at("vocab").get<std::vector<std::string>>();
    disc.edges_ = doc.at("edges").get<std::vector<double>>();
    for (std::size_t i = 0; i < disc.vocab_.size(); ++i) {
        disc.vocab_index_[disc.vocab_[i]] = static_cast<int>(i);
    }
    return disc;
}

SurrogateScorer SurrogateScorer::fit(const Table& train, const OrderingSet& orderings, int bins,
                                     double smoothing) {
    if (train.rows.empty()) throw DataError("cannot fit a scorer on an empty training table");
    if (orderings.entries.empty()) throw UsageError("cannot fit a scorer without orderings");
    if (!(smoothing > 0.0)) throw UsageError("smoothing must be positive");

    SurrogateScorer scorer;
    scorer.width_ = train.width();
    scorer.bins_ = bins;
    scorer.smoothing_ = smoothing;
    for (int j = 0; j < train.width(); ++j) {
        scorer.discretizers_.push_back(ColumnDiscretizer::fit(train, j, bins));
    }

    // Precomputed codes shared by all orderings.
    const std::size_t m = train.row_count();
    Eigen::MatrixXi codes(static_cast<Eigen::Index>(m), train.width());
    for (std::size_t r = 0; r < m; ++r) {
        for (int j = 0; j < train.width(); ++j) {
            codes(static_cast<Eigen::Index>(r), j) =
                scorer.discretizers_[static_cast<std::size_t>(j)].code_of(
                    train.rows[r][static_cast<std::size_t>(j)]);
        }
    }

    for (const ScoredOrdering& entry : orderings.entries) {
        const Ordering& ordering = entry.ordering;
        if (ordering.size() != train.width()) {
            throw UsageError("ordering size does not match training table width");
        }
        if (scorer.ordering_index(ordering) != -1) {
            throw UsageError("orderings passed to fit must be pairwise distinct");
        }
        std::vector<Eigen::MatrixXi> tables;
        for (int rank = 0; rank < train.width(); ++rank) {
            const int col = ordering.column_at(rank);
            const int v = scorer.discretizers_[static_cast<std::size_t>(col)].code_count();
            const int contexts =
                rank == 0 ? 1
                          : scorer.discretizers_[static_cast<std::size_t>(ordering.column_at(rank - 1))]
                                .code_count();
            Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(contexts, v);
            for (std::size_t r = 0; r < m; ++r) {
                const int u = rank == 0 ? 0
                                        : codes(static_cast<Eigen::Index>(r),
                                                ordering.column_at(rank - 1));
                counts(u, codes(static_cast<Eigen::Index>(r), col)) += 1;
            }
            tables.push_back(std::move(counts));
        }
        scorer.orderings_.push_back(ordering);
        scorer.counts_.push_back(std::move(tables));
    }
    return scorer;
}

int SurrogateScorer::ordering_index(const Ordering& ordering) const {
    for (std::size_t i = 0; i < orderings_.size(); ++i) {
        if (orderings_[i] == ordering) return static_cast<int>(i);
    }
    return -1;
}

const ColumnDiscretizer& SurrogateScorer::discretizer(int column) const {
    if (column < 0 || column >= width_) throw UsageError("column index out of range");
    return discretizers_[static_cast<std::size_t>(column)];
}

Eigen::VectorXd SurrogateScorer::column_nll(const Sample& sample, const Ordering& ordering) const {
    const int z = ordering_index(ordering);
    if (z < 0) throw UsageError("ordering was not among those the scorer was fitted with");
    if (static_cast<int>(sample.size()) != width_) {
        throw UsageError("sample size does not match fitted width");
    }

    Eigen::VectorXd nll(width_);
    int prev_code = 0;
    for (int rank = 0; rank < width_; ++rank) {
        const int col = ordering.column_at(rank);
        const ColumnDiscretizer& disc = discretizers_[static_cast<std::size_t>(col)];
        const int code = disc.code_of(sample[static_cast<std::size_t>(col)]);
        const Eigen::MatrixXi& counts = counts_[static_cast<std::size_t>(z)][static_cast<std::size_t>(rank)];
        const int context = rank == 0 ? 0 : prev_code;
        const double row_total = static_cast<double>(counts.row(context).sum());
        const double p = (static_cast<double>(counts(context, code)) + smoothing_) /
                         (row_total + smoothing_ * static_cast<double>(disc.code_count()));
        nll(col) = -std::log(p);
        prev_code = code;
    }
    return nll;
}

Eigen::MatrixXd SurrogateScorer::conditional(int ordering_idx, int rank) const {
    if (ordering_idx < 0 || ordering_idx >= static_cast<int>(orderings_.size())) {
        throw UsageError("ordering index out of range");
    }
    if (rank < 0 || rank >= width_) throw UsageError("rank out of range");
    const Eigen::MatrixXi& counts =
        counts_[static_cast<std::size_t>(ordering_idx)][static_cast<std::size_t>(rank)];
    const int col = orderings_[static_cast<std::size_t>(ordering_idx)].column_at(rank);
    const double v = static_cast<double>(discretizers_[static_cast<std::size_t>(col)].code_count());
    Eigen::MatrixXd probs(counts.rows(), counts.cols());
    for (Eigen::Index u = 0; u < counts.rows(); ++u) {
        const double total = static_cast<double>(counts.row(u).sum());
        for (Eigen::Index c = 0; c < counts.cols(); ++c) {
            probs(u, c) = (static_cast<double>(counts(u, c)) + smoothing_) / (total + smoothing_ * v);
        }
    }
    return probs;
}

void SurrogateScorer::save(const std::filesystem::path& path) const {
    nlohmann::json doc;
    doc["bins"] = bins_;
    doc["smoothing"] = smoothing_;
    doc["width"] = width_;
    auto& columns = doc["columns"] = nlohmann::json::array();
    for (const ColumnDiscretizer& disc : discretizers_) columns.push_back(disc.to_json());
    auto& orderings = doc["orderings"] = nlohmann::json::array();
    for (const Ordering& ordering : orderings_) orderings.push_back(ordering.ranks());
    auto& tables = doc["counts"] = nlohmann::json::array();
    for (const auto& per_ordering : counts_) {
        nlohmann::json ranks = nlohmann::json::array();
        for (const Eigen::MatrixXi& counts : per_ordering) {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index u = 0; u < counts.rows(); ++u) {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index c = 0; c < counts.cols(); ++c) row.push_back(counts(u, c));
                rows.push_back(std::move(row));
            }
            ranks.push_back(std::move(rows));
        }
        tables.push_back(std::move(ranks));
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scorer file: " + path.string());
    out << doc.dump() << '\n';
}

SurrogateScorer SurrogateScorer::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scorer file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("scorer file " + path.string() + ": " + e.what());
    }

    SurrogateScorer scorer;
    scorer.bins_ = doc.at("bins").get<int>();
    scorer.smoothing_ = doc.at("smoothing").get<double>();
    scorer.width_ = doc.at("width").get<int>();
    for (const auto& column : doc.at("columns")) {
        scorer.discretizers_.push_back(ColumnDiscretizer::from_json(column));
    }
    for (const auto& ranks : doc.at("orderings")) {
        scorer.orderings_.emplace_back(ranks.get<std::vector<int>>());
    }
    for (const auto& per_ordering : doc.at("counts")) {
        std::vector<Eigen::MatrixXi> tables;
        for (const auto& rows : per_ordering) {
            const auto r = static_cast<Eigen::Index>(rows.size());
            const auto c = static_cast<Eigen::Index>(rows.at(0).size());
            Eigen::MatrixXi counts(r, c);
            for (Eigen::Index u = 0; u < r; ++u) {
                for (Eigen::Index v = 0; v < c; ++v) {
                    counts(u, v) = rows.at(static_cast<std::size_t>(u)).at(static_cast<std::size_t>(v)).get<int>();
                }
            }
            tables.push_back(std::move(counts));
        }
        scorer.counts_.push_back(std::move(tables));
    }
    if (scorer.discretizers_.size() != static_cast<std::size_t>(scorer.width_) ||
        scorer.orderings_.size() != scorer.counts_.size() || scorer.orderings_.empty()) {
        throw SchemaError("scorer file is internally inconsistent");
    }
    return scorer;
}

double aggregate_score(const Eigen::MatrixXd& nll, const Eigen::VectorXd& alpha) {
    if (nll.cols() != alpha.size()) throw UsageError("weight vector does not match NLL columns");
    const auto k = nll.rows();
    if (k < 1) throw UsageError("NLL matrix needs at least one ordering row");
    double total = 0.0;
    for (Eigen::Index z = 0; z < k; ++z) {
        for (Eigen::Index j = 0; j < nll.cols(); ++j) total += alpha(j) * nll(z, j);
    }
    return total / static_cast<double>(k);
}

namespace {

Eigen::MatrixXd nll_matrix(const SurrogateScorer& scorer, const Sample& sample,
                           const OrderingSet& orderings) {
    Eigen::MatrixXd nll(static_cast<Eigen::Index>(orderings.size()), scorer.width());
    for (std::size_t z = 0; z < orderings.size(); ++z) {
        nll.row(static_cast<Eigen::Index>(z)) =
            scorer.column_nll(sample, orderings.entries[z].ordering).transpose();
    }
    return nll;
}

void validate_alpha(const Eigen::VectorXd& alpha, int width) {
    if (alpha.size() != width) throw UsageError("weight vector length does not match table width");
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        if (!(alpha(j) >= 0.0) || !std::isfinite(alpha(j))) {
            throw UsageError("column weights must be finite and non-negative");
        }
    }
}

}  // namespace

double score(const SurrogateScorer& scorer, const Sample& sample, const OrderingSet& orderings,
             const Eigen::VectorXd& alpha) {
    if (orderings.entries.empty()) throw UsageError("cannot score without orderings");
    validate_alpha(alpha, scorer.width());
    return aggregate_score(nll_matrix(scorer, sample, orderings), alpha);
}

ScoreReport score_table(const SurrogateScorer& scorer, const Table& table,
                        const OrderingSet& orderings, const Eigen::VectorXd& alpha) {
    if (orderings.entries.empty()) throw UsageError("cannot score without orderings");
    validate_alpha(alpha, scorer.width());
    if (table.width() != scorer.width()) {
        throw ShapeError("table width does not match the fitted scorer");
    }
    ScoreReport report;
    report.alpha = alpha;
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        if (alpha(j) == 0.0) report.zero_weight_columns.push_back(static_cast<int>(j));
    }
    report.nll.reserve(table.row_count());
    report.scores.reserve(table.row_count());
    for (const Sample& row : table.rows) {
        report.nll.push_back(nll_matrix(scorer, row, orderings));
        report.scores.push_back(aggregate_score(report.nll.back(), alpha));
    }
    return report;
}

void export_sequences(const Table& table, const OrderingSet& orderings,
                      const std::filesystem::path& path) {
    if (orderings.entries.empty()) throw UsageError("cannot export without orderings");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sequences file: " + path.string());
    std::vector<FieldSpan> spans;
    for (std::size_t i = 0; i < table.row_count(); ++i) {
        for (std::size_t z = 0; z < orderings.size(); ++z) {
            const std::string text =
                serialize_with_spans(table.rows[i], table, orderings.entries[z].ordering, spans);
            nlohmann::json record;
            record["sample"] = i;
            record["ordering"] = z;
            record["text"] = text;
            auto& out_spans = record["spans"] = nlohmann::json::array();
            for (const FieldSpan& span : spans) {
                out_spans.push_back({span.column, span.value_begin, span.value_end});
            }
            out << record.dump() << '\n';
        }
    }
}

ExternalNll import_external_nll(const std::filesystem::path& path, std::size_t samples,
                                std::size_t orderings, std::size_t columns, char delimiter) {
    const auto records = read_delimited(path, delimiter);
    if (records.empty()) throw StructuralError("empty external NLL file: " + path.string());
    const std::vector<std::string>& header = records.front();
    const std::vector<std::string> expected = {"sample", "ordering", "column", "nll"};
    std::vector<int> field(expected.size(), -1);
    for (std::size_t f = 0; f < expected.size(); ++f) {
        const auto it = std::find(header.begin(), header.end(), expected[f]);
        if (it == header.end()) {
            throw SchemaError("external NLL file needs a '" + expected[f] + "' column");
        }
        field[f] = static_cast<int>(it - header.begin());
    }

    ExternalNll out;
    out.samples = samples;
    out.orderings = orderings;
    out.columns = columns;
    out.nll.assign(samples, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(orderings),
                                                  static_cast<Eigen::Index>(columns)));
    std::vector<bool> seen(samples * orderings * columns, false);

    auto parse_index = [](const std::string& raw, std::size_t limit, const char* what,
                          std::size_t record) {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || ptr != raw.data() + raw.size() || v >= limit) {
            throw DomainError("external NLL record " + std::to_string(record) + ": bad " +
                              std::string(what) + " '" + raw + "'");
        }
        return v;
    };

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) {
            throw StructuralError("external NLL record " + std::to_string(r + 1) +
                                  " has the wrong field count");
        }
        const std::size_t i = parse_index(rec[static_cast<std::size_t>(field[0])], samples, "sample", r + 1);
        const std::size_t z = parse_index(rec[static_cast<std::size_t>(field[1])], orderings, "ordering", r + 1);
        const std::size_t j = parse_index(rec[static_cast<std::size_t>(field[2])], columns, "column", r + 1);
        const std::string& raw = rec[static_cast<std::size_t>(field[3])];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || ptr != raw.data() + raw.size() || !std::isfinite(v) || v < 0.0) {
            throw DomainError("external NLL record " + std::to_string(r + 1) +
                              ": nll must be a finite non-negative number");
        }
        const std::size_t flat = (i * orderings + z) * columns + j;
        if (seen[flat]) {
            throw DataError("external NLL file repeats entry (" + std::to_string(i) + ", " +
                            std::to_string(z) + ", " + std::to_string(j) + ")");
        }
        seen[flat] = true;
        out.nll[i](static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(j)) = v;
    }

    std::vector<std::string> gaps;
    for (std::size_t i = 0; i < samples && gaps.size() < 5; ++i) {
        for (std::size_t z = 0; z < orderings && gaps.size() < 5; ++z) {
            for (std::size_t j = 0; j < columns && gaps.size() < 5; ++j) {
                if (!seen[(i * orderings + z) * columns + j]) {
                    gaps.push_back("(" + std::to_string(i) + ", " + std::to_string(z) + ", " +
                                   std::to_string(j) + ")");
                }
            }
        }
    }
    if (!gaps.empty()) {
        std::size_t present = 0;
        for (const bool b : seen) present += b ? 1 : 0;
        std::string message = "external NLL file is incomplete; missing " +
                              std::to_string(seen.size() - present) + " entries, first: ";
        for (std::size_t g = 0; g < gaps.size(); ++g) {
            if (g > 0) message += ", ";
            message += gaps[g];
        }
        throw CompletenessError(message);
    }
    return out;
}

void write_scores(const ScoreReport& report, const std::filesystem::path& path, char delimiter) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scores file: " + path.string());
    out << "sample" << delimiter << "score\n";
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        out << i << delimiter << render_number(report.scores[i]) << '\n';
    }
}

void write_breakdown(const ScoreReport& report, const std::filesystem::path& path,
                     char delimiter) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write breakdown file: " + path.string());
    out << "sample" << delimiter << "ordering" << delimiter << "column" << delimiter << "nll\n";
    for (std::size_t i = 0; i < report.nll.size(); ++i) {
        const Eigen::MatrixXd& nll = report.nll[i];
        for (Eigen::Index z = 0; z < nll.rows(); ++z) {
            for (Eigen::Index j = 0; j < nll.cols(); ++j) {
                out << i << delimiter << z << delimiter << j << delimiter
                    << render_number(nll(z, j)) << '\n';
            }
        }
    }
}

}  // namespace causaltab
