#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "causaltab/errors.hpp"
#include "causaltab/rng.hpp"
#include "causaltab/scoring.hpp"
#include "test_support.hpp"

using namespace causaltab;

namespace {

Table one_categorical_column(const std::vector<std::string>& tokens) {
    Table t;
    t.columns = {{"c", ColumnKind::categorical, 0}};
    for (const std::string& token : tokens) t.rows.push_back({Cell::category(token)});
    return t;
}

// Two categorical columns where the second deterministically copies the
// first; `per_token` rows for each of the four tokens.
Table copy_table(int per_token) {
    Table t;
    t.columns = {{"x1", ColumnKind::categorical, 0}, {"x2", ColumnKind::categorical, 1}};
    for (const std::string token : {"a", "b", "c", "d"}) {
        for (int i = 0; i < per_token; ++i) {
            t.rows.push_back({Cell::category(token), Cell::category(token)});
        }
    }
    return t;
}

OrderingSet identity_orderings(int d) {
    OrderingSet set;
    set.entries.push_back({Ordering::identity(d), 0.0});
    return set;
}

FactorMapping mapping_from(const std::vector<std::vector<int>>& rows, int columns) {
    FactorMapping mapping;
    mapping.matrix.resize(static_cast<Eigen::Index>(rows.size()), columns);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        mapping.factor_names.push_back("f" + std::to_string(i + 1));
        for (int j = 0; j < columns; ++j) {
            mapping.matrix(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        }
    }
    for (int j = 0; j < columns; ++j) mapping.column_names.push_back("c" + std::to_string(j + 1));
    return mapping;
}

}  // namespace

TEST_SUITE("scoring") {

TEST_CASE("laplace-smoothed marginal matches hand arithmetic") {
    // Training column {a: 3, b: 1}; vocabulary {a, b, unknown}; smoothing 1.
    const Table train = one_categorical_column({"a", "a", "a", "b"});
    const SurrogateScorer scorer = SurrogateScorer::fit(train, identity_orderings(1));

    CHECK(scorer.discretizer(0).code_count() == 3);
    const Eigen::VectorXd nll = scorer.column_nll(train.rows[0], Ordering::identity(1));
    CHECK(nll(0) == doctest::Approx(-std::log(4.0 / 7.0)).epsilon(1e-15));

    const Eigen::MatrixXd marginal = scorer.conditional(0, 0);
    REQUIRE(marginal.rows() == 1);
    CHECK(marginal(0, 0) == doctest::Approx(4.0 / 7.0).epsilon(1e-15));  // a
    CHECK(marginal(0, 1) == doctest::Approx(2.0 / 7.0).epsilon(1e-15));  // b
    CHECK(marginal(0, 2) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));  // unknown
}

TEST_CASE("deterministic copy concentrates the conditional") {
    const Table train = copy_table(25);  // 100 rows, n_v = 25 per token
    const SurrogateScorer scorer = SurrogateScorer::fit(train, identity_orderings(2));

    // |V2| = 4 tokens + unknown = 5.
    const double consistent = -std::log((25.0 + 1.0) / (25.0 + 5.0));
    const double inconsistent = -std::log(1.0 / (25.0 + 5.0));

    const Sample good = {Cell::category("a"), Cell::category("a")};
    const Sample bad = {Cell::category("a"), Cell::category("b")};
    CHECK(scorer.column_nll(good, Ordering::identity(2))(1) ==
          doctest::Approx(consistent).epsilon(1e-15));
    CHECK(scorer.column_nll(bad, Ordering::identity(2))(1) ==
          doctest::Approx(inconsistent).epsilon(1e-15));
    CHECK(inconsistent > consistent);
}

TEST_CASE("training monotonicity: violators outscore every consistent sample") {
    for (int per_token : {13, 25}) {  // 52 and 100 training rows
        const Table train = copy_table(per_token);
        const OrderingSet orderings = identity_orderings(2);
        const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings);
        const Eigen::VectorXd alpha = Eigen::VectorXd::Ones(2);

        double worst_consistent = 0.0;
        for (const std::string token : {"a", "b", "c", "d"}) {
            const Sample s = {Cell::category(token), Cell::category(token)};
            worst_consistent = std::max(worst_consistent, score(scorer, s, orderings, alpha));
        }
        double best_violation = std::numeric_limits<double>::infinity();
        for (const std::string first : {"a", "b", "c", "d"}) {
            for (const std::string second : {"a", "b", "c", "d"}) {
                if (first == second) continue;
                const Sample s = {Cell::category(first), Cell::category(second)};
                best_violation = std::min(best_violation, score(scorer, s, orderings, alpha));
            }
        }
        CHECK(best_violation > worst_consistent);
    }
}

TEST_CASE("constant numerical columns collapse to a single occupied bin") {
    Table train;
    train.columns = {{"v", ColumnKind::numerical, 0}};
    for (int i = 0; i < 50; ++i) train.rows.push_back({Cell::number(3.25)});
    const ColumnDiscretizer disc = ColumnDiscretizer::fit(train, 0, 10);
    CHECK(disc.edges().size() == 1);
    for (const Sample& row : train.rows) {
        CHECK(disc.code_of(row[0]) == 0);
    }
    // Out-of-range values clamp to the extreme bins.
    CHECK(disc.code_of(Cell::number(-100.0)) == 0);
    CHECK(disc.code_of(Cell::number(100.0)) == 1);
}

TEST_CASE("quantile bins are right-closed and clamp out-of-range values") {
    Table train;
    train.columns = {{"v", ColumnKind::numerical, 0}};
    for (int i = 1; i <= 100; ++i) train.rows.push_back({Cell::number(static_cast<double>(i))});
    const ColumnDiscretizer disc = ColumnDiscretizer::fit(train, 0, 10);
    REQUIRE(disc.edges().size() == 9);
    CHECK(disc.edges().front() == 11.0);  // value at index 10
    // Edge values belong to the bin on their left (right-closed).
    CHECK(disc.code_of(Cell::number(11.0)) == 0);
    CHECK(disc.code_of(Cell::number(11.5)) == 1);
    CHECK(disc.code_of(Cell::number(0.0)) == 0);
    CHECK(disc.code_of(Cell::number(1e9)) == 9);
}

TEST_CASE("uniform binary column approaches one bit per symbol") {
    Table train;
    train.columns = {{"v", ColumnKind::numerical, 0}};
    auto gen = rng::make_rng(99);
    for (int i = 0; i < 20000; ++i) {
        train.rows.push_back({Cell::number(static_cast<double>(rng::uniform_below(gen, 2)))});
    }
    const OrderingSet orderings = identity_orderings(1);
    const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings);
    const Sample zero = {Cell::number(0.0)};
    const Sample one = {Cell::number(1.0)};
    CHECK(scorer.column_nll(zero, Ordering::identity(1))(0) ==
          doctest::Approx(std::log(2.0)).epsilon(0.05));
    CHECK(scorer.column_nll(one, Ordering::identity(1))(0) ==
          doctest::Approx(std::log(2.0)).epsilon(0.05));
}

TEST_CASE("unseen categories fall into the unknown bucket") {
    const Table train = one_categorical_column({"a", "a", "b", "b"});
    const SurrogateScorer scorer = SurrogateScorer::fit(train, identity_orderings(1));
    const ColumnDiscretizer& disc = scorer.discretizer(0);
    CHECK(disc.code_of(Cell::category("z")) == disc.unknown_code());
    const Eigen::VectorXd nll = scorer.column_nll({Cell::category("z")}, Ordering::identity(1));
    CHECK(std::isfinite(nll(0)));
    CHECK(nll(0) == doctest::Approx(-std::log(1.0 / 7.0)).epsilon(1e-15));
}

TEST_CASE("missing cells get their own code only when seen in training") {
    Table with_missing = one_categorical_column({"a", "a", "b"});
    with_missing.rows.push_back({Cell::missing()});
    const ColumnDiscretizer seen = ColumnDiscretizer::fit(with_missing, 0, 10);
    CHECK(seen.has_missing_code());
    CHECK(seen.code_of(Cell::missing()) == seen.missing_code());
    CHECK(seen.missing_code() != seen.unknown_code());

    const Table without = one_categorical_column({"a", "a", "b"});
    const ColumnDiscretizer unseen = ColumnDiscretizer::fit(without, 0, 10);
    CHECK_FALSE(unseen.has_missing_code());
    CHECK(unseen.code_of(Cell::missing()) == unseen.unknown_code());
}

TEST_CASE("text columns bucket by whitespace token count") {
    Table train;
    train.columns = {{"t", ColumnKind::text, 0}};
    train.rows.push_back({Cell::text("hello world")});
    train.rows.push_back({Cell::text("  spaced   out  tokens ")});
    const ColumnDiscretizer disc = ColumnDiscretizer::fit(train, 0, 10);
    CHECK(disc.code_of(Cell::text("hello world")) == 2);
    CHECK(disc.code_of(Cell::text("  spaced   out  tokens ")) == 3);
    CHECK(disc.code_of(Cell::text("one two three four five six seven eight nine ten eleven")) ==
          1);  // 11 % 10
    CHECK(disc.code_of(Cell::text("")) == 0);
}

TEST_CASE("compute_weights counts factors per column") {
    CHECK(compute_weights(mapping_from({{1, 1, 0}, {0, 1, 1}}, 3)) ==
          (Eigen::VectorXi(3) << 1, 2, 1).finished());
    CHECK(compute_weights(mapping_from({{1, 0}, {1, 0}}, 2)) ==
          (Eigen::VectorXi(2) << 2, 0).finished());
    CHECK(compute_weights(mapping_from({{1, 1, 1}}, 3)) ==
          (Eigen::VectorXi(3) << 1, 1, 1).finished());
}

TEST_CASE("score aggregation semantics") {
    const Table train = copy_table(10);
    const OrderingSet orderings = identity_orderings(2);
    const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings);
    const Sample sample = {Cell::category("a"), Cell::category("b")};

    // All-zero weights annihilate the score.
    CHECK(score(scorer, sample, orderings, Eigen::VectorXd::Zero(2)) == 0.0);

    // K = 1 with unit weights is the plain column NLL sum.
    const Eigen::VectorXd nll = scorer.column_nll(sample, Ordering::identity(2));
    CHECK(score(scorer, sample, orderings, Eigen::VectorXd::Ones(2)) ==
          doctest::Approx(nll.sum()).epsilon(1e-15));

    // Duplicating the same ordering leaves the mean unchanged.
    OrderingSet doubled = orderings;
    doubled.entries.push_back(orderings.entries.front());
    CHECK(score(scorer, sample, doubled, Eigen::VectorXd::Ones(2)) ==
          doctest::Approx(nll.sum()).epsilon(1e-15));
}

TEST_CASE("property: every fitted conditional row is a distribution") {
    const Table train = copy_table(7);
    OrderingSet orderings;
    orderings.entries.push_back({Ordering::identity(2), 0.0});
    orderings.entries.push_back({Ordering({1, 0}), 0.0});
    const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings, 10, 0.5);
    for (int z = 0; z < 2; ++z) {
        for (int rank = 0; rank < 2; ++rank) {
            const Eigen::MatrixXd probs = scorer.conditional(z, rank);
            for (Eigen::Index u = 0; u < probs.rows(); ++u) {
                CHECK(probs.row(u).sum() == doctest::Approx(1.0).epsilon(1e-9));
                for (Eigen::Index c = 0; c < probs.cols(); ++c) CHECK(probs(u, c) > 0.0);
            }
        }
    }
}

TEST_CASE("property: weight scaling scales scores linearly") {
    const Table train = copy_table(9);
    const OrderingSet orderings = identity_orderings(2);
    const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings);
    const Eigen::VectorXd alpha = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
    const Sample sample = {Cell::category("b"), Cell::category("c")};
    const double base = score(scorer, sample, orderings, alpha);
    for (double c : {0.5, 2.0, 10.0}) {
        CHECK(score(scorer, sample, orderings, c * alpha) ==
              doctest::Approx(c * base).epsilon(1e-12));
    }
}

TEST_CASE("scores are sensitive to the column ordering beyond pairwise joints") {
    // Three columns with a noisy chain c1 -> c2 -> c3: a Markov-1 model over
    // (c1, c2, c3) factors the true joint, while (c1, c3, c2) must route
    // c3's prediction through c1 and c2's through c3, so the two orderings
    // disagree on at least some samples.
    Table train;
    train.columns = {{"c1", ColumnKind::categorical, 0},
                     {"c2", ColumnKind::categorical, 1},
                     {"c3", ColumnKind::categorical, 2}};
    auto gen = rng::make_rng(21);
    const std::vector<std::string> tokens = {"a", "b", "c"};
    for (int i = 0; i < 300; ++i) {
        const std::uint64_t v1 = rng::uniform_below(gen, 3);
        const std::uint64_t v2 = rng::uniform01(gen) < 0.2 ? rng::uniform_below(gen, 3) : v1;
        const std::uint64_t v3 = rng::uniform01(gen) < 0.2 ? rng::uniform_below(gen, 3) : v2;
        train.rows.push_back(
            {Cell::category(tokens[v1]), Cell::category(tokens[v2]), Cell::category(tokens[v3])});
    }
    OrderingSet chain_order;
    chain_order.entries.push_back({Ordering::identity(3), 0.0});
    OrderingSet skip_order;
    skip_order.entries.push_back({Ordering({0, 2, 1}), 0.0});

    OrderingSet both;
    both.entries = {chain_order.entries.front(), skip_order.entries.front()};
    const SurrogateScorer scorer = SurrogateScorer::fit(train, both);
    const Eigen::VectorXd alpha = Eigen::VectorXd::Ones(3);
    bool any_difference = false;
    for (const Sample& row : train.rows) {
        if (score(scorer, row, chain_order, alpha) != score(scorer, row, skip_order, alpha)) {
            any_difference = true;
            break;
        }
    }
    CHECK(any_difference);
}

TEST_CASE("score_table reports decomposable scores and zero-weight columns") {
    const Table train = copy_table(6);
    const OrderingSet orderings = identity_orderings(2);
    const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings);
    const Eigen::VectorXd alpha = (Eigen::VectorXd(2) << 2.0, 0.0).finished();

    const ScoreReport report = score_table(scorer, train, orderings, alpha);
    CHECK(report.zero_weight_columns == std::vector<int>{1});
    REQUIRE(report.scores.size() == train.row_count());

    // Reconstruction from stored parts.
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        const Eigen::MatrixXd& nll = report.nll[i];
        double total = 0.0;
        for (Eigen::Index z = 0; z < nll.rows(); ++z) {
            for (Eigen::Index j = 0; j < nll.cols(); ++j) total += alpha(j) * nll(z, j);
        }
        total /= static_cast<double>(nll.rows());
        CHECK(std::abs(total - report.scores[i]) < 1e-9);
    }
}

TEST_CASE("scorer snapshots reload to identical scores") {
    const auto dir = testsupport::make_temp_dir("scoring");
    Table train = copy_table(8);
    train.columns.push_back({"v", ColumnKind::numerical, 2});
    auto gen = rng::make_rng(3);
    for (auto& row : train.rows) {
        row.push_back(Cell::number(static_cast<double>(rng::uniform_below(gen, 7))));
    }
    OrderingSet orderings;
    orderings.entries.push_back({Ordering({2, 0, 1}), 0.0});
    orderings.entries.push_back({Ordering::identity(3), 0.0});

    const SurrogateScorer fitted = SurrogateScorer::fit(train, orderings, 5, 2.0);
    const auto path = dir / "scorer.json";
    fitted.save(path);
    const SurrogateScorer loaded = SurrogateScorer::load(path);

    const Eigen::VectorXd alpha = (Eigen::VectorXd(3) << 1.0, 2.0, 1.0).finished();
    for (const Sample& row : train.rows) {
        CHECK(score(fitted, row, orderings, alpha) == score(loaded, row, orderings, alpha));
    }
}

TEST_CASE("export_sequences writes one record per sample and ordering") {
    const auto dir = testsupport::make_temp_dir("scoring");
    Table table;
    table.columns = {{"age", ColumnKind::numerical, 0}, {"job", ColumnKind::categorical, 1}};
    table.rows.push_back({Cell::number(30.0), Cell::category("nurse")});
    table.rows.push_back({Cell::number(41.0), Cell::missing()});

    OrderingSet orderings;
    orderings.entries.push_back({Ordering::identity(2), 0.0});
    orderings.entries.push_back({Ordering({1, 0}), 0.0});

    const auto path = dir / "sequences.jsonl";
    export_sequences(table, orderings, path);

    std::ifstream in(path);
    std::string line;
    int records = 0;
    while (std::getline(in, line)) {
        const auto doc = nlohmann::json::parse(line);
        CHECK(doc.at("spans").size() == 2);
        const std::string text = doc.at("text").get<std::string>();
        for (const auto& span : doc.at("spans")) {
            const int column = span.at(0).get<int>();
            const auto begin = span.at(1).get<std::size_t>();
            const auto end = span.at(2).get<std::size_t>();
            const std::string value = text.substr(begin, end - begin);
            const Cell& cell = table.rows[doc.at("sample").get<std::size_t>()]
                                         [static_cast<std::size_t>(column)];
            if (cell.is_missing()) {
                CHECK(value == "Unknown");
            } else if (cell.tag() == Cell::Tag::number) {
                CHECK(value == render_number(cell.value()));
            } else {
                CHECK(value == cell.token());
            }
        }
        ++records;
    }
    CHECK(records == 4);
}

TEST_CASE("external nll import round-trips surrogate scores") {
    const auto dir = testsupport::make_temp_dir("scoring");
    const Table train = copy_table(12);
    OrderingSet orderings;
    orderings.entries.push_back({Ordering::identity(2), 0.0});
    orderings.entries.push_back({Ordering({1, 0}), 0.0});
    const SurrogateScorer scorer = SurrogateScorer::fit(train, orderings);
    const Eigen::VectorXd alpha = (Eigen::VectorXd(2) << 2.0, 1.0).finished();
    const ScoreReport report = score_table(scorer, train, orderings, alpha);

    const auto path = dir / "breakdown.csv";
    write_breakdown(report, path);
    const ExternalNll imported =
        import_external_nll(path, train.row_count(), orderings.size(), 2);
    for (std::size_t i = 0; i < train.row_count(); ++i) {
        CHECK(std::abs(aggregate_score(imported.nll[i], alpha) - report.scores[i]) < 1e-9);
    }
}

TEST_CASE("external nll import validates completeness") {
    const auto dir = testsupport::make_temp_dir("scoring");
    const auto path = testsupport::write_file(dir, "partial.csv",
                                              "sample,ordering,column,nll\n"
                                              "0,0,0,0.5\n"
                                              "0,0,1,0.25\n"
                                              "1,0,0,1.5\n");
    CHECK_THROWS_WITH_AS(import_external_nll(path, 2, 1, 2), doctest::Contains("(1, 0, 1)"),
                         CompletenessError);

    const auto dup = testsupport::write_file(dir, "dup.csv",
                                             "sample,ordering,column,nll\n"
                                             "0,0,0,0.5\n"
                                             "0,0,0,0.5\n");
    CHECK_THROWS_AS(import_external_nll(dup, 1, 1, 1), DataError);

    const auto headerless = testsupport::write_file(dir, "noheader.csv", "0,0,0,0.5\n");
    CHECK_THROWS_AS(import_external_nll(headerless, 1, 1, 1), SchemaError);
}

TEST_CASE("fit validates its inputs") {
    Table empty;
    empty.columns = {{"c", ColumnKind::categorical, 0}};
    CHECK_THROWS_AS(SurrogateScorer::fit(empty, identity_orderings(1)), DataError);

    const Table train = one_categorical_column({"a", "b"});
    CHECK_THROWS_AS(SurrogateScorer::fit(train, OrderingSet{}), UsageError);

    const SurrogateScorer scorer = SurrogateScorer::fit(train, identity_orderings(1));
    Table two = copy_table(2);
    CHECK_THROWS_AS(scorer.column_nll(two.rows[0], Ordering::identity(2)), UsageError);
}

}  // TEST_SUITE
