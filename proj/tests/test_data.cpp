#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sa/data.hpp"
#include "sa/rng.hpp"

using namespace sa;

namespace {

void write_file(const char* path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// independent percentile oracle: linear interpolation at rank p*(n-1)
double percentile_oracle(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const double rank = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ReviewRecord rec(std::string text, double score) {
    ReviewRecord r;
    r.text = std::move(text);
    r.avg_score = score;
    return r;
}

}  // namespace

TEST_CASE("csv ingestion with quoting") {
    const char* path = "ingest_test.csv";
    write_file(path,
               "review,score\n"
               "\"ngon, rất ngon\",9.0\n"
               "dở quá,2.5\n"
               "\"có \"\"ngoặc\"\" kép\",7.0\n"
               ",5.0\n");
    SchemaMapping schema;
    schema.text_col = "review";
    schema.score_col = "score";
    auto result = ingest(path, InputFormat::Delimited, schema);
    REQUIRE(result.records.size() == 3);
    CHECK(result.dropped_empty == 1);
    CHECK(result.records[0].text == "ngon, rất ngon");
    CHECK(result.records[0].avg_score == 9.0);
    CHECK(result.records[2].text == "có \"ngoặc\" kép");

    SchemaMapping bad = schema;
    bad.text_col = "missing";
    CHECK_THROWS_AS(ingest(path, InputFormat::Delimited, bad), std::runtime_error);
    std::remove(path);

    const char* broken = "ingest_bad.csv";
    write_file(broken, "review,score\nok,9.0\nbad,notanumber\n");
    CHECK_THROWS_WITH_AS(ingest(broken, InputFormat::Delimited, schema),
                         doctest::Contains("row 3"), std::runtime_error);
    std::remove(broken);
}

TEST_CASE("jsonl ingestion and labeled round trip") {
    const char* path = "ingest_test.jsonl";
    write_file(path,
               "{\"review\": \"món ngon\", \"score\": 9.5}\n"
               "{\"review\": \"tệ\", \"score\": 1.0}\n");
    SchemaMapping schema;
    schema.text_col = "review";
    schema.score_col = "score";
    auto result = ingest(path, InputFormat::JsonLines, schema);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].avg_score == 9.5);
    std::remove(path);

    std::vector<ReviewRecord> labeled;
    ReviewRecord a;
    a.text = "xin chào \"bạn\"";
    a.positive = true;
    ReviewRecord b;
    b.text = "tệ quá";
    b.positive = false;
    labeled = {a, b};
    const char* lpath = "labeled_rt.jsonl";
    save_labeled_jsonl(lpath, labeled);
    auto loaded = load_labeled_jsonl(lpath);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].text == a.text);
    CHECK(loaded[0].positive == true);
    CHECK(loaded[1].positive == false);
    std::remove(lpath);
}

TEST_CASE("label rules are strict on both thresholds") {
    const LabelRule ntc;  // 8.5 / 5.0 defaults
    CHECK(ntc.pos_threshold == 8.5);
    CHECK(ntc.neg_threshold == 5.0);
    const LabelRule vreview(7.5, 5.0);

    std::vector<ReviewRecord> records = {
        rec("a", 8.6), rec("b", 8.5), rec("c", 7.6), rec("d", 5.0),
        rec("e", 4.9), rec("f", 0.0), rec("g", 10.0), rec("h", 6.2),
    };
    auto out = apply_label_rule(records, ntc);
    REQUIRE(out.labeled.size() == 4);
    CHECK(out.dropped == 4);
    CHECK(out.labeled[0].positive == true);   // 8.6
    CHECK(out.labeled[1].positive == false);  // 4.9
    CHECK(out.labeled[2].positive == false);  // 0.0
    CHECK(out.labeled[3].positive == true);   // 10.0

    auto vout = apply_label_rule(records, vreview);
    CHECK(vout.labeled.size() == 6);  // 7.6 and 8.5 become positive

    CHECK_THROWS_AS(LabelRule(5.0, 8.5), std::invalid_argument);

    ReviewRecord unscored;
    unscored.text = "x";
    CHECK_THROWS_AS(apply_label_rule({unscored}, ntc), std::invalid_argument);

    // property sweep: every kept record obeys its rule, order preserved
    Rng rng(31);
    std::vector<ReviewRecord> sweep;
    for (int i = 0; i < 500; ++i) sweep.push_back(rec("t" + std::to_string(i), rng.next_double() * 10));
    for (const LabelRule& rule : {ntc, vreview}) {
        auto result = apply_label_rule(sweep, rule);
        CHECK(result.labeled.size() + static_cast<std::size_t>(result.dropped) == sweep.size());
        for (const auto& r : result.labeled) {
            if (*r.positive) CHECK(*r.avg_score > rule.pos_threshold);
            else CHECK(*r.avg_score < rule.neg_threshold);
        }
    }
}

TEST_CASE("splits have the requested size and keep stratification") {
    std::vector<ReviewRecord> records;
    for (int i = 0; i < 100; ++i) {
        ReviewRecord r;
        r.text = "t" + std::to_string(i);
        r.positive = i < 80;  // 80/20 imbalance
        records.push_back(r);
    }

    auto [train, test] = split_records(records, 0.2, 7, true);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    auto count_pos = [](const std::vector<ReviewRecord>& v) {
        return std::count_if(v.begin(), v.end(), [](const ReviewRecord& r) { return *r.positive; });
    };
    CHECK(count_pos(test) == 16);
    CHECK(count_pos(train) == 64);

    // deterministic, and no record lost or duplicated
    auto [train2, test2] = split_records(records, 0.2, 7, true);
    CHECK(train2.size() == train.size());
    for (std::size_t i = 0; i < train.size(); ++i) CHECK(train[i].text == train2[i].text);
    std::vector<std::string> all;
    for (const auto& r : train) all.push_back(r.text);
    for (const auto& r : test) all.push_back(r.text);
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == records.size());

    auto [train3, test3] = split_records(records, 0.2, 8, true);
    bool same = train3.size() == train.size();
    if (same)
        for (std::size_t i = 0; i < train.size(); ++i) same = same && train[i].text == train3[i].text;
    CHECK_FALSE(same);

    CHECK_THROWS_AS(split_records(records, 1.5, 7, false), std::invalid_argument);
}

TEST_CASE("corpus statistics match a brute-force oracle") {
    std::vector<ReviewRecord> records = {rec("một hai ba", 0), rec("một", 0),
                                         rec("a b c d e", 0), rec("x y", 0)};
    auto stats = compute_stats(records);
    CHECK(stats.count == 4);
    // lengths 3,1,5,2 -> mean 2.75
    CHECK(stats.mean == doctest::Approx(2.75));
    CHECK(stats.min == 1);
    CHECK(stats.max == 5);
    // population std of {3,1,5,2}
    const double mean = 2.75;
    double var = 0;
    for (double v : {3.0, 1.0, 5.0, 2.0}) var += (v - mean) * (v - mean);
    var /= 4;
    CHECK(stats.stddev == doctest::Approx(std::sqrt(var)));
    CHECK(stats.p50 == doctest::Approx(2.5));
    CHECK(stats.p25 == doctest::Approx(percentile_oracle({3, 1, 5, 2}, 0.25)));
    CHECK(stats.p75 == doctest::Approx(percentile_oracle({3, 1, 5, 2}, 0.75)));

    CHECK_THROWS_AS(compute_stats({}), std::invalid_argument);

    // randomized sweep against the oracle
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(40));
        std::vector<ReviewRecord> corpus;
        std::vector<double> lengths;
        for (int i = 0; i < n; ++i) {
            const int words = 1 + static_cast<int>(rng.next_below(30));
            std::string text;
            for (int w = 0; w < words; ++w) text += "w ";
            corpus.push_back(rec(text, 0));
            lengths.push_back(words);
        }
        auto s = compute_stats(corpus);
        CHECK(s.count == n);
        CHECK(s.p25 == doctest::Approx(percentile_oracle(lengths, 0.25)).epsilon(1e-12));
        CHECK(s.p50 == doctest::Approx(percentile_oracle(lengths, 0.50)).epsilon(1e-12));
        CHECK(s.p75 == doctest::Approx(percentile_oracle(lengths, 0.75)).epsilon(1e-12));
        CHECK(s.min == *std::min_element(lengths.begin(), lengths.end()));
        CHECK(s.max == *std::max_element(lengths.begin(), lengths.end()));
    }
}

TEST_CASE("stats output carries the full field set") {
    std::vector<ReviewRecord> records = {rec("a b", 0), rec("c", 0)};
    auto stats = compute_stats(records);
    auto table = stats_text_table(stats, "demo");
    for (const char* field : {"Mean", "Std", "Min", "25%", "50%", "75%", "Max", "demo", "2 records"})
        CHECK(table.find(field) != std::string::npos);
    auto json = stats_json(stats, "demo");
    for (const char* key : {"\"dataset\"", "\"count\"", "\"mean\"", "\"std\"", "\"min\"",
                            "\"p25\"", "\"p50\"", "\"p75\"", "\"max\""})
        CHECK(json.find(key) != std::string::npos);
}
