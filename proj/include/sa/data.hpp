#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sa {

struct ReviewRecord {
    std::string text;
    std::optional<double> avg_score;   // in [0,10] when present
    std::optional<bool> positive;      // label when present
};

enum class InputFormat { Delimited, JsonLines };

InputFormat input_format_from_name(const std::string& name);  // csv | jsonl

struct SchemaMapping {
    std::string text_col;    // required
    std::string score_col;   // one of score_col / label_col required
    std::string label_col;
    char delimiter = ',';
};

struct IngestResult {
    std::vector<ReviewRecord> records;  // in file order, empty-text rows dropped
    int dropped_empty = 0;
};

IngestResult ingest(const std::string& path, InputFormat format, const SchemaMapping& schema);

struct LabelRule {
    double pos_threshold = 8.5;  // score strictly above -> positive
    double neg_threshold = 5.0;  // score strictly below -> negative

    LabelRule() = default;
    LabelRule(double pos, double neg);
};

struct LabelResult {
    std::vector<ReviewRecord> labeled;
    int dropped = 0;  // boundary and in-between scores
};

// Strict comparisons on both sides; boundary scores are dropped.
LabelResult apply_label_rule(const std::vector<ReviewRecord>& records, const LabelRule& rule);

std::pair<std::vector<ReviewRecord>, std::vector<ReviewRecord>> split_records(
    const std::vector<ReviewRecord>& records, double test_fraction, std::uint64_t seed,
    bool stratified);

struct CorpusStats {
    std::int64_t count = 0;
    double mean = 0, stddev = 0, min = 0, p25 = 0, p50 = 0, p75 = 0, max = 0;
};

// Whitespace token counts; percentiles by linear interpolation on the sorted
// list; population standard deviation.
CorpusStats compute_stats(const std::vector<ReviewRecord>& records);

std::string stats_text_table(const CorpusStats& stats, const std::string& dataset_name);
std::string stats_json(const CorpusStats& stats, const std::string& dataset_name);

// Labeled dataset persistence: json-lines {"text": ..., "label": "positive"|"negative"}.
void save_labeled_jsonl(const std::string& path, const std::vector<ReviewRecord>& records);
std::vector<ReviewRecord> load_labeled_jsonl(const std::string& path);

}  // namespace sa
