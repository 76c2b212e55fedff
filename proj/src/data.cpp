#include "sa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sa/rng.hpp"
#include "sa/tokenizer.hpp"

namespace sa {

using nlohmann::json;

InputFormat input_format_from_name(const std::string& name) {
    if (name == "csv" || name == "delimited") return InputFormat::Delimited;
    if (name == "jsonl" || name == "json-lines") return InputFormat::JsonLines;
    throw std::invalid_argument("unknown input format: " + name + " (expected csv|jsonl)");
}

LabelRule::LabelRule(double pos, double neg) : pos_threshold(pos), neg_threshold(neg) {
    if (neg > pos)
        throw std::invalid_argument("label rule: neg_threshold " + std::to_string(neg) +
                                    " exceeds pos_threshold " + std::to_string(pos));
}

namespace {

// RFC-4180-style rows: quoted fields may hold delimiters, newlines and doubled
// quotes. line_no tracks physical lines for error messages.
std::vector<std::vector<std::string>> parse_delimited(std::istream& in, char delim) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool any = false;
    int line_no = 1;
    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty())
                throw std::runtime_error("malformed quoting at line " + std::to_string(line_no) +
                                         ": quote inside unquoted field");
            in_quotes = true;
            field_was_quoted = true;
            any = true;
        } else if (c == delim) {
            row.push_back(field);
            field.clear();
            field_was_quoted = false;
            any = true;
        } else if (c == '\r') {
            // swallowed; \r\n handled by the \n branch
        } else if (c == '\n') {
            ++line_no;
            if (any || !field.empty() || !row.empty()) {
                row.push_back(field);
                rows.push_back(row);
            }
            row.clear();
            field.clear();
            field_was_quoted = false;
            any = false;
        } else {
            if (field_was_quoted)
                throw std::runtime_error("malformed quoting at line " + std::to_string(line_no) +
                                         ": data after closing quote");
            field += c;
            any = true;
        }
    }
    if (in_quotes)
        throw std::runtime_error("malformed quoting: unterminated quote at end of file");
    if (any || !field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

double parse_score(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("cannot parse score '" + s + "' at " + where);
    }
}

bool parse_label(const std::string& s, const std::string& where) {
    if (s == "positive" || s == "1") return true;
    if (s == "negative" || s == "0") return false;
    throw std::runtime_error("cannot parse label '" + s + "' at " + where +
                             " (expected positive|negative)");
}

}  // namespace

IngestResult ingest(const std::string& path, InputFormat format, const SchemaMapping& schema) {
    if (schema.text_col.empty())
        throw std::invalid_argument("schema: text column is required");
    if (schema.score_col.empty() && schema.label_col.empty())
        throw std::invalid_argument("schema: either score or label column is required");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);

    IngestResult result;
    if (format == InputFormat::Delimited) {
        auto rows = parse_delimited(in, schema.delimiter);
        if (rows.empty()) return result;
        const auto& header = rows[0];
        auto col_index = [&header](const std::string& name) -> int {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return static_cast<int>(i);
            return -1;
        };
        const int text_idx = col_index(schema.text_col);
        if (text_idx < 0)
            throw std::runtime_error("schema error: column '" + schema.text_col +
                                     "' not found in header");
        int score_idx = -1, label_idx = -1;
        if (!schema.score_col.empty()) {
            score_idx = col_index(schema.score_col);
            if (score_idx < 0)
                throw std::runtime_error("schema error: column '" + schema.score_col +
                                         "' not found in header");
        }
        if (!schema.label_col.empty()) {
            label_idx = col_index(schema.label_col);
            if (label_idx < 0)
                throw std::runtime_error("schema error: column '" + schema.label_col +
                                         "' not found in header");
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            const std::string where = "row " + std::to_string(r + 1);
            auto cell = [&](int idx) -> std::string {
                return idx >= 0 && idx < static_cast<int>(row.size())
                           ? row[static_cast<std::size_t>(idx)]
                           : std::string();
            };
            ReviewRecord rec;
            rec.text = cell(text_idx);
            if (score_idx >= 0 && !cell(score_idx).empty())
                rec.avg_score = parse_score(cell(score_idx), where);
            if (label_idx >= 0 && !cell(label_idx).empty())
                rec.positive = parse_label(cell(label_idx), where);
            if (normalize_text(rec.text).empty()) {
                ++result.dropped_empty;
                continue;
            }
            result.records.push_back(std::move(rec));
        }
    } else {
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw std::runtime_error("json parse error at line " + std::to_string(line_no) +
                                         ": " + e.what());
            }
            if (!obj.contains(schema.text_col))
                throw std::runtime_error("schema error: key '" + schema.text_col +
                                         "' missing at line " + std::to_string(line_no));
            ReviewRecord rec;
            rec.text = obj[schema.text_col].get<std::string>();
            if (!schema.score_col.empty() && obj.contains(schema.score_col))
                rec.avg_score = obj[schema.score_col].get<double>();
            if (!schema.label_col.empty() && obj.contains(schema.label_col)) {
                const auto& v = obj[schema.label_col];
                rec.positive = v.is_string()
                                   ? parse_label(v.get<std::string>(),
                                                 "line " + std::to_string(line_no))
                                   : v.get<int>() != 0;
            }
            if (!rec.avg_score && !rec.positive)
                throw std::runtime_error("schema error: neither score nor label present at line " +
                                         std::to_string(line_no));
            if (normalize_text(rec.text).empty()) {
                ++result.dropped_empty;
                continue;
            }
            result.records.push_back(std::move(rec));
        }
    }
    return result;
}

LabelResult apply_label_rule(const std::vector<ReviewRecord>& records, const LabelRule& rule) {
    if (rule.neg_threshold > rule.pos_threshold)
        throw std::invalid_argument("label rule: neg_threshold exceeds pos_threshold");
    LabelResult result;
    for (const auto& rec : records) {
        if (!rec.avg_score)
            throw std::invalid_argument("apply_label_rule: record without avg_score");
        const double s = *rec.avg_score;
        if (s > rule.pos_threshold) {
            ReviewRecord out = rec;
            out.positive = true;
            result.labeled.push_back(std::move(out));
        } else if (s < rule.neg_threshold) {
            ReviewRecord out = rec;
            out.positive = false;
            result.labeled.push_back(std::move(out));
        } else {
            ++result.dropped;
        }
    }
    return result;
}

std::pair<std::vector<ReviewRecord>, std::vector<ReviewRecord>> split_records(
    const std::vector<ReviewRecord>& records, double test_fraction, std::uint64_t seed,
    bool stratified) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("split: test_fraction must be in (0,1)");
    Rng rng(seed);
    std::vector<ReviewRecord> train, test;
    if (!stratified) {
        std::vector<std::size_t> order(records.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle(order, rng);
        const std::size_t test_count =
            static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(records.size())));
        for (std::size_t i = 0; i < order.size(); ++i)
            (i < test_count ? test : train).push_back(records[order[i]]);
    } else {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!records[i].positive)
                throw std::invalid_argument("stratified split: record without label");
            (*records[i].positive ? pos : neg).push_back(i);
        }
        if (pos.size() < 2 || neg.size() < 2)
            throw std::invalid_argument("stratified split: each class needs at least 2 records");
        for (auto* cls : {&pos, &neg}) {
            shuffle(*cls, rng);
            const std::size_t test_count = static_cast<std::size_t>(
                std::llround(test_fraction * static_cast<double>(cls->size())));
            for (std::size_t i = 0; i < cls->size(); ++i)
                (i < test_count ? test : train).push_back(records[(*cls)[i]]);
        }
        // file-order within splits keeps output independent of class interleave
        // (records were appended class by class above; reshuffle for mixing)
        shuffle(train, rng);
        shuffle(test, rng);
    }
    return {std::move(train), std::move(test)};
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
    const double idx = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

CorpusStats compute_stats(const std::vector<ReviewRecord>& records) {
    if (records.empty()) throw std::invalid_argument("compute_stats: zero records");
    std::vector<double> counts;
    counts.reserve(records.size());
    for (const auto& rec : records)
        counts.push_back(static_cast<double>(whitespace_split(rec.text).size()));
    std::sort(counts.begin(), counts.end());

    CorpusStats stats;
    stats.count = static_cast<std::int64_t>(counts.size());
    double sum = 0;
    for (double c : counts) sum += c;
    stats.mean = sum / static_cast<double>(counts.size());
    double var = 0;
    for (double c : counts) var += (c - stats.mean) * (c - stats.mean);
    stats.stddev = std::sqrt(var / static_cast<double>(counts.size()));
    stats.min = counts.front();
    stats.max = counts.back();
    stats.p25 = percentile(counts, 0.25);
    stats.p50 = percentile(counts, 0.50);
    stats.p75 = percentile(counts, 0.75);
    return stats;
}

std::string stats_text_table(const CorpusStats& stats, const std::string& dataset_name) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    auto row = [&out](const std::string& k, double v) {
        out << "  " << k;
        for (std::size_t i = k.size(); i < 8; ++i) out << ' ';
        out << v << '\n';
    };
    out << "Word statistics: " << dataset_name << " (" << stats.count << " records)\n";
    row("Mean", stats.mean);
    row("Std", stats.stddev);
    row("Min", stats.min);
    row("25%", stats.p25);
    row("50%", stats.p50);
    row("75%", stats.p75);
    row("Max", stats.max);
    return out.str();
}

std::string stats_json(const CorpusStats& stats, const std::string& dataset_name) {
    json obj{{"dataset", dataset_name}, {"count", stats.count}, {"mean", stats.mean},
             {"std", stats.stddev},     {"min", stats.min},     {"p25", stats.p25},
             {"p50", stats.p50},        {"p75", stats.p75},     {"max", stats.max}};
    return obj.dump();
}

void save_labeled_jsonl(const std::string& path, const std::vector<ReviewRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    for (const auto& rec : records) {
        if (!rec.positive)
            throw std::invalid_argument("save_labeled_jsonl: unlabeled record");
        json obj{{"text", rec.text}, {"label", *rec.positive ? "positive" : "negative"}};
        out << obj.dump() << '\n';
    }
}

std::vector<ReviewRecord> load_labeled_jsonl(const std::string& path) {
    SchemaMapping schema;
    schema.text_col = "text";
    schema.label_col = "label";
    return ingest(path, InputFormat::JsonLines, schema).records;
}

}  // namespace sa
