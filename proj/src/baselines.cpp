#include "sa/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sa/rng.hpp"
#include "sa/tokenizer.hpp"

namespace sa {

namespace {

std::vector<std::string> record_ngrams(const std::string& text, int n_min, int n_max) {
    const auto tokens = whitespace_split(normalize_text(text));
    std::vector<std::string> grams;
    for (int n = n_min; n <= n_max; ++n) {
        if (n > static_cast<int>(tokens.size())) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string g = tokens[i];
            for (int k = 1; k < n; ++k) g += ' ' + tokens[i + static_cast<std::size_t>(k)];
            grams.push_back(std::move(g));
        }
    }
    return grams;
}

int ngram_order(const std::string& gram) {
    return 1 + static_cast<int>(std::count(gram.begin(), gram.end(), ' '));
}

}  // namespace

void NGramFeaturizer::fit(const std::vector<ReviewRecord>& records) {
    if (n_min < 1 || n_max > 5 || n_min > n_max)
        throw std::invalid_argument("featurizer: n range must lie within [1,5]");
    std::map<std::string, int> doc_freq;  // ordered map keeps columns deterministic
    for (const auto& rec : records) {
        std::set<std::string> seen;
        for (auto& g : record_ngrams(rec.text, n_min, n_max)) seen.insert(std::move(g));
        for (const auto& g : seen) ++doc_freq[g];
    }
    index_.clear();
    feature_names_.clear();
    for (const auto& [gram, df] : doc_freq) {
        if (ngram_order(gram) >= 2 && df < df_floor) continue;
        index_.emplace(gram, static_cast<int>(feature_names_.size()));
        feature_names_.push_back(gram);
    }
}

SparseVector NGramFeaturizer::featurize(const std::string& text) const {
    if (!fitted()) throw std::invalid_argument("featurizer not fitted");
    std::map<int, double> counts;
    for (const auto& g : record_ngrams(text, n_min, n_max)) {
        auto it = index_.find(g);
        if (it == index_.end()) continue;  // unseen n-grams ignored
        counts[it->second] += 1.0;
    }
    SparseVector out;
    out.reserve(counts.size());
    for (const auto& [col, cnt] : counts) out.emplace_back(col, binary ? 1.0 : cnt);
    return out;
}

int NGramFeaturizer::column_of(const std::string& ngram) const {
    auto it = index_.find(ngram);
    return it == index_.end() ? -1 : it->second;
}

void NGramFeaturizer::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open featurizer file for writing: " + path);
    for (std::size_t i = 0; i < feature_names_.size(); ++i)
        out << feature_names_[i] << '\t' << i << '\n';
}

NGramFeaturizer NGramFeaturizer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open featurizer file: " + path);
    NGramFeaturizer f;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("featurizer file: missing tab at line " +
                                     std::to_string(line_no));
        const std::string gram = line.substr(0, tab);
        const int idx = std::stoi(line.substr(tab + 1));
        if (idx != static_cast<int>(f.feature_names_.size()))
            throw std::runtime_error("featurizer file: non-dense index at line " +
                                     std::to_string(line_no));
        f.index_.emplace(gram, idx);
        f.feature_names_.push_back(gram);
    }
    return f;
}

double LinearSvm::margin(const SparseVector& x) const {
    double m = bias;
    for (const auto& [col, val] : x) {
        if (col < 0 || col >= static_cast<int>(weights.size()))
            throw std::invalid_argument("svm: feature column out of range");
        m += weights[static_cast<std::size_t>(col)] * val;
    }
    return m;
}

double hinge_loss(const LinearSvm& model, const SparseVector& x, int y) {
    if (y != 1 && y != -1) throw std::invalid_argument("hinge_loss: y must be +1 or -1");
    return std::max(0.0, 1.0 - y * model.margin(x));
}

LinearSvm train_linear_svm(const std::vector<ReviewRecord>& data,
                           const NGramFeaturizer& featurizer, double regularization, int epochs,
                           std::uint64_t seed) {
    if (!featurizer.fitted()) throw std::invalid_argument("train_linear_svm: featurizer not fitted");
    bool has_pos = false, has_neg = false;
    std::vector<SparseVector> xs;
    std::vector<int> ys;
    for (const auto& rec : data) {
        if (!rec.positive) throw std::invalid_argument("train_linear_svm: unlabeled record");
        xs.push_back(featurizer.featurize(rec.text));
        ys.push_back(*rec.positive ? 1 : -1);
        (*rec.positive ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw std::invalid_argument("train_linear_svm: need at least one example of each class");

    LinearSvm model;
    model.regularization = regularization;
    model.weights.assign(static_cast<std::size_t>(featurizer.dim()), 0.0);

    Rng rng(seed);
    std::vector<std::size_t> order(xs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::int64_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (regularization * static_cast<double>(t));
            const double m = ys[i] * model.margin(xs[i]);
            const double shrink = 1.0 - eta * regularization;
            for (double& w : model.weights) w *= shrink;
            if (m < 1.0) {
                for (const auto& [col, val] : xs[i])
                    model.weights[static_cast<std::size_t>(col)] += eta * ys[i] * val;
                model.bias += eta * ys[i];
            }
        }
    }
    return model;
}

std::vector<double> EmbeddingTable::lookup(const std::string& word) const {
    auto it = vectors_.find(word);
    if (it == vectors_.end()) return std::vector<double>(static_cast<std::size_t>(dim_), 0.0);
    return it->second;
}

void EmbeddingTable::insert(const std::string& word, std::vector<double> vec) {
    if (static_cast<int>(vec.size()) != dim_)
        throw std::invalid_argument("embedding insert: dimension mismatch");
    vectors_[word] = std::move(vec);
}

EmbeddingTable load_embedding_file(const std::string& path, int expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    EmbeddingTable table(expected_dim);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream parts(line);
        std::string word;
        parts >> word;
        std::vector<double> vec;
        double v;
        while (parts >> v) vec.push_back(v);
        if (static_cast<int>(vec.size()) != expected_dim)
            throw std::runtime_error("embedding file " + path + ": line " +
                                     std::to_string(line_no) + " has " +
                                     std::to_string(vec.size()) + " values, expected " +
                                     std::to_string(expected_dim));
        if (table.contains(word))
            std::fprintf(stderr, "warning: duplicate embedding for '%s' at line %d, last wins\n",
                         word.c_str(), line_no);
        table.insert(word, std::move(vec));
    }
    return table;
}

void save_embedding_file(const std::string& path, const EmbeddingTable& table,
                         const std::vector<std::string>& word_order) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open embedding file for writing: " + path);
    out.setf(std::ios::fmtflags(0), std::ios::floatfield);
    out.precision(8);
    for (const auto& word : word_order) {
        out << word;
        for (double v : table.lookup(word)) out << ' ' << v;
        out << '\n';
    }
}

EmbeddingTable random_embedding_table(const std::vector<std::string>& words, int dim,
                                      std::uint64_t seed) {
    Rng rng(seed);
    EmbeddingTable table(dim);
    for (const auto& word : words) {
        std::vector<double> vec(static_cast<std::size_t>(dim));
        for (double& v : vec) v = rng.next_normal() * 0.5;
        table.insert(word, std::move(vec));
    }
    return table;
}

StaticSequence static_embed_sequence(const std::string& text, const EmbeddingTable& table,
                                     int seq_len) {
    if (seq_len < 1) throw std::invalid_argument("static_embed_sequence: seq_len must be >= 1");
    const auto words = whitespace_split(normalize_text(text));
    StaticSequence seq;
    seq.real_length = std::min<int>(static_cast<int>(words.size()), seq_len);
    std::vector<double> values(static_cast<std::size_t>(seq_len) * table.dim(), 0.0);
    for (int i = 0; i < seq.real_length; ++i) {
        const auto vec = table.lookup(words[static_cast<std::size_t>(i)]);
        std::copy(vec.begin(), vec.end(),
                  values.begin() + static_cast<std::size_t>(i) * table.dim());
    }
    seq.features = make_tensor({seq_len, table.dim()}, std::move(values));
    seq.mask.assign(static_cast<std::size_t>(seq_len), 0);
    for (int i = 0; i < std::max(seq.real_length, 1); ++i)
        seq.mask[static_cast<std::size_t>(i)] = 1;
    if (seq.real_length == 0) seq.real_length = 1;  // empty text: one zero row
    return seq;
}

}  // namespace sa
