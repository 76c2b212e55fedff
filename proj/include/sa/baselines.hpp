#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sa/data.hpp"
#include "sa/tensor.hpp"

namespace sa {

using SparseVector = std::vector<std::pair<int, double>>;  // (column, value), columns ascending

// Token n-gram features for n in [n_min, n_max] over whitespace-split
// normalized text. n-grams of order >= 2 must clear a document-frequency
// floor to get a column.
class NGramFeaturizer {
public:
    int n_min = 1;
    int n_max = 5;
    int df_floor = 2;      // applies to n >= 2
    bool binary = false;   // presence instead of counts

    void fit(const std::vector<ReviewRecord>& records);
    SparseVector featurize(const std::string& text) const;
    int dim() const { return static_cast<int>(feature_names_.size()); }
    bool fitted() const { return !feature_names_.empty(); }
    int column_of(const std::string& ngram) const;  // -1 when absent

    // "ngram<TAB>index" lines, tokens inside an n-gram joined by spaces.
    void save(const std::string& path) const;
    static NGramFeaturizer load(const std::string& path);

private:
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> feature_names_;
};

struct LinearSvm {
    std::vector<double> weights;
    double bias = 0.0;
    double regularization = 1e-4;

    double margin(const SparseVector& x) const;          // <w,x> + b
    bool predict(const SparseVector& x) const { return margin(x) >= 0.0; }
};

// y in {-1,+1} from the record label.
double hinge_loss(const LinearSvm& model, const SparseVector& x, int y);

// L2-regularized hinge loss by stochastic subgradient descent (Pegasos-style
// step size). Deterministic given the seed.
LinearSvm train_linear_svm(const std::vector<ReviewRecord>& data,
                           const NGramFeaturizer& featurizer, double regularization, int epochs,
                           std::uint64_t seed);

class EmbeddingTable {
public:
    explicit EmbeddingTable(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(vectors_.size()); }
    bool contains(const std::string& word) const { return vectors_.count(word) > 0; }
    // OOV lookups return the zero vector.
    std::vector<double> lookup(const std::string& word) const;
    void insert(const std::string& word, std::vector<double> vec);  // last wins

private:
    int dim_;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

// "word v1 ... vd" text format, one word per line.
EmbeddingTable load_embedding_file(const std::string& path, int expected_dim);
void save_embedding_file(const std::string& path, const EmbeddingTable& table,
                         const std::vector<std::string>& word_order);

// Fixed random vectors for a word list, for runs without pretrained vectors.
EmbeddingTable random_embedding_table(const std::vector<std::string>& words, int dim,
                                      std::uint64_t seed);

struct StaticSequence {
    Tensor features;                      // seq_len x d, not grad-tracked
    std::vector<std::uint8_t> mask;       // 1 = real word position
    int real_length = 0;
};

// Word-level lookup, truncate/pad to seq_len; no [CLS]/[SEP]. The result
// feeds the identical head implementations used on encoder feature views.
StaticSequence static_embed_sequence(const std::string& text, const EmbeddingTable& table,
                                     int seq_len);

}  // namespace sa
