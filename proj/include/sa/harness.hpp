#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sa/baselines.hpp"
#include "sa/checkpoint.hpp"
#include "sa/data.hpp"
#include "sa/encoder.hpp"
#include "sa/heads.hpp"
#include "sa/metrics.hpp"
#include "sa/tokenizer.hpp"

namespace sa {

struct TrainHyper {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int epochs = 5;
    // When > 0, stop after the first epoch whose training accuracy reaches
    // this value (checked on the training set, deterministic).
    double stop_at_train_accuracy = 0.0;
};

struct RunConfig {
    EncoderConfig encoder;
    HeadSpec head;
    TrainHyper train;
    std::uint64_t seed = 42;
    bool frozen_encoder = false;
    std::string train_path;
    std::string test_path;
};

// Flat key=value file (encoder.L, encoder.h, head.kind, head.view, train.lr,
// train.epochs, train.batch, data.train, data.test, seed, ...). Unknown keys
// are an error.
RunConfig parse_run_config(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> load_key_value_file(const std::string& path);

// A classifier bundle: encoder + head parameters with their configs.
struct BertModel {
    EncoderConfig config;
    HeadSpec head;
    bool has_head = false;
    ParamStore params;
    std::uint64_t vocab_hash = 0;
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
};

Checkpoint to_checkpoint(const BertModel& model);
BertModel from_checkpoint(const Checkpoint& ckpt);

struct FinetuneResult {
    BertModel model;
    std::vector<double> epoch_losses;
    std::vector<double> epoch_train_accuracy;  // filled when stop target set
    int epochs_run = 0;
};

using EpochLogger = std::function<void(int epoch, double loss, double train_accuracy)>;

// Fine-tunes all encoder and head parameters (head-only when frozen_encoder)
// from an MLM-pretrained checkpoint. Deterministic given the seed.
FinetuneResult finetune(const BertModel& pretrained, const RunConfig& run,
                        const std::vector<ReviewRecord>& train_data, const Vocabulary& vocab,
                        const EpochLogger& log = nullptr);

struct Prediction {
    std::string text;
    bool positive = false;
    double probability = 0.0;
};

std::vector<Prediction> predict(const BertModel& model, const Vocabulary& vocab,
                                const std::vector<std::string>& texts);

MetricsReport evaluate(const BertModel& model, const Vocabulary& vocab,
                       const std::vector<ReviewRecord>& test_data,
                       const std::string& dataset = "", const std::string& model_name = "");

// --- static-embedding baseline cells ---------------------------------------

struct StaticHeadModel {
    HeadSpec head;
    int seq_len = 0;
    ParamStore params;
};

StaticHeadModel train_static_head(const std::vector<ReviewRecord>& train_data,
                                  const EmbeddingTable& table, HeadSpec head, int seq_len,
                                  const TrainHyper& hyper, std::uint64_t seed);

MetricsReport evaluate_static_head(const StaticHeadModel& model, const EmbeddingTable& table,
                                   const std::vector<ReviewRecord>& test_data,
                                   const std::string& dataset = "",
                                   const std::string& model_name = "");

// --- comparison matrix ------------------------------------------------------

struct MatrixRow {
    std::string model;
    bool external = false;          // emitted but not run (xgboost)
    bool failed = false;
    std::string error;
    MetricsReport metrics;
};

struct MatrixOptions {
    RunConfig run;                  // shared desk-scale hyperparameters
    int static_embedding_dim = 32;
    std::string dataset_name = "dataset";
    int svm_epochs = 10;
    double svm_regularization = 1e-4;
};

// Trains and evaluates every model row on one dataset. Cell failures are
// recorded per row; remaining cells still run. Cell seeds derive from
// run.seed + row index.
std::vector<MatrixRow> run_matrix(const BertModel& pretrained, const Vocabulary& vocab,
                                  const std::vector<ReviewRecord>& train_data,
                                  const std::vector<ReviewRecord>& test_data,
                                  const MatrixOptions& options);

std::string matrix_text_table(const std::vector<MatrixRow>& rows);
std::string matrix_json(const std::vector<MatrixRow>& rows);

// --- synthetic corpus -------------------------------------------------------

struct SynthOptions {
    int count = 2500;
    double neutral_fraction = 0.0;  // scores landing in the dropped band
    std::uint64_t seed = 42;
};

// Template reviews from a small sentiment lexicon plus noise words, scored so
// the Ntc-sv label rule reproduces the intended class. Lexically separable.
std::vector<ReviewRecord> generate_synthetic_reviews(const SynthOptions& options);

}  // namespace sa
