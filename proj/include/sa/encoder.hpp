#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sa/tensor.hpp"
#include "sa/tokenizer.hpp"

namespace sa {

struct EncoderConfig {
    int layers = 4;        // L
    int heads = 4;         // A
    int hidden = 64;       // h
    int ffn = 256;         // f
    int seq_len = 128;
    int vocab = 0;         // V, set from the trained vocabulary
    double dropout = 0.1;

    void validate() const;
};

// Ordered named parameter tensors. Insertion order is the serialization order.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    std::vector<Tensor> tensors() const;
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    void zero_grads() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// All L+1 per-layer outputs for one sequence; index 0 is the embedding output.
struct HiddenStack {
    std::vector<Tensor> layers;                // L+1 tensors, each seq_len x h
    std::vector<std::uint8_t> attention_mask;  // carried through
    int real_length = 0;
};

void init_encoder_params(ParamStore& params, const EncoderConfig& config, Rng& rng);

Tensor embed(const EncodedSequence& seq, const ParamStore& params, const EncoderConfig& config,
             Rng* dropout_rng = nullptr, bool training = false);

HiddenStack encode_sequence(const EncodedSequence& seq, const ParamStore& params,
                            const EncoderConfig& config, Rng* dropout_rng = nullptr,
                            bool training = false);

// One masked-LM training example: ids with 15% of real non-special positions
// replaced (80/10/10 mask/random/keep), targets and flags at those positions.
struct MlmExample {
    EncodedSequence input;
    std::vector<int> targets;             // seq_len, valid where flagged
    std::vector<std::uint8_t> flags;      // 1 at masked positions
};

struct MlmBatch {
    std::vector<MlmExample> examples;
};

// Builds a batch; re-samples an example until it has at least one masked
// position (a sequence with no eligible position keeps zero flags and is
// skipped by mlm_loss only if another example covers the batch).
MlmBatch make_mlm_batch(const std::vector<EncodedSequence>& seqs, const Vocabulary& vocab,
                        Rng& rng, double mask_rate = 0.15);

// Mean cross-entropy over all masked positions in the batch. The output
// projection is tied to the token embedding matrix.
Tensor mlm_loss(const MlmBatch& batch, const ParamStore& params, const EncoderConfig& config,
                Rng* dropout_rng = nullptr, bool training = false);

struct PretrainHyper {
    double learning_rate = 1e-3;
    int batch_size = 16;
    int epochs = 3;
};

struct PretrainResult {
    ParamStore params;
    std::vector<double> epoch_losses;
    std::int64_t steps = 0;
};

// Desk-scale masked-LM pretraining. Deterministic given the seed.
PretrainResult pretrain(const std::vector<std::string>& corpus_lines, const Vocabulary& vocab,
                        const EncoderConfig& config, const PretrainHyper& hyper,
                        std::uint64_t seed);

}  // namespace sa
