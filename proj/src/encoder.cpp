#include "sa/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace sa {

void EncoderConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("encoder config: L must be >= 1");
    if (heads < 1 || hidden % heads != 0)
        throw std::invalid_argument("encoder config: h (" + std::to_string(hidden) +
                                    ") must be divisible by A (" + std::to_string(heads) + ")");
    if (ffn < hidden) throw std::invalid_argument("encoder config: f must be >= h");
    if (seq_len < 2) throw std::invalid_argument("encoder config: SEQ_LEN must be >= 2");
    if (vocab < Vocabulary::kSpecialCount + 1)
        throw std::invalid_argument("encoder config: vocabulary size not set");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("encoder config: dropout must be in [0,1)");
}

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    index_.emplace(name, items_.size());
    items_.emplace_back(name, t);
    return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return items_[it->second].second;
}

std::vector<Tensor> ParamStore::tensors() const {
    std::vector<Tensor> out;
    out.reserve(items_.size());
    for (const auto& [name, t] : items_) out.push_back(t);
    return out;
}

void ParamStore::zero_grads() const {
    for (const auto& [name, t] : items_) t->zero_grad();
}

void init_encoder_params(ParamStore& params, const EncoderConfig& c, Rng& rng) {
    c.validate();
    params.add("embed.tok", param_init({c.vocab, c.hidden}, rng));
    params.add("embed.pos", param_init({c.seq_len, c.hidden}, rng));
    params.add("embed.ln.g", full({1, c.hidden}, 1.0, true));
    params.add("embed.ln.b", zeros({1, c.hidden}, true));
    for (int l = 0; l < c.layers; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        for (const char* w : {"wq", "wk", "wv", "wo"})
            params.add(p + "attn." + w, param_init({c.hidden, c.hidden}, rng));
        for (const char* b : {"bq", "bk", "bv", "bo"})
            params.add(p + "attn." + b, zeros({1, c.hidden}, true));
        params.add(p + "ln1.g", full({1, c.hidden}, 1.0, true));
        params.add(p + "ln1.b", zeros({1, c.hidden}, true));
        params.add(p + "ffn.w1", param_init({c.hidden, c.ffn}, rng));
        params.add(p + "ffn.b1", zeros({1, c.ffn}, true));
        params.add(p + "ffn.w2", param_init({c.ffn, c.hidden}, rng));
        params.add(p + "ffn.b2", zeros({1, c.hidden}, true));
        params.add(p + "ln2.g", full({1, c.hidden}, 1.0, true));
        params.add(p + "ln2.b", zeros({1, c.hidden}, true));
    }
    params.add("mlm.bias", zeros({1, c.vocab}, true));
}

Tensor embed(const EncodedSequence& seq, const ParamStore& params, const EncoderConfig& c,
             Rng* dropout_rng, bool training) {
    if (static_cast<int>(seq.ids.size()) != c.seq_len)
        throw std::invalid_argument("embed: sequence length " + std::to_string(seq.ids.size()) +
                                    " does not match SEQ_LEN " + std::to_string(c.seq_len));
    for (int id : seq.ids)
        if (id < 0 || id >= c.vocab)
            throw std::invalid_argument("embed: token id " + std::to_string(id) +
                                        " out of range for V=" + std::to_string(c.vocab));
    Tensor tok = embedding_rows(params.get("embed.tok"), seq.ids);
    Tensor x = add(tok, params.get("embed.pos"));
    x = layer_norm(x, params.get("embed.ln.g"), params.get("embed.ln.b"));
    if (dropout_rng) x = dropout(x, c.dropout, *dropout_rng, training);
    return x;
}

HiddenStack encode_sequence(const EncodedSequence& seq, const ParamStore& params,
                            const EncoderConfig& c, Rng* dropout_rng, bool training) {
    c.validate();
    HiddenStack stack;
    stack.attention_mask = seq.attention_mask;
    stack.real_length = seq.real_length;

    Tensor x = embed(seq, params, c, dropout_rng, training);
    stack.layers.push_back(x);

    const int dk = c.hidden / c.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int l = 0; l < c.layers; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        Tensor q = add_row(matmul(x, params.get(p + "attn.wq")), params.get(p + "attn.bq"));
        Tensor k = add_row(matmul(x, params.get(p + "attn.wk")), params.get(p + "attn.bk"));
        Tensor v = add_row(matmul(x, params.get(p + "attn.wv")), params.get(p + "attn.bv"));
        std::vector<Tensor> head_ctx;
        for (int a = 0; a < c.heads; ++a) {
            Tensor qa = slice_cols(q, a * dk, (a + 1) * dk);
            Tensor ka = slice_cols(k, a * dk, (a + 1) * dk);
            Tensor va = slice_cols(v, a * dk, (a + 1) * dk);
            Tensor scores = scale(matmul(qa, transpose(ka)), inv_sqrt_dk);
            // pad columns get exactly zero attention weight
            Tensor attn = softmax_rows(scores, &seq.attention_mask);
            head_ctx.push_back(matmul(attn, va));
        }
        Tensor ctx = concat_cols(head_ctx);
        Tensor attn_out = add_row(matmul(ctx, params.get(p + "attn.wo")), params.get(p + "attn.bo"));
        if (dropout_rng) attn_out = dropout(attn_out, c.dropout, *dropout_rng, training);
        x = layer_norm(add(x, attn_out), params.get(p + "ln1.g"), params.get(p + "ln1.b"));

        Tensor h1 = gelu(add_row(matmul(x, params.get(p + "ffn.w1")), params.get(p + "ffn.b1")));
        Tensor h2 = add_row(matmul(h1, params.get(p + "ffn.w2")), params.get(p + "ffn.b2"));
        if (dropout_rng) h2 = dropout(h2, c.dropout, *dropout_rng, training);
        x = layer_norm(add(x, h2), params.get(p + "ln2.g"), params.get(p + "ln2.b"));

        for (double val : x->values)
            if (!std::isfinite(val))
                throw std::runtime_error("encoder: non-finite activation in block " +
                                         std::to_string(l));
        stack.layers.push_back(x);
    }
    return stack;
}

MlmBatch make_mlm_batch(const std::vector<EncodedSequence>& seqs, const Vocabulary& vocab,
                        Rng& rng, double mask_rate) {
    if (seqs.empty()) throw std::invalid_argument("make_mlm_batch: empty batch");
    MlmBatch batch;
    bool any_masked = false;
    for (const auto& seq : seqs) {
        MlmExample ex;
        ex.input = seq;
        const int n = static_cast<int>(seq.ids.size());
        ex.targets.assign(static_cast<std::size_t>(n), 0);
        ex.flags.assign(static_cast<std::size_t>(n), 0);
        std::vector<int> eligible;
        for (int i = 0; i < n; ++i)
            if (seq.attention_mask[static_cast<std::size_t>(i)] &&
                seq.ids[static_cast<std::size_t>(i)] >= Vocabulary::kSpecialCount)
                eligible.push_back(i);
        if (eligible.empty()) {
            batch.examples.push_back(std::move(ex));
            continue;
        }
        // at least one masked position per example with eligible content
        for (int attempt = 0; attempt < 50; ++attempt) {
            bool got = false;
            for (int i : eligible) {
                if (rng.next_double() >= mask_rate) continue;
                const std::size_t ui = static_cast<std::size_t>(i);
                ex.targets[ui] = seq.ids[ui];
                ex.flags[ui] = 1;
                const double roll = rng.next_double();
                if (roll < 0.8) {
                    ex.input.ids[ui] = Vocabulary::kMask;
                } else if (roll < 0.9) {
                    const int span = vocab.size() - Vocabulary::kSpecialCount;
                    ex.input.ids[ui] = Vocabulary::kSpecialCount +
                                       static_cast<int>(rng.next_below(
                                           static_cast<std::uint64_t>(span)));
                }  // else keep the original id
                got = true;
            }
            if (got) break;
        }
        bool got_any = false;
        for (auto f : ex.flags) got_any = got_any || f;
        if (!got_any) {
            // force one position
            const int i = eligible[static_cast<std::size_t>(
                rng.next_below(static_cast<std::uint64_t>(eligible.size())))];
            const std::size_t ui = static_cast<std::size_t>(i);
            ex.targets[ui] = seq.ids[ui];
            ex.flags[ui] = 1;
            ex.input.ids[ui] = Vocabulary::kMask;
        }
        any_masked = true;
        batch.examples.push_back(std::move(ex));
    }
    if (!any_masked)
        throw std::invalid_argument("make_mlm_batch: no example has an eligible position");
    return batch;
}

Tensor mlm_loss(const MlmBatch& batch, const ParamStore& params, const EncoderConfig& c,
                Rng* dropout_rng, bool training) {
    std::int64_t total_masked = 0;
    for (const auto& ex : batch.examples)
        for (auto f : ex.flags) total_masked += f;
    if (total_masked == 0) throw std::invalid_argument("mlm_loss: batch has no masked position");

    const Tensor tok_emb_t = transpose(params.get("embed.tok"));
    std::vector<Tensor> terms;
    for (const auto& ex : batch.examples) {
        std::int64_t k = 0;
        for (auto f : ex.flags) k += f;
        if (k == 0) continue;
        HiddenStack stack = encode_sequence(ex.input, params, c, dropout_rng, training);
        Tensor logits = add_row(matmul(stack.layers.back(), tok_emb_t), params.get("mlm.bias"));
        Tensor ce = masked_cross_entropy(logits, ex.targets, ex.flags);  // mean over k
        terms.push_back(scale(ce, static_cast<double>(k) / static_cast<double>(total_masked)));
    }
    return terms.size() == 1 ? terms[0] : add_n(terms);
}

PretrainResult pretrain(const std::vector<std::string>& corpus_lines, const Vocabulary& vocab,
                        const EncoderConfig& config, const PretrainHyper& hyper,
                        std::uint64_t seed) {
    config.validate();
    if (config.vocab != vocab.size())
        throw std::invalid_argument("pretrain: config vocab size " + std::to_string(config.vocab) +
                                    " does not match vocabulary (" + std::to_string(vocab.size()) +
                                    ")");
    std::vector<EncodedSequence> seqs;
    for (const auto& line : corpus_lines) {
        if (normalize_text(line).empty()) continue;
        seqs.push_back(encode(line, vocab, config.seq_len));
    }
    if (static_cast<int>(seqs.size()) < hyper.batch_size)
        throw std::invalid_argument("pretrain: corpus has " + std::to_string(seqs.size()) +
                                    " usable lines, smaller than one batch of " +
                                    std::to_string(hyper.batch_size));

    Rng rng(seed);
    PretrainResult result;
    init_encoder_params(result.params, config, rng);
    AdamState adam;
    adam.learning_rate = hyper.learning_rate;
    const std::vector<Tensor> tensors = result.params.tensors();

    std::vector<std::size_t> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start + hyper.batch_size <= order.size();
             start += hyper.batch_size) {
            std::vector<EncodedSequence> batch_seqs;
            for (int i = 0; i < hyper.batch_size; ++i)
                batch_seqs.push_back(seqs[order[start + static_cast<std::size_t>(i)]]);
            MlmBatch batch = make_mlm_batch(batch_seqs, vocab, rng);
            result.params.zero_grads();
            Tensor loss = mlm_loss(batch, result.params, config, &rng, true);
            backward(loss);
            adam_step(tensors, adam);
            epoch_loss += loss->scalar();
            ++batches;
            ++result.steps;
        }
        result.epoch_losses.push_back(batches > 0 ? epoch_loss / batches : 0.0);
    }
    return result;
}

}  // namespace sa
