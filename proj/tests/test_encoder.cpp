#include <doctest.h>

#include <cmath>

#include "sa/encoder.hpp"
#include "sa/heads.hpp"

using namespace sa;

namespace {

struct F64Guard {
    F64Guard() { set_precision(Precision::f64); }
    ~F64Guard() { set_precision(Precision::f32); }
};

Vocabulary tiny_vocab() {
    Vocabulary v;
    for (const char* t : {"ngon", "quá", "dở", "tệ", "rất", "món", "ăn"}) v.add(t);
    return v;
}

EncoderConfig tiny_config(const Vocabulary& vocab) {
    EncoderConfig c;
    c.layers = 2;
    c.heads = 2;
    c.hidden = 8;
    c.ffn = 16;
    c.seq_len = 8;
    c.vocab = vocab.size();
    c.dropout = 0.0;
    return c;
}

}  // namespace

TEST_CASE("encoder config validation") {
    auto vocab = tiny_vocab();
    auto c = tiny_config(vocab);
    c.validate();

    auto bad = c;
    bad.hidden = 9;  // not divisible by heads
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.layers = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.vocab = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("parameter layout matches the configuration") {
    auto vocab = tiny_vocab();
    auto c = tiny_config(vocab);
    Rng rng(1);
    ParamStore params;
    init_encoder_params(params, c, rng);

    CHECK(params.get("embed.tok")->shape == Shape{c.vocab, c.hidden});
    CHECK(params.get("embed.pos")->shape == Shape{c.seq_len, c.hidden});
    for (int i = 0; i < c.layers; ++i) {
        const std::string b = "block" + std::to_string(i) + ".";
        CHECK(params.get(b + "attn.wq")->shape == Shape{c.hidden, c.hidden});
        CHECK(params.get(b + "ffn.w1")->shape == Shape{c.hidden, c.ffn});
        CHECK(params.get(b + "ffn.w2")->shape == Shape{c.ffn, c.hidden});
        CHECK(params.get(b + "ln2.g")->shape == Shape{1, c.hidden});
    }
    CHECK(params.get("mlm.bias")->shape == Shape{1, c.vocab});
    CHECK_FALSE(params.has("block2.attn.wq"));
}

TEST_CASE("encode_sequence emits L+1 stacked layers") {
    F64Guard guard;
    auto vocab = tiny_vocab();
    auto c = tiny_config(vocab);
    Rng rng(2);
    ParamStore params;
    init_encoder_params(params, c, rng);

    auto seq = encode("ngon quá", vocab, c.seq_len);
    auto stack = encode_sequence(seq, params, c);
    CHECK(static_cast<int>(stack.layers.size()) == c.layers + 1);
    for (const auto& layer : stack.layers) {
        CHECK(layer->rows() == c.seq_len);
        CHECK(layer->cols() == c.hidden);
        for (double v : layer->values) CHECK(std::isfinite(v));
    }
    CHECK(stack.real_length == seq.real_length);

    // determinism
    auto stack2 = encode_sequence(seq, params, c);
    CHECK(stack.layers.back()->values == stack2.layers.back()->values);
}

TEST_CASE("pad positions cannot influence real positions") {
    F64Guard guard;
    auto vocab = tiny_vocab();
    auto c = tiny_config(vocab);
    Rng rng(3);
    ParamStore params;
    init_encoder_params(params, c, rng);

    auto seq = encode("rất ngon", vocab, c.seq_len);
    auto base = encode_sequence(seq, params, c);

    auto scribbled = seq;
    for (int i = seq.real_length; i < c.seq_len; ++i)
        scribbled.ids[static_cast<std::size_t>(i)] =
            Vocabulary::kSpecialCount + static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(c.vocab - Vocabulary::kSpecialCount)));
    auto other = encode_sequence(scribbled, params, c);

    for (int layer = 0; layer <= c.layers; ++layer)
        for (int r = 0; r < seq.real_length; ++r)
            for (int col = 0; col < c.hidden; ++col)
                CHECK(base.layers[static_cast<std::size_t>(layer)]->at(r, col) ==
                      doctest::Approx(other.layers[static_cast<std::size_t>(layer)]->at(r, col))
                          .epsilon(1e-12));
}

TEST_CASE("masked-lm batches flag only real non-special positions") {
    auto vocab = tiny_vocab();
    Rng rng(4);
    std::vector<EncodedSequence> seqs;
    for (const char* text : {"ngon quá", "dở tệ quá", "rất ngon món ăn", "món dở"})
        seqs.push_back(encode(text, vocab, 12));

    int flagged = 0, eligible = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto batch = make_mlm_batch(seqs, vocab, rng);
        REQUIRE(batch.examples.size() == seqs.size());
        for (std::size_t e = 0; e < batch.examples.size(); ++e) {
            const auto& ex = batch.examples[e];
            int count = 0;
            for (int i = 0; i < 12; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                if (ex.flags[idx]) {
                    ++count;
                    CHECK(i > 0);
                    CHECK(i < seqs[e].real_length - 1);
                    // target holds the original id at the corrupted position
                    CHECK(ex.targets[idx] == seqs[e].ids[idx]);
                } else {
                    CHECK(ex.input.ids[idx] == seqs[e].ids[idx]);
                }
            }
            CHECK(count >= 1);
            flagged += count;
            eligible += seqs[e].real_length - 2;
        }
    }
    // ~15% corruption rate, with the at-least-one floor pushing it up a little
    const double rate = static_cast<double>(flagged) / eligible;
    CHECK(rate > 0.10);
    // short sequences with the at-least-one floor sit well above 15%
    CHECK(rate < 0.45);
}

TEST_CASE("masked-lm loss equals ln V under zero parameters") {
    F64Guard guard;
    auto vocab = tiny_vocab();
    auto c = tiny_config(vocab);
    Rng rng(5);
    ParamStore params;
    init_encoder_params(params, c, rng);
    for (const auto& [name, tensor] : params.items()) {
        (void)name;
        std::fill(tensor->values.begin(), tensor->values.end(), 0.0);
    }
    // layer norms with zero gain make every hidden vector zero, so all vocab
    // logits tie and the softmax is uniform
    auto batch = make_mlm_batch({encode("ngon quá dở", vocab, c.seq_len)}, vocab, rng);
    auto loss = mlm_loss(batch, params, c);
    CHECK(loss->scalar() == doctest::Approx(std::log(static_cast<double>(c.vocab))).epsilon(1e-9));
}

TEST_CASE("masked-lm gradients pass the checker on a tiny model") {
    F64Guard guard;
    auto vocab = tiny_vocab();
    EncoderConfig c;
    c.layers = 1;
    c.heads = 1;
    c.hidden = 4;
    c.ffn = 8;
    c.seq_len = 6;
    c.vocab = vocab.size();
    c.dropout = 0.0;
    Rng rng(6);
    ParamStore params;
    init_encoder_params(params, c, rng);
    for (const auto& [name, tensor] : params.items()) {
        (void)name;
        if (tensor->size() > 1)
            for (double& v : tensor->values) v = quantize(v * 10 + 0.01, precision());
    }

    auto batch = make_mlm_batch({encode("ngon quá dở tệ", vocab, c.seq_len)}, vocab, rng);
    Rng sample_rng(7);
    const double err = grad_check([&] { return mlm_loss(batch, params, c); }, params.tensors(),
                                  1e-4, 3, &sample_rng);
    CHECK(err < 1e-5);
}

TEST_CASE("pretraining runs deterministically and reduces the loss") {
    auto vocab = tiny_vocab();
    EncoderConfig c;
    c.layers = 1;
    c.heads = 2;
    c.hidden = 8;
    c.ffn = 16;
    c.seq_len = 8;
    c.vocab = vocab.size();
    c.dropout = 0.0;

    const std::vector<std::string> corpus = {"ngon quá", "rất ngon", "dở tệ", "món dở tệ",
                                             "món ăn ngon", "ăn dở"};
    PretrainHyper hyper;
    hyper.epochs = 4;
    hyper.batch_size = 3;
    auto r1 = pretrain(corpus, vocab, c, hyper, 42);
    auto r2 = pretrain(corpus, vocab, c, hyper, 42);
    REQUIRE(r1.epoch_losses.size() == 4);
    CHECK(r1.epoch_losses == r2.epoch_losses);
    CHECK(r1.steps == r2.steps);
    CHECK(r1.params.get("embed.tok")->values == r2.params.get("embed.tok")->values);
    CHECK(r1.epoch_losses.back() < r1.epoch_losses.front());

    auto r3 = pretrain(corpus, vocab, c, hyper, 43);
    CHECK(r1.params.get("embed.tok")->values != r3.params.get("embed.tok")->values);
}
