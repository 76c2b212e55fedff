#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "sa/harness.hpp"

using namespace sa;

namespace {

ReviewRecord labeled(std::string text, bool positive) {
    ReviewRecord r;
    r.text = std::move(text);
    r.positive = positive;
    return r;
}

Vocabulary toy_vocab() {
    Vocabulary v;
    for (const char* t : {"ngon", "tuyệt", "dở", "tệ", "món", "quán"}) v.add(t);
    return v;
}

BertModel toy_pretrained(const Vocabulary& vocab) {
    BertModel model;
    model.config.layers = 1;
    model.config.heads = 2;
    model.config.hidden = 8;
    model.config.ffn = 16;
    model.config.seq_len = 8;
    model.config.vocab = vocab.size();
    model.config.dropout = 0.0;
    model.vocab_hash = vocab.content_hash();
    Rng rng(3);
    init_encoder_params(model.params, model.config, rng);
    return model;
}

std::vector<ReviewRecord> toy_train() {
    std::vector<ReviewRecord> data;
    for (int i = 0; i < 6; ++i) {
        data.push_back(labeled("món ngon tuyệt", true));
        data.push_back(labeled("quán dở tệ", false));
    }
    return data;
}

}  // namespace

TEST_CASE("metrics from a hand-built confusion matrix") {
    // gold:    + + + - - + - -
    // pred:    + - + + - + - +
    std::vector<bool> gold = {1, 1, 1, 0, 0, 1, 0, 0};
    std::vector<bool> pred = {1, 0, 1, 1, 0, 1, 0, 1};
    auto r = compute_metrics(gold, pred, "toy", "hand");
    CHECK(r.tp == 3);
    CHECK(r.fn == 1);
    CHECK(r.fp == 2);
    CHECK(r.tn == 2);
    CHECK(r.precision == doctest::Approx(3.0 / 5.0));
    CHECK(r.recall == doctest::Approx(3.0 / 4.0));
    CHECK(r.f1 == doctest::Approx(2.0 * 0.6 * 0.75 / (0.6 + 0.75)));
    CHECK(r.dataset == "toy");

    // degenerate denominators give 0, not NaN
    auto none = compute_metrics({false, false}, {false, false});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    auto perfect = compute_metrics({true, false}, {true, false});
    CHECK(perfect.f1 == 1.0);

    CHECK_THROWS_AS(compute_metrics({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(compute_metrics({true}, {true, false}), std::invalid_argument);

    auto macro = macro_metrics(r);
    // negative class: precision 2/3, recall 2/4
    CHECK(macro.precision == doctest::Approx(0.5 * (0.6 + 2.0 / 3.0)));
    CHECK(macro.recall == doctest::Approx(0.5 * (0.75 + 0.5)));

    auto json = metrics_json(r);
    for (const char* key : {"\"tp\"", "\"precision\"", "\"recall\"", "\"f1\"", "\"model\""})
        CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("run config parsing") {
    std::map<std::string, std::string> kv = {
        {"encoder.L", "2"},      {"encoder.h", "32"},        {"head.kind", "textcnn"},
        {"head.view", "last_layer"}, {"train.lr", "0.0005"}, {"train.epochs", "7"},
        {"train.batch", "4"},    {"data.train", "a.jsonl"},  {"seed", "99"},
        {"head.regions", "2,3"}, {"frozen_encoder", "true"},
    };
    auto run = parse_run_config(kv);
    CHECK(run.encoder.layers == 2);
    CHECK(run.encoder.hidden == 32);
    CHECK(run.head.kind == HeadKind::TextCnn);
    CHECK(run.head.region_sizes == std::vector<int>{2, 3});
    CHECK(run.train.learning_rate == 0.0005);
    CHECK(run.train.epochs == 7);
    CHECK(run.train_path == "a.jsonl");
    CHECK(run.seed == 99);
    CHECK(run.frozen_encoder);

    kv["encoder.layers"] = "2";  // wrong spelling
    CHECK_THROWS_WITH_AS(parse_run_config(kv), doctest::Contains("encoder.layers"),
                         std::invalid_argument);

    const char* path = "run_config_test.cfg";
    std::ofstream out(path);
    out << "# top comment\n"
        << "encoder.L=3   # inline comment\n"
        << "\n"
        << "  seed=5  \n";
    out.close();
    auto file_kv = load_key_value_file(path);
    CHECK(file_kv.at("encoder.L") == "3");
    CHECK(file_kv.at("seed") == "5");
    CHECK(file_kv.size() == 2);
    std::remove(path);
}

TEST_CASE("checkpoint round trip is byte-identical") {
    auto vocab = toy_vocab();
    auto model = toy_pretrained(vocab);
    auto ckpt = to_checkpoint(model);
    const char* p1 = "ckpt_rt1.bin";
    const char* p2 = "ckpt_rt2.bin";
    ckpt.save(p1);
    Checkpoint::load(p1).save(p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1.size() > 0);
    CHECK(s1 == s2);
    f1.close();
    f2.close();

    auto restored = from_checkpoint(Checkpoint::load(p1));
    CHECK(restored.config.layers == model.config.layers);
    CHECK(restored.config.vocab == model.config.vocab);
    CHECK(restored.vocab_hash == model.vocab_hash);
    CHECK_FALSE(restored.has_head);
    // f32 training values survive the float32 format exactly
    CHECK(restored.params.get("embed.tok")->values == model.params.get("embed.tok")->values);
    std::remove(p2);

    SUBCASE("corruption is rejected") {
        std::fstream f(p1, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(p1), doctest::Contains("not a checkpoint"),
                             std::runtime_error);
    }
    SUBCASE("version mismatch is rejected") {
        std::fstream f(p1, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(4);
        const char v2[4] = {9, 0, 0, 0};
        f.write(v2, 4);
        f.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(p1), doctest::Contains("version mismatch"),
                             std::runtime_error);
    }
    SUBCASE("truncation is detected") {
        std::ifstream in(p1, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(p1, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 20));
        out.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(p1), doctest::Contains("integrity"),
                             std::runtime_error);
    }
    std::remove(p1);
}

TEST_CASE("restore rejects layout drift") {
    auto vocab = toy_vocab();
    auto model = toy_pretrained(vocab);
    auto ckpt = to_checkpoint(model);
    ckpt.set("encoder.h", "16");  // shapes no longer match the declared config
    CHECK_THROWS_WITH_AS(from_checkpoint(ckpt), doctest::Contains("shape"), std::runtime_error);
}

TEST_CASE("finetune smoke: runs, deterministic, validates inputs") {
    auto vocab = toy_vocab();
    auto pretrained = toy_pretrained(vocab);
    auto data = toy_train();

    RunConfig run;
    run.encoder = pretrained.config;
    run.head.kind = HeadKind::ClsFfn;
    run.head.ffn_hidden = 8;
    run.train.epochs = 2;
    run.train.batch_size = 4;
    run.seed = 11;

    auto r1 = finetune(pretrained, run, data, vocab);
    auto r2 = finetune(pretrained, run, data, vocab);
    CHECK(r1.epochs_run == 2);
    CHECK(r1.epoch_losses == r2.epoch_losses);
    CHECK(r1.model.params.get("head.out.w")->values == r2.model.params.get("head.out.w")->values);
    CHECK(r1.model.has_head);
    CHECK(r1.model.steps == 2 * 3);  // 12 examples / batch 4, 2 epochs

    auto preds = predict(r1.model, vocab, {"món ngon", "dở tệ"});
    REQUIRE(preds.size() == 2);
    CHECK(preds[0].probability >= 0.0);
    CHECK(preds[0].probability <= 1.0);

    auto report = evaluate(r1.model, vocab, data, "toy", "smoke");
    CHECK(report.tp + report.fp + report.fn + report.tn == static_cast<std::int64_t>(data.size()));

    SUBCASE("frozen encoder leaves encoder weights untouched") {
        RunConfig frozen = run;
        frozen.frozen_encoder = true;
        auto fr = finetune(pretrained, frozen, data, vocab);
        CHECK(fr.model.params.get("embed.tok")->values ==
              pretrained.params.get("embed.tok")->values);
        CHECK(fr.model.params.get("head.out.w")->values !=
              r1.model.params.get("head.out.w")->values);
    }
    SUBCASE("vocabulary hash mismatch is rejected") {
        Vocabulary other = toy_vocab();
        other.add("thêm");
        auto wrong = toy_pretrained(other);
        wrong.vocab_hash = other.content_hash();
        wrong.config.vocab = vocab.size();  // size agrees, content differs
        CHECK_THROWS_WITH_AS(finetune(wrong, run, data, vocab), doctest::Contains("vocabulary"),
                             std::invalid_argument);
    }
    SUBCASE("concat view needs four blocks") {
        RunConfig concat = run;
        concat.head.view = FeatureViewMode::ConcatLast4;
        CHECK_THROWS_WITH_AS(finetune(pretrained, concat, data, vocab),
                             doctest::Contains("L >= 4"), std::invalid_argument);
    }
    SUBCASE("unlabeled data is rejected") {
        std::vector<ReviewRecord> bad = data;
        bad[0].positive.reset();
        CHECK_THROWS_AS(finetune(pretrained, run, bad, vocab), std::invalid_argument);
    }
}

TEST_CASE("early stop on training accuracy") {
    auto vocab = toy_vocab();
    auto pretrained = toy_pretrained(vocab);
    auto data = toy_train();

    RunConfig run;
    run.encoder = pretrained.config;
    run.head.kind = HeadKind::ClsFfn;
    run.head.ffn_hidden = 8;
    run.train.epochs = 60;
    run.train.batch_size = 4;
    run.train.learning_rate = 5e-3;
    run.train.stop_at_train_accuracy = 1.0;
    run.seed = 13;

    auto result = finetune(pretrained, run, data, vocab);
    CHECK(result.epochs_run < 60);
    CHECK(result.epoch_train_accuracy.back() == 1.0);
}

TEST_CASE("static baseline heads train on raw embeddings") {
    EmbeddingTable table = random_embedding_table(
        {"món", "ngon", "tuyệt", "quán", "dở", "tệ"}, 8, 5);
    auto data = toy_train();

    HeadSpec head;
    head.kind = HeadKind::Lstm;
    head.lstm_state = 8;
    TrainHyper hyper;
    hyper.epochs = 30;
    hyper.learning_rate = 5e-3;
    auto model = train_static_head(data, table, head, 6, hyper, 21);
    auto report = evaluate_static_head(model, table, data, "toy", "static-emb+lstm");
    CHECK(report.f1 == 1.0);  // two lexically separable sentences

    HeadSpec cls;
    cls.kind = HeadKind::ClsFfn;
    CHECK_THROWS_AS(train_static_head(data, table, cls, 6, hyper, 21), std::invalid_argument);
}

TEST_CASE("matrix table layout and failure isolation") {
    std::vector<MatrixRow> rows;
    MatrixRow svm;
    svm.model = "svm";
    svm.metrics.precision = 0.9;
    svm.metrics.recall = 0.8;
    svm.metrics.f1 = 0.847;
    rows.push_back(svm);
    MatrixRow xgb;
    xgb.model = "xgboost";
    xgb.external = true;
    rows.push_back(xgb);
    MatrixRow failed;
    failed.model = "static-emb+lstm";
    failed.failed = true;
    failed.error = "boom";
    rows.push_back(failed);
    MatrixRow bert;
    bert.model = "bert-rcnn";
    bert.metrics.precision = 1.0;
    bert.metrics.recall = 1.0;
    bert.metrics.f1 = 1.0;
    rows.push_back(bert);

    auto table = matrix_text_table(rows);
    CHECK(table.find("Model") != std::string::npos);
    CHECK(table.find("Precision(%)") != std::string::npos);
    CHECK(table.find("F1(%)") != std::string::npos);
    CHECK(table.find("external - out of scope") != std::string::npos);
    CHECK(table.find("FAILED: boom") != std::string::npos);
    CHECK(table.find("90.00") != std::string::npos);
    CHECK(table.find("100.00") != std::string::npos);
    // group separators between classical / static / bert sections
    CHECK(std::count(table.begin(), table.end(), '-') >= 3 * 54);

    auto json = matrix_json(rows);
    CHECK(json.find("\"external - out of scope\"") != std::string::npos);
    CHECK(json.find("\"failed\"") != std::string::npos);
    CHECK(json.find("\"f1\"") != std::string::npos);
}

TEST_CASE("synthetic corpus obeys its own label rule") {
    SynthOptions opt;
    opt.count = 400;
    opt.seed = 77;
    auto records = generate_synthetic_reviews(opt);
    REQUIRE(records.size() == 400);

    auto labeled_result = apply_label_rule(records, LabelRule(8.5, 5.0));
    CHECK(labeled_result.dropped == 0);
    int pos = 0;
    for (const auto& r : labeled_result.labeled)
        if (*r.positive) ++pos;
    CHECK(pos == 200);  // balanced

    // determinism
    auto again = generate_synthetic_reviews(opt);
    CHECK(again[0].text == records[0].text);
    CHECK(again[399].avg_score == records[399].avg_score);

    SynthOptions neutral = opt;
    neutral.neutral_fraction = 0.3;
    auto with_neutral = generate_synthetic_reviews(neutral);
    auto filtered = apply_label_rule(with_neutral, LabelRule(8.5, 5.0));
    CHECK(filtered.dropped > 50);
    CHECK(filtered.dropped < 200);

    SynthOptions bad;
    bad.count = 0;
    CHECK_THROWS_AS(generate_synthetic_reviews(bad), std::invalid_argument);
}
