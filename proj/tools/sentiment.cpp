#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sa/harness.hpp"

using namespace sa;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        const std::string norm = normalize_text(line);
        if (!norm.empty()) lines.push_back(norm);
    }
    return lines;
}

struct GlobalOptions {
    std::uint64_t seed = 42;
    bool seed_given = false;
    std::string config_path;
    std::string precision = "f32";
};

RunConfig resolve_run(const GlobalOptions& global) {
    std::map<std::string, std::string> kv;
    if (!global.config_path.empty()) kv = load_key_value_file(global.config_path);
    RunConfig run = parse_run_config(kv);
    if (global.seed_given || kv.find("seed") == kv.end()) run.seed = global.seed;
    return run;
}

void save_model(const BertModel& model, const std::string& path) {
    to_checkpoint(model).save(path);
}

LabelRule rule_from_name(const std::string& name) {
    if (name == "ntc-sv") return LabelRule(8.5, 5.0);
    if (name == "vreview") return LabelRule(7.5, 5.0);
    throw std::runtime_error("unknown rule preset: " + name + " (expected ntc-sv|vreview)");
}

void print_report(const MetricsReport& report, bool as_json, bool macro) {
    if (as_json) {
        std::cout << metrics_json(report) << '\n';
        return;
    }
    std::printf("%-18s P=%.2f%%  R=%.2f%%  F1=%.2f%%  (tp=%lld fp=%lld fn=%lld tn=%lld)\n",
                report.model.empty() ? "model" : report.model.c_str(), report.precision * 100,
                report.recall * 100, report.f1 * 100, static_cast<long long>(report.tp),
                static_cast<long long>(report.fp), static_cast<long long>(report.fn),
                static_cast<long long>(report.tn));
    if (macro) {
        const MacroMetrics m = macro_metrics(report);
        std::printf("%-18s P=%.2f%%  R=%.2f%%  F1=%.2f%%\n", "macro", m.precision * 100,
                    m.recall * 100, m.f1 * 100);
    }
}

// Builds a randomly initialized model over a tiny synthetic vocabulary and
// gradient-checks the full encoder + head stack for one encoded example.
int run_gradcheck(const RunConfig& base, double threshold, int samples) {
    set_precision(Precision::f64);
    auto reviews = generate_synthetic_reviews({64, 0.0, base.seed});
    std::vector<std::string> lines;
    for (const auto& r : reviews) lines.push_back(r.text);
    Vocabulary vocab = train_vocab(lines, 80, 1);

    EncoderConfig config = base.encoder;
    config.vocab = vocab.size();
    config.dropout = 0.0;
    config.validate();

    bool all_ok = true;
    for (HeadKind kind : {HeadKind::ClsFfn, HeadKind::Lstm, HeadKind::TextCnn, HeadKind::Rcnn}) {
        for (FeatureViewMode view : {FeatureViewMode::LastLayer, FeatureViewMode::ConcatLast4}) {
            if (view == FeatureViewMode::ConcatLast4 && config.layers < 4) {
                std::printf("gradcheck %-8s %-13s skipped (needs L >= 4, L=%d)\n",
                            head_kind_name(kind).c_str(), view_mode_name(view).c_str(),
                            config.layers);
                continue;
            }
            HeadSpec spec = base.head;
            spec.kind = kind;
            spec.view = view;
            spec.validate(config.seq_len);

            ParamStore params;
            Rng rng(base.seed + static_cast<std::uint64_t>(kind) * 8 +
                    static_cast<std::uint64_t>(view));
            init_encoder_params(params, config, rng);
            init_head_params(params, spec, feature_dim(config.hidden, view), rng);

            const EncodedSequence seq = encode(lines[0], vocab, config.seq_len);
            auto loss_fn = [&] {
                HiddenStack stack = encode_sequence(seq, params, config);
                return logistic_loss(head_logit(stack, spec, params), 1);
            };
            Rng sample_rng(base.seed + 991);
            const double err = grad_check(loss_fn, params.tensors(), 1e-4, samples, &sample_rng);
            const bool ok = err < threshold;
            all_ok = all_ok && ok;
            std::printf("gradcheck %-8s %-13s max rel error %.3e  %s\n",
                        head_kind_name(kind).c_str(), view_mode_name(view).c_str(), err,
                        ok ? "ok" : "FAIL");
        }
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mini-BERT sentiment analysis workbench"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "global random seed")
        ->each([&global](const std::string&) { global.seed_given = true; });
    app.add_option("--config", global.config_path, "flat key=value run configuration file");
    app.add_option("--precision", global.precision, "numeric mode")
        ->check(CLI::IsMember({"f32", "f64"}));

    // vocab-train
    auto* vocab_cmd = app.add_subcommand("vocab-train", "train a sub-word vocabulary");
    std::string vt_input, vt_output;
    int vt_size = 2000, vt_min_freq = 2;
    vocab_cmd->add_option("--input", vt_input, "corpus text file, one review per line")->required();
    vocab_cmd->add_option("--output", vt_output, "vocabulary file to write")->required();
    vocab_cmd->add_option("--size", vt_size, "target vocabulary size");
    vocab_cmd->add_option("--min-frequency", vt_min_freq, "minimum pair frequency for a merge");

    // pretrain
    auto* pretrain_cmd = app.add_subcommand("pretrain", "masked-LM pretraining");
    std::string pt_corpus, pt_vocab, pt_output;
    double pt_lr = 1e-3;
    int pt_epochs = 3, pt_batch = 16;
    pretrain_cmd->add_option("--corpus", pt_corpus, "corpus text file")->required();
    pretrain_cmd->add_option("--vocab", pt_vocab, "vocabulary file")->required();
    pretrain_cmd->add_option("--output", pt_output, "checkpoint to write")->required();
    pretrain_cmd->add_option("--lr", pt_lr, "learning rate");
    pretrain_cmd->add_option("--epochs", pt_epochs, "epochs");
    pretrain_cmd->add_option("--batch", pt_batch, "batch size");

    // label
    auto* label_cmd = app.add_subcommand("label", "apply score thresholds to raw reviews");
    std::string lb_input, lb_output, lb_format = "csv", lb_text_col = "text",
                lb_score_col = "score", lb_rule;
    double lb_pos = 8.5, lb_neg = 5.0;
    std::string lb_delim = ",";
    label_cmd->add_option("--input", lb_input, "raw reviews file")->required();
    label_cmd->add_option("--output", lb_output, "labeled json-lines file")->required();
    label_cmd->add_option("--format", lb_format, "csv|jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    label_cmd->add_option("--text-col", lb_text_col, "text column or key");
    label_cmd->add_option("--score-col", lb_score_col, "score column or key");
    label_cmd->add_option("--delimiter", lb_delim, "field delimiter for csv");
    label_cmd->add_option("--rule", lb_rule, "threshold preset: ntc-sv|vreview");
    label_cmd->add_option("--pos-threshold", lb_pos, "scores strictly above become positive");
    label_cmd->add_option("--neg-threshold", lb_neg, "scores strictly below become negative");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "word-count statistics of a labeled dataset");
    std::string st_input, st_name = "dataset";
    bool st_json = false;
    stats_cmd->add_option("--input", st_input, "labeled json-lines file")->required();
    stats_cmd->add_option("--name", st_name, "dataset name for the report");
    stats_cmd->add_flag("--json", st_json, "emit json instead of a text table");

    // split
    auto* split_cmd = app.add_subcommand("split", "train/test split of a labeled dataset");
    std::string sp_input, sp_train_out, sp_test_out;
    double sp_fraction = 0.2;
    bool sp_stratified = false;
    split_cmd->add_option("--input", sp_input, "labeled json-lines file")->required();
    split_cmd->add_option("--train-output", sp_train_out, "train split file")->required();
    split_cmd->add_option("--test-output", sp_test_out, "test split file")->required();
    split_cmd->add_option("--test-fraction", sp_fraction, "fraction routed to the test split");
    split_cmd->add_flag("--stratified", sp_stratified, "preserve the class balance per split");

    // finetune
    auto* ft_cmd = app.add_subcommand("finetune", "train a classification head on a checkpoint");
    std::string ft_pretrained, ft_vocab, ft_train, ft_output;
    ft_cmd->add_option("--pretrained", ft_pretrained, "pretrained checkpoint")->required();
    ft_cmd->add_option("--vocab", ft_vocab, "vocabulary file")->required();
    ft_cmd->add_option("--train", ft_train, "labeled train file (overrides data.train)");
    ft_cmd->add_option("--output", ft_output, "fine-tuned checkpoint to write")->required();

    // evaluate
    auto* ev_cmd = app.add_subcommand("evaluate", "score a fine-tuned model on labeled data");
    std::string ev_model, ev_vocab, ev_test, ev_dataset = "dataset";
    bool ev_json = false, ev_macro = false;
    ev_cmd->add_option("--model", ev_model, "fine-tuned checkpoint")->required();
    ev_cmd->add_option("--vocab", ev_vocab, "vocabulary file")->required();
    ev_cmd->add_option("--test", ev_test, "labeled test file (overrides data.test)");
    ev_cmd->add_option("--dataset", ev_dataset, "dataset name for the report");
    ev_cmd->add_flag("--json", ev_json, "emit json");
    ev_cmd->add_flag("--macro", ev_macro, "also print macro-averaged metrics");

    // predict
    auto* pr_cmd = app.add_subcommand("predict", "classify raw texts");
    std::string pr_model, pr_vocab, pr_input;
    pr_cmd->add_option("--model", pr_model, "fine-tuned checkpoint")->required();
    pr_cmd->add_option("--vocab", pr_vocab, "vocabulary file")->required();
    pr_cmd->add_option("--input", pr_input, "text file, one review per line (default: stdin)");

    // matrix
    auto* mx_cmd = app.add_subcommand("matrix", "model comparison table on one dataset");
    std::string mx_pretrained, mx_vocab, mx_train, mx_test, mx_dataset = "dataset";
    bool mx_json = false;
    int mx_embed_dim = 32, mx_svm_epochs = 10;
    mx_cmd->add_option("--pretrained", mx_pretrained, "pretrained checkpoint")->required();
    mx_cmd->add_option("--vocab", mx_vocab, "vocabulary file")->required();
    mx_cmd->add_option("--train", mx_train, "labeled train file (overrides data.train)");
    mx_cmd->add_option("--test", mx_test, "labeled test file (overrides data.test)");
    mx_cmd->add_option("--dataset", mx_dataset, "dataset name");
    mx_cmd->add_option("--embedding-dim", mx_embed_dim, "static embedding dimension");
    mx_cmd->add_option("--svm-epochs", mx_svm_epochs, "svm training epochs");
    mx_cmd->add_flag("--json", mx_json, "emit json");

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full model");
    double gc_threshold = 1e-5;
    int gc_samples = 3;
    gc_cmd->add_option("--threshold", gc_threshold, "max allowed relative error");
    gc_cmd->add_option("--samples", gc_samples, "coordinates checked per parameter");

    // synth-data
    auto* sy_cmd = app.add_subcommand("synth-data", "generate a synthetic scored corpus");
    std::string sy_output;
    int sy_count = 2500;
    double sy_neutral = 0.0;
    sy_cmd->add_option("--output", sy_output, "json-lines file to write")->required();
    sy_cmd->add_option("--count", sy_count, "number of reviews");
    sy_cmd->add_option("--neutral-fraction", sy_neutral, "fraction scored in the dropped band");

    // let the global flags appear after the subcommand name as well
    for (CLI::App* sub : {vocab_cmd, pretrain_cmd, label_cmd, stats_cmd, split_cmd, ft_cmd,
                          ev_cmd, pr_cmd, mx_cmd, gc_cmd, sy_cmd})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        set_precision(global.precision == "f64" ? Precision::f64 : Precision::f32);
        RunConfig run = resolve_run(global);

        if (vocab_cmd->parsed()) {
            auto vocab = train_vocab(read_lines(vt_input), vt_size, vt_min_freq);
            vocab.save(vt_output);
            std::printf("vocabulary: %d tokens -> %s\n", vocab.size(), vt_output.c_str());
        } else if (pretrain_cmd->parsed()) {
            auto vocab = Vocabulary::load(pt_vocab);
            run.encoder.vocab = vocab.size();
            run.encoder.validate();
            PretrainHyper hyper{pt_lr, pt_batch, pt_epochs};
            auto result = pretrain(read_lines(pt_corpus), vocab, run.encoder, hyper, run.seed);
            BertModel model;
            model.config = run.encoder;
            model.params = std::move(result.params);
            model.vocab_hash = vocab.content_hash();
            model.seed = run.seed;
            model.steps = result.steps;
            save_model(model, pt_output);
            for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
                std::printf("epoch %zu  mlm loss %.4f\n", e + 1, result.epoch_losses[e]);
            std::printf("pretrained checkpoint -> %s\n", pt_output.c_str());
        } else if (label_cmd->parsed()) {
            SchemaMapping schema;
            schema.text_col = lb_text_col;
            schema.score_col = lb_score_col;
            if (!lb_delim.empty()) schema.delimiter = lb_delim[0];
            auto ingested = ingest(lb_input, input_format_from_name(lb_format), schema);
            const LabelRule rule = lb_rule.empty() ? LabelRule(lb_pos, lb_neg)
                                                   : rule_from_name(lb_rule);
            auto result = apply_label_rule(ingested.records, rule);
            save_labeled_jsonl(lb_output, result.labeled);
            std::printf("labeled %zu, dropped %d (thresholds >%.2f / <%.2f), empty %d -> %s\n",
                        result.labeled.size(), result.dropped, rule.pos_threshold,
                        rule.neg_threshold, ingested.dropped_empty, lb_output.c_str());
        } else if (stats_cmd->parsed()) {
            auto records = load_labeled_jsonl(st_input);
            auto stats = compute_stats(records);
            std::cout << (st_json ? stats_json(stats, st_name) + "\n"
                                  : stats_text_table(stats, st_name));
        } else if (split_cmd->parsed()) {
            auto records = load_labeled_jsonl(sp_input);
            auto [train, test] = split_records(records, sp_fraction, run.seed, sp_stratified);
            save_labeled_jsonl(sp_train_out, train);
            save_labeled_jsonl(sp_test_out, test);
            std::printf("split %zu -> train %zu, test %zu\n", records.size(), train.size(),
                        test.size());
        } else if (ft_cmd->parsed()) {
            auto vocab = Vocabulary::load(ft_vocab);
            auto pretrained = from_checkpoint(Checkpoint::load(ft_pretrained));
            const std::string train_path = ft_train.empty() ? run.train_path : ft_train;
            if (train_path.empty())
                throw std::runtime_error("finetune: no training data (--train or data.train)");
            auto data = load_labeled_jsonl(train_path);
            auto result = finetune(pretrained, run, data, vocab,
                                   [](int epoch, double loss, double acc) {
                                       if (acc >= 0.0)
                                           std::printf("epoch %d  loss %.4f  train acc %.4f\n",
                                                       epoch + 1, loss, acc);
                                       else
                                           std::printf("epoch %d  loss %.4f\n", epoch + 1, loss);
                                   });
            save_model(result.model, ft_output);
            std::printf("fine-tuned %s/%s checkpoint -> %s\n",
                        head_kind_name(run.head.kind).c_str(),
                        view_mode_name(run.head.view).c_str(), ft_output.c_str());
        } else if (ev_cmd->parsed()) {
            auto vocab = Vocabulary::load(ev_vocab);
            auto model = from_checkpoint(Checkpoint::load(ev_model));
            const std::string test_path = ev_test.empty() ? run.test_path : ev_test;
            if (test_path.empty())
                throw std::runtime_error("evaluate: no test data (--test or data.test)");
            auto report = evaluate(model, vocab, load_labeled_jsonl(test_path), ev_dataset,
                                   head_kind_name(model.head.kind));
            print_report(report, ev_json, ev_macro);
        } else if (pr_cmd->parsed()) {
            auto vocab = Vocabulary::load(pr_vocab);
            auto model = from_checkpoint(Checkpoint::load(pr_model));
            std::vector<std::string> texts;
            if (pr_input.empty()) {
                std::string line;
                while (std::getline(std::cin, line))
                    if (!normalize_text(line).empty()) texts.push_back(line);
            } else {
                texts = read_lines(pr_input);
            }
            for (const auto& p : predict(model, vocab, texts)) {
                nlohmann::json obj{{"text", p.text},
                                   {"label", p.positive ? "positive" : "negative"},
                                   {"probability", p.probability}};
                std::cout << obj.dump() << '\n';
            }
        } else if (mx_cmd->parsed()) {
            auto vocab = Vocabulary::load(mx_vocab);
            auto pretrained = from_checkpoint(Checkpoint::load(mx_pretrained));
            const std::string train_path = mx_train.empty() ? run.train_path : mx_train;
            const std::string test_path = mx_test.empty() ? run.test_path : mx_test;
            if (train_path.empty() || test_path.empty())
                throw std::runtime_error("matrix: train and test data are both required");
            MatrixOptions options;
            options.run = run;
            options.run.encoder = pretrained.config;
            options.static_embedding_dim = mx_embed_dim;
            options.dataset_name = mx_dataset;
            options.svm_epochs = mx_svm_epochs;
            auto rows = run_matrix(pretrained, vocab, load_labeled_jsonl(train_path),
                                   load_labeled_jsonl(test_path), options);
            std::cout << (mx_json ? matrix_json(rows) + "\n" : matrix_text_table(rows));
        } else if (gc_cmd->parsed()) {
            RunConfig base = run;
            if (global.config_path.empty()) {
                base.encoder.layers = 2;
                base.encoder.heads = 2;
                base.encoder.hidden = 16;
                base.encoder.ffn = 32;
                base.encoder.seq_len = 16;
            }
            return run_gradcheck(base, gc_threshold, gc_samples);
        } else if (sy_cmd->parsed()) {
            auto records = generate_synthetic_reviews({sy_count, sy_neutral, run.seed});
            std::ofstream out(sy_output, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open output file: " + sy_output);
            for (const auto& r : records) {
                nlohmann::json obj{{"text", r.text}, {"score", *r.avg_score}};
                out << obj.dump() << '\n';
            }
            std::printf("wrote %zu synthetic reviews -> %s\n", records.size(), sy_output.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
