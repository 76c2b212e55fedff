#include "sa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sa {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, ',')) out.push_back(std::stoi(part));
    return out;
}

std::string int_list_to_string(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected true|false, got '" + s + "'");
}

}  // namespace

std::map<std::string, std::string> load_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string trimmed;
        // trim outer whitespace
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        trimmed = line.substr(b, e - b + 1);
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config " + path + ": line " + std::to_string(line_no) +
                                     " is not key=value");
        kv[trimmed.substr(0, eq)] = trimmed.substr(eq + 1);
    }
    return kv;
}

RunConfig parse_run_config(const std::map<std::string, std::string>& kv) {
    RunConfig run;
    for (const auto& [key, value] : kv) {
        if (key == "encoder.L") run.encoder.layers = std::stoi(value);
        else if (key == "encoder.A") run.encoder.heads = std::stoi(value);
        else if (key == "encoder.h") run.encoder.hidden = std::stoi(value);
        else if (key == "encoder.f") run.encoder.ffn = std::stoi(value);
        else if (key == "encoder.seq_len") run.encoder.seq_len = std::stoi(value);
        else if (key == "encoder.V") run.encoder.vocab = std::stoi(value);
        else if (key == "encoder.dropout") run.encoder.dropout = std::stod(value);
        else if (key == "head.kind") run.head.kind = head_kind_from_name(value);
        else if (key == "head.view") run.head.view = view_mode_from_name(value);
        else if (key == "head.ffn_hidden") run.head.ffn_hidden = std::stoi(value);
        else if (key == "head.lstm_state") run.head.lstm_state = std::stoi(value);
        else if (key == "head.cnn_filters") run.head.cnn_filters = std::stoi(value);
        else if (key == "head.regions") run.head.region_sizes = parse_int_list(value);
        else if (key == "head.rcnn_state") run.head.rcnn_state = std::stoi(value);
        else if (key == "head.rcnn_conv_width") run.head.rcnn_conv_width = std::stoi(value);
        else if (key == "head.rcnn_filters") run.head.rcnn_filters = std::stoi(value);
        else if (key == "train.lr") run.train.learning_rate = std::stod(value);
        else if (key == "train.batch") run.train.batch_size = std::stoi(value);
        else if (key == "train.epochs") run.train.epochs = std::stoi(value);
        else if (key == "train.stop_at_train_accuracy")
            run.train.stop_at_train_accuracy = std::stod(value);
        else if (key == "data.train") run.train_path = value;
        else if (key == "data.test") run.test_path = value;
        else if (key == "seed") run.seed = std::stoull(value);
        else if (key == "frozen_encoder") run.frozen_encoder = parse_bool(value);
        else throw std::invalid_argument("unknown config key: " + key);
    }
    return run;
}

namespace {

void write_model_config(Checkpoint& ckpt, const BertModel& model) {
    const auto& c = model.config;
    ckpt.set("encoder.L", std::to_string(c.layers));
    ckpt.set("encoder.A", std::to_string(c.heads));
    ckpt.set("encoder.h", std::to_string(c.hidden));
    ckpt.set("encoder.f", std::to_string(c.ffn));
    ckpt.set("encoder.seq_len", std::to_string(c.seq_len));
    ckpt.set("encoder.V", std::to_string(c.vocab));
    std::ostringstream drop;
    drop << c.dropout;
    ckpt.set("encoder.dropout", drop.str());
    ckpt.set("model.has_head", model.has_head ? "true" : "false");
    if (model.has_head) {
        const auto& h = model.head;
        ckpt.set("head.kind", head_kind_name(h.kind));
        ckpt.set("head.view", view_mode_name(h.view));
        ckpt.set("head.ffn_hidden", std::to_string(h.ffn_hidden));
        ckpt.set("head.lstm_state", std::to_string(h.lstm_state));
        ckpt.set("head.cnn_filters", std::to_string(h.cnn_filters));
        ckpt.set("head.regions", int_list_to_string(h.region_sizes));
        ckpt.set("head.rcnn_state", std::to_string(h.rcnn_state));
        ckpt.set("head.rcnn_conv_width", std::to_string(h.rcnn_conv_width));
        ckpt.set("head.rcnn_filters", std::to_string(h.rcnn_filters));
    }
    ckpt.set("vocab.hash", std::to_string(model.vocab_hash));
    ckpt.set("train.seed", std::to_string(model.seed));
    ckpt.set("train.steps", std::to_string(model.steps));
}

void read_model_config(const Checkpoint& ckpt, BertModel& model) {
    auto& c = model.config;
    c.layers = std::stoi(ckpt.get("encoder.L"));
    c.heads = std::stoi(ckpt.get("encoder.A"));
    c.hidden = std::stoi(ckpt.get("encoder.h"));
    c.ffn = std::stoi(ckpt.get("encoder.f"));
    c.seq_len = std::stoi(ckpt.get("encoder.seq_len"));
    c.vocab = std::stoi(ckpt.get("encoder.V"));
    c.dropout = std::stod(ckpt.get("encoder.dropout"));
    model.has_head = parse_bool(ckpt.get("model.has_head"));
    if (model.has_head) {
        auto& h = model.head;
        h.kind = head_kind_from_name(ckpt.get("head.kind"));
        h.view = view_mode_from_name(ckpt.get("head.view"));
        h.ffn_hidden = std::stoi(ckpt.get("head.ffn_hidden"));
        h.lstm_state = std::stoi(ckpt.get("head.lstm_state"));
        h.cnn_filters = std::stoi(ckpt.get("head.cnn_filters"));
        h.region_sizes = parse_int_list(ckpt.get("head.regions"));
        h.rcnn_state = std::stoi(ckpt.get("head.rcnn_state"));
        h.rcnn_conv_width = std::stoi(ckpt.get("head.rcnn_conv_width"));
        h.rcnn_filters = std::stoi(ckpt.get("head.rcnn_filters"));
    }
    model.vocab_hash = std::stoull(ckpt.get("vocab.hash"));
    model.seed = std::stoull(ckpt.get("train.seed"));
    model.steps = std::stoll(ckpt.get("train.steps"));
}

void build_param_layout(BertModel& model) {
    Rng layout_rng(0);  // values are overwritten on restore
    init_encoder_params(model.params, model.config, layout_rng);
    if (model.has_head) {
        model.head.validate(model.config.seq_len);
        init_head_params(model.params, model.head,
                         feature_dim(model.config.hidden, model.head.view), layout_rng);
    }
}

}  // namespace

Checkpoint to_checkpoint(const BertModel& model) {
    Checkpoint ckpt = snapshot_params(model.params);
    write_model_config(ckpt, model);
    return ckpt;
}

BertModel from_checkpoint(const Checkpoint& ckpt) {
    BertModel model;
    read_model_config(ckpt, model);
    model.config.validate();
    if (model.has_head && model.head.view == FeatureViewMode::ConcatLast4 &&
        model.config.layers < 4)
        throw std::runtime_error("checkpoint validation: concat_last_4 head with L=" +
                                 std::to_string(model.config.layers) + " (< 4)");
    build_param_layout(model);
    restore_params(ckpt, model.params);
    return model;
}

namespace {

bool is_head_param(const std::string& name) { return name.rfind("head.", 0) == 0; }

double model_logit(const BertModel& model, const EncodedSequence& seq, Rng* dropout_rng,
                   bool training, Tensor* out_logit = nullptr) {
    HiddenStack stack = encode_sequence(seq, model.params, model.config, dropout_rng, training);
    Tensor logit = head_logit(stack, model.head, model.params);
    if (out_logit) *out_logit = logit;
    return logit->scalar();
}

double train_set_accuracy(const BertModel& model, const std::vector<EncodedSequence>& seqs,
                          const std::vector<bool>& labels) {
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const double logit = model_logit(model, seqs[i], nullptr, false);
        if (classify(logit).positive == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(seqs.size());
}

}  // namespace

FinetuneResult finetune(const BertModel& pretrained, const RunConfig& run,
                        const std::vector<ReviewRecord>& train_data, const Vocabulary& vocab,
                        const EpochLogger& log) {
    if (train_data.empty()) throw std::invalid_argument("finetune: empty training set");
    if (pretrained.config.vocab != vocab.size())
        throw std::invalid_argument("finetune: checkpoint vocab size does not match vocabulary");
    if (pretrained.vocab_hash != 0 && pretrained.vocab_hash != vocab.content_hash())
        throw std::invalid_argument("finetune: vocabulary differs from the one the checkpoint "
                                    "was pretrained with");
    run.head.validate(pretrained.config.seq_len);
    if (run.head.view == FeatureViewMode::ConcatLast4 && pretrained.config.layers < 4)
        throw std::invalid_argument("finetune: concat_last_4 requires L >= 4, got L=" +
                                    std::to_string(pretrained.config.layers));

    FinetuneResult result;
    BertModel& model = result.model;
    model.config = pretrained.config;
    model.head = run.head;
    model.has_head = true;
    model.vocab_hash = vocab.content_hash();
    model.seed = run.seed;

    Rng rng(run.seed);
    init_encoder_params(model.params, model.config, rng);
    for (const auto& [name, tensor] : model.params.items()) {
        const auto& src = pretrained.params.get(name);
        tensor->values = src->values;
    }
    init_head_params(model.params, model.head, feature_dim(model.config.hidden, model.head.view),
                     rng);

    std::vector<Tensor> trainable;
    for (const auto& [name, tensor] : model.params.items()) {
        if (run.frozen_encoder && !is_head_param(name)) {
            tensor->requires_grad = false;
            tensor->grad.clear();
        } else {
            trainable.push_back(tensor);
        }
    }

    std::vector<EncodedSequence> seqs;
    std::vector<bool> labels;
    for (const auto& rec : train_data) {
        if (!rec.positive) throw std::invalid_argument("finetune: unlabeled training record");
        seqs.push_back(encode(rec.text, vocab, model.config.seq_len));
        labels.push_back(*rec.positive);
    }

    AdamState adam;
    adam.learning_rate = run.train.learning_rate;
    std::vector<std::size_t> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int batch = std::max(1, std::min<int>(run.train.batch_size,
                                                static_cast<int>(seqs.size())));
    for (int epoch = 0; epoch < run.train.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
            for (auto& t : trainable) t->zero_grad();
            std::vector<Tensor> terms;
            for (std::size_t i = start; i < end; ++i) {
                Tensor logit;
                model_logit(model, seqs[order[i]], &rng, true, &logit);
                terms.push_back(scale(logistic_loss(logit, labels[order[i]] ? 1 : 0),
                                      1.0 / static_cast<double>(end - start)));
            }
            Tensor loss = terms.size() == 1 ? terms[0] : add_n(terms);
            backward(loss);
            adam_step(trainable, adam);
            epoch_loss += loss->scalar();
            ++batches;
            ++model.steps;
        }
        result.epoch_losses.push_back(batches ? epoch_loss / batches : 0.0);
        result.epochs_run = epoch + 1;
        double acc = -1.0;
        if (run.train.stop_at_train_accuracy > 0.0) {
            acc = train_set_accuracy(model, seqs, labels);
            result.epoch_train_accuracy.push_back(acc);
        }
        if (log) log(epoch, result.epoch_losses.back(), acc);
        if (acc >= run.train.stop_at_train_accuracy && acc >= 0.0 &&
            run.train.stop_at_train_accuracy > 0.0)
            break;
    }
    return result;
}

std::vector<Prediction> predict(const BertModel& model, const Vocabulary& vocab,
                                const std::vector<std::string>& texts) {
    if (!model.has_head) throw std::invalid_argument("predict: checkpoint has no head");
    std::vector<Prediction> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        const EncodedSequence seq = encode(text, vocab, model.config.seq_len);
        const double logit = model_logit(model, seq, nullptr, false);
        const Classification c = classify(logit);
        out.push_back({text, c.positive, c.probability});
    }
    return out;
}

MetricsReport evaluate(const BertModel& model, const Vocabulary& vocab,
                       const std::vector<ReviewRecord>& test_data, const std::string& dataset,
                       const std::string& model_name) {
    if (test_data.empty()) throw std::invalid_argument("evaluate: empty test set");
    std::vector<bool> gold, pred;
    for (const auto& rec : test_data) {
        if (!rec.positive) throw std::invalid_argument("evaluate: unlabeled test record");
        gold.push_back(*rec.positive);
        const EncodedSequence seq = encode(rec.text, vocab, model.config.seq_len);
        pred.push_back(classify(model_logit(model, seq, nullptr, false)).positive);
    }
    return compute_metrics(gold, pred, dataset, model_name);
}

StaticHeadModel train_static_head(const std::vector<ReviewRecord>& train_data,
                                  const EmbeddingTable& table, HeadSpec head, int seq_len,
                                  const TrainHyper& hyper, std::uint64_t seed) {
    if (head.kind == HeadKind::ClsFfn)
        throw std::invalid_argument("static baseline: cls_ffn head needs an encoder");
    head.view = FeatureViewMode::LastLayer;  // static features have no layer stack
    head.validate(seq_len);

    StaticHeadModel model;
    model.head = head;
    model.seq_len = seq_len;
    Rng rng(seed);
    init_head_params(model.params, head, table.dim(), rng);

    std::vector<StaticSequence> seqs;
    std::vector<bool> labels;
    for (const auto& rec : train_data) {
        if (!rec.positive) throw std::invalid_argument("static baseline: unlabeled record");
        seqs.push_back(static_embed_sequence(rec.text, table, seq_len));
        labels.push_back(*rec.positive);
    }

    AdamState adam;
    adam.learning_rate = hyper.learning_rate;
    const std::vector<Tensor> trainable = model.params.tensors();
    std::vector<std::size_t> order(seqs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const int batch = std::max(1, std::min<int>(hyper.batch_size, static_cast<int>(seqs.size())));

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
            for (const auto& t : trainable) t->zero_grad();
            std::vector<Tensor> terms;
            for (std::size_t i = start; i < end; ++i) {
                const auto& s = seqs[order[i]];
                Tensor logit = head_logit(s.features, s.mask, s.real_length, head, model.params);
                terms.push_back(scale(logistic_loss(logit, labels[order[i]] ? 1 : 0),
                                      1.0 / static_cast<double>(end - start)));
            }
            Tensor loss = terms.size() == 1 ? terms[0] : add_n(terms);
            backward(loss);
            adam_step(trainable, adam);
        }
    }
    return model;
}

MetricsReport evaluate_static_head(const StaticHeadModel& model, const EmbeddingTable& table,
                                   const std::vector<ReviewRecord>& test_data,
                                   const std::string& dataset, const std::string& model_name) {
    if (test_data.empty()) throw std::invalid_argument("evaluate: empty test set");
    std::vector<bool> gold, pred;
    for (const auto& rec : test_data) {
        if (!rec.positive) throw std::invalid_argument("evaluate: unlabeled test record");
        gold.push_back(*rec.positive);
        const StaticSequence s = static_embed_sequence(rec.text, table, model.seq_len);
        Tensor logit = head_logit(s.features, s.mask, s.real_length, model.head, model.params);
        pred.push_back(classify(logit->scalar()).positive);
    }
    return compute_metrics(gold, pred, dataset, model_name);
}

namespace {

std::vector<std::string> corpus_words(const std::vector<ReviewRecord>& records) {
    std::set<std::string> words;
    for (const auto& rec : records)
        for (const auto& w : whitespace_split(normalize_text(rec.text))) words.insert(w);
    return {words.begin(), words.end()};
}

MetricsReport evaluate_svm(const LinearSvm& svm, const NGramFeaturizer& featurizer,
                           const std::vector<ReviewRecord>& test_data, const std::string& dataset,
                           const std::string& model_name) {
    std::vector<bool> gold, pred;
    for (const auto& rec : test_data) {
        gold.push_back(*rec.positive);
        pred.push_back(svm.predict(featurizer.featurize(rec.text)));
    }
    return compute_metrics(gold, pred, dataset, model_name);
}

}  // namespace

std::vector<MatrixRow> run_matrix(const BertModel& pretrained, const Vocabulary& vocab,
                                  const std::vector<ReviewRecord>& train_data,
                                  const std::vector<ReviewRecord>& test_data,
                                  const MatrixOptions& options) {
    std::vector<MatrixRow> rows;
    int cell_index = 0;
    auto run_cell = [&](const std::string& name, auto&& fn) {
        MatrixRow row;
        row.model = name;
        const std::uint64_t cell_seed = options.run.seed + static_cast<std::uint64_t>(cell_index);
        try {
            row.metrics = fn(cell_seed);
            row.metrics.model = name;
            row.metrics.dataset = options.dataset_name;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
        ++cell_index;
    };

    // classical group
    run_cell("svm", [&](std::uint64_t seed) {
        NGramFeaturizer featurizer;
        featurizer.fit(train_data);
        LinearSvm svm = train_linear_svm(train_data, featurizer, options.svm_regularization,
                                         options.svm_epochs, seed);
        return evaluate_svm(svm, featurizer, test_data, options.dataset_name, "svm");
    });
    {
        MatrixRow xgb;
        xgb.model = "xgboost";
        xgb.external = true;
        rows.push_back(std::move(xgb));
        ++cell_index;
    }

    // static-embedding group; one shared random table per run
    const std::vector<std::string> words = corpus_words(train_data);
    const EmbeddingTable table =
        random_embedding_table(words, options.static_embedding_dim, options.run.seed ^ 0x5eedu);
    const int static_seq_len = options.run.encoder.seq_len;
    for (HeadKind kind : {HeadKind::TextCnn, HeadKind::Lstm, HeadKind::Rcnn}) {
        const std::string name = "static-emb+" + head_kind_name(kind);
        run_cell(name, [&, kind](std::uint64_t seed) {
            HeadSpec head = options.run.head;
            head.kind = kind;
            StaticHeadModel model = train_static_head(train_data, table, head, static_seq_len,
                                                      options.run.train, seed);
            return evaluate_static_head(model, table, test_data, options.dataset_name, name);
        });
    }

    // BERT group
    struct BertCell {
        const char* name;
        HeadKind kind;
    };
    for (const BertCell& cell : {BertCell{"bert-base", HeadKind::ClsFfn},
                                 BertCell{"bert-lstm", HeadKind::Lstm},
                                 BertCell{"bert-textcnn", HeadKind::TextCnn},
                                 BertCell{"bert-rcnn", HeadKind::Rcnn}}) {
        run_cell(cell.name, [&](std::uint64_t seed) {
            RunConfig run = options.run;
            run.seed = seed;
            run.head.kind = cell.kind;
            if (cell.kind == HeadKind::ClsFfn) run.head.view = FeatureViewMode::LastLayer;
            FinetuneResult ft = finetune(pretrained, run, train_data, vocab);
            return evaluate(ft.model, vocab, test_data, options.dataset_name, cell.name);
        });
    }
    return rows;
}

std::string matrix_text_table(const std::vector<MatrixRow>& rows) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    auto pad = [](const std::string& s, std::size_t w) {
        return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
    };
    out << pad("Model", 22) << pad("Precision(%)", 14) << pad("Recall(%)", 12) << "F1(%)\n";
    out << std::string(54, '-') << '\n';
    std::string prev_group;
    for (const auto& row : rows) {
        const std::string group = row.model.rfind("bert", 0) == 0 ? "bert"
                                  : row.model.rfind("static", 0) == 0 ? "static"
                                                                      : "classical";
        if (!prev_group.empty() && group != prev_group) out << std::string(54, '-') << '\n';
        prev_group = group;
        out << pad(row.model, 22);
        if (row.external) {
            out << "external - out of scope\n";
        } else if (row.failed) {
            out << "FAILED: " << row.error << '\n';
        } else {
            std::ostringstream p, r, f;
            p.setf(std::ios::fixed); p.precision(2); p << row.metrics.precision * 100.0;
            r.setf(std::ios::fixed); r.precision(2); r << row.metrics.recall * 100.0;
            f.setf(std::ios::fixed); f.precision(2); f << row.metrics.f1 * 100.0;
            out << pad(p.str(), 14) << pad(r.str(), 12) << f.str() << '\n';
        }
    }
    return out.str();
}

std::string matrix_json(const std::vector<MatrixRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json obj{{"model", row.model}};
        if (row.external) {
            obj["status"] = "external - out of scope";
        } else if (row.failed) {
            obj["status"] = "failed";
            obj["error"] = row.error;
        } else {
            obj["status"] = "ok";
            obj["precision"] = row.metrics.precision;
            obj["recall"] = row.metrics.recall;
            obj["f1"] = row.metrics.f1;
            obj["tp"] = row.metrics.tp;
            obj["fp"] = row.metrics.fp;
            obj["fn"] = row.metrics.fn;
            obj["tn"] = row.metrics.tn;
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2);
}

std::vector<ReviewRecord> generate_synthetic_reviews(const SynthOptions& options) {
    if (options.count < 1) throw std::invalid_argument("synthetic generator: count must be >= 1");
    static const std::vector<std::string> kPositive = {
        "ngon", "tuyệt", "thích", "tốt", "đẹp", "nhanh", "rẻ", "sạch", "thơm", "chuẩn"};
    static const std::vector<std::string> kNegative = {
        "tệ", "dở", "chán", "kém", "bẩn", "chậm", "đắt", "hỏng", "nhạt", "lừa"};
    static const std::vector<std::string> kNoise = {
        "quán", "món", "ăn",   "giao", "hàng",  "shop", "sản",  "phẩm", "mình", "rất",
        "quá",  "hơi", "này",  "nay",  "nhân",  "viên", "phục", "vụ",   "chỗ",  "ngồi",
        "giá",  "cả",  "chất", "lượng", "đóng", "gói",  "thời", "gian", "mua",  "lần"};

    Rng rng(options.seed);
    std::vector<ReviewRecord> records;
    records.reserve(static_cast<std::size_t>(options.count));
    for (int i = 0; i < options.count; ++i) {
        const double roll = rng.next_double();
        const bool neutral = roll < options.neutral_fraction;
        const bool positive = !neutral && (i % 2 == 0);  // balanced classes

        const auto& lexicon = positive ? kPositive : kNegative;
        const int noise_count = 4 + static_cast<int>(rng.next_below(6));
        const int sentiment_count = neutral ? 0 : 2 + static_cast<int>(rng.next_below(3));
        std::vector<std::string> tokens;
        for (int k = 0; k < noise_count; ++k)
            tokens.push_back(kNoise[static_cast<std::size_t>(rng.next_below(kNoise.size()))]);
        for (int k = 0; k < sentiment_count; ++k)
            tokens.push_back(lexicon[static_cast<std::size_t>(rng.next_below(lexicon.size()))]);
        shuffle(tokens, rng);

        ReviewRecord rec;
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            if (k) rec.text += ' ';
            rec.text += tokens[k];
        }
        if (neutral) {
            rec.avg_score = 5.5 + rng.next_double() * 2.5;       // dropped band (5, 8.5)
        } else if (positive) {
            rec.avg_score = 8.6 + rng.next_double() * 1.4;       // > 8.5
        } else {
            rec.avg_score = 0.5 + rng.next_double() * 4.4;       // < 5
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace sa
