#include "sa/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace sa {

std::string head_kind_name(HeadKind kind) {
    switch (kind) {
        case HeadKind::ClsFfn: return "cls_ffn";
        case HeadKind::Lstm: return "lstm";
        case HeadKind::TextCnn: return "textcnn";
        case HeadKind::Rcnn: return "rcnn";
    }
    throw std::invalid_argument("bad head kind");
}

HeadKind head_kind_from_name(const std::string& name) {
    if (name == "cls_ffn") return HeadKind::ClsFfn;
    if (name == "lstm") return HeadKind::Lstm;
    if (name == "textcnn") return HeadKind::TextCnn;
    if (name == "rcnn") return HeadKind::Rcnn;
    throw std::invalid_argument("unknown head kind: " + name +
                                " (expected cls_ffn|lstm|textcnn|rcnn)");
}

std::string view_mode_name(FeatureViewMode mode) {
    return mode == FeatureViewMode::LastLayer ? "last_layer" : "concat_last_4";
}

FeatureViewMode view_mode_from_name(const std::string& name) {
    if (name == "last_layer") return FeatureViewMode::LastLayer;
    if (name == "concat_last_4") return FeatureViewMode::ConcatLast4;
    throw std::invalid_argument("unknown feature view: " + name +
                                " (expected last_layer|concat_last_4)");
}

void HeadSpec::validate(int seq_len) const {
    auto positive = [](int v, const char* what) {
        if (v < 1) throw std::invalid_argument(std::string("head spec: ") + what + " must be positive");
    };
    positive(ffn_hidden, "ffn_hidden");
    positive(lstm_state, "lstm_state");
    positive(cnn_filters, "cnn_filters");
    positive(rcnn_state, "rcnn_state");
    positive(rcnn_conv_width, "rcnn_conv_width");
    positive(rcnn_filters, "rcnn_filters");
    if (region_sizes.empty()) throw std::invalid_argument("head spec: empty region sizes");
    for (int r : region_sizes) {
        positive(r, "region size");
        if (r > seq_len)
            throw std::invalid_argument("head spec: region size " + std::to_string(r) +
                                        " exceeds SEQ_LEN " + std::to_string(seq_len));
    }
}

int feature_dim(int hidden, FeatureViewMode mode) {
    return mode == FeatureViewMode::LastLayer ? hidden : 4 * hidden;
}

Tensor feature_view(const HiddenStack& stack, FeatureViewMode mode) {
    const int layer_count = static_cast<int>(stack.layers.size());  // L+1
    if (mode == FeatureViewMode::LastLayer) return stack.layers.back();
    const int blocks = layer_count - 1;
    if (blocks < 4)
        throw std::invalid_argument("concat_last_4 requires L >= 4 encoder blocks, got L=" +
                                    std::to_string(blocks));
    std::vector<Tensor> parts(stack.layers.end() - 4, stack.layers.end());
    return concat_cols(parts);
}

void init_head_params(ParamStore& params, const HeadSpec& spec, int d, Rng& rng) {
    switch (spec.kind) {
        case HeadKind::ClsFfn:
            params.add("head.ffn.w1", param_init({d, spec.ffn_hidden}, rng));
            params.add("head.ffn.b1", zeros({1, spec.ffn_hidden}, true));
            params.add("head.out.w", param_init({spec.ffn_hidden, 1}, rng));
            params.add("head.out.b", zeros({1, 1}, true));
            break;
        case HeadKind::Lstm:
            params.add("head.lstm.wx", param_init({d, 4 * spec.lstm_state}, rng));
            params.add("head.lstm.wh", param_init({spec.lstm_state, 4 * spec.lstm_state}, rng));
            params.add("head.lstm.b", zeros({1, 4 * spec.lstm_state}, true));
            params.add("head.out.w", param_init({spec.lstm_state, 1}, rng));
            params.add("head.out.b", zeros({1, 1}, true));
            break;
        case HeadKind::TextCnn:
            for (int r : spec.region_sizes) {
                const std::string p = "head.conv" + std::to_string(r) + ".";
                params.add(p + "w", param_init({r * d, spec.cnn_filters}, rng));
                params.add(p + "b", zeros({1, spec.cnn_filters}, true));
            }
            params.add("head.out.w",
                       param_init({static_cast<int>(spec.region_sizes.size()) * spec.cnn_filters, 1},
                                  rng));
            params.add("head.out.b", zeros({1, 1}, true));
            break;
        case HeadKind::Rcnn:
            for (const char* dir : {"fwd", "bwd"}) {
                const std::string p = std::string("head.rcnn.") + dir + ".";
                params.add(p + "wx", param_init({d, 4 * spec.rcnn_state}, rng));
                params.add(p + "wh", param_init({spec.rcnn_state, 4 * spec.rcnn_state}, rng));
                params.add(p + "b", zeros({1, 4 * spec.rcnn_state}, true));
            }
            params.add("head.rcnn.conv.w",
                       param_init({spec.rcnn_conv_width * (2 * spec.rcnn_state + d),
                                   spec.rcnn_filters},
                                  rng));
            params.add("head.rcnn.conv.b", zeros({1, spec.rcnn_filters}, true));
            params.add("head.out.w", param_init({spec.rcnn_filters, 1}, rng));
            params.add("head.out.b", zeros({1, 1}, true));
            break;
    }
}

namespace {

// Standard LSTM cell over one 1xd input row; gates ordered [i, f, g, o].
struct LstmCell {
    Tensor wx, wh, b;
    int state;

    std::pair<Tensor, Tensor> step(const Tensor& x, const Tensor& h, const Tensor& c) const {
        Tensor gates = add(add(matmul(x, wx), matmul(h, wh)), b);
        Tensor i = sigmoid(slice_cols(gates, 0, state));
        Tensor f = sigmoid(slice_cols(gates, state, 2 * state));
        Tensor g = tanh_op(slice_cols(gates, 2 * state, 3 * state));
        Tensor o = sigmoid(slice_cols(gates, 3 * state, 4 * state));
        Tensor c2 = add(mul(f, c), mul(i, g));
        Tensor h2 = mul(o, tanh_op(c2));
        return {h2, c2};
    }
};

Tensor cls_ffn_logit(const Tensor& features, const ParamStore& params) {
    Tensor cls = slice_rows(features, 0, 1);
    Tensor hidden = tanh_op(add(matmul(cls, params.get("head.ffn.w1")), params.get("head.ffn.b1")));
    return add(matmul(hidden, params.get("head.out.w")), params.get("head.out.b"));
}

Tensor lstm_logit(const Tensor& features, int real_length, const HeadSpec& spec,
                  const ParamStore& params) {
    LstmCell cell{params.get("head.lstm.wx"), params.get("head.lstm.wh"),
                  params.get("head.lstm.b"), spec.lstm_state};
    Tensor h = zeros({1, spec.lstm_state});
    Tensor c = zeros({1, spec.lstm_state});
    for (int t = 0; t < real_length; ++t) {
        auto [h2, c2] = cell.step(slice_rows(features, t, t + 1), h, c);
        h = h2;
        c = c2;
    }
    return add(matmul(h, params.get("head.out.w")), params.get("head.out.b"));
}

Tensor textcnn_logit(const Tensor& features, int real_length, const HeadSpec& spec,
                     const ParamStore& params) {
    std::vector<Tensor> pooled;
    for (int r : spec.region_sizes) {
        Tensor windows = window_rows(features, r);
        Tensor act = relu(add_row(matmul(windows, params.get("head.conv" + std::to_string(r) + ".w")),
                                  params.get("head.conv" + std::to_string(r) + ".b")));
        const int window_count = act->rows();
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(window_count), 0);
        bool any = false;
        for (int p = 0; p < window_count; ++p)
            if (p + r <= real_length) {
                keep[static_cast<std::size_t>(p)] = 1;
                any = true;
            }
        if (!any) {
            // short sequence: fall back to windows touching at least one real token
            for (int p = 0; p < window_count && p < real_length; ++p)
                keep[static_cast<std::size_t>(p)] = 1;
        }
        pooled.push_back(masked_max_pool_rows(act, keep));
    }
    Tensor cat = concat_cols(pooled);
    return add(matmul(cat, params.get("head.out.w")), params.get("head.out.b"));
}

Tensor rcnn_logit(const Tensor& features, int real_length, const HeadSpec& spec,
                  const ParamStore& params) {
    LstmCell fwd{params.get("head.rcnn.fwd.wx"), params.get("head.rcnn.fwd.wh"),
                 params.get("head.rcnn.fwd.b"), spec.rcnn_state};
    LstmCell bwd{params.get("head.rcnn.bwd.wx"), params.get("head.rcnn.bwd.wh"),
                 params.get("head.rcnn.bwd.b"), spec.rcnn_state};

    std::vector<Tensor> left(static_cast<std::size_t>(real_length));
    std::vector<Tensor> right(static_cast<std::size_t>(real_length));
    Tensor h = zeros({1, spec.rcnn_state});
    Tensor c = zeros({1, spec.rcnn_state});
    for (int t = 0; t < real_length; ++t) {
        auto [h2, c2] = fwd.step(slice_rows(features, t, t + 1), h, c);
        left[static_cast<std::size_t>(t)] = h2;
        h = h2;
        c = c2;
    }
    h = zeros({1, spec.rcnn_state});
    c = zeros({1, spec.rcnn_state});
    for (int t = real_length - 1; t >= 0; --t) {
        auto [h2, c2] = bwd.step(slice_rows(features, t, t + 1), h, c);
        right[static_cast<std::size_t>(t)] = h2;
        h = h2;
        c = c2;
    }

    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(real_length));
    for (int t = 0; t < real_length; ++t)
        rows.push_back(concat_cols({left[static_cast<std::size_t>(t)],
                                    slice_rows(features, t, t + 1),
                                    right[static_cast<std::size_t>(t)]}));
    Tensor ctx = concat_rows(rows);  // real_length x (2s + d)

    const int width = spec.rcnn_conv_width;
    if (ctx->rows() < width) {
        // zero-extend very short sequences so one full window exists
        Tensor pad = zeros({width - ctx->rows(), ctx->cols()});
        ctx = concat_rows({ctx, pad});
    }
    Tensor windows = window_rows(ctx, width);
    Tensor act = relu(add_row(matmul(windows, params.get("head.rcnn.conv.w")),
                              params.get("head.rcnn.conv.b")));
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(act->rows()), 1);
    Tensor pooled = masked_max_pool_rows(act, keep);
    return add(matmul(pooled, params.get("head.out.w")), params.get("head.out.b"));
}

}  // namespace

Tensor head_logit(const Tensor& features, const std::vector<std::uint8_t>& mask, int real_length,
                  const HeadSpec& spec, const ParamStore& params) {
    if (features->rows() != static_cast<int>(mask.size()))
        throw std::invalid_argument("head_logit: mask length does not match feature rows");
    if (real_length < 1 || real_length > features->rows())
        throw std::invalid_argument("head_logit: real_length " + std::to_string(real_length) +
                                    " out of range");
    spec.validate(features->rows());
    switch (spec.kind) {
        case HeadKind::ClsFfn: return cls_ffn_logit(features, params);
        case HeadKind::Lstm: return lstm_logit(features, real_length, spec, params);
        case HeadKind::TextCnn: return textcnn_logit(features, real_length, spec, params);
        case HeadKind::Rcnn: return rcnn_logit(features, real_length, spec, params);
    }
    throw std::invalid_argument("bad head kind");
}

Tensor head_logit(const HiddenStack& stack, const HeadSpec& spec, const ParamStore& params) {
    Tensor features = feature_view(stack, spec.view);
    return head_logit(features, stack.attention_mask, stack.real_length, spec, params);
}

Classification classify(double logit) {
    Classification result;
    result.probability =
        logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
    result.positive = result.probability >= 0.5;
    return result;
}

}  // namespace sa
