#pragma once

#include <string>
#include <vector>

#include "sa/encoder.hpp"
#include "sa/tensor.hpp"

namespace sa {

enum class FeatureViewMode { LastLayer, ConcatLast4 };
enum class HeadKind { ClsFfn, Lstm, TextCnn, Rcnn };

std::string head_kind_name(HeadKind kind);        // cls_ffn | lstm | textcnn | rcnn
HeadKind head_kind_from_name(const std::string& name);
std::string view_mode_name(FeatureViewMode mode); // last_layer | concat_last_4
FeatureViewMode view_mode_from_name(const std::string& name);

struct HeadSpec {
    HeadKind kind = HeadKind::ClsFfn;
    FeatureViewMode view = FeatureViewMode::LastLayer;
    int ffn_hidden = 64;                     // CLS head hidden width
    int lstm_state = 64;
    int cnn_filters = 25;                    // per region size
    std::vector<int> region_sizes = {2, 3, 4, 5};
    int rcnn_state = 32;
    int rcnn_conv_width = 1;
    int rcnn_filters = 64;

    void validate(int seq_len) const;
};

int feature_dim(int hidden, FeatureViewMode mode);

// LAST_LAYER: layer L. CONCAT_LAST_4: layers L-3..L concatenated per token in
// ascending layer order; requires L >= 4.
Tensor feature_view(const HiddenStack& stack, FeatureViewMode mode);

// Head parameters are registered under a "head." prefix; d is the per-token
// feature width the head will consume.
void init_head_params(ParamStore& params, const HeadSpec& spec, int d, Rng& rng);

// Maps a feature matrix (seq_len x d) with its mask to one sentiment logit.
// This single entry point serves both the encoder feature views and the
// static-embedding baselines.
Tensor head_logit(const Tensor& features, const std::vector<std::uint8_t>& mask, int real_length,
                  const HeadSpec& spec, const ParamStore& params);

Tensor head_logit(const HiddenStack& stack, const HeadSpec& spec, const ParamStore& params);

struct Classification {
    bool positive = false;
    double probability = 0.0;  // sigma(logit)
};

// probability = sigma(logit); positive iff probability >= 0.5.
Classification classify(double logit);

}  // namespace sa
