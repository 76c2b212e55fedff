#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sa/rng.hpp"

namespace sa {

// Global numeric mode. Training runs in f32; the gradient checker switches to
// f64. In f32 mode every op output is rounded through IEEE single precision,
// so serialized float32 checkpoints round-trip exactly.
enum class Precision { f32, f64 };

Precision precision();
void set_precision(Precision p);

inline double quantize(double x, Precision p) {
    return p == Precision::f32 ? static_cast<double>(static_cast<float>(x)) : x;
}

using Shape = std::vector<int>;

std::string shape_to_string(const Shape& shape);
std::int64_t element_count(const Shape& shape);

class TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

// One node of the dynamically-recorded computation graph. Values are written
// once on the forward pass; grad is the only mutable slot afterwards and is
// accumulated additively by backward().
class TensorNode : public std::enable_shared_from_this<TensorNode> {
public:
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;       // same length as values when grad-tracked
    bool requires_grad = false;

    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backward_fn;  // distributes this->grad

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
    int rows() const;
    int cols() const;
    double scalar() const;          // requires a single-element tensor

    double& at(int r, int c);
    double at(int r, int c) const;

    void ensure_grad();
    void zero_grad();
};

Tensor make_tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
Tensor zeros(Shape shape, bool requires_grad = false);
Tensor full(Shape shape, double value, bool requires_grad = false);
Tensor scalar_tensor(double value, bool requires_grad = false);

// Parameter initialized with truncated normal, std 0.02 unless overridden.
Tensor param_init(Shape shape, Rng& rng, double stddev = 0.02);

// --- differentiable ops -----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);       // rank-2 only
Tensor transpose(const Tensor& a);                     // rank-2
Tensor add_row(const Tensor& m, const Tensor& row);    // broadcast 1xC over rows
Tensor concat_cols(const std::vector<Tensor>& parts);  // equal row counts
Tensor concat_rows(const std::vector<Tensor>& parts);  // equal col counts
Tensor slice_cols(const Tensor& m, int begin, int end);
Tensor slice_rows(const Tensor& m, int begin, int end);
Tensor sum_all(const Tensor& a);                       // -> scalar
Tensor add_n(const std::vector<Tensor>& terms);

Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);

// Row-wise softmax with optional per-column keep mask (true = keep). Masked
// columns get exactly 0. A fully masked row is an error.
Tensor softmax_rows(const Tensor& m, const std::vector<std::uint8_t>* keep_cols = nullptr);

// Per-row normalization over the last (column) dimension, then gain/bias.
// gain and bias are 1xC.
Tensor layer_norm(const Tensor& m, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Binary cross-entropy of a single logit against label in {0,1}, computed in
// log-space so |logit| up to a few hundred stays finite.
Tensor logistic_loss(const Tensor& logit, int label);

// Gather rows of table (VxH) by id; gradient scatter-adds into the table.
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);

// Mean softmax cross-entropy of logits (NxV) against targets, restricted to
// rows with include[i] != 0. At least one row must be included.
Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<std::uint8_t>& include);

// Column-wise max over rows with keep[r] != 0; result 1xC. At least one row
// must be kept.
Tensor masked_max_pool_rows(const Tensor& m, const std::vector<std::uint8_t>& keep);

// Sliding windows of `width` consecutive rows flattened into one row each:
// (R x C) -> (R-width+1 x width*C). The im2row step of a 1-d convolution.
Tensor window_rows(const Tensor& m, int width);

// Inverted dropout. Identity when rate == 0 or training == false.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

// --- backward & optimizer ---------------------------------------------------

// Reverse topological sweep from a scalar loss. Gradients accumulate; call
// zero_grad on parameters between steps or they double up.
void backward(const Tensor& loss);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// One Adam update over params. Moments are kept positionally, so the param
// list must be stable across calls. Every param must carry a populated grad.
void adam_step(const std::vector<Tensor>& params, AdamState& state);

// Central-difference gradient check. Evaluates loss_fn (which must rebuild the
// graph from the current parameter values) and compares analytic gradients of
// up to samples_per_param coordinates per parameter against
// (f(x+eps)-f(x-eps))/(2 eps). Returns the max relative error.
double grad_check(const std::function<Tensor()>& loss_fn,
                  const std::vector<Tensor>& params,
                  double eps = 1e-4,
                  int samples_per_param = 6,
                  Rng* rng = nullptr);

}  // namespace sa
