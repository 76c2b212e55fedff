#include "sa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace sa {

namespace {

Precision g_precision = Precision::f32;

void quantize_in_place(std::vector<double>& v) {
    if (g_precision == Precision::f32) {
        for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    }
}

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t->requires_grad) return true;
    return false;
}

void check_rank2(const Tensor& t, const char* what) {
    if (t->shape.size() != 2)
        throw std::invalid_argument(std::string(what) + ": expected rank-2 tensor, got shape " +
                                    shape_to_string(t->shape));
}

}  // namespace

Precision precision() { return g_precision; }
void set_precision(Precision p) { g_precision = p; }

std::string shape_to_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

std::int64_t element_count(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

int TensorNode::rows() const { return shape.empty() ? 1 : shape[0]; }
int TensorNode::cols() const { return shape.size() < 2 ? 1 : shape[1]; }

double TensorNode::scalar() const {
    if (values.size() != 1)
        throw std::invalid_argument("scalar() on tensor of shape " + shape_to_string(shape));
    return values[0];
}

double& TensorNode::at(int r, int c) { return values[static_cast<std::size_t>(r) * cols() + c]; }
double TensorNode::at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols() + c];
}

void TensorNode::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void TensorNode::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Tensor make_tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) throw std::invalid_argument("non-positive dimension in shape " + shape_to_string(shape));
    if (element_count(shape) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not match shape " + shape_to_string(shape));
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    quantize_in_place(t->values);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

Tensor zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(element_count(shape)), 0.0);
    return make_tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(element_count(shape)), value);
    return make_tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor scalar_tensor(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

Tensor param_init(Shape shape, Rng& rng, double stddev) {
    std::vector<double> v(static_cast<std::size_t>(element_count(shape)));
    for (double& x : v) x = rng.next_truncated_normal(stddev);
    return make_tensor(std::move(shape), std::move(v), true);
}

namespace {

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(TensorNode&)> backward_fn) {
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    quantize_in_place(t->values);
    t->requires_grad = any_requires_grad(parents);
    if (t->requires_grad) {
        t->ensure_grad();
        t->parents = std::move(parents);
        t->backward_fn = std::move(backward_fn);
    }
    return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a->shape != b->shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_to_string(a->shape) + " vs " + shape_to_string(b->shape));
}

void accum(const Tensor& p, std::size_t i, double g) {
    if (p->requires_grad) p->grad[i] += g;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] + b->values[i];
    return make_result(a->shape, std::move(v), {a, b}, [a, b](TensorNode& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            accum(a, i, out.grad[i]);
            accum(b, i, out.grad[i]);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] - b->values[i];
    return make_result(a->shape, std::move(v), {a, b}, [a, b](TensorNode& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            accum(a, i, out.grad[i]);
            accum(b, i, -out.grad[i]);
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] * b->values[i];
    return make_result(a->shape, std::move(v), {a, b}, [a, b](TensorNode& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            accum(a, i, out.grad[i] * b->values[i]);
            accum(b, i, out.grad[i] * a->values[i]);
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] * s;
    return make_result(a->shape, std::move(v), {a}, [a, s](TensorNode& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) accum(a, i, out.grad[i] * s);
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul lhs");
    check_rank2(b, "matmul rhs");
    const int m = a->shape[0], k = a->shape[1], k2 = b->shape[0], n = b->shape[1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                    shape_to_string(a->shape) + " x " + shape_to_string(b->shape));
    std::vector<double> v(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a->values[static_cast<std::size_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* brow = &b->values[static_cast<std::size_t>(p) * n];
            double* vrow = &v[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) vrow[j] += av * brow[j];
        }
    }
    return make_result({m, n}, std::move(v), {a, b}, [a, b, m, k, n](TensorNode& out) {
        // dA = dOut * B^T, dB = A^T * dOut
        if (a->requires_grad) {
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double g = 0.0;
                    const double* orow = &out.grad[static_cast<std::size_t>(i) * n];
                    const double* brow = &b->values[static_cast<std::size_t>(p) * n];
                    for (int j = 0; j < n; ++j) g += orow[j] * brow[j];
                    a->grad[static_cast<std::size_t>(i) * k + p] += g;
                }
        }
        if (b->requires_grad) {
            for (int i = 0; i < m; ++i) {
                const double* orow = &out.grad[static_cast<std::size_t>(i) * n];
                const double* arow = &a->values[static_cast<std::size_t>(i) * k];
                for (int p = 0; p < k; ++p) {
                    const double av = arow[p];
                    if (av == 0.0) continue;
                    double* brow = &b->grad[static_cast<std::size_t>(p) * n];
                    for (int j = 0; j < n; ++j) brow[j] += av * orow[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const int r = a->shape[0], c = a->shape[1];
    std::vector<double> v(a->values.size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            v[static_cast<std::size_t>(j) * r + i] = a->values[static_cast<std::size_t>(i) * c + j];
    return make_result({c, r}, std::move(v), {a}, [a, r, c](TensorNode& out) {
        if (!a->requires_grad) return;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                a->grad[static_cast<std::size_t>(i) * c + j] +=
                    out.grad[static_cast<std::size_t>(j) * r + i];
    });
}

Tensor add_row(const Tensor& m, const Tensor& row) {
    check_rank2(m, "add_row matrix");
    check_rank2(row, "add_row row");
    if (row->shape[0] != 1 || row->shape[1] != m->shape[1])
        throw std::invalid_argument("add_row: bias shape " + shape_to_string(row->shape) +
                                    " does not broadcast over " + shape_to_string(m->shape));
    const int r = m->shape[0], c = m->shape[1];
    std::vector<double> v(m->values.size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            v[static_cast<std::size_t>(i) * c + j] =
                m->values[static_cast<std::size_t>(i) * c + j] + row->values[j];
    return make_result(m->shape, std::move(v), {m, row}, [m, row, r, c](TensorNode& out) {
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                const double g = out.grad[static_cast<std::size_t>(i) * c + j];
                accum(m, static_cast<std::size_t>(i) * c + j, g);
                accum(row, static_cast<std::size_t>(j), g);
            }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const int r = parts[0]->rows();
    int total = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_cols");
        if (p->shape[0] != r)
            throw std::invalid_argument("concat_cols: row count mismatch");
        total += p->shape[1];
    }
    std::vector<double> v(static_cast<std::size_t>(r) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int c = p->shape[1];
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                v[static_cast<std::size_t>(i) * total + off + j] = p->at(i, j);
        off += c;
    }
    return make_result({r, total}, std::move(v), parts, [parts, r, total](TensorNode& out) {
        int off2 = 0;
        for (const auto& p : parts) {
            const int c = p->shape[1];
            if (p->requires_grad)
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        p->grad[static_cast<std::size_t>(i) * c + j] +=
                            out.grad[static_cast<std::size_t>(i) * total + off2 + j];
            off2 += c;
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const int c = parts[0]->cols();
    int total = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_rows");
        if (p->shape[1] != c)
            throw std::invalid_argument("concat_rows: column count mismatch");
        total += p->shape[0];
    }
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(total) * c);
    for (const auto& p : parts) v.insert(v.end(), p->values.begin(), p->values.end());
    return make_result({total, c}, std::move(v), parts, [parts](TensorNode& out) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad)
                for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += out.grad[off + i];
            off += p->values.size();
        }
    });
}

Tensor slice_cols(const Tensor& m, int begin, int end) {
    check_rank2(m, "slice_cols");
    const int r = m->shape[0], c = m->shape[1];
    if (begin < 0 || end > c || begin >= end)
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(begin) + "," +
                                    std::to_string(end) + ") for " + shape_to_string(m->shape));
    const int w = end - begin;
    std::vector<double> v(static_cast<std::size_t>(r) * w);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) v[static_cast<std::size_t>(i) * w + j] = m->at(i, begin + j);
    return make_result({r, w}, std::move(v), {m}, [m, begin, r, w](TensorNode& out) {
        if (!m->requires_grad) return;
        const int c2 = m->shape[1];
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j)
                m->grad[static_cast<std::size_t>(i) * c2 + begin + j] +=
                    out.grad[static_cast<std::size_t>(i) * w + j];
    });
}

Tensor slice_rows(const Tensor& m, int begin, int end) {
    check_rank2(m, "slice_rows");
    const int r = m->shape[0], c = m->shape[1];
    if (begin < 0 || end > r || begin >= end)
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(begin) + "," +
                                    std::to_string(end) + ") for " + shape_to_string(m->shape));
    const int h = end - begin;
    std::vector<double> v(m->values.begin() + static_cast<std::size_t>(begin) * c,
                          m->values.begin() + static_cast<std::size_t>(end) * c);
    return make_result({h, c}, std::move(v), {m}, [m, begin, h, c](TensorNode& out) {
        if (!m->requires_grad) return;
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * c; ++i)
            m->grad[static_cast<std::size_t>(begin) * c + i] += out.grad[i];
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a->values) s += x;
    return make_result({1}, {s}, {a}, [a](TensorNode& out) {
        if (!a->requires_grad) return;
        for (double& g : a->grad) g += out.grad[0];
    });
}

Tensor add_n(const std::vector<Tensor>& terms) {
    if (terms.empty()) throw std::invalid_argument("add_n: no terms");
    for (const auto& t : terms) check_same_shape(terms[0], t, "add_n");
    std::vector<double> v(terms[0]->values.size(), 0.0);
    for (const auto& t : terms)
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += t->values[i];
    return make_result(terms[0]->shape, std::move(v), terms, [terms](TensorNode& out) {
        for (const auto& t : terms)
            if (t->requires_grad)
                for (std::size_t i = 0; i < out.grad.size(); ++i) t->grad[i] += out.grad[i];
    });
}

namespace {

Tensor unary_op(const Tensor& a, const std::function<double(double)>& f,
                const std::function<double(double, double)>& df_from_xy) {
    std::vector<double> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(a->values[i]);
    return make_result(a->shape, std::move(v), {a}, [a, df_from_xy](TensorNode& out) {
        if (!a->requires_grad) return;
        for (std::size_t i = 0; i < out.grad.size(); ++i)
            a->grad[i] += out.grad[i] * df_from_xy(a->values[i], out.values[i]);
    });
}

}  // namespace

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_op(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a,
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& a) {
    // tanh approximation
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c = 0.044715;
    return unary_op(
        a,
        [](double x) {
            const double u = k * (x + c * x * x * x);
            return 0.5 * x * (1.0 + std::tanh(u));
        },
        [](double x, double) {
            const double u = k * (x + c * x * x * x);
            const double t = std::tanh(u);
            const double du = k * (1.0 + 3.0 * c * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        });
}

Tensor softmax_rows(const Tensor& m, const std::vector<std::uint8_t>* keep_cols) {
    check_rank2(m, "softmax_rows");
    const int r = m->shape[0], c = m->shape[1];
    if (keep_cols) {
        if (static_cast<int>(keep_cols->size()) != c)
            throw std::invalid_argument("softmax_rows: mask length " +
                                        std::to_string(keep_cols->size()) + " vs " +
                                        std::to_string(c) + " columns");
        bool any = false;
        for (auto k : *keep_cols) any = any || k;
        if (!any) throw std::invalid_argument("softmax_rows: fully masked row mask");
    }
    std::vector<std::uint8_t> keep =
        keep_cols ? *keep_cols : std::vector<std::uint8_t>(static_cast<std::size_t>(c), 1);
    std::vector<double> v(m->values.size(), 0.0);
    for (int i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j)
            if (keep[j]) mx = std::max(mx, m->at(i, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j)
            if (keep[j]) {
                const double e = std::exp(m->at(i, j) - mx);
                v[static_cast<std::size_t>(i) * c + j] = e;
                z += e;
            }
        for (int j = 0; j < c; ++j) v[static_cast<std::size_t>(i) * c + j] /= z;
    }
    return make_result(m->shape, std::move(v), {m}, [m, keep, r, c](TensorNode& out) {
        if (!m->requires_grad) return;
        for (int i = 0; i < r; ++i) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j)
                dot += out.grad[static_cast<std::size_t>(i) * c + j] *
                       out.values[static_cast<std::size_t>(i) * c + j];
            for (int j = 0; j < c; ++j)
                if (keep[j]) {
                    const double s = out.values[static_cast<std::size_t>(i) * c + j];
                    m->grad[static_cast<std::size_t>(i) * c + j] +=
                        s * (out.grad[static_cast<std::size_t>(i) * c + j] - dot);
                }
        }
    });
}

Tensor layer_norm(const Tensor& m, const Tensor& gain, const Tensor& bias, double eps) {
    check_rank2(m, "layer_norm");
    const int r = m->shape[0], c = m->shape[1];
    if (c < 2) throw std::invalid_argument("layer_norm: degenerate last dimension " + std::to_string(c));
    if (gain->rows() != 1 || gain->cols() != c || bias->rows() != 1 || bias->cols() != c)
        throw std::invalid_argument("layer_norm: gain/bias must be 1x" + std::to_string(c));
    std::vector<double> v(m->values.size());
    std::vector<double> means(r), inv_stds(r);
    for (int i = 0; i < r; ++i) {
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += m->at(i, j);
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = m->at(i, j) - mean;
            var += d * d;
        }
        var /= c;
        const double inv = 1.0 / std::sqrt(var + eps);
        means[i] = mean;
        inv_stds[i] = inv;
        for (int j = 0; j < c; ++j)
            v[static_cast<std::size_t>(i) * c + j] =
                (m->at(i, j) - mean) * inv * gain->values[j] + bias->values[j];
    }
    return make_result(
        m->shape, std::move(v), {m, gain, bias},
        [m, gain, bias, r, c, means, inv_stds](TensorNode& out) {
            for (int i = 0; i < r; ++i) {
                const double mean = means[i], inv = inv_stds[i];
                // xhat_j and reductions over the row
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int j = 0; j < c; ++j) {
                    const double xhat = (m->at(i, j) - mean) * inv;
                    const double dy = out.grad[static_cast<std::size_t>(i) * c + j];
                    const double dxhat = dy * gain->values[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    accum(gain, static_cast<std::size_t>(j), dy * xhat);
                    accum(bias, static_cast<std::size_t>(j), dy);
                }
                if (m->requires_grad) {
                    for (int j = 0; j < c; ++j) {
                        const double xhat = (m->at(i, j) - mean) * inv;
                        const double dy = out.grad[static_cast<std::size_t>(i) * c + j];
                        const double dxhat = dy * gain->values[j];
                        m->grad[static_cast<std::size_t>(i) * c + j] +=
                            inv * (dxhat - sum_dxhat / c - xhat * sum_dxhat_xhat / c);
                    }
                }
            }
        });
}

Tensor logistic_loss(const Tensor& logit, int label) {
    if (label != 0 && label != 1)
        throw std::invalid_argument("logistic_loss: label must be 0 or 1, got " + std::to_string(label));
    if (logit->size() != 1)
        throw std::invalid_argument("logistic_loss: logit must be scalar, got shape " +
                                    shape_to_string(logit->shape));
    const double z = logit->values[0];
    // -[y ln s + (1-y) ln(1-s)] = softplus(z) - y z, softplus in log-space
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    const double loss = softplus - label * z;
    return make_result({1}, {loss}, {logit}, [logit, z, label](TensorNode& out) {
        if (!logit->requires_grad) return;
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        logit->grad[0] += out.grad[0] * (s - label);
    });
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    check_rank2(table, "embedding_rows");
    const int vocab = table->shape[0], h = table->shape[1];
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw std::invalid_argument("embedding_rows: id " + std::to_string(id) +
                                        " out of range for vocab " + std::to_string(vocab));
    const int n = static_cast<int>(ids.size());
    std::vector<double> v(static_cast<std::size_t>(n) * h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < h; ++j)
            v[static_cast<std::size_t>(i) * h + j] = table->at(ids[i], j);
    return make_result({n, h}, std::move(v), {table}, [table, ids, h](TensorNode& out) {
        if (!table->requires_grad) return;
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < h; ++j)
                table->grad[static_cast<std::size_t>(ids[i]) * h + j] +=
                    out.grad[i * h + j];
    });
}

Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<std::uint8_t>& include) {
    check_rank2(logits, "masked_cross_entropy");
    const int n = logits->shape[0], v = logits->shape[1];
    if (static_cast<int>(targets.size()) != n || static_cast<int>(include.size()) != n)
        throw std::invalid_argument("masked_cross_entropy: targets/include length must match rows");
    int k = 0;
    for (int i = 0; i < n; ++i)
        if (include[i]) {
            if (targets[i] < 0 || targets[i] >= v)
                throw std::invalid_argument("masked_cross_entropy: target out of range");
            ++k;
        }
    if (k == 0) throw std::invalid_argument("masked_cross_entropy: no included rows");
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!include[i]) continue;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < v; ++j) mx = std::max(mx, logits->at(i, j));
        double z = 0.0;
        for (int j = 0; j < v; ++j) z += std::exp(logits->at(i, j) - mx);
        total += mx + std::log(z) - logits->at(i, targets[i]);
    }
    const double loss = total / k;
    return make_result({1}, {loss}, {logits}, [logits, targets, include, n, v, k](TensorNode& out) {
        if (!logits->requires_grad) return;
        const double g = out.grad[0] / k;
        for (int i = 0; i < n; ++i) {
            if (!include[i]) continue;
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < v; ++j) mx = std::max(mx, logits->at(i, j));
            double z = 0.0;
            for (int j = 0; j < v; ++j) z += std::exp(logits->at(i, j) - mx);
            for (int j = 0; j < v; ++j) {
                const double p = std::exp(logits->at(i, j) - mx) / z;
                logits->grad[static_cast<std::size_t>(i) * v + j] +=
                    g * (p - (j == targets[i] ? 1.0 : 0.0));
            }
        }
    });
}

Tensor masked_max_pool_rows(const Tensor& m, const std::vector<std::uint8_t>& keep) {
    check_rank2(m, "masked_max_pool_rows");
    const int r = m->shape[0], c = m->shape[1];
    if (static_cast<int>(keep.size()) != r)
        throw std::invalid_argument("masked_max_pool_rows: mask length must match rows");
    bool any = false;
    for (auto k : keep) any = any || k;
    if (!any) throw std::invalid_argument("masked_max_pool_rows: no rows kept");
    std::vector<double> v(static_cast<std::size_t>(c), -std::numeric_limits<double>::infinity());
    std::vector<int> argmax(static_cast<std::size_t>(c), -1);
    for (int i = 0; i < r; ++i) {
        if (!keep[i]) continue;
        for (int j = 0; j < c; ++j) {
            const double x = m->at(i, j);
            if (x > v[j]) {
                v[j] = x;
                argmax[j] = i;
            }
        }
    }
    return make_result({1, c}, std::move(v), {m}, [m, argmax, c](TensorNode& out) {
        if (!m->requires_grad) return;
        for (int j = 0; j < c; ++j)
            m->grad[static_cast<std::size_t>(argmax[j]) * c + j] += out.grad[j];
    });
}

Tensor window_rows(const Tensor& m, int width) {
    check_rank2(m, "window_rows");
    const int r = m->shape[0], c = m->shape[1];
    if (width < 1 || width > r)
        throw std::invalid_argument("window_rows: width " + std::to_string(width) +
                                    " invalid for " + std::to_string(r) + " rows");
    const int wr = r - width + 1, wc = width * c;
    std::vector<double> v(static_cast<std::size_t>(wr) * wc);
    for (int i = 0; i < wr; ++i)
        for (int k = 0; k < width; ++k)
            for (int j = 0; j < c; ++j)
                v[static_cast<std::size_t>(i) * wc + k * c + j] = m->at(i + k, j);
    return make_result({wr, wc}, std::move(v), {m}, [m, width, wr, c](TensorNode& out) {
        if (!m->requires_grad) return;
        const int wc2 = width * c;
        for (int i = 0; i < wr; ++i)
            for (int k = 0; k < width; ++k)
                for (int j = 0; j < c; ++j)
                    m->grad[static_cast<std::size_t>(i + k) * c + j] +=
                        out.grad[static_cast<std::size_t>(i) * wc2 + k * c + j];
    });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
    if (!training || rate <= 0.0) return a;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    const double inv_keep = 1.0 / (1.0 - rate);
    std::vector<std::uint8_t> keep(a->values.size());
    std::vector<double> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        keep[i] = rng.next_double() >= rate ? 1 : 0;
        v[i] = keep[i] ? a->values[i] * inv_keep : 0.0;
    }
    return make_result(a->shape, std::move(v), {a}, [a, keep, inv_keep](TensorNode& out) {
        if (!a->requires_grad) return;
        for (std::size_t i = 0; i < out.grad.size(); ++i)
            if (keep[i]) a->grad[i] += out.grad[i] * inv_keep;
    });
}

void backward(const Tensor& loss) {
    if (loss->size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_to_string(loss->shape));
    if (!loss->requires_grad) return;

    // reverse topological order
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

void adam_step(const std::vector<Tensor>& params, AdamState& state) {
    if (state.first_moment.empty()) {
        state.first_moment.resize(params.size());
        state.second_moment.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.first_moment[i].assign(params[i]->values.size(), 0.0);
            state.second_moment[i].assign(params[i]->values.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw std::invalid_argument("adam_step: parameter list changed size");
    for (const auto& p : params)
        if (p->grad.size() != p->values.size())
            throw std::invalid_argument("adam_step: parameter without populated gradient");

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (m.size() != p.values.size())
            throw std::invalid_argument("adam_step: moment/parameter shape mismatch");
        for (std::size_t j = 0; j < p.values.size(); ++j) {
            const double g = p.grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p.values[j] = quantize(
                p.values[j] - state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon),
                precision());
        }
    }
}

double grad_check(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& params,
                  double eps, int samples_per_param, Rng* rng) {
    for (const auto& p : params) p->zero_grad();
    Tensor loss = loss_fn();
    if (!std::isfinite(loss->scalar()))
        throw std::runtime_error("grad_check: non-finite loss");
    backward(loss);

    Rng local(12345);
    Rng& r = rng ? *rng : local;
    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        const std::int64_t n = p.size();
        const int samples = samples_per_param > 0
                                ? static_cast<int>(std::min<std::int64_t>(samples_per_param, n))
                                : static_cast<int>(n);
        for (int s = 0; s < samples; ++s) {
            const std::size_t idx =
                samples_per_param > 0 && samples < n
                    ? static_cast<std::size_t>(r.next_below(static_cast<std::uint64_t>(n)))
                    : static_cast<std::size_t>(s);
            const double saved = p.values[idx];
            const double analytic = p.grad[idx];
            auto relative_error = [&](double step) {
                p.values[idx] = saved + step;
                const double fp = loss_fn()->scalar();
                p.values[idx] = saved - step;
                const double fm = loss_fn()->scalar();
                p.values[idx] = saved;
                if (!std::isfinite(fp) || !std::isfinite(fm))
                    throw std::runtime_error("grad_check: non-finite loss at parameter " +
                                             std::to_string(pi));
                const double numeric = (fp - fm) / (2.0 * step);
                // the floor keeps float cancellation noise on near-zero
                // gradients from masquerading as a large relative error
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
                return std::abs(analytic - numeric) / denom;
            };
            double rel = relative_error(eps);
            // a large mismatch can be a relu/max-pool kink inside the step
            // interval rather than a wrong gradient; shrinking the step moves
            // the interval off the kink, while a real bug stays large
            if (rel > 1e-6) rel = std::min(rel, relative_error(eps / 4.0));
            if (rel > 1e-6) rel = std::min(rel, relative_error(eps / 16.0));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace sa
