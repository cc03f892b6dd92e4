#include "mfconvtr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "mfconvtr/errors.hpp"

namespace mfconvtr {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ConfigError("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

// Decompose a shape around one axis into [outer, len, inner].
struct AxisView {
    std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw ConfigError("axis out of range");
    AxisView v;
    for (int i = 0; i < axis; ++i) v.outer *= static_cast<std::size_t>(shape[i]);
    v.len = static_cast<std::size_t>(shape[axis]);
    for (std::size_t i = axis + 1; i < shape.size(); ++i)
        v.inner *= static_cast<std::size_t>(shape[i]);
    return v;
}

TensorPtr make_result(std::vector<int> shape, std::vector<TensorPtr> parents) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    auto out = Tensor::zeros(std::move(shape), rg);
    out->parents = std::move(parents);
    return out;
}

}  // namespace

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto t = TensorPtr(new Tensor());
    const std::size_t n = shape_product(shape);
    t->shape = std::move(shape);
    t->data.assign(n, 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(n, 0.0);
    return t;
}

TensorPtr Tensor::from_data(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad) {
    const std::size_t n = shape_product(shape);
    if (values.size() != n)
        throw ConfigError("tensor data length does not match shape");
    auto t = TensorPtr(new Tensor());
    t->shape = std::move(shape);
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(n, 0.0);
    return t;
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

double Tensor::value() const {
    if (!is_scalar()) throw UsageError("value() called on a non-scalar tensor");
    return data[0];
}

void Tensor::zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
}

ComputationRecord record_from(const TensorPtr& root) {
    ComputationRecord order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

void backward(const TensorPtr& loss) {
    if (!loss->is_scalar())
        throw UsageError("backward() requires a scalar loss");
    ComputationRecord record = record_from(loss);
    if (loss->requires_grad) loss->grad[0] = 1.0;
    for (auto it = record.rbegin(); it != record.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

namespace ops {

TensorPtr conv1d(const TensorPtr& input, const TensorPtr& weight,
                 const TensorPtr& bias, int dilation) {
    if (input->ndim() != 2) throw ConfigError("conv1d input must be [C_in, T]");
    if (weight->ndim() != 3) throw ConfigError("conv1d weight must be [C_out, C_in, k]");
    if (bias->ndim() != 1) throw ConfigError("conv1d bias must be [C_out]");
    const int c_in = input->dim(0), t_len = input->dim(1);
    const int c_out = weight->dim(0), k = weight->dim(2);
    if (weight->dim(1) != c_in)
        throw ConfigError("conv1d weight C_in does not match input channels");
    if (bias->dim(0) != c_out) throw ConfigError("conv1d bias length mismatch");
    if (k % 2 == 0) throw ConfigError("conv1d kernel size must be odd");
    if (dilation < 1) throw ConfigError("conv1d dilation must be positive");

    auto out = make_result({c_out, t_len}, {input, weight, bias});
    const int half = (k - 1) / 2;
    const double* in = input->data.data();
    const double* w = weight->data.data();
    const double* b = bias->data.data();
    double* o = out->data.data();

    for (int c = 0; c < c_out; ++c) {
        double* orow = o + static_cast<std::size_t>(c) * t_len;
        std::fill(orow, orow + t_len, b[c]);
        for (int i = 0; i < c_in; ++i) {
            const double* irow = in + static_cast<std::size_t>(i) * t_len;
            const double* wrow = w + (static_cast<std::size_t>(c) * c_in + i) * k;
            for (int j = 0; j < k; ++j) {
                const int off = (j - half) * dilation;
                const double wv = wrow[j];
                const int t0 = std::max(0, -off);
                const int t1 = std::min(t_len, t_len - off);
                for (int t = t0; t < t1; ++t) orow[t] += wv * irow[t + off];
            }
        }
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ip = input.get();
        Tensor* wp = weight.get();
        Tensor* bp = bias.get();
        out->backward_fn = [op, ip, wp, bp, c_in, c_out, t_len, k, half, dilation] {
            const double* g = op->grad.data();
            if (bp->requires_grad) {
                double* db = bp->grad.data();
                for (int c = 0; c < c_out; ++c) {
                    const double* grow = g + static_cast<std::size_t>(c) * t_len;
                    double acc = 0.0;
                    for (int t = 0; t < t_len; ++t) acc += grow[t];
                    db[c] += acc;
                }
            }
            if (wp->requires_grad) {
                const double* in = ip->data.data();
                double* dw = wp->grad.data();
                for (int c = 0; c < c_out; ++c) {
                    const double* grow = g + static_cast<std::size_t>(c) * t_len;
                    for (int i = 0; i < c_in; ++i) {
                        const double* irow = in + static_cast<std::size_t>(i) * t_len;
                        double* dwrow = dw + (static_cast<std::size_t>(c) * c_in + i) * k;
                        for (int j = 0; j < k; ++j) {
                            const int off = (j - half) * dilation;
                            const int t0 = std::max(0, -off);
                            const int t1 = std::min(t_len, t_len - off);
                            // Four-lane accumulation in a fixed order.
                            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
                            int t = t0;
                            for (; t + 4 <= t1; t += 4) {
                                acc0 += grow[t] * irow[t + off];
                                acc1 += grow[t + 1] * irow[t + 1 + off];
                                acc2 += grow[t + 2] * irow[t + 2 + off];
                                acc3 += grow[t + 3] * irow[t + 3 + off];
                            }
                            double acc = (acc0 + acc1) + (acc2 + acc3);
                            for (; t < t1; ++t) acc += grow[t] * irow[t + off];
                            dwrow[j] += acc;
                        }
                    }
                }
            }
            if (ip->requires_grad) {
                const double* w = wp->data.data();
                double* din = ip->grad.data();
                for (int c = 0; c < c_out; ++c) {
                    const double* grow = g + static_cast<std::size_t>(c) * t_len;
                    for (int i = 0; i < c_in; ++i) {
                        double* drow = din + static_cast<std::size_t>(i) * t_len;
                        const double* wrow = w + (static_cast<std::size_t>(c) * c_in + i) * k;
                        for (int j = 0; j < k; ++j) {
                            const int off = (j - half) * dilation;
                            const double wv = wrow[j];
                            const int t0 = std::max(0, -off);
                            const int t1 = std::min(t_len, t_len - off);
                            for (int t = t0; t < t1; ++t) drow[t + off] += wv * grow[t];
                        }
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr dense(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias) {
    if (input->ndim() < 1) throw ConfigError("dense input must have at least one axis");
    if (weight->ndim() != 2) throw ConfigError("dense weight must be [d_in, d_out]");
    if (bias->ndim() != 1) throw ConfigError("dense bias must be [d_out]");
    const int d_in = weight->dim(0), d_out = weight->dim(1);
    if (input->shape.back() != d_in)
        throw ConfigError("dense input trailing dimension does not match weight");
    if (bias->dim(0) != d_out) throw ConfigError("dense bias length mismatch");
    const std::size_t rows = input->size() / static_cast<std::size_t>(d_in);

    std::vector<int> out_shape = input->shape;
    out_shape.back() = d_out;
    auto out = make_result(std::move(out_shape), {input, weight, bias});

    const double* in = input->data.data();
    const double* w = weight->data.data();
    const double* b = bias->data.data();
    double* o = out->data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double* orow = o + r * d_out;
        std::memcpy(orow, b, sizeof(double) * d_out);
        const double* irow = in + r * d_in;
        for (int kk = 0; kk < d_in; ++kk) {
            const double v = irow[kk];
            const double* wrow = w + static_cast<std::size_t>(kk) * d_out;
            for (int n = 0; n < d_out; ++n) orow[n] += v * wrow[n];
        }
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ip = input.get();
        Tensor* wp = weight.get();
        Tensor* bp = bias.get();
        out->backward_fn = [op, ip, wp, bp, rows, d_in, d_out] {
            const double* g = op->grad.data();
            if (bp->requires_grad) {
                double* db = bp->grad.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* grow = g + r * d_out;
                    for (int n = 0; n < d_out; ++n) db[n] += grow[n];
                }
            }
            if (wp->requires_grad) {
                const double* in = ip->data.data();
                double* dw = wp->grad.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* irow = in + r * d_in;
                    const double* grow = g + r * d_out;
                    for (int kk = 0; kk < d_in; ++kk) {
                        const double v = irow[kk];
                        double* dwrow = dw + static_cast<std::size_t>(kk) * d_out;
                        for (int n = 0; n < d_out; ++n) dwrow[n] += v * grow[n];
                    }
                }
            }
            if (ip->requires_grad) {
                // Transposed weight turns the row reduction into unit-stride
                // accumulation.
                const double* w = wp->data.data();
                std::vector<double> w_t(static_cast<std::size_t>(d_in) * d_out);
                for (int kk = 0; kk < d_in; ++kk)
                    for (int n = 0; n < d_out; ++n)
                        w_t[static_cast<std::size_t>(n) * d_in + kk] =
                            w[static_cast<std::size_t>(kk) * d_out + n];
                double* din = ip->grad.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* grow = g + r * d_out;
                    double* drow = din + r * d_in;
                    for (int n = 0; n < d_out; ++n) {
                        const double gv = grow[n];
                        const double* wtrow = w_t.data() + static_cast<std::size_t>(n) * d_in;
                        for (int kk = 0; kk < d_in; ++kk) drow[kk] += gv * wtrow[kk];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2) throw ConfigError("matmul expects 2-D tensors");
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    if (b->dim(0) != k) throw ConfigError("matmul inner dimensions do not match");

    auto out = make_result({m, n}, {a, b});
    const double* ad = a->data.data();
    const double* bd = b->data.data();
    double* o = out->data.data();
    for (int i = 0; i < m; ++i) {
        double* orow = o + static_cast<std::size_t>(i) * n;
        const double* arow = ad + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double v = arow[kk];
            const double* brow = bd + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += v * brow[j];
        }
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [op, ap, bp, m, k, n] {
            const double* g = op->grad.data();
            if (ap->requires_grad) {
                const double* bd = bp->data.data();
                std::vector<double> b_t(static_cast<std::size_t>(k) * n);
                for (int kk = 0; kk < k; ++kk)
                    for (int j = 0; j < n; ++j)
                        b_t[static_cast<std::size_t>(j) * k + kk] =
                            bd[static_cast<std::size_t>(kk) * n + j];
                double* da = ap->grad.data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    double* darow = da + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        const double* btrow = b_t.data() + static_cast<std::size_t>(j) * k;
                        for (int kk = 0; kk < k; ++kk) darow[kk] += gv * btrow[kk];
                    }
                }
            }
            if (bp->requires_grad) {
                const double* ad = ap->data.data();
                double* db = bp->grad.data();
                for (int i = 0; i < m; ++i) {
                    const double* arow = ad + static_cast<std::size_t>(i) * k;
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    for (int kk = 0; kk < k; ++kk) {
                        const double v = arow[kk];
                        double* dbrow = db + static_cast<std::size_t>(kk) * n;
                        for (int j = 0; j < n; ++j) dbrow[j] += v * grow[j];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    if (a->ndim() != 2 || b->ndim() != 2)
        throw ConfigError("matmul_nt expects 2-D tensors");
    const int m = a->dim(0), k = a->dim(1), n = b->dim(0);
    if (b->dim(1) != k) throw ConfigError("matmul_nt inner dimensions do not match");

    auto out = make_result({m, n}, {a, b});
    const double* ad = a->data.data();
    const double* bd = b->data.data();
    double* o = out->data.data();
    std::vector<double> b_t(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int kk = 0; kk < k; ++kk)
            b_t[static_cast<std::size_t>(kk) * n + j] = bd[static_cast<std::size_t>(j) * k + kk];
    for (int i = 0; i < m; ++i) {
        const double* arow = ad + static_cast<std::size_t>(i) * k;
        double* orow = o + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double v = arow[kk];
            const double* btrow = b_t.data() + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += v * btrow[j];
        }
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [op, ap, bp, m, k, n] {
            const double* g = op->grad.data();
            if (ap->requires_grad) {
                const double* bd = bp->data.data();
                double* da = ap->grad.data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    double* darow = da + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        const double* brow = bd + static_cast<std::size_t>(j) * k;
                        for (int kk = 0; kk < k; ++kk) darow[kk] += gv * brow[kk];
                    }
                }
            }
            if (bp->requires_grad) {
                const double* ad = ap->data.data();
                double* db = bp->grad.data();
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    const double* arow = ad + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        double* dbrow = db + static_cast<std::size_t>(j) * k;
                        for (int kk = 0; kk < k; ++kk) dbrow[kk] += gv * arow[kk];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr transpose(const TensorPtr& a) {
    if (a->ndim() != 2) throw ConfigError("transpose expects a 2-D tensor");
    const int m = a->dim(0), n = a->dim(1);
    auto out = make_result({n, m}, {a});
    const double* ad = a->data.data();
    double* o = out->data.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            o[static_cast<std::size_t>(j) * m + i] = ad[static_cast<std::size_t>(i) * n + j];

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap, m, n] {
            if (!ap->requires_grad) return;
            const double* g = op->grad.data();
            double* da = ap->grad.data();
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < m; ++i)
                    da[static_cast<std::size_t>(i) * n + j] +=
                        g[static_cast<std::size_t>(j) * m + i];
        };
    }
    return out;
}

TensorPtr softmax(const TensorPtr& a, int axis) {
    const AxisView v = axis_view(a->shape, axis);
    auto out = make_result(a->shape, {a});
    const double* x = a->data.data();
    double* y = out->data.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t base = o * v.len * v.inner + i;
            double mx = x[base];
            for (std::size_t l = 1; l < v.len; ++l)
                mx = std::max(mx, x[base + l * v.inner]);
            double denom = 0.0;
            for (std::size_t l = 0; l < v.len; ++l) {
                const double e = std::exp(x[base + l * v.inner] - mx);
                y[base + l * v.inner] = e;
                denom += e;
            }
            if (!std::isfinite(denom) || denom <= 0.0)
                throw NumericError("softmax over non-finite input");
            const double inv = 1.0 / denom;
            for (std::size_t l = 0; l < v.len; ++l) y[base + l * v.inner] *= inv;
        }
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap, v] {
            if (!ap->requires_grad) return;
            const double* y = op->data.data();
            const double* g = op->grad.data();
            double* da = ap->grad.data();
            for (std::size_t o = 0; o < v.outer; ++o) {
                for (std::size_t i = 0; i < v.inner; ++i) {
                    const std::size_t base = o * v.len * v.inner + i;
                    double dot = 0.0;
                    for (std::size_t l = 0; l < v.len; ++l) {
                        const std::size_t at = base + l * v.inner;
                        dot += g[at] * y[at];
                    }
                    for (std::size_t l = 0; l < v.len; ++l) {
                        const std::size_t at = base + l * v.inner;
                        da[at] += (g[at] - dot) * y[at];
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& shift, double eps) {
    if (x->ndim() < 1) throw ConfigError("layer_norm input must have a feature axis");
    const int d = x->shape.back();
    if (gain->ndim() != 1 || gain->dim(0) != d || shift->ndim() != 1 || shift->dim(0) != d)
        throw ConfigError("layer_norm gain/shift must match the feature axis");
    const std::size_t rows = x->size() / static_cast<std::size_t>(d);

    auto out = make_result(x->shape, {x, gain, shift});
    const double* in = x->data.data();
    const double* g = gain->data.data();
    const double* s = shift->data.data();
    double* y = out->data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in + r * d;
        double* yrow = y + r * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) yrow[j] = (row[j] - mean) * inv * g[j] + s[j];
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* xp = x.get();
        Tensor* gp = gain.get();
        Tensor* sp = shift.get();
        out->backward_fn = [op, xp, gp, sp, rows, d, eps] {
            const double* in = xp->data.data();
            const double* g = gp->data.data();
            const double* dy = op->grad.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* row = in + r * d;
                const double* dyrow = dy + r * d;
                double mean = 0.0;
                for (int j = 0; j < d; ++j) mean += row[j];
                mean /= d;
                double var = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double c = row[j] - mean;
                    var += c * c;
                }
                var /= d;
                const double inv = 1.0 / std::sqrt(var + eps);
                if (gp->requires_grad || sp->requires_grad) {
                    double* dg = gp->requires_grad ? gp->grad.data() : nullptr;
                    double* ds = sp->requires_grad ? sp->grad.data() : nullptr;
                    for (int j = 0; j < d; ++j) {
                        const double xhat = (row[j] - mean) * inv;
                        if (dg) dg[j] += dyrow[j] * xhat;
                        if (ds) ds[j] += dyrow[j];
                    }
                }
                if (xp->requires_grad) {
                    double* dx = xp->grad.data() + r * d;
                    double sum1 = 0.0, sum2 = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double dxhat = dyrow[j] * g[j];
                        const double xhat = (row[j] - mean) * inv;
                        sum1 += dxhat;
                        sum2 += dxhat * xhat;
                    }
                    for (int j = 0; j < d; ++j) {
                        const double dxhat = dyrow[j] * g[j];
                        const double xhat = (row[j] - mean) * inv;
                        dx[j] += inv * (dxhat - sum1 / d - xhat * sum2 / d);
                    }
                }
            }
        };
    }
    return out;
}

TensorPtr relu(const TensorPtr& a) {
    auto out = make_result(a->shape, {a});
    const double* x = a->data.data();
    double* y = out->data.data();
    const std::size_t n = a->size();
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap, n] {
            if (!ap->requires_grad) return;
            const double* x = ap->data.data();
            const double* g = op->grad.data();
            double* da = ap->grad.data();
            for (std::size_t i = 0; i < n; ++i)
                if (x[i] > 0.0) da[i] += g[i];
        };
    }
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw ConfigError("add expects identical shapes");
    auto out = make_result(a->shape, {a, b});
    const double* ad = a->data.data();
    const double* bd = b->data.data();
    double* y = out->data.data();
    const std::size_t n = a->size();
    for (std::size_t i = 0; i < n; ++i) y[i] = ad[i] + bd[i];

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [op, ap, bp, n] {
            const double* g = op->grad.data();
            if (ap->requires_grad) {
                double* da = ap->grad.data();
                for (std::size_t i = 0; i < n; ++i) da[i] += g[i];
            }
            if (bp->requires_grad) {
                double* db = bp->grad.data();
                for (std::size_t i = 0; i < n; ++i) db[i] += g[i];
            }
        };
    }
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw ConfigError("mul expects identical shapes");
    auto out = make_result(a->shape, {a, b});
    const double* ad = a->data.data();
    const double* bd = b->data.data();
    double* y = out->data.data();
    const std::size_t n = a->size();
    for (std::size_t i = 0; i < n; ++i) y[i] = ad[i] * bd[i];

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [op, ap, bp, n] {
            const double* g = op->grad.data();
            if (ap->requires_grad) {
                const double* bd = bp->data.data();
                double* da = ap->grad.data();
                for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * bd[i];
            }
            if (bp->requires_grad) {
                const double* ad = ap->data.data();
                double* db = bp->grad.data();
                for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * ad[i];
            }
        };
    }
    return out;
}

TensorPtr scale(const TensorPtr& a, double c) {
    auto out = make_result(a->shape, {a});
    const double* ad = a->data.data();
    double* y = out->data.data();
    const std::size_t n = a->size();
    for (std::size_t i = 0; i < n; ++i) y[i] = c * ad[i];

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap, c, n] {
            if (!ap->requires_grad) return;
            const double* g = op->grad.data();
            double* da = ap->grad.data();
            for (std::size_t i = 0; i < n; ++i) da[i] += c * g[i];
        };
    }
    return out;
}

TensorPtr slice(const TensorPtr& a, int axis, int start, int len) {
    const AxisView v = axis_view(a->shape, axis);
    if (start < 0 || len <= 0 ||
        static_cast<std::size_t>(start) + static_cast<std::size_t>(len) > v.len)
        throw ConfigError("slice range out of bounds");
    std::vector<int> out_shape = a->shape;
    out_shape[static_cast<std::size_t>(axis)] = len;
    auto out = make_result(std::move(out_shape), {a});
    const std::size_t block = static_cast<std::size_t>(len) * v.inner;
    const double* src = a->data.data();
    double* dst = out->data.data();
    for (std::size_t o = 0; o < v.outer; ++o)
        std::memcpy(dst + o * block,
                    src + o * v.len * v.inner + static_cast<std::size_t>(start) * v.inner,
                    sizeof(double) * block);

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap, v, start, block] {
            if (!ap->requires_grad) return;
            const double* g = op->grad.data();
            double* da = ap->grad.data();
            for (std::size_t o = 0; o < v.outer; ++o) {
                double* drow =
                    da + o * v.len * v.inner + static_cast<std::size_t>(start) * v.inner;
                const double* grow = g + o * block;
                for (std::size_t i = 0; i < block; ++i) drow[i] += grow[i];
            }
        };
    }
    return out;
}

TensorPtr concat(const std::vector<TensorPtr>& parts, int axis) {
    if (parts.empty()) throw ConfigError("concat of zero tensors");
    const auto& first_shape = parts.front()->shape;
    int total = 0;
    for (const auto& p : parts) {
        if (p->ndim() != static_cast<int>(first_shape.size()))
            throw ConfigError("concat rank mismatch");
        for (int i = 0; i < p->ndim(); ++i) {
            if (i == axis) continue;
            if (p->dim(i) != first_shape[static_cast<std::size_t>(i)])
                throw ConfigError("concat shape mismatch off the concat axis");
        }
        total += p->dim(axis);
    }
    std::vector<int> out_shape = first_shape;
    out_shape[static_cast<std::size_t>(axis)] = total;
    auto out = make_result(std::move(out_shape), parts);

    const AxisView vo = axis_view(out->shape, axis);
    double* dst = out->data.data();
    std::vector<std::size_t> offsets(parts.size());
    std::size_t at = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        offsets[pi] = at;
        const std::size_t plen = static_cast<std::size_t>(parts[pi]->dim(axis));
        const double* src = parts[pi]->data.data();
        for (std::size_t o = 0; o < vo.outer; ++o)
            std::memcpy(dst + (o * vo.len + at) * vo.inner, src + o * plen * vo.inner,
                        sizeof(double) * plen * vo.inner);
        at += plen;
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        std::vector<Tensor*> raw;
        raw.reserve(parts.size());
        for (const auto& p : parts) raw.push_back(p.get());
        const int ax = axis;
        out->backward_fn = [op, raw, offsets, vo, ax] {
            const double* g = op->grad.data();
            for (std::size_t pi = 0; pi < raw.size(); ++pi) {
                Tensor* p = raw[pi];
                if (!p->requires_grad) continue;
                const std::size_t plen = static_cast<std::size_t>(p->dim(ax));
                double* dp = p->grad.data();
                for (std::size_t o = 0; o < vo.outer; ++o) {
                    const double* grow = g + (o * vo.len + offsets[pi]) * vo.inner;
                    double* drow = dp + o * plen * vo.inner;
                    for (std::size_t i = 0; i < plen * vo.inner; ++i) drow[i] += grow[i];
                }
            }
        };
    }
    return out;
}

TensorPtr mean_axis(const TensorPtr& a, int axis) {
    const AxisView v = axis_view(a->shape, axis);
    std::vector<int> out_shape;
    for (int i = 0; i < a->ndim(); ++i)
        if (i != axis) out_shape.push_back(a->dim(i));
    if (out_shape.empty()) out_shape.push_back(1);
    auto out = make_result(std::move(out_shape), {a});
    const double scale = 1.0 / static_cast<double>(v.len);
    const double* x = a->data.data();
    double* y = out->data.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t l = 0; l < v.len; ++l) {
            const double* row = x + (o * v.len + l) * v.inner;
            double* yrow = y + o * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) yrow[i] += row[i] * scale;
        }
    }

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap, v, scale] {
            if (!ap->requires_grad) return;
            const double* g = op->grad.data();
            double* da = ap->grad.data();
            for (std::size_t o = 0; o < v.outer; ++o) {
                const double* grow = g + o * v.inner;
                for (std::size_t l = 0; l < v.len; ++l) {
                    double* drow = da + (o * v.len + l) * v.inner;
                    for (std::size_t i = 0; i < v.inner; ++i) drow[i] += grow[i] * scale;
                }
            }
        };
    }
    return out;
}

TensorPtr global_avg_pool(const TensorPtr& x) {
    if (x->ndim() != 2) throw ConfigError("global_avg_pool expects [C, T]");
    return mean_axis(x, 1);
}

TensorPtr sum(const TensorPtr& a) {
    auto out = make_result({1}, {a});
    double acc = 0.0;
    for (double v : a->data) acc += v;
    out->data[0] = acc;

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* ap = a.get();
        out->backward_fn = [op, ap] {
            if (!ap->requires_grad) return;
            const double g = op->grad[0];
            for (double& d : ap->grad) d += g;
        };
    }
    return out;
}

TensorPtr cross_entropy(const TensorPtr& logits, int label) {
    if (logits->ndim() != 1) throw ConfigError("cross_entropy expects 1-D logits");
    const int n = logits->dim(0);
    if (label < 0 || label >= n) throw DataError("cross_entropy label out of range");

    const double* l = logits->data.data();
    double mx = l[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, l[i]);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) denom += std::exp(l[i] - mx);
    const double loss = mx + std::log(denom) - l[label];
    if (!std::isfinite(loss)) throw NumericError("cross_entropy over non-finite logits");

    auto out = make_result({1}, {logits});
    out->data[0] = loss;

    if (out->requires_grad) {
        Tensor* op = out.get();
        Tensor* lp = logits.get();
        out->backward_fn = [op, lp, label, n] {
            if (!lp->requires_grad) return;
            const double* l = lp->data.data();
            double mx = l[0];
            for (int i = 1; i < n; ++i) mx = std::max(mx, l[i]);
            double denom = 0.0;
            for (int i = 0; i < n; ++i) denom += std::exp(l[i] - mx);
            const double g = op->grad[0];
            double* dl = lp->grad.data();
            for (int i = 0; i < n; ++i) {
                const double p = std::exp(l[i] - mx) / denom;
                dl[i] += g * (p - (i == label ? 1.0 : 0.0));
            }
        };
    }
    return out;
}

}  // namespace ops

GradCheckReport grad_check(
    const std::function<TensorPtr(const std::vector<TensorPtr>&)>& f,
    const std::vector<TensorPtr>& inputs, double step, std::size_t coords_per_tensor,
    const std::vector<std::string>& names) {
    for (const auto& in : inputs) {
        if (!in->requires_grad)
            throw UsageError("grad_check inputs must have requires_grad set");
        in->zero_grad();
    }
    auto loss = f(inputs);
    if (!loss->is_scalar()) throw UsageError("grad_check expects a scalar function");
    backward(loss);

    GradCheckReport report;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = *inputs[ti];
        const std::size_t n = t.size();
        std::vector<std::size_t> coords;
        if (coords_per_tensor == 0 || n <= coords_per_tensor) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            coords.resize(coords_per_tensor);
            for (std::size_t j = 0; j < coords_per_tensor; ++j)
                coords[j] = j * n / coords_per_tensor;
        }
        for (std::size_t c : coords) {
            const double saved = t.data[c];
            t.data[c] = saved + step;
            const double up = f(inputs)->value();
            t.data[c] = saved - step;
            const double down = f(inputs)->value();
            t.data[c] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = t.grad[c];
            // Below the central-difference noise floor both estimates are
            // indistinguishable from zero (softmax shift-invariant biases
            // genuinely have zero gradient).
            const double rel =
                std::abs(analytic) < 1e-7 && std::abs(numeric) < 1e-7
                    ? 0.0
                    : std::abs(analytic - numeric) /
                          std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            ++report.coords_checked;
            if (rel > report.max_rel_dev) {
                report.max_rel_dev = rel;
                report.worst_coord = c;
                report.worst_input =
                    ti < names.size() ? names[ti] : "input" + std::to_string(ti);
            }
        }
    }
    return report;
}

}  // namespace mfconvtr
