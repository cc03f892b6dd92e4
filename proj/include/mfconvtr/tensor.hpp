#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mfconvtr {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense N-dimensional value array with reverse-mode gradient tracking.
// Nodes form a DAG through `parents`; releasing the root releases the
// whole graph. Backward closures capture raw pointers only, so there are
// no ownership cycles. A graph is single-threaded; independent graphs may
// run concurrently (no shared mutable state outside the tensors they touch).
class Tensor : public std::enable_shared_from_this<Tensor> {
public:
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // same length as data when requires_grad
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void()> backward_fn;

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr from_data(std::vector<int> shape, std::vector<double> values,
                               bool requires_grad = false);
    static TensorPtr scalar(double v, bool requires_grad = false);

    std::size_t size() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool is_scalar() const { return data.size() == 1; }
    double value() const;  // scalar contents; UsageError on non-scalars

    void zero_grad();

private:
    Tensor() = default;
};

// Executed primitives in topological order: every entry appears after all
// entries that produced its inputs.
using ComputationRecord = std::vector<Tensor*>;

ComputationRecord record_from(const TensorPtr& root);

// Reverse-topological gradient accumulation from a scalar loss. Every
// requires_grad tensor reachable from the loss ends up with a populated grad.
void backward(const TensorPtr& loss);

namespace ops {

// Same-padded 1-D cross-correlation with dilation.
// input [C_in, T], weight [C_out, C_in, k] (k odd), bias [C_out] -> [C_out, T].
TensorPtr conv1d(const TensorPtr& input, const TensorPtr& weight,
                 const TensorPtr& bias, int dilation = 1);

// Affine map along the trailing axis. input [.., d_in], weight [d_in, d_out],
// bias [d_out] -> [.., d_out].
TensorPtr dense(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias);

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);     // [m,k]x[k,n]
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);  // [m,k]x[n,k]^T
TensorPtr transpose(const TensorPtr& a);                      // 2-D

// Max-subtracted softmax along `axis`.
TensorPtr softmax(const TensorPtr& a, int axis);

// Per-position normalization over the trailing feature axis, then affine.
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& shift, double eps = 1e-5);

TensorPtr relu(const TensorPtr& a);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);

TensorPtr slice(const TensorPtr& a, int axis, int start, int len);
TensorPtr concat(const std::vector<TensorPtr>& parts, int axis);

TensorPtr mean_axis(const TensorPtr& a, int axis);
TensorPtr global_avg_pool(const TensorPtr& x);  // [C,T] -> [C], temporal mean

TensorPtr sum(const TensorPtr& a);  // scalar

// -log softmax(logits)[label]; logits 1-D.
TensorPtr cross_entropy(const TensorPtr& logits, int label);

}  // namespace ops

struct GradCheckReport {
    double max_rel_dev = 0.0;
    std::string worst_input;
    std::size_t worst_coord = 0;
    std::size_t coords_checked = 0;
    bool passed(double tolerance) const { return max_rel_dev <= tolerance; }
};

// Central finite differences against the analytic gradient of a scalar
// function of the listed inputs. coords_per_tensor == 0 checks every
// coordinate; otherwise a deterministic stride sample of that many.
GradCheckReport grad_check(
    const std::function<TensorPtr(const std::vector<TensorPtr>&)>& f,
    const std::vector<TensorPtr>& inputs, double step = 1e-5,
    std::size_t coords_per_tensor = 0,
    const std::vector<std::string>& names = {});

}  // namespace mfconvtr
