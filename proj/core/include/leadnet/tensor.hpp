#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "leadnet/rng.hpp"

namespace leadnet {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major double tensor with reverse-mode autodiff.
///
/// Graphs are built define-by-run: each op returns a new node holding its
/// inputs and a backward closure. backward() replays the recorded tape in
/// reverse topological order, summing gradients across all consumers.
/// Everything is single-threaded within one graph; independent graphs may
/// live on separate threads.
struct Tensor : std::enable_shared_from_this<Tensor> {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data when requires_grad

    std::vector<TensorPtr> inputs;
    std::function<void()> backward_fn;

    Tensor(std::vector<double> d, std::vector<std::int64_t> s, bool req_grad);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols() + c)]; }
    double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols() + c)]; }

    double item() const;

    void zero_grad();
    void accum_grad(const std::vector<double>& g);

    /// Backpropagate from this node. Scalar outputs seed with 1; non-scalar
    /// outputs require an explicit seed of matching size.
    void backward(const std::vector<double>* seed = nullptr);
};

// ---- factories ----

TensorPtr tensor(std::vector<double> data, std::vector<std::int64_t> shape, bool requires_grad = false);
TensorPtr scalar(double v, bool requires_grad = false);
TensorPtr zeros(const std::vector<std::int64_t>& shape, bool requires_grad = false);
TensorPtr full(const std::vector<std::int64_t>& shape, double v, bool requires_grad = false);
TensorPtr randn(const std::vector<std::int64_t>& shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

// ---- ops ----
//
// Shapes are exactly what the model needs; there is no general broadcasting.
// add_row broadcasts a length-D vector over the rows of a T x D matrix, which
// covers bias terms and per-track embeddings.

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr add_row(const TensorPtr& m, const TensorPtr& row);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
TensorPtr affine(const TensorPtr& a, double mul, double shift);  // elementwise a*mul + shift
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose2d(const TensorPtr& a);
TensorPtr reshape(const TensorPtr& a, std::vector<std::int64_t> new_shape);
TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
TensorPtr mean_rows(const TensorPtr& m);  // T x D -> 1 x D
TensorPtr sum_all(const TensorPtr& a);    // -> scalar
TensorPtr tanh_op(const TensorPtr& a);

/// Softmax along the last axis, computed with max subtraction.
TensorPtr softmax(const TensorPtr& a);

/// Per-row normalization of a T x D matrix followed by an affine transform
/// with a length-D gain and bias.
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias, double eps = 1e-5);

/// Inverted dropout: training mode zeroes each element with probability p and
/// scales survivors by 1/(1-p); eval mode is the identity.
TensorPtr dropout(const TensorPtr& x, double p, bool training, Rng& rng);

/// Mean over rows of the negative log-softmax probability of each target.
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets);

/// Row lookup into a V x D table; returns a 1 x D tensor whose backward
/// scatters into the looked-up row.
TensorPtr embedding_row(const TensorPtr& table, int index);

}  // namespace leadnet
