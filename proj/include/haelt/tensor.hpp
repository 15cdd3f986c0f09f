#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "haelt/errors.hpp"

namespace haelt::ad {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Shape mismatch or invalid operand; message names the op and the shapes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense 64-bit float tensor. Copies alias the same value/grad buffers;
// backward closures rely on that to accumulate gradients in place.
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<double>> values;
    std::shared_ptr<std::vector<double>> grad;  // allocated iff requires_grad
    bool requires_grad = false;

    Tensor() = default;

    bool defined() const { return static_cast<bool>(values); }
    int64_t numel() const { return values ? static_cast<int64_t>(values->size()) : 0; }

    // Handle semantics: copies alias the same storage, so buffer access stays
    // mutable through const handles (as with shared_ptr itself).
    double* data() const { return values->data(); }
    double* gdata() const { return grad->data(); }

    // Value of a one-element tensor.
    double scalar() const;

    void zero_grad();
    void set_requires_grad(bool rg);

    static Tensor zeros(Shape s, bool requires_grad = false);
    static Tensor full(Shape s, double v, bool requires_grad = false);
    // Graph-boundary validation: element count must match the shape and all
    // values must be finite (NaN/Inf rejected).
    static Tensor from_values(Shape s, std::vector<double> v, bool requires_grad = false);
};

// Define-by-run computation graph. Each op computes its output eagerly and,
// while recording, appends one node; backward() replays the nodes in exact
// reverse insertion order. A graph and its tensors belong to one session.
class Graph {
public:
    // When recording is off, ops still compute values but the tape stays
    // empty and outputs do not require grad (inference mode).
    void set_recording(bool r) { recording_ = r; }
    bool recording() const { return recording_; }

    size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // --- elementwise, same shape ---
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);

    // --- scalar-constant ops ---
    Tensor scale(const Tensor& x, double c);

    // --- unary elementwise ---
    Tensor sigmoid(const Tensor& x);
    Tensor tanh_op(const Tensor& x);
    Tensor relu(const Tensor& x);
    Tensor exp_op(const Tensor& x);
    Tensor log_op(const Tensor& x);    // rejects non-positive inputs
    Tensor recip(const Tensor& x);     // rejects zeros

    // --- linear algebra ---
    // x: [..., K] (rank >= 2), w: [K, N] -> [..., N]
    Tensor matmul(const Tensor& x, const Tensor& w);
    // a: [B, M, K], b: [B, K, N] -> [B, M, N]
    Tensor bmm(const Tensor& a, const Tensor& b);
    // [B, M, N] -> [B, N, M]
    Tensor transpose12(const Tensor& x);
    // x: [..., D] + bias [D], broadcast over leading dims
    Tensor add_bias(const Tensor& x, const Tensor& b);

    // x: [B, T, Cin], w: [K, Cin, Cout], bias: [Cout]; stride 1, zero padded
    // to the same output length. K must be odd and <= T.
    Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias);

    // --- reductions and normalisation ---
    Tensor softmax_last(const Tensor& x);
    // Normalises the last dim to zero mean / unit variance, then applies the
    // affine pair gamma/beta (both shaped [D]).
    Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-8);
    Tensor mean_time(const Tensor& x);  // [B, T, F] -> [B, F]
    Tensor sum_all(const Tensor& x);    // -> [1]
    Tensor mean_all(const Tensor& x);   // -> [1]

    // --- structural ---
    Tensor concat_last(const Tensor& a, const Tensor& b);
    Tensor slice_last(const Tensor& x, int offset, int len);
    Tensor slice_time(const Tensor& x, int t);  // [B, T, F] -> [B, F]
    Tensor stack_time(const std::vector<Tensor>& steps);  // T x [B, F] -> [B, T, F]

    // Multiplies by a precomputed mask (0 or 1/(1-rate) entries). The mask is
    // constant with respect to differentiation.
    Tensor dropout_apply(const Tensor& x, std::shared_ptr<const std::vector<double>> mask);

    // Weighted binary cross-entropy: -(1/N) sum_i w(y_i) [y_i log p_i +
    // (1-y_i) log(1-p_i)] with p clipped to [1e-7, 1-1e-7]. Clipped samples
    // get zero gradient.
    Tensor bce_loss(const Tensor& p, const std::vector<int>& labels,
                    double w_neg = 1.0, double w_pos = 1.0);

    // Seeds d(loss)/d(loss) = 1 and replays the tape backwards. The loss must
    // be scalar. Tensors with requires_grad accumulate into their grad
    // buffers; detached tensors are untouched.
    void backward(const Tensor& loss);

private:
    struct Node {
        const char* kind;
        std::function<void()> back;
    };

    Tensor make_out(Shape s, bool from_inputs_rg);
    void push(const char* kind, std::function<void()> back);

    std::vector<Node> nodes_;
    bool recording_ = true;
};

}  // namespace haelt::ad
