#include "haelt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace haelt::ad {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (const int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace {

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
    throw ShapeError(std::string(op) + ": " + detail);
}

void require(bool ok, const char* op, const std::string& detail) {
    if (!ok) shape_fail(op, detail);
}

void check_shape_valid(const char* op, const Shape& s) {
    require(!s.empty(), op, "empty shape");
    for (const int d : s) require(d > 0, op, "non-positive dimension in " + shape_str(s));
}

}  // namespace

double Tensor::scalar() const {
    if (numel() != 1) {
        throw ShapeError("scalar: tensor has shape " + shape_str(shape) + ", expected one element");
    }
    return (*values)[0];
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

void Tensor::set_requires_grad(bool rg) {
    requires_grad = rg;
    if (rg && !grad) {
        grad = std::make_shared<std::vector<double>>(values->size(), 0.0);
    } else if (!rg) {
        grad.reset();
    }
}

Tensor Tensor::zeros(Shape s, bool requires_grad) {
    check_shape_valid("zeros", s);
    Tensor t;
    t.shape = std::move(s);
    t.values = std::make_shared<std::vector<double>>(shape_numel(t.shape), 0.0);
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::full(Shape s, double v, bool requires_grad) {
    Tensor t = zeros(std::move(s), requires_grad);
    std::fill(t.values->begin(), t.values->end(), v);
    return t;
}

Tensor Tensor::from_values(Shape s, std::vector<double> v, bool requires_grad) {
    check_shape_valid("from_values", s);
    if (shape_numel(s) != static_cast<int64_t>(v.size())) {
        shape_fail("from_values", "shape " + shape_str(s) + " does not match " +
                                      std::to_string(v.size()) + " values");
    }
    for (const double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError("from_values: non-finite value rejected at graph boundary");
        }
    }
    Tensor t;
    t.shape = std::move(s);
    t.values = std::make_shared<std::vector<double>>(std::move(v));
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Graph::make_out(Shape s, bool from_inputs_rg) {
    return Tensor::zeros(std::move(s), recording_ && from_inputs_rg);
}

void Graph::push(const char* kind, std::function<void()> back) {
    nodes_.push_back(Node{kind, std::move(back)});
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        shape_fail("backward", "loss must be scalar, got " +
                                   (loss.defined() ? shape_str(loss.shape) : std::string("undefined")));
    }
    if (loss.grad) (*loss.grad)[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    require(a.shape == b.shape, "add",
            "shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Tensor out = make_out(a.shape, a.requires_grad || b.requires_grad);
    const size_t n = a.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = (*a.values)[i] + (*b.values)[i];
    if (out.requires_grad) {
        push("add", [a, b, out]() {
            const size_t m = out.grad->size();
            if (a.grad)
                for (size_t i = 0; i < m; ++i) (*a.grad)[i] += (*out.grad)[i];
            if (b.grad)
                for (size_t i = 0; i < m; ++i) (*b.grad)[i] += (*out.grad)[i];
        });
    }
    return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    require(a.shape == b.shape, "sub",
            "shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Tensor out = make_out(a.shape, a.requires_grad || b.requires_grad);
    const size_t n = a.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = (*a.values)[i] - (*b.values)[i];
    if (out.requires_grad) {
        push("sub", [a, b, out]() {
            const size_t m = out.grad->size();
            if (a.grad)
                for (size_t i = 0; i < m; ++i) (*a.grad)[i] += (*out.grad)[i];
            if (b.grad)
                for (size_t i = 0; i < m; ++i) (*b.grad)[i] -= (*out.grad)[i];
        });
    }
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    require(a.shape == b.shape, "mul",
            "shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Tensor out = make_out(a.shape, a.requires_grad || b.requires_grad);
    const size_t n = a.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = (*a.values)[i] * (*b.values)[i];
    if (out.requires_grad) {
        push("mul", [a, b, out]() {
            const size_t m = out.grad->size();
            if (a.grad)
                for (size_t i = 0; i < m; ++i) (*a.grad)[i] += (*out.grad)[i] * (*b.values)[i];
            if (b.grad)
                for (size_t i = 0; i < m; ++i) (*b.grad)[i] += (*out.grad)[i] * (*a.values)[i];
        });
    }
    return out;
}

Tensor Graph::scale(const Tensor& x, double c) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = (*x.values)[i] * c;
    if (out.requires_grad) {
        push("scale", [x, out, c]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) (*x.grad)[i] += (*out.grad)[i] * c;
        });
    }
    return out;
}

namespace {

double sigmoid_stable(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor Graph::sigmoid(const Tensor& x) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = sigmoid_stable((*x.values)[i]);
    if (out.requires_grad) {
        push("sigmoid", [x, out]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) {
                const double y = (*out.values)[i];
                (*x.grad)[i] += (*out.grad)[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

Tensor Graph::tanh_op(const Tensor& x) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = std::tanh((*x.values)[i]);
    if (out.requires_grad) {
        push("tanh", [x, out]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) {
                const double y = (*out.values)[i];
                (*x.grad)[i] += (*out.grad)[i] * (1.0 - y * y);
            }
        });
    }
    return out;
}

Tensor Graph::relu(const Tensor& x) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = std::max(0.0, (*x.values)[i]);
    if (out.requires_grad) {
        push("relu", [x, out]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) {
                if ((*x.values)[i] > 0.0) (*x.grad)[i] += (*out.grad)[i];
            }
        });
    }
    return out;
}

Tensor Graph::exp_op(const Tensor& x) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = std::exp((*x.values)[i]);
    if (out.requires_grad) {
        push("exp", [x, out]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) (*x.grad)[i] += (*out.grad)[i] * (*out.values)[i];
        });
    }
    return out;
}

Tensor Graph::log_op(const Tensor& x) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) {
        const double v = (*x.values)[i];
        if (v <= 0.0) throw NumericError("log: non-positive input " + std::to_string(v));
        (*out.values)[i] = std::log(v);
    }
    if (out.requires_grad) {
        push("log", [x, out]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) (*x.grad)[i] += (*out.grad)[i] / (*x.values)[i];
        });
    }
    return out;
}

Tensor Graph::recip(const Tensor& x) {
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) {
        const double v = (*x.values)[i];
        if (v == 0.0) throw NumericError("recip: zero input");
        (*out.values)[i] = 1.0 / v;
    }
    if (out.requires_grad) {
        push("recip", [x, out]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) {
                const double y = (*out.values)[i];
                (*x.grad)[i] -= (*out.grad)[i] * y * y;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor Graph::matmul(const Tensor& x, const Tensor& w) {
    require(x.shape.size() >= 2, "matmul", "lhs rank must be >= 2, got " + shape_str(x.shape));
    require(w.shape.size() == 2, "matmul", "rhs must be a matrix, got " + shape_str(w.shape));
    const int k = x.shape.back();
    require(k == w.shape[0], "matmul",
            "inner dimension mismatch " + shape_str(x.shape) + " x " + shape_str(w.shape));
    const int n = w.shape[1];
    const int64_t rows = x.numel() / k;

    Shape out_shape = x.shape;
    out_shape.back() = n;
    Tensor out = make_out(out_shape, x.requires_grad || w.requires_grad);

    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * k;
        double* orow = od + r * n;
        for (int kk = 0; kk < k; ++kk) {
            const double xv = xr[kk];
            if (xv == 0.0) continue;
            const double* wrow = wd + static_cast<int64_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += xv * wrow[j];
        }
    }

    if (out.requires_grad) {
        push("matmul", [x, w, out, rows, k, n]() {
            const double* go = out.gdata();
            if (x.grad) {
                double* gx = x.gdata();
                const double* wd2 = w.data();
                for (int64_t r = 0; r < rows; ++r) {
                    const double* grow = go + r * n;
                    double* gxr = gx + r * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* wrow = wd2 + static_cast<int64_t>(kk) * n;
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += grow[j] * wrow[j];
                        gxr[kk] += acc;
                    }
                }
            }
            if (w.grad) {
                double* gw = w.gdata();
                const double* xd2 = x.data();
                for (int64_t r = 0; r < rows; ++r) {
                    const double* xr = xd2 + r * k;
                    const double* grow = go + r * n;
                    for (int kk = 0; kk < k; ++kk) {
                        const double xv = xr[kk];
                        if (xv == 0.0) continue;
                        double* gwrow = gw + static_cast<int64_t>(kk) * n;
                        for (int j = 0; j < n; ++j) gwrow[j] += xv * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Graph::bmm(const Tensor& a, const Tensor& b) {
    require(a.shape.size() == 3 && b.shape.size() == 3, "bmm",
            "operands must be rank 3, got " + shape_str(a.shape) + " x " + shape_str(b.shape));
    require(a.shape[0] == b.shape[0] && a.shape[2] == b.shape[1], "bmm",
            "incompatible shapes " + shape_str(a.shape) + " x " + shape_str(b.shape));
    const int bs = a.shape[0], m = a.shape[1], k = a.shape[2], n = b.shape[2];
    Tensor out = make_out({bs, m, n}, a.requires_grad || b.requires_grad);

    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int bi = 0; bi < bs; ++bi) {
        const double* ab = ad + static_cast<int64_t>(bi) * m * k;
        const double* bb = bd + static_cast<int64_t>(bi) * k * n;
        double* ob = od + static_cast<int64_t>(bi) * m * n;
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
                const double av = ab[i * k + kk];
                if (av == 0.0) continue;
                const double* brow = bb + kk * n;
                double* orow = ob + i * n;
                for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }

    if (out.requires_grad) {
        push("bmm", [a, b, out, bs, m, k, n]() {
            const double* go = out.gdata();
            for (int bi = 0; bi < bs; ++bi) {
                const double* gb = go + static_cast<int64_t>(bi) * m * n;
                const double* ab = a.data() + static_cast<int64_t>(bi) * m * k;
                const double* bb = b.data() + static_cast<int64_t>(bi) * k * n;
                if (a.grad) {
                    double* ga = a.gdata() + static_cast<int64_t>(bi) * m * k;
                    for (int i = 0; i < m; ++i) {
                        for (int kk = 0; kk < k; ++kk) {
                            const double* brow = bb + kk * n;
                            const double* grow = gb + i * n;
                            double acc = 0.0;
                            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                            ga[i * k + kk] += acc;
                        }
                    }
                }
                if (b.grad) {
                    double* gbb = b.gdata() + static_cast<int64_t>(bi) * k * n;
                    for (int i = 0; i < m; ++i) {
                        const double* grow = gb + i * n;
                        for (int kk = 0; kk < k; ++kk) {
                            const double av = ab[i * k + kk];
                            if (av == 0.0) continue;
                            double* gbrow = gbb + kk * n;
                            for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor Graph::transpose12(const Tensor& x) {
    require(x.shape.size() == 3, "transpose12", "operand must be rank 3, got " + shape_str(x.shape));
    const int b = x.shape[0], m = x.shape[1], n = x.shape[2];
    Tensor out = make_out({b, n, m}, x.requires_grad);
    const double* xd = x.data();
    double* od = out.data();
    for (int bi = 0; bi < b; ++bi) {
        const double* xb = xd + static_cast<int64_t>(bi) * m * n;
        double* ob = od + static_cast<int64_t>(bi) * m * n;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ob[j * m + i] = xb[i * n + j];
    }
    if (out.requires_grad) {
        push("transpose12", [x, out, b, m, n]() {
            if (!x.grad) return;
            const double* go = out.gdata();
            double* gx = x.gdata();
            for (int bi = 0; bi < b; ++bi) {
                const double* gb = go + static_cast<int64_t>(bi) * m * n;
                double* gxb = gx + static_cast<int64_t>(bi) * m * n;
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) gxb[i * n + j] += gb[j * m + i];
            }
        });
    }
    return out;
}

Tensor Graph::add_bias(const Tensor& x, const Tensor& b) {
    require(b.shape.size() == 1, "add_bias", "bias must be rank 1, got " + shape_str(b.shape));
    require(!x.shape.empty() && x.shape.back() == b.shape[0], "add_bias",
            "trailing dim of " + shape_str(x.shape) + " does not match bias " + shape_str(b.shape));
    const int d = b.shape[0];
    const int64_t rows = x.numel() / d;
    Tensor out = make_out(x.shape, x.requires_grad || b.requires_grad);
    const double* xd = x.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) od[r * d + j] = xd[r * d + j] + bd[j];
    if (out.requires_grad) {
        push("add_bias", [x, b, out, rows, d]() {
            const double* go = out.gdata();
            if (x.grad) {
                double* gx = x.gdata();
                const int64_t n = rows * d;
                for (int64_t i = 0; i < n; ++i) gx[i] += go[i];
            }
            if (b.grad) {
                double* gb = b.gdata();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j) gb[j] += go[r * d + j];
            }
        });
    }
    return out;
}

Tensor Graph::conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require(x.shape.size() == 3, "conv1d", "input must be [B,T,C], got " + shape_str(x.shape));
    require(w.shape.size() == 3, "conv1d", "weight must be [K,Cin,Cout], got " + shape_str(w.shape));
    const int B = x.shape[0], T = x.shape[1], Ci = x.shape[2];
    const int K = w.shape[0], Co = w.shape[2];
    require(w.shape[1] == Ci, "conv1d",
            "channel mismatch " + shape_str(x.shape) + " vs " + shape_str(w.shape));
    require(K % 2 == 1, "conv1d", "kernel must be odd, got " + std::to_string(K));
    require(K <= T, "conv1d", "kernel " + std::to_string(K) + " exceeds time length " + std::to_string(T));
    require(bias.shape == Shape{Co}, "conv1d",
            "bias " + shape_str(bias.shape) + " does not match Cout " + std::to_string(Co));
    const int pad = K / 2;
    Tensor out = make_out({B, T, Co}, x.requires_grad || w.requires_grad || bias.requires_grad);

    const double* xd = x.data();
    const double* wd = w.data();
    const double* bd = bias.data();
    double* od = out.data();
    for (int b = 0; b < B; ++b) {
        const double* xb = xd + static_cast<int64_t>(b) * T * Ci;
        double* ob = od + static_cast<int64_t>(b) * T * Co;
        for (int t = 0; t < T; ++t) {
            double* orow = ob + t * Co;
            for (int co = 0; co < Co; ++co) orow[co] = bd[co];
            for (int dk = 0; dk < K; ++dk) {
                const int s = t + dk - pad;
                if (s < 0 || s >= T) continue;
                const double* xr = xb + s * Ci;
                const double* wk = wd + static_cast<int64_t>(dk) * Ci * Co;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double xv = xr[ci];
                    if (xv == 0.0) continue;
                    const double* wrow = wk + ci * Co;
                    for (int co = 0; co < Co; ++co) orow[co] += xv * wrow[co];
                }
            }
        }
    }

    if (out.requires_grad) {
        push("conv1d", [x, w, bias, out, B, T, Ci, K, Co, pad]() {
            const double* go = out.gdata();
            for (int b = 0; b < B; ++b) {
                const double* gb = go + static_cast<int64_t>(b) * T * Co;
                const double* xb = x.data() + static_cast<int64_t>(b) * T * Ci;
                for (int t = 0; t < T; ++t) {
                    const double* grow = gb + t * Co;
                    if (bias.grad) {
                        double* gbias = bias.gdata();
                        for (int co = 0; co < Co; ++co) gbias[co] += grow[co];
                    }
                    for (int dk = 0; dk < K; ++dk) {
                        const int s = t + dk - pad;
                        if (s < 0 || s >= T) continue;
                        const double* xr = xb + s * Ci;
                        const double* wk = w.data() + static_cast<int64_t>(dk) * Ci * Co;
                        if (x.grad) {
                            double* gxr = x.gdata() + static_cast<int64_t>(b) * T * Ci + s * Ci;
                            for (int ci = 0; ci < Ci; ++ci) {
                                const double* wrow = wk + ci * Co;
                                double acc = 0.0;
                                for (int co = 0; co < Co; ++co) acc += grow[co] * wrow[co];
                                gxr[ci] += acc;
                            }
                        }
                        if (w.grad) {
                            double* gwk = w.gdata() + static_cast<int64_t>(dk) * Ci * Co;
                            for (int ci = 0; ci < Ci; ++ci) {
                                const double xv = xr[ci];
                                if (xv == 0.0) continue;
                                double* gwrow = gwk + ci * Co;
                                for (int co = 0; co < Co; ++co) gwrow[co] += xv * grow[co];
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions / normalisation
// ---------------------------------------------------------------------------

Tensor Graph::softmax_last(const Tensor& x) {
    require(!x.shape.empty(), "softmax", "undefined operand");
    const int d = x.shape.back();
    const int64_t rows = x.numel() / d;
    Tensor out = make_out(x.shape, x.requires_grad);
    const double* xd = x.data();
    double* od = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * d;
        double* orow = od + r * d;
        double mx = xr[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j < d; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < d; ++j) orow[j] /= sum;
    }
    if (out.requires_grad) {
        push("softmax", [x, out, rows, d]() {
            if (!x.grad) return;
            const double* go = out.gdata();
            const double* od2 = out.data();
            double* gx = x.gdata();
            for (int64_t r = 0; r < rows; ++r) {
                const double* grow = go + r * d;
                const double* yrow = od2 + r * d;
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += grow[j] * yrow[j];
                double* gxr = gx + r * d;
                for (int j = 0; j < d; ++j) gxr[j] += yrow[j] * (grow[j] - dot);
            }
        });
    }
    return out;
}

Tensor Graph::layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require(!x.shape.empty(), "layer_norm", "undefined operand");
    const int d = x.shape.back();
    require(gamma.shape == Shape{d} && beta.shape == Shape{d}, "layer_norm",
            "affine params must be [" + std::to_string(d) + "], got " + shape_str(gamma.shape) +
                " / " + shape_str(beta.shape));
    const int64_t rows = x.numel() / d;
    Tensor out = make_out(x.shape, x.requires_grad || gamma.requires_grad || beta.requires_grad);
    // keep normalised activations for backward
    auto xhat = std::make_shared<std::vector<double>>(x.values->size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);

    const double* xd = x.data();
    double* od = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (int j = 0; j < d; ++j) {
            const double h = (xr[j] - mean) * inv;
            (*xhat)[r * d + j] = h;
            od[r * d + j] = h * (*gamma.values)[j] + (*beta.values)[j];
        }
    }

    if (out.requires_grad) {
        push("layer_norm", [x, gamma, beta, out, xhat, inv_std, rows, d]() {
            const double* go = out.gdata();
            for (int64_t r = 0; r < rows; ++r) {
                const double* grow = go + r * d;
                const double* hr = xhat->data() + r * d;
                if (gamma.grad) {
                    double* gg = gamma.gdata();
                    for (int j = 0; j < d; ++j) gg[j] += grow[j] * hr[j];
                }
                if (beta.grad) {
                    double* gb = beta.gdata();
                    for (int j = 0; j < d; ++j) gb[j] += grow[j];
                }
                if (x.grad) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double dh = grow[j] * (*gamma.values)[j];
                        mean_dh += dh;
                        mean_dh_h += dh * hr[j];
                    }
                    mean_dh /= d;
                    mean_dh_h /= d;
                    double* gx = x.gdata() + r * d;
                    const double inv = (*inv_std)[r];
                    for (int j = 0; j < d; ++j) {
                        const double dh = grow[j] * (*gamma.values)[j];
                        gx[j] += inv * (dh - mean_dh - hr[j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

Tensor Graph::mean_time(const Tensor& x) {
    require(x.shape.size() == 3, "mean_time", "operand must be [B,T,F], got " + shape_str(x.shape));
    const int B = x.shape[0], T = x.shape[1], F = x.shape[2];
    Tensor out = make_out({B, F}, x.requires_grad);
    const double* xd = x.data();
    double* od = out.data();
    for (int b = 0; b < B; ++b) {
        double* orow = od + static_cast<int64_t>(b) * F;
        const double* xb = xd + static_cast<int64_t>(b) * T * F;
        for (int t = 0; t < T; ++t)
            for (int f = 0; f < F; ++f) orow[f] += xb[t * F + f];
        for (int f = 0; f < F; ++f) orow[f] /= T;
    }
    if (out.requires_grad) {
        push("mean_time", [x, out, B, T, F]() {
            if (!x.grad) return;
            const double* go = out.gdata();
            double* gx = x.gdata();
            for (int b = 0; b < B; ++b) {
                const double* grow = go + static_cast<int64_t>(b) * F;
                double* gxb = gx + static_cast<int64_t>(b) * T * F;
                for (int t = 0; t < T; ++t)
                    for (int f = 0; f < F; ++f) gxb[t * F + f] += grow[f] / T;
            }
        });
    }
    return out;
}

Tensor Graph::sum_all(const Tensor& x) {
    Tensor out = make_out({1}, x.requires_grad);
    double s = 0.0;
    for (const double v : *x.values) s += v;
    (*out.values)[0] = s;
    if (out.requires_grad) {
        push("sum", [x, out]() {
            if (!x.grad) return;
            const double g = (*out.grad)[0];
            for (double& gv : *x.grad) gv += g;
        });
    }
    return out;
}

Tensor Graph::mean_all(const Tensor& x) {
    const double n = static_cast<double>(x.numel());
    Tensor out = make_out({1}, x.requires_grad);
    double s = 0.0;
    for (const double v : *x.values) s += v;
    (*out.values)[0] = s / n;
    if (out.requires_grad) {
        push("mean", [x, out, n]() {
            if (!x.grad) return;
            const double g = (*out.grad)[0] / n;
            for (double& gv : *x.grad) gv += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// structural
// ---------------------------------------------------------------------------

Tensor Graph::concat_last(const Tensor& a, const Tensor& b) {
    require(a.shape.size() == b.shape.size() && !a.shape.empty(), "concat",
            "rank mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    for (size_t i = 0; i + 1 < a.shape.size(); ++i)
        require(a.shape[i] == b.shape[i], "concat",
                "leading dims differ " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    const int da = a.shape.back(), db = b.shape.back();
    Shape out_shape = a.shape;
    out_shape.back() = da + db;
    const int64_t rows = a.numel() / da;
    Tensor out = make_out(out_shape, a.requires_grad || b.requires_grad);
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        for (int j = 0; j < da; ++j) od[r * (da + db) + j] = ad[r * da + j];
        for (int j = 0; j < db; ++j) od[r * (da + db) + da + j] = bd[r * db + j];
    }
    if (out.requires_grad) {
        push("concat", [a, b, out, rows, da, db]() {
            const double* go = out.gdata();
            if (a.grad) {
                double* ga = a.gdata();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < da; ++j) ga[r * da + j] += go[r * (da + db) + j];
            }
            if (b.grad) {
                double* gb = b.gdata();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < db; ++j) gb[r * db + j] += go[r * (da + db) + da + j];
            }
        });
    }
    return out;
}

Tensor Graph::slice_last(const Tensor& x, int offset, int len) {
    require(!x.shape.empty(), "slice", "undefined operand");
    const int d = x.shape.back();
    require(offset >= 0 && len > 0 && offset + len <= d, "slice",
            "range [" + std::to_string(offset) + "," + std::to_string(offset + len) +
                ") out of bounds for " + shape_str(x.shape));
    Shape out_shape = x.shape;
    out_shape.back() = len;
    const int64_t rows = x.numel() / d;
    Tensor out = make_out(out_shape, x.requires_grad);
    const double* xd = x.data();
    double* od = out.data();
    for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < len; ++j) od[r * len + j] = xd[r * d + offset + j];
    if (out.requires_grad) {
        push("slice", [x, out, rows, d, offset, len]() {
            if (!x.grad) return;
            const double* go = out.gdata();
            double* gx = x.gdata();
            for (int64_t r = 0; r < rows; ++r)
                for (int j = 0; j < len; ++j) gx[r * d + offset + j] += go[r * len + j];
        });
    }
    return out;
}

Tensor Graph::slice_time(const Tensor& x, int t) {
    require(x.shape.size() == 3, "slice_time", "operand must be [B,T,F], got " + shape_str(x.shape));
    const int B = x.shape[0], T = x.shape[1], F = x.shape[2];
    require(t >= 0 && t < T, "slice_time", "step " + std::to_string(t) + " out of range");
    Tensor out = make_out({B, F}, x.requires_grad);
    const double* xd = x.data();
    double* od = out.data();
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f)
            od[static_cast<int64_t>(b) * F + f] = xd[(static_cast<int64_t>(b) * T + t) * F + f];
    if (out.requires_grad) {
        push("slice_time", [x, out, B, T, F, t]() {
            if (!x.grad) return;
            const double* go = out.gdata();
            double* gx = x.gdata();
            for (int b = 0; b < B; ++b)
                for (int f = 0; f < F; ++f)
                    gx[(static_cast<int64_t>(b) * T + t) * F + f] += go[static_cast<int64_t>(b) * F + f];
        });
    }
    return out;
}

Tensor Graph::stack_time(const std::vector<Tensor>& steps) {
    require(!steps.empty(), "stack_time", "no steps");
    const Shape& s0 = steps.front().shape;
    require(s0.size() == 2, "stack_time", "steps must be [B,F], got " + shape_str(s0));
    bool rg = false;
    for (const Tensor& s : steps) {
        require(s.shape == s0, "stack_time",
                "step shape " + shape_str(s.shape) + " differs from " + shape_str(s0));
        rg = rg || s.requires_grad;
    }
    const int B = s0[0], F = s0[1], T = static_cast<int>(steps.size());
    Tensor out = make_out({B, T, F}, rg);
    double* od = out.data();
    for (int t = 0; t < T; ++t) {
        const double* sd = steps[t].data();
        for (int b = 0; b < B; ++b)
            for (int f = 0; f < F; ++f)
                od[(static_cast<int64_t>(b) * T + t) * F + f] = sd[static_cast<int64_t>(b) * F + f];
    }
    if (out.requires_grad) {
        push("stack_time", [steps, out, B, T, F]() {
            const double* go = out.gdata();
            for (int t = 0; t < T; ++t) {
                if (!steps[t].grad) continue;
                double* gs = steps[t].gdata();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f)
                        gs[static_cast<int64_t>(b) * F + f] += go[(static_cast<int64_t>(b) * T + t) * F + f];
            }
        });
    }
    return out;
}

Tensor Graph::dropout_apply(const Tensor& x, std::shared_ptr<const std::vector<double>> mask) {
    require(mask && mask->size() == static_cast<size_t>(x.numel()), "dropout",
            "mask size does not match operand " + shape_str(x.shape));
    Tensor out = make_out(x.shape, x.requires_grad);
    const size_t n = x.values->size();
    for (size_t i = 0; i < n; ++i) (*out.values)[i] = (*x.values)[i] * (*mask)[i];
    if (out.requires_grad) {
        push("dropout", [x, out, mask]() {
            if (!x.grad) return;
            const size_t m = out.grad->size();
            for (size_t i = 0; i < m; ++i) (*x.grad)[i] += (*out.grad)[i] * (*mask)[i];
        });
    }
    return out;
}

Tensor Graph::bce_loss(const Tensor& p, const std::vector<int>& labels, double w_neg, double w_pos) {
    const int64_t n = p.numel();
    require(n == static_cast<int64_t>(labels.size()), "bce",
            "got " + std::to_string(n) + " probabilities for " + std::to_string(labels.size()) +
                " labels");
    require(n > 0, "bce", "empty input");
    static constexpr double kClip = 1e-7;
    auto y = std::make_shared<std::vector<int>>(labels);

    Tensor out = make_out({1}, p.requires_grad);
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double pc = std::clamp((*p.values)[i], kClip, 1.0 - kClip);
        const double w = (*y)[i] ? w_pos : w_neg;
        acc += w * ((*y)[i] ? std::log(pc) : std::log(1.0 - pc));
    }
    (*out.values)[0] = -acc / static_cast<double>(n);

    if (out.requires_grad) {
        push("bce", [p, out, y, w_neg, w_pos, n]() {
            if (!p.grad) return;
            const double g = (*out.grad)[0];
            for (int64_t i = 0; i < n; ++i) {
                const double pv = (*p.values)[i];
                if (pv <= kClip || pv >= 1.0 - kClip) continue;  // clipped: no gradient
                const double w = (*y)[i] ? w_pos : w_neg;
                const double d = (*y)[i] ? 1.0 / pv : -1.0 / (1.0 - pv);
                (*p.grad)[i] += g * (-w * d / static_cast<double>(n));
            }
        });
    }
    return out;
}

}  // namespace haelt::ad
