#pragma once

// Minimal reverse-mode differentiation over dense row-major double tensors,
// plus the Adam optimizer.
//
// Values are owned by Tensor. Var is a cheap handle to a tensor; a Tape
// records the adjoint of every primitive executed while it is recording and
// replays them in reverse from a scalar root. There is no broadcasting: every
// primitive states its shape contract and throws ShapeError when violated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sralstm {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyNeighborSetError : public std::invalid_argument {
public:
    EmptyNeighborSetError() : std::invalid_argument("masked_softmax: empty neighbor set (every entry masked)") {}
};

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

struct Tensor {
    Shape shape;
    std::vector<double> values;
    // Empty when the tensor carries no gradient slot; otherwise same length as values.
    std::vector<double> grad;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)) {
        check_shape();
        values.assign(sralstm::numel(shape), fill);
    }

    Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
        check_shape();
        if (values.size() != sralstm::numel(shape))
            throw ShapeError("Tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                             shape_str(shape));
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    static Tensor row(std::vector<double> v) {
        const std::size_t n = v.size();
        return Tensor({1, n}, std::move(v));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> v;
        v.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
            v.insert(v.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(v));
    }

    std::size_t numel() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
    bool has_grad() const { return !grad.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() {
        if (has_grad()) std::fill(grad.begin(), grad.end(), 0.0);
    }

    bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

private:
    void check_shape() const {
        if (shape.empty()) throw ShapeError("Tensor: shape must have at least one extent");
        for (auto e : shape)
            if (e == 0) throw ShapeError("Tensor: zero extent in shape " + shape_str(shape));
    }
};

using NamedTensors = std::map<std::string, Tensor>;

/// Handle to a tensor taking part in a computation.
///
/// `constant` and `variable` own their tensor; `leaf` aliases a tensor owned
/// elsewhere (model parameters), so gradients land directly in that tensor's
/// grad slot. Copies of a Var share the same tensor.
class Var {
public:
    Var() = default;

    static Var constant(Tensor t) { return Var(std::make_shared<Tensor>(std::move(t)), false); }
    static Var variable(Tensor t) { return Var(std::make_shared<Tensor>(std::move(t)), true); }
    static Var leaf(Tensor& t) {
        t.ensure_grad();
        return Var(std::shared_ptr<Tensor>(std::shared_ptr<Tensor>{}, &t), true);
    }
    // Read-only alias; never written through since it does not require grad.
    static Var constant_view(const Tensor& t) {
        return Var(std::shared_ptr<Tensor>(std::shared_ptr<Tensor>{}, const_cast<Tensor*>(&t)), false);
    }

    const Tensor& value() const { return *t_; }
    Tensor& tensor() const { return *t_; }
    const Shape& shape() const { return t_->shape; }
    std::size_t numel() const { return t_->numel(); }
    bool requires_grad() const { return requires_grad_; }
    bool valid() const { return static_cast<bool>(t_); }
    double item() const {
        if (t_->numel() != 1) throw ShapeError("item(): tensor " + shape_str(t_->shape) + " is not a scalar");
        return t_->values[0];
    }
    bool same_tensor(const Var& o) const { return t_.get() == o.t_.get(); }

private:
    Var(std::shared_ptr<Tensor> t, bool rg) : t_(std::move(t)), requires_grad_(rg) {}

    std::shared_ptr<Tensor> t_;
    bool requires_grad_ = false;
};

namespace detail {

// Active during Tape::backward on this thread. Gradients bound for tensors
// that are not outputs of the tape (leaves) are staged here and added to the
// leaf in one step at the end, so a replay adds exactly the same amount as
// the first pass did.
struct BackwardContext {
    std::unordered_set<const Tensor*> interior;
    std::unordered_map<Tensor*, std::vector<double>> staged;
};

inline BackwardContext*& backward_context() {
    thread_local BackwardContext* ctx = nullptr;
    return ctx;
}

}  // namespace detail

/// Ordered record of executed primitives.
///
/// A non-recording tape evaluates values only. Distinct tapes are
/// independent and may live on different threads.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    std::size_t size() const { return records_.size(); }

    bool wants(std::initializer_list<const Var*> inputs) const {
        if (!recording_) return false;
        return std::any_of(inputs.begin(), inputs.end(), [](const Var* v) { return v->requires_grad(); });
    }

    // The adjoint reads output.tensor().grad and accumulates into its inputs.
    void record(const Var& output, std::function<void()> adjoint) {
        records_.push_back({output, std::move(adjoint)});
    }

    /// Seeds d(root)/d(root) = 1 and replays every adjoint once, newest first.
    /// Gradients of intermediate results are reset at the start of each call;
    /// leaf gradients accumulate until zeroed by the caller.
    void backward(const Var& root) {
        if (root.numel() != 1)
            throw ShapeError("backward: root must be scalar, got " + shape_str(root.shape()));
        detail::BackwardContext ctx;
        for (auto& r : records_) {
            r.output.tensor().grad.clear();
            ctx.interior.insert(&r.output.value());
        }
        root.tensor().ensure_grad();
        root.tensor().grad[0] += 1.0;
        struct Scope {
            detail::BackwardContext* prev;
            explicit Scope(detail::BackwardContext* c) : prev(detail::backward_context()) {
                detail::backward_context() = c;
            }
            ~Scope() { detail::backward_context() = prev; }
        } scope(&ctx);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            if (!it->output.value().has_grad()) continue;  // not reachable from root
            it->adjoint();
        }
        for (auto& [t, g] : ctx.staged) {
            t->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
        }
    }

    void clear() { records_.clear(); }

private:
    struct Record {
        Var output;
        std::function<void()> adjoint;
    };
    bool recording_;
    std::vector<Record> records_;
};

namespace detail {

inline void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value produced");
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

inline void accumulate(const Var& into, std::span<const double> g) {
    if (!into.requires_grad()) return;
    Tensor& t = into.tensor();
    auto* ctx = backward_context();
    if (ctx && !ctx->interior.count(&t)) {
        auto& buf = ctx->staged[&t];
        if (buf.empty()) buf.assign(t.numel(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
        return;
    }
    t.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) t.grad[i] += g[i];
}

inline bool total_less(double a, double b) {
    if (a < b) return true;
    if (b < a) return false;
    return std::signbit(a) && !std::signbit(b);
}

}  // namespace detail

/// Sum whose result depends only on the multiset of terms, not their order.
/// Used wherever a reduction runs over pedestrians so that relabeling a scene
/// reproduces results bit for bit.
inline double canonical_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end(), detail::total_less);
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

// ---------------------------------------------------------------------------
// Primitives

inline Var matmul(Tape& tape, const Var& a, const Var& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    const auto& A = a.value().values;
    const auto& B = b.value().values;
    for (std::size_t i = 0; i < m; ++i) {
        double* o = &out.values[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            const double* brow = &B[p * n];
            for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
        }
    }
    detail::require_finite(out, "matmul");
    Var res = tape.wants({&a, &b}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [a, b, res, m, k, n] {
            const auto& G = res.value().grad;
            const auto& A = a.value().values;
            const auto& B = b.value().values;
            if (a.requires_grad()) {
                std::vector<double> ga(m * k, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double* g = &G[i * n];
                        const double* brow = &B[p * n];
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += g[j] * brow[j];
                        ga[i * k + p] = s;
                    }
                detail::accumulate(a, ga);
            }
            if (b.requires_grad()) {
                std::vector<double> gb(k * n, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = A[i * k + p];
                        if (av == 0.0) continue;
                        double* row = &gb[p * n];
                        const double* g = &G[i * n];
                        for (std::size_t j = 0; j < n; ++j) row[j] += av * g[j];
                    }
                detail::accumulate(b, gb);
            }
        });
    }
    return res;
}

enum class UnaryOp { sigmoid, tanh, relu, exp };
enum class BinaryOp { add, sub, mul };

inline const char* op_name(UnaryOp op) {
    switch (op) {
        case UnaryOp::sigmoid: return "sigmoid";
        case UnaryOp::tanh: return "tanh";
        case UnaryOp::relu: return "relu";
        case UnaryOp::exp: return "exp";
    }
    return "?";
}

inline Var elementwise(Tape& tape, UnaryOp op, const Var& x) {
    Tensor out(x.shape());
    const auto& X = x.value().values;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double v = X[i];
        switch (op) {
            case UnaryOp::sigmoid: out.values[i] = 1.0 / (1.0 + std::exp(-v)); break;
            case UnaryOp::tanh: out.values[i] = std::tanh(v); break;
            case UnaryOp::relu: out.values[i] = v > 0.0 ? v : 0.0; break;
            case UnaryOp::exp: out.values[i] = std::exp(v); break;
        }
    }
    detail::require_finite(out, op_name(op));
    Var res = tape.wants({&x}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [op, x, res] {
            const auto& G = res.value().grad;
            const auto& Y = res.value().values;
            const auto& X = x.value().values;
            std::vector<double> gx(G.size());
            for (std::size_t i = 0; i < G.size(); ++i) {
                double d = 0.0;
                switch (op) {
                    case UnaryOp::sigmoid: d = Y[i] * (1.0 - Y[i]); break;
                    case UnaryOp::tanh: d = 1.0 - Y[i] * Y[i]; break;
                    case UnaryOp::relu: d = X[i] > 0.0 ? 1.0 : 0.0; break;
                    case UnaryOp::exp: d = Y[i]; break;
                }
                gx[i] = G[i] * d;
            }
            detail::accumulate(x, gx);
        });
    }
    return res;
}

inline Var elementwise(Tape& tape, BinaryOp op, const Var& a, const Var& b) {
    const char* name = op == BinaryOp::add ? "add" : op == BinaryOp::sub ? "sub" : "mul";
    detail::require_same_shape(a, b, name);
    Tensor out(a.shape());
    const auto& A = a.value().values;
    const auto& B = b.value().values;
    for (std::size_t i = 0; i < A.size(); ++i) {
        switch (op) {
            case BinaryOp::add: out.values[i] = A[i] + B[i]; break;
            case BinaryOp::sub: out.values[i] = A[i] - B[i]; break;
            case BinaryOp::mul: out.values[i] = A[i] * B[i]; break;
        }
    }
    detail::require_finite(out, name);
    Var res = tape.wants({&a, &b}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [op, a, b, res] {
            const auto& G = res.value().grad;
            if (op == BinaryOp::mul) {
                const auto& A = a.value().values;
                const auto& B = b.value().values;
                std::vector<double> g(G.size());
                if (a.requires_grad()) {
                    for (std::size_t i = 0; i < G.size(); ++i) g[i] = G[i] * B[i];
                    detail::accumulate(a, g);
                }
                if (b.requires_grad()) {
                    for (std::size_t i = 0; i < G.size(); ++i) g[i] = G[i] * A[i];
                    detail::accumulate(b, g);
                }
                return;
            }
            detail::accumulate(a, G);
            if (op == BinaryOp::add) {
                detail::accumulate(b, G);
            } else if (b.requires_grad()) {
                std::vector<double> g(G.size());
                for (std::size_t i = 0; i < G.size(); ++i) g[i] = -G[i];
                detail::accumulate(b, g);
            }
        });
    }
    return res;
}

inline Var sigmoid(Tape& t, const Var& x) { return elementwise(t, UnaryOp::sigmoid, x); }
inline Var tanh(Tape& t, const Var& x) { return elementwise(t, UnaryOp::tanh, x); }
inline Var relu(Tape& t, const Var& x) { return elementwise(t, UnaryOp::relu, x); }
inline Var exp(Tape& t, const Var& x) { return elementwise(t, UnaryOp::exp, x); }
inline Var add(Tape& t, const Var& a, const Var& b) { return elementwise(t, BinaryOp::add, a, b); }
inline Var sub(Tape& t, const Var& a, const Var& b) { return elementwise(t, BinaryOp::sub, a, b); }
inline Var mul(Tape& t, const Var& a, const Var& b) { return elementwise(t, BinaryOp::mul, a, b); }

/// x [m x n] plus a bias row [1 x n] added to every row. The one explicit
/// row-replicating primitive; nothing else broadcasts.
inline Var add_bias(Tape& tape, const Var& x, const Var& bias) {
    if (x.shape().size() != 2 || bias.shape() != Shape{1, x.shape()[1]})
        throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    Tensor out = x.value();
    out.grad.clear();
    const auto& B = bias.value().values;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] += B[j];
    detail::require_finite(out, "add_bias");
    Var res = tape.wants({&x, &bias}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [x, bias, res, m, n] {
            const auto& G = res.value().grad;
            detail::accumulate(x, G);
            if (bias.requires_grad()) {
                std::vector<double> g(n, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[j] += G[i * n + j];
                detail::accumulate(bias, g);
            }
        });
    }
    return res;
}

inline Var scale(Tape& tape, const Var& x, double c) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] = x.value().values[i] * c;
    detail::require_finite(out, "scale");
    Var res = tape.wants({&x}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [x, res, c] {
            const auto& G = res.value().grad;
            std::vector<double> g(G.size());
            for (std::size_t i = 0; i < G.size(); ++i) g[i] = G[i] * c;
            detail::accumulate(x, g);
        });
    }
    return res;
}

inline Var sum(Tape& tape, const Var& x) {
    double s = 0.0;
    for (double v : x.value().values) s += v;
    Tensor out = Tensor::scalar(s);
    detail::require_finite(out, "sum");
    Var res = tape.wants({&x}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [x, res] {
            std::vector<double> g(x.numel(), res.value().grad[0]);
            detail::accumulate(x, g);
        });
    }
    return res;
}

namespace detail {

// Splits shape around `axis` into (outer, extent, inner) for strided copies.
struct AxisView {
    std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
    AxisView v;
    for (std::size_t d = 0; d < axis; ++d) v.outer *= s[d];
    v.extent = s[axis];
    for (std::size_t d = axis + 1; d < s.size(); ++d) v.inner *= s[d];
    return v;
}

}  // namespace detail

inline Var concat(Tape& tape, std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = parts[0].shape();
    if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_str(ref));
    Shape out_shape = ref;
    out_shape[axis] = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == ref.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d)
            if (d != axis && s[d] != ref[d]) ok = false;
        if (!ok) throw ShapeError("concat: incompatible shapes " + shape_str(ref) + " and " + shape_str(s));
        out_shape[axis] += s[axis];
        any_grad = any_grad || p.requires_grad();
    }
    Tensor out(out_shape);
    const auto ov = detail::axis_view(out_shape, axis);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto pv = detail::axis_view(p.shape(), axis);
        const auto& src = p.value().values;
        for (std::size_t o = 0; o < pv.outer; ++o)
            std::copy_n(&src[o * pv.extent * pv.inner], pv.extent * pv.inner,
                        &out.values[(o * ov.extent + offset) * ov.inner]);
        offset += pv.extent;
    }
    Var res = (tape.recording() && any_grad) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        std::vector<Var> inputs(parts.begin(), parts.end());
        tape.record(res, [inputs, res, axis, ov] {
            const auto& G = res.value().grad;
            std::size_t offset = 0;
            for (const auto& p : inputs) {
                const auto pv = detail::axis_view(p.shape(), axis);
                if (p.requires_grad()) {
                    std::vector<double> g(p.numel());
                    for (std::size_t o = 0; o < pv.outer; ++o)
                        std::copy_n(&G[(o * ov.extent + offset) * ov.inner], pv.extent * pv.inner,
                                    &g[o * pv.extent * pv.inner]);
                    detail::accumulate(p, g);
                }
                offset += pv.extent;
            }
        });
    }
    return res;
}

inline Var concat(Tape& tape, std::initializer_list<Var> parts, std::size_t axis) {
    return concat(tape, std::span<const Var>(parts.begin(), parts.size()), axis);
}

/// Elements [begin, end) along `axis`.
inline Var slice(Tape& tape, const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& s = x.shape();
    if (axis >= s.size() || begin >= end || end > s[axis])
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid on axis " + std::to_string(axis) + " of " + shape_str(s));
    Shape os = s;
    os[axis] = end - begin;
    Tensor out(os);
    const auto iv = detail::axis_view(s, axis);
    const std::size_t w = (end - begin) * iv.inner;
    for (std::size_t o = 0; o < iv.outer; ++o)
        std::copy_n(&x.value().values[(o * iv.extent + begin) * iv.inner], w, &out.values[o * w]);
    Var res = tape.wants({&x}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [x, res, iv, begin, w] {
            const auto& G = res.value().grad;
            std::vector<double> gx(x.numel(), 0.0);
            for (std::size_t o = 0; o < iv.outer; ++o)
                for (std::size_t q = 0; q < w; ++q) gx[(o * iv.extent + begin) * iv.inner + q] = G[o * w + q];
            detail::accumulate(x, gx);
        });
    }
    return res;
}

/// Rows of a matrix picked by index (repeats allowed).
inline Var gather_rows(Tape& tape, const Var& x, std::span<const std::size_t> index) {
    if (x.shape().size() != 2) throw ShapeError("gather_rows: expected matrix, got " + shape_str(x.shape()));
    if (index.empty()) throw ShapeError("gather_rows: empty index");
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    Tensor out({index.size(), n});
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= m) throw ShapeError("gather_rows: row " + std::to_string(index[r]) + " out of range");
        std::copy_n(&x.value().values[index[r] * n], n, &out.values[r * n]);
    }
    Var res = tape.wants({&x}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        std::vector<std::size_t> idx(index.begin(), index.end());
        tape.record(res, [x, res, idx = std::move(idx), n] {
            const auto& G = res.value().grad;
            std::vector<double> gx(x.numel(), 0.0);
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < n; ++j) gx[idx[r] * n + j] += G[r * n + j];
            detail::accumulate(x, gx);
        });
    }
    return res;
}

/// Softmax over the entries where mask is true; masked entries are exactly 0.
/// Shifts by the largest unmasked logit before exponentiating.
inline Var masked_softmax(Tape& tape, const Var& logits, const std::vector<bool>& mask) {
    const std::size_t n = logits.numel();
    if (mask.size() != n)
        throw ShapeError("masked_softmax: mask length " + std::to_string(mask.size()) + " vs logits " +
                         shape_str(logits.shape()));
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) throw EmptyNeighborSetError();
    const auto& L = logits.value().values;
    double mx = -INFINITY;
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) mx = std::max(mx, L[i]);
    Tensor out(logits.shape());
    std::vector<double> terms;
    terms.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) {
            out.values[i] = std::exp(L[i] - mx);
            terms.push_back(out.values[i]);
        }
    const double denom = canonical_sum(std::move(terms));
    for (std::size_t i = 0; i < n; ++i) out.values[i] = mask[i] ? out.values[i] / denom : 0.0;
    detail::require_finite(out, "masked_softmax");
    Var res = tape.wants({&logits}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [logits, res, mask] {
            const auto& G = res.value().grad;
            const auto& Y = res.value().values;
            double dot = 0.0;
            for (std::size_t i = 0; i < G.size(); ++i)
                if (mask[i]) dot += G[i] * Y[i];
            std::vector<double> g(G.size(), 0.0);
            for (std::size_t i = 0; i < G.size(); ++i)
                if (mask[i]) g[i] = Y[i] * (G[i] - dot);
            detail::accumulate(logits, g);
        });
    }
    return res;
}

/// sum_k weights[k] * rows[k, :], returned as [1 x d]. The reduction over k
/// is order independent (see canonical_sum).
inline Var weighted_sum(Tape& tape, const Var& weights, const Var& rows) {
    if (rows.shape().size() != 2 || weights.numel() != rows.shape()[0])
        throw ShapeError("weighted_sum: weights " + shape_str(weights.shape()) + " vs rows " +
                         shape_str(rows.shape()));
    const std::size_t k = rows.shape()[0], d = rows.shape()[1];
    const auto& W = weights.value().values;
    const auto& R = rows.value().values;
    Tensor out({1, d});
    std::vector<double> terms(k);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t r = 0; r < k; ++r) terms[r] = W[r] * R[r * d + c];
        out.values[c] = canonical_sum(terms);
    }
    detail::require_finite(out, "weighted_sum");
    Var res = tape.wants({&weights, &rows}) ? Var::variable(std::move(out)) : Var::constant(std::move(out));
    if (res.requires_grad()) {
        tape.record(res, [weights, rows, res, k, d] {
            const auto& G = res.value().grad;
            const auto& W = weights.value().values;
            const auto& R = rows.value().values;
            if (weights.requires_grad()) {
                std::vector<double> g(k, 0.0);
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t c = 0; c < d; ++c) g[r] += G[c] * R[r * d + c];
                detail::accumulate(weights, g);
            }
            if (rows.requires_grad()) {
                std::vector<double> g(k * d);
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t c = 0; c < d; ++c) g[r * d + c] = W[r] * G[c];
                detail::accumulate(rows, g);
            }
        });
    }
    return res;
}

// ---------------------------------------------------------------------------
// Optimization

inline double grad_norm(const NamedTensors& params) {
    double s = 0.0;
    for (const auto& [_, t] : params)
        for (double g : t.grad) s += g * g;
    return std::sqrt(s);
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_grad_norm(NamedTensors& params, double max_norm) {
    const double norm = grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const double f = max_norm / norm;
        for (auto& [_, t] : params)
            for (double& g : t.grad) g *= f;
    }
    return norm;
}

inline void zero_grads(NamedTensors& params) {
    for (auto& [_, t] : params) t.zero_grad();
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    NamedTensors first_moment;
    NamedTensors second_moment;

    explicit AdamState(AdamConfig c = {}) : config(c) {
        if (!(c.learning_rate >= 0.0) || !(c.beta1 > 0.0 && c.beta1 < 1.0) || !(c.beta2 > 0.0 && c.beta2 < 1.0) ||
            !(c.epsilon > 0.0))
            throw std::invalid_argument("AdamState: invalid hyperparameters");
    }
};

/// One bias-corrected Adam update applied in place. Gradients are left as-is.
inline void adam_step(NamedTensors& params, AdamState& state) {
    for (const auto& [name, t] : params)
        if (!t.has_grad()) throw std::invalid_argument("adam_step: parameter '" + name + "' has no gradient");
    const auto& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (auto& [name, t] : params) {
        auto [mit, m_new] = state.first_moment.try_emplace(name, t.shape);
        auto [vit, v_new] = state.second_moment.try_emplace(name, t.shape);
        if (mit->second.shape != t.shape || vit->second.shape != t.shape)
            throw ShapeError("adam_step: moment shape mismatch for '" + name + "'");
        auto& m = mit->second.values;
        auto& v = vit->second.values;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const double g = t.grad[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            t.values[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

}  // namespace sralstm
