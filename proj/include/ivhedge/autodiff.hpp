#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>

#include <Eigen/Core>

namespace ivhedge {

using Array = Eigen::ArrayXXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Array& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over batched arrays. Every node holds a whole matrix
/// (features x paths), so one recorded operation covers a full batch.
///
/// backward() walks the nodes in reverse creation order, which is a reverse
/// topological order because inputs are always created before their
/// consumers. Intermediate values are released as soon as they are no longer
/// needed, so only leaf values and gradients survive a backward pass.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// A leaf. Its gradient is kept after backward() when `requires_grad` is set.
    Var leaf(Array value, bool requires_grad);
    Var constant(Array value) { return leaf(std::move(value), false); }
    Var constant(double v, Eigen::Index rows, Eigen::Index cols) { return leaf(Array::Constant(rows, cols, v), false); }

    /// Seeds `output` with `seed` (same shape) and propagates. Throws UsageError if
    /// nothing was recorded or backward already ran.
    void backward(Var output, const Array& seed);
    /// Seeds a 1x1 output with 1.
    void backward(Var output);

    /// Accumulated gradient of a leaf created with requires_grad (zeros if unreached).
    Array grad(Var v) const;

    const Array& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // --- kink bookkeeping for finite-difference checks ---------------------
    /// When enabled, every non-smooth op folds its branch decisions into
    /// signature() and its distance to the kink into min_kink_margin().
    void set_track_kinks(bool on) { track_kinks_ = on; }
    bool track_kinks() const { return track_kinks_; }
    std::uint64_t signature() const { return signature_; }
    double min_kink_margin() const { return min_margin_; }
    void note_kink(const Mask& branch, const Array& margin);

    // --- building blocks for ops --------------------------------------------
    using BackwardFn = std::function<void(Tape&, const Array& grad_out, const Array& value_out)>;
    /// Records a node computed from `inputs`. `back` receives this node's gradient and
    /// value and must call accumulate() on the inputs. It runs only if some input requires grad.
    Var record(Array value, std::initializer_list<Var> inputs, BackwardFn back);
    void accumulate(Var v, const Array& g);
    template <typename Expr>
    void accumulate_expr(Var v, const Expr& g) {
        Node& n = nodes_[v.id];
        if (!n.requires_grad) {
            return;
        }
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

private:
    struct Node {
        Array value;
        Array grad;
        BackwardFn back;
        bool requires_grad = false;
        bool is_leaf = false;
    };
    std::deque<Node> nodes_;
    bool backward_done_ = false;
    bool track_kinks_ = false;
    std::uint64_t signature_ = 0x243f6a8885a308d3ULL;
    double min_margin_ = std::numeric_limits<double>::infinity();
};

// --- elementwise arithmetic (operands must have identical shapes) ----------
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator*(Var a, double c);
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator*(double c, Var a) { return a * c; }
/// a + c with a constant array c of the same shape.
Var add(Var a, const Array& c);
/// a * c with a constant array c of the same shape.
Var mul(Var a, const Array& c);

Var square(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
/// |a| with subgradient sign(0) = 0.
Var abs(Var a);
/// Elementwise minimum; on ties the gradient goes to the first argument.
Var min(Var a, Var b);
/// take_first ? a : b elementwise. `margin` (distance of the deciding quantity
/// to its threshold) is only used for kink tracking and may be empty.
Var select(const Mask& take_first, Var a, Var b, const Array& margin = Array());

/// Sum of all entries as a 1x1 node.
Var sum(Var a);
/// Weighted sum sum_ij w_ij a_ij as a 1x1 node.
Var dot(Var a, const Array& w);
/// Rows of a stacked on top of rows of b (equal column counts).
Var vstack(Var a, Var b);
/// Row `r` of a as a 1 x cols node.
Var row(Var a, Eigen::Index r);

/// act(W x + b) with W (out x in), x (in x n), b (out x 1) broadcast over columns.
enum class Activation { Identity, Relu };
Var dense(Var W, Var b, Var x, Activation act);

/// Gated cell: with P = W x + b split into three blocks of `width` rows,
/// i = sigm(P_i), o = sigm(P_o), c = i * tanh(P_c), output o * tanh(c).
Var lstm_cell(Var W, Var b, Var x);

}  // namespace ivhedge
