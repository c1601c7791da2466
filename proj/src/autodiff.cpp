#include "ivhedge/autodiff.hpp"

#include <cmath>

#include "ivhedge/errors.hpp"
#include "ivhedge/rng.hpp"

namespace ivhedge {

const Array& Var::value() const { return tape->value(*this); }

Var Tape::leaf(Array value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::record(Array value, std::initializer_list<Var> inputs, BackwardFn back) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : inputs) {
        if (v.tape != this) {
            throw UsageError("operands recorded on different tapes");
        }
        n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    if (n.requires_grad) {
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Array& g) { accumulate_expr(v, g); }

void Tape::note_kink(const Mask& branch, const Array& margin) {
    if (!track_kinks_) {
        return;
    }
    std::uint64_t h = signature_;
    for (Eigen::Index k = 0; k < branch.size(); ++k) {
        h = mix64(h ^ (branch.data()[k] ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL));
    }
    signature_ = h;
    if (margin.size() > 0) {
        min_margin_ = std::min(min_margin_, margin.abs().minCoeff());
    }
}

void Tape::backward(Var output, const Array& seed) {
    if (nodes_.empty()) {
        throw UsageError("backward called on an empty tape");
    }
    if (backward_done_) {
        throw UsageError("backward already ran on this tape");
    }
    if (output.tape != this) {
        throw UsageError("backward output belongs to another tape");
    }
    const Node& out = nodes_[output.id];
    if (seed.rows() != out.value.rows() || seed.cols() != out.value.cols()) {
        throw UsageError("backward seed shape does not match the output");
    }
    backward_done_ = true;
    if (!out.requires_grad) {
        return;
    }
    accumulate(output, seed);
    for (std::size_t k = output.id + 1; k-- > 0;) {
        Node& n = nodes_[k];
        if (n.back && n.grad.size() > 0) {
            const Array g = std::move(n.grad);
            n.back(*this, g, n.value);
            n.grad = Array();
        }
        if (!n.is_leaf) {
            n.value = Array();
            n.grad = Array();
            n.back = nullptr;
        }
    }
}

void Tape::backward(Var output) {
    if (nodes_.empty()) {
        throw UsageError("backward called on an empty tape");
    }
    const Node& out = nodes_.at(output.id);
    if (out.value.size() != 1) {
        throw UsageError("backward without a seed needs a 1x1 output");
    }
    backward(output, Array::Ones(1, 1));
}

Array Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (!n.is_leaf || !n.requires_grad) {
        throw UsageError("gradients are kept only for leaves created with requires_grad");
    }
    if (n.grad.size() == 0) {
        return Array::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

namespace {

void check_same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw UsageError(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Var operator+(Var a, Var b) {
    check_same_shape(a, b, "add");
    return a.tape->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Array& g, const Array&) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var operator-(Var a, Var b) {
    check_same_shape(a, b, "sub");
    return a.tape->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Array& g, const Array&) {
        t.accumulate(a, g);
        t.accumulate_expr(b, -g);
    });
}

Var operator*(Var a, Var b) {
    check_same_shape(a, b, "mul");
    return a.tape->record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Array& g, const Array&) {
        t.accumulate_expr(a, g * t.value(b));
        t.accumulate_expr(b, g * t.value(a));
    });
}

Var operator-(Var a) {
    return a.tape->record(-a.value(), {a}, [a](Tape& t, const Array& g, const Array&) { t.accumulate_expr(a, -g); });
}

Var operator+(Var a, double c) {
    return a.tape->record(a.value() + c, {a}, [a](Tape& t, const Array& g, const Array&) { t.accumulate(a, g); });
}

Var operator*(Var a, double c) {
    return a.tape->record(a.value() * c, {a}, [a, c](Tape& t, const Array& g, const Array&) { t.accumulate_expr(a, g * c); });
}

Var add(Var a, const Array& c) {
    if (a.rows() != c.rows() || a.cols() != c.cols()) {
        throw UsageError("add: shape mismatch");
    }
    return a.tape->record(a.value() + c, {a}, [a](Tape& t, const Array& g, const Array&) { t.accumulate(a, g); });
}

Var mul(Var a, const Array& c) {
    if (a.rows() != c.rows() || a.cols() != c.cols()) {
        throw UsageError("mul: shape mismatch");
    }
    return a.tape->record(a.value() * c, {a}, [a, c](Tape& t, const Array& g, const Array&) { t.accumulate_expr(a, g * c); });
}

Var square(Var a) {
    return a.tape->record(a.value().square(), {a},
                          [a](Tape& t, const Array& g, const Array&) { t.accumulate_expr(a, 2.0 * g * t.value(a)); });
}

Var sigmoid(Var a) {
    return a.tape->record(1.0 / (1.0 + (-a.value()).exp()), {a}, [a](Tape& t, const Array& g, const Array& y) {
        t.accumulate_expr(a, g * y * (1.0 - y));
    });
}

Var tanh(Var a) {
    return a.tape->record(a.value().tanh(), {a}, [a](Tape& t, const Array& g, const Array& y) {
        t.accumulate_expr(a, g * (1.0 - y.square()));
    });
}

Var relu(Var a) {
    const Array& x = a.value();
    a.tape->note_kink(x > 0.0, x);
    return a.tape->record(x.max(0.0), {a}, [a](Tape& t, const Array& g, const Array& y) {
        t.accumulate_expr(a, (y > 0.0).select(g, 0.0));
    });
}

Var abs(Var a) {
    const Array& x = a.value();
    a.tape->note_kink(x > 0.0, x);
    return a.tape->record(x.abs(), {a}, [a](Tape& t, const Array& g, const Array&) {
        const Array& v = t.value(a);
        t.accumulate_expr(a, g * ((v > 0.0).cast<double>() - (v < 0.0).cast<double>()));
    });
}

Var min(Var a, Var b) {
    check_same_shape(a, b, "min");
    const Mask first = a.value() <= b.value();
    a.tape->note_kink(first, a.value() - b.value());
    return a.tape->record(first.select(a.value(), b.value()), {a, b}, [a, b, first](Tape& t, const Array& g, const Array&) {
        t.accumulate_expr(a, first.select(g, 0.0));
        t.accumulate_expr(b, first.select(0.0, g));
    });
}

Var select(const Mask& take_first, Var a, Var b, const Array& margin) {
    check_same_shape(a, b, "select");
    if (take_first.rows() != a.rows() || take_first.cols() != a.cols()) {
        throw UsageError("select: mask shape mismatch");
    }
    a.tape->note_kink(take_first, margin);
    return a.tape->record(take_first.select(a.value(), b.value()), {a, b},
                          [a, b, take_first](Tape& t, const Array& g, const Array&) {
                              t.accumulate_expr(a, take_first.select(g, 0.0));
                              t.accumulate_expr(b, take_first.select(0.0, g));
                          });
}

Var sum(Var a) {
    Array s(1, 1);
    s(0, 0) = a.value().sum();
    const Eigen::Index r = a.rows();
    const Eigen::Index c = a.cols();
    return a.tape->record(std::move(s), {a}, [a, r, c](Tape& t, const Array& g, const Array&) {
        t.accumulate_expr(a, Array::Constant(r, c, g(0, 0)));
    });
}

Var dot(Var a, const Array& w) {
    if (a.rows() != w.rows() || a.cols() != w.cols()) {
        throw UsageError("dot: shape mismatch");
    }
    Array s(1, 1);
    s(0, 0) = (a.value() * w).sum();
    return a.tape->record(std::move(s), {a}, [a, w](Tape& t, const Array& g, const Array&) { t.accumulate_expr(a, w * g(0, 0)); });
}

Var vstack(Var a, Var b) {
    if (a.cols() != b.cols()) {
        throw UsageError("vstack: column mismatch");
    }
    Array v(a.rows() + b.rows(), a.cols());
    v.topRows(a.rows()) = a.value();
    v.bottomRows(b.rows()) = b.value();
    const Eigen::Index ra = a.rows();
    const Eigen::Index rb = b.rows();
    return a.tape->record(std::move(v), {a, b}, [a, b, ra, rb](Tape& t, const Array& g, const Array&) {
        t.accumulate_expr(a, g.topRows(ra));
        t.accumulate_expr(b, g.bottomRows(rb));
    });
}

Var row(Var a, Eigen::Index r) {
    if (r < 0 || r >= a.rows()) {
        throw UsageError("row: index out of range");
    }
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = a.cols();
    return a.tape->record(a.value().row(r), {a}, [a, r, rows, cols](Tape& t, const Array& g, const Array&) {
        Array full = Array::Zero(rows, cols);
        full.row(r) = g;
        t.accumulate(a, full);
    });
}

Var dense(Var W, Var b, Var x, Activation act) {
    if (W.cols() != x.rows() || b.rows() != W.rows() || b.cols() != 1) {
        throw UsageError("dense: shape mismatch");
    }
    Array pre = (W.value().matrix() * x.value().matrix()).array();
    pre.colwise() += b.value().col(0);
    const bool is_relu = act == Activation::Relu;
    if (is_relu) {
        x.tape->note_kink(pre > 0.0, pre);
        pre = pre.max(0.0);
    }
    return x.tape->record(std::move(pre), {W, b, x}, [W, b, x, is_relu](Tape& t, const Array& g, const Array& y) {
        const Eigen::MatrixXd dpre = is_relu ? Eigen::MatrixXd((y > 0.0).select(g, 0.0).matrix()) : g.matrix();
        if (t.requires_grad(W)) {
            t.accumulate_expr(W, (dpre * t.value(x).matrix().transpose()).array());
        }
        if (t.requires_grad(b)) {
            t.accumulate_expr(b, dpre.rowwise().sum().array());
        }
        if (t.requires_grad(x)) {
            t.accumulate_expr(x, (t.value(W).matrix().transpose() * dpre).array());
        }
    });
}

Var lstm_cell(Var W, Var b, Var x) {
    if (W.cols() != x.rows() || b.rows() != W.rows() || b.cols() != 1 || W.rows() % 3 != 0) {
        throw UsageError("lstm_cell: shape mismatch");
    }
    const Eigen::Index d = W.rows() / 3;
    Array pre = (W.value().matrix() * x.value().matrix()).array();
    pre.colwise() += b.value().col(0);
    // gates rows: [i; o; g; tanh(c)]
    Array gates(4 * d, pre.cols());
    gates.topRows(2 * d) = 1.0 / (1.0 + (-pre.topRows(2 * d)).exp());
    gates.middleRows(2 * d, d) = pre.bottomRows(d).tanh();
    gates.bottomRows(d) = (gates.topRows(d) * gates.middleRows(2 * d, d)).tanh();
    Array out = gates.middleRows(d, d) * gates.bottomRows(d);
    return x.tape->record(std::move(out), {W, b, x}, [W, b, x, d, gates = std::move(gates)](Tape& t, const Array& g, const Array&) {
        const auto i = gates.topRows(d);
        const auto o = gates.middleRows(d, d);
        const auto gg = gates.middleRows(2 * d, d);
        const auto tc = gates.bottomRows(d);
        const Array dc = g * o * (1.0 - tc.square());
        Eigen::MatrixXd dpre(3 * d, g.cols());
        dpre.topRows(d) = (dc * gg * i * (1.0 - i)).matrix();
        dpre.middleRows(d, d) = (g * tc * o * (1.0 - o)).matrix();
        dpre.bottomRows(d) = (dc * i * (1.0 - gg.square())).matrix();
        if (t.requires_grad(W)) {
            t.accumulate_expr(W, (dpre * t.value(x).matrix().transpose()).array());
        }
        if (t.requires_grad(b)) {
            t.accumulate_expr(b, dpre.rowwise().sum().array());
        }
        if (t.requires_grad(x)) {
            t.accumulate_expr(x, (t.value(W).matrix().transpose() * dpre).array());
        }
    });
}

}  // namespace ivhedge
