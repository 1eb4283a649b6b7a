#include "rod/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rod/kernels.hpp"

namespace rod {

namespace {
constexpr double kLogFloor = 1e-12;
constexpr double kSqrtFloor = 1e-12;
constexpr double kRecipFloor = 1e-20;
constexpr double kNormFloor = 1e-12;

enum class Broadcast { None, Row, Col, Scalar };

Broadcast broadcast_kind(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (a.same_shape(b)) return Broadcast::None;
    if (b.rows == 1 && b.cols == 1) return Broadcast::Scalar;
    if (b.rows == 1 && b.cols == a.cols) return Broadcast::Row;
    if (b.cols == 1 && b.rows == a.rows) return Broadcast::Col;
    throw std::invalid_argument(std::string(what) + ": incompatible shapes " + a.shape_str() +
                                " vs " + b.shape_str());
}

double broadcast_at(const DenseMatrix& b, Broadcast bc, int i, int j) {
    switch (bc) {
        case Broadcast::None: return b(i, j);
        case Broadcast::Row: return b(0, j);
        case Broadcast::Col: return b(i, 0);
        case Broadcast::Scalar: return b(0, 0);
    }
    return 0.0;  // unreachable
}

void reduce_into(DenseMatrix& gb, Broadcast bc, const DenseMatrix& g, double sign) {
    switch (bc) {
        case Broadcast::None:
            for (size_t t = 0; t < g.size(); ++t) gb.data[t] += sign * g.data[t];
            break;
        case Broadcast::Row:
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gb(0, j) += sign * g(i, j);
            break;
        case Broadcast::Col:
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gb(i, 0) += sign * g(i, j);
            break;
        case Broadcast::Scalar:
            gb(0, 0) += sign * kernels::active().sum(g.data.data(), static_cast<int>(g.size()));
            break;
    }
}
}  // namespace

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(DenseMatrix v) {
    Node n;
    n.op = OpKind::Constant;
    n.value = std::move(v);
    return push(std::move(n));
}

Var Tape::param(const DenseMatrix& v) {
    Node n;
    n.op = OpKind::Param;
    n.value = v;
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::unary(OpKind op, Var a, double c0, double c1) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.c0 = c0;
    n.c1 = c1;
    n.needs_grad = node(a.id).needs_grad;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const auto& va = node(a.id).value;
    const auto& vb = node(b.id).value;
    if (va.cols != vb.rows)
        throw std::invalid_argument("matmul: " + va.shape_str() + " x " + vb.shape_str());
    Node n;
    n.op = OpKind::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
    n.value = DenseMatrix(va.rows, vb.cols);
    kernels::active().matmul(va.data.data(), vb.data.data(), n.value.data.data(), va.rows,
                             va.cols, vb.cols);
    return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
    const auto& va = node(a.id).value;
    const auto& vb = node(b.id).value;
    if (va.cols != vb.cols)
        throw std::invalid_argument("matmul_nt: " + va.shape_str() + " x " + vb.shape_str() +
                                    "^T");
    Node n;
    n.op = OpKind::MatMulNT;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
    n.value = DenseMatrix(va.rows, vb.rows);
    kernels::active().matmul_nt(va.data.data(), vb.data.data(), n.value.data.data(), va.rows,
                                va.cols, vb.rows);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const auto& va = node(a.id).value;
    const auto& vb = node(b.id).value;
    Broadcast bc = broadcast_kind(va, vb, "add");
    Node n;
    n.op = OpKind::Add;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
    n.value = DenseMatrix(va.rows, va.cols);
    if (bc == Broadcast::None) {
        kernels::active().add(va.data.data(), vb.data.data(), n.value.data.data(),
                              static_cast<int>(va.size()));
    } else {
        for (int i = 0; i < va.rows; ++i)
            for (int j = 0; j < va.cols; ++j) n.value(i, j) = va(i, j) + broadcast_at(vb, bc, i, j);
    }
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    const auto& va = node(a.id).value;
    const auto& vb = node(b.id).value;
    Broadcast bc = broadcast_kind(va, vb, "sub");
    Node n;
    n.op = OpKind::Sub;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
    n.value = DenseMatrix(va.rows, va.cols);
    if (bc == Broadcast::None) {
        kernels::active().sub(va.data.data(), vb.data.data(), n.value.data.data(),
                              static_cast<int>(va.size()));
    } else {
        for (int i = 0; i < va.rows; ++i)
            for (int j = 0; j < va.cols; ++j) n.value(i, j) = va(i, j) - broadcast_at(vb, bc, i, j);
    }
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    const auto& va = node(a.id).value;
    const auto& vb = node(b.id).value;
    if (va.rows == 1 && va.cols == 1 && !(vb.rows == 1 && vb.cols == 1)) return mul(b, a);
    if (!va.same_shape(vb) && !(vb.rows == 1 && vb.cols == 1))
        throw std::invalid_argument("mul: incompatible shapes " + va.shape_str() + " vs " +
                                    vb.shape_str());
    Node n;
    n.op = OpKind::Mul;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
    n.value = DenseMatrix(va.rows, va.cols);
    if (va.same_shape(vb)) {
        kernels::active().mul(va.data.data(), vb.data.data(), n.value.data.data(),
                              static_cast<int>(va.size()));
    } else {
        kernels::active().scale(va.data.data(), vb(0, 0), n.value.data.data(),
                                static_cast<int>(va.size()));
    }
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    Var v = unary(OpKind::Sigmoid, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t) n.value.data[t] = 1.0 / (1.0 + std::exp(-x.data[t]));
    return v;
}

Var Tape::relu(Var a) {
    Var v = unary(OpKind::Relu, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t) n.value.data[t] = x.data[t] > 0.0 ? x.data[t] : 0.0;
    return v;
}

Var Tape::exp(Var a) {
    Var v = unary(OpKind::Exp, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t) n.value.data[t] = std::exp(x.data[t]);
    return v;
}

Var Tape::log(Var a) {
    Var v = unary(OpKind::Log, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t)
        n.value.data[t] = std::log(x.data[t] > kLogFloor ? x.data[t] : kLogFloor);
    return v;
}

Var Tape::sqrt(Var a) {
    Var v = unary(OpKind::Sqrt, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t)
        n.value.data[t] = std::sqrt(x.data[t] > kSqrtFloor ? x.data[t] : kSqrtFloor);
    return v;
}

Var Tape::clamp(Var a, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
    Var v = unary(OpKind::Clamp, a, lo, hi);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t)
        n.value.data[t] = x.data[t] < lo ? lo : (x.data[t] > hi ? hi : x.data[t]);
    return v;
}

Var Tape::affine(Var a, double scale, double shift) {
    Var v = unary(OpKind::Affine, a, scale, shift);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t) n.value.data[t] = scale * x.data[t] + shift;
    return v;
}

Var Tape::scale_rows(Var a, Var s) {
    const auto& va = node(a.id).value;
    const auto& vs = node(s.id).value;
    if (vs.cols != 1 || vs.rows != va.rows)
        throw std::invalid_argument("scale_rows: scales must be " + std::to_string(va.rows) +
                                    "x1, got " + vs.shape_str());
    Node n;
    n.op = OpKind::ScaleRows;
    n.a = a.id;
    n.b = s.id;
    n.needs_grad = node(a.id).needs_grad || node(s.id).needs_grad;
    n.value = DenseMatrix(va.rows, va.cols);
    for (int i = 0; i < va.rows; ++i)
        kernels::active().scale(va.row_ptr(i), vs(i, 0), n.value.row_ptr(i), va.cols);
    return push(std::move(n));
}

Var Tape::softmax_rows(Var a) {
    Var v = unary(OpKind::SoftmaxRows, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < x.cols; ++j) mx = std::max(mx, x(i, j));
        double z = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            double e = std::exp(x(i, j) - mx);
            n.value(i, j) = e;
            z += e;
        }
        for (int j = 0; j < x.cols; ++j) n.value(i, j) /= z;
    }
    return v;
}

Var Tape::normalize_rows_sum(Var a) {
    Var v = unary(OpKind::NormalizeRowsSum, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double s = kernels::active().sum(x.row_ptr(i), x.cols);
        if (!(s > 0.0))
            throw std::invalid_argument("normalize_rows_sum: nonpositive row sum at row " +
                                        std::to_string(i));
        for (int j = 0; j < x.cols; ++j) n.value(i, j) = x(i, j) / s;
    }
    return v;
}

Var Tape::sum(Var a) {
    Var v = unary(OpKind::Sum, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(1, 1);
    n.value(0, 0) = kernels::active().sum(x.data.data(), static_cast<int>(x.size()));
    return v;
}

Var Tape::mean(Var a) {
    if (node(a.id).value.size() == 0) throw std::invalid_argument("mean: empty matrix");
    Var v = unary(OpKind::Mean, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(1, 1);
    n.value(0, 0) =
        kernels::active().sum(x.data.data(), static_cast<int>(x.size())) / double(x.size());
    return v;
}

Var Tape::frobenius_norm(Var a) {
    Var v = unary(OpKind::FrobeniusNorm, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(1, 1);
    n.value(0, 0) =
        std::sqrt(kernels::active().dot(x.data.data(), x.data.data(), static_cast<int>(x.size())));
    return v;
}

Var Tape::frob_diff(Var a, const DenseMatrix* b) {
    require_same_shape(node(a.id).value, *b, "frob_diff");
    Var v = unary(OpKind::FrobDiff, a);
    auto& n = node(v.id);
    const auto& va = node(a.id).value;
    n.ref = b;
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    size_t t = 0;
    const size_t sz = va.size();
    for (; t + 4 <= sz; t += 4) {
        double d0 = va.data[t] - b->data[t];
        double d1 = va.data[t + 1] - b->data[t + 1];
        double d2 = va.data[t + 2] - b->data[t + 2];
        double d3 = va.data[t + 3] - b->data[t + 3];
        acc0 = std::fma(d0, d0, acc0);
        acc1 = std::fma(d1, d1, acc1);
        acc2 = std::fma(d2, d2, acc2);
        acc3 = std::fma(d3, d3, acc3);
    }
    for (; t < sz; ++t) {
        double d = va.data[t] - b->data[t];
        acc0 = std::fma(d, d, acc0);
    }
    n.value = DenseMatrix(1, 1);
    n.value(0, 0) = std::sqrt((acc0 + acc1) + (acc2 + acc3));
    return v;
}

Var Tape::squared_difference(Var a, Var b) {
    const auto& va = node(a.id).value;
    const auto& vb = node(b.id).value;
    require_same_shape(va, vb, "squared_difference");
    Node n;
    n.op = OpKind::SquaredDifference;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = node(a.id).needs_grad || node(b.id).needs_grad;
    n.value = DenseMatrix(va.rows, va.cols);
    for (size_t t = 0; t < va.size(); ++t) {
        double d = va.data[t] - vb.data[t];
        n.value.data[t] = d * d;
    }
    return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw std::invalid_argument("dropout: rate must be in [0, 1)");
    Var v = unary(OpKind::Dropout, a, rate);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    n.mask.resize(x.size());
    const double scale = 1.0 / (1.0 - rate);
    for (size_t t = 0; t < x.size(); ++t) {
        n.mask[t] = (rate > 0.0 && rng.uniform() < rate) ? 0.0 : scale;
        n.value.data[t] = x.data[t] * n.mask[t];
    }
    return v;
}

Var Tape::select_rows(Var a, std::vector<int> indices) {
    for (int r : indices)
        if (r < 0 || r >= node(a.id).value.rows)
            throw std::invalid_argument("select_rows: index " + std::to_string(r) +
                                        " out of range");
    Var v = unary(OpKind::SelectRows, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.rows = std::move(indices);
    n.value = DenseMatrix(static_cast<int>(n.rows.size()), x.cols);
    for (size_t r = 0; r < n.rows.size(); ++r)
        std::copy_n(x.row_ptr(n.rows[r]), x.cols, n.value.row_ptr(static_cast<int>(r)));
    return v;
}

Var Tape::gather(Var a, std::vector<std::pair<int, int>> entries) {
    for (auto [i, j] : entries)
        if (i < 0 || i >= node(a.id).value.rows || j < 0 || j >= node(a.id).value.cols)
            throw std::invalid_argument("gather: entry (" + std::to_string(i) + "," +
                                        std::to_string(j) + ") out of range");
    Var v = unary(OpKind::Gather, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.pairs = std::move(entries);
    n.value = DenseMatrix(static_cast<int>(n.pairs.size()), 1);
    for (size_t t = 0; t < n.pairs.size(); ++t)
        n.value(static_cast<int>(t), 0) = x(n.pairs[t].first, n.pairs[t].second);
    return v;
}

Var Tape::row_norms(Var a) {
    Var v = unary(OpKind::RowNorms, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, 1);
    for (int i = 0; i < x.rows; ++i)
        n.value(i, 0) = std::sqrt(kernels::active().dot(x.row_ptr(i), x.row_ptr(i), x.cols));
    return v;
}

Var Tape::row_sums(Var a) {
    Var v = unary(OpKind::RowSums, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, 1);
    for (int i = 0; i < x.rows; ++i) n.value(i, 0) = kernels::active().sum(x.row_ptr(i), x.cols);
    return v;
}

Var Tape::safe_reciprocal(Var a) {
    Var v = unary(OpKind::SafeReciprocal, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.value = DenseMatrix(x.rows, x.cols);
    for (size_t t = 0; t < x.size(); ++t)
        n.value.data[t] = x.data[t] > kRecipFloor ? 1.0 / x.data[t] : 0.0;
    return v;
}

Var Tape::pair_cosine(Var a, std::vector<std::pair<int, int>> pairs) {
    for (auto [i, j] : pairs)
        if (i < 0 || i >= node(a.id).value.rows || j < 0 || j >= node(a.id).value.rows)
            throw std::invalid_argument("pair_cosine: pair out of range");
    Var v = unary(OpKind::PairCosine, a);
    auto& n = node(v.id);
    const auto& x = node(a.id).value;
    n.pairs = std::move(pairs);
    pairs_touched_ += static_cast<long long>(n.pairs.size());
    n.value = DenseMatrix(static_cast<int>(n.pairs.size()), 1);
    const auto& k = kernels::active();
    std::vector<double> norms(x.rows, -1.0);  // lazily filled
    auto norm_of = [&](int i) {
        if (norms[i] < 0.0) norms[i] = std::sqrt(k.dot(x.row_ptr(i), x.row_ptr(i), x.cols));
        return norms[i];
    };
    for (size_t t = 0; t < n.pairs.size(); ++t) {
        auto [i, j] = n.pairs[t];
        double ni = norm_of(i), nj = norm_of(j);
        n.value(static_cast<int>(t), 0) =
            (ni > kNormFloor && nj > kNormFloor) ? k.dot(x.row_ptr(i), x.row_ptr(j), x.cols) / (ni * nj)
                                                 : 0.0;
    }
    return v;
}

Var Tape::detach(Var a) {
    Node n;
    n.op = OpKind::Detach;
    n.a = a.id;
    n.needs_grad = false;
    n.value = node(a.id).value;
    return push(std::move(n));
}

DenseMatrix& Tape::grad_buf(int id) {
    Node& n = node(id);
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
        n.grad = DenseMatrix(n.value.rows, n.value.cols);
    return n.grad;
}

const DenseMatrix& Tape::grad(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.rows == n.value.rows && n.grad.cols == n.value.cols) return n.grad;
    zero_grad_ = DenseMatrix(n.value.rows, n.value.cols);
    return zero_grad_;
}

void Tape::backward(Var loss) {
    Node& ln = node(loss.id);
    if (ln.value.rows != 1 || ln.value.cols != 1)
        throw std::invalid_argument("backward: loss must be 1x1, got " + ln.value.shape_str());
    grad_buf(loss.id)(0, 0) = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = node(id);
        if (!n.needs_grad) continue;
        if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols) continue;  // no grad reached
        backward_node(id);
    }
    // Parameters the loss never reached still get a (zero) gradient buffer,
    // so optimizer wiring can take stable references.
    for (Node& n : nodes_)
        if (n.op == OpKind::Param) (void)grad_buf(static_cast<int>(&n - nodes_.data()));
}

void Tape::backward_node(int id) {
    Node& n = node(id);
    const DenseMatrix& g = n.grad;
    const auto& k = kernels::active();

    auto input_needs = [&](int in) { return in >= 0 && node(in).needs_grad; };

    switch (n.op) {
        case OpKind::Constant:
        case OpKind::Param:
        case OpKind::Detach:
            break;

        case OpKind::MatMul: {
            const auto& va = node(n.a).value;
            const auto& vb = node(n.b).value;
            if (input_needs(n.a)) {  // ga += g . b^T
                DenseMatrix tmp(va.rows, va.cols);
                k.matmul_nt(g.data.data(), vb.data.data(), tmp.data.data(), g.rows, g.cols,
                            vb.rows);
                k.add(grad_buf(n.a).data.data(), tmp.data.data(), grad_buf(n.a).data.data(),
                      static_cast<int>(tmp.size()));
            }
            if (input_needs(n.b)) {  // gb += a^T . g
                DenseMatrix tmp(vb.rows, vb.cols);
                k.matmul_tn(va.data.data(), g.data.data(), tmp.data.data(), va.rows, va.cols,
                            g.cols);
                k.add(grad_buf(n.b).data.data(), tmp.data.data(), grad_buf(n.b).data.data(),
                      static_cast<int>(tmp.size()));
            }
            break;
        }
        case OpKind::MatMulNT: {
            // out = a . b^T, a (m x k), b (n x k), g (m x n)
            const auto& va = node(n.a).value;
            const auto& vb = node(n.b).value;
            if (input_needs(n.a)) {  // ga += g . b
                DenseMatrix tmp(va.rows, va.cols);
                k.matmul(g.data.data(), vb.data.data(), tmp.data.data(), g.rows, g.cols, vb.cols);
                k.add(grad_buf(n.a).data.data(), tmp.data.data(), grad_buf(n.a).data.data(),
                      static_cast<int>(tmp.size()));
            }
            if (input_needs(n.b)) {  // gb += g^T . a
                DenseMatrix tmp(vb.rows, vb.cols);
                k.matmul_tn(g.data.data(), va.data.data(), tmp.data.data(), g.rows, g.cols,
                            va.cols);
                k.add(grad_buf(n.b).data.data(), tmp.data.data(), grad_buf(n.b).data.data(),
                      static_cast<int>(tmp.size()));
            }
            break;
        }
        case OpKind::Add:
        case OpKind::Sub: {
            const double sign = n.op == OpKind::Add ? 1.0 : -1.0;
            if (input_needs(n.a))
                k.add(grad_buf(n.a).data.data(), g.data.data(), grad_buf(n.a).data.data(),
                      static_cast<int>(g.size()));
            if (input_needs(n.b)) {
                Broadcast bc = broadcast_kind(node(n.a).value, node(n.b).value, "add/sub");
                reduce_into(grad_buf(n.b), bc, g, sign);
            }
            break;
        }
        case OpKind::Mul: {
            const auto& va = node(n.a).value;
            const auto& vb = node(n.b).value;
            if (va.same_shape(vb)) {
                if (input_needs(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t t = 0; t < g.size(); ++t) ga.data[t] += g.data[t] * vb.data[t];
                }
                if (input_needs(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (size_t t = 0; t < g.size(); ++t) gb.data[t] += g.data[t] * va.data[t];
                }
            } else {  // b is 1x1
                if (input_needs(n.a))
                    k.axpy(vb(0, 0), g.data.data(), grad_buf(n.a).data.data(),
                           static_cast<int>(g.size()));
                if (input_needs(n.b))
                    grad_buf(n.b)(0, 0) +=
                        k.dot(g.data.data(), va.data.data(), static_cast<int>(g.size()));
            }
            break;
        }
        case OpKind::Sigmoid: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t) {
                double y = n.value.data[t];
                ga.data[t] += g.data[t] * y * (1.0 - y);
            }
            break;
        }
        case OpKind::Relu: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t)
                if (x.data[t] > 0.0) ga.data[t] += g.data[t];
            break;
        }
        case OpKind::Exp: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t) ga.data[t] += g.data[t] * n.value.data[t];
            break;
        }
        case OpKind::Log: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t)
                if (x.data[t] > kLogFloor) ga.data[t] += g.data[t] / x.data[t];
            break;
        }
        case OpKind::Sqrt: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t)
                if (x.data[t] > kSqrtFloor) ga.data[t] += g.data[t] / (2.0 * n.value.data[t]);
            break;
        }
        case OpKind::Clamp: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t)
                if (x.data[t] > n.c0 && x.data[t] < n.c1) ga.data[t] += g.data[t];
            break;
        }
        case OpKind::Affine: {
            if (!input_needs(n.a)) break;
            k.axpy(n.c0, g.data.data(), grad_buf(n.a).data.data(), static_cast<int>(g.size()));
            break;
        }
        case OpKind::ScaleRows: {
            const auto& va = node(n.a).value;
            const auto& vs = node(n.b).value;
            if (input_needs(n.a)) {
                auto& ga = grad_buf(n.a);
                for (int i = 0; i < g.rows; ++i)
                    k.axpy(vs(i, 0), g.row_ptr(i), ga.row_ptr(i), g.cols);
            }
            if (input_needs(n.b)) {
                auto& gs = grad_buf(n.b);
                for (int i = 0; i < g.rows; ++i)
                    gs(i, 0) += k.dot(g.row_ptr(i), va.row_ptr(i), g.cols);
            }
            break;
        }
        case OpKind::SoftmaxRows: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (int i = 0; i < g.rows; ++i) {
                double gy = k.dot(g.row_ptr(i), n.value.row_ptr(i), g.cols);
                for (int j = 0; j < g.cols; ++j)
                    ga(i, j) += n.value(i, j) * (g(i, j) - gy);
            }
            break;
        }
        case OpKind::NormalizeRowsSum: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (int i = 0; i < g.rows; ++i) {
                double s = k.sum(x.row_ptr(i), x.cols);
                double gy = k.dot(g.row_ptr(i), n.value.row_ptr(i), g.cols);
                for (int j = 0; j < g.cols; ++j) ga(i, j) += (g(i, j) - gy) / s;
            }
            break;
        }
        case OpKind::Sum: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            double gv = g(0, 0);
            for (size_t t = 0; t < ga.size(); ++t) ga.data[t] += gv;
            break;
        }
        case OpKind::Mean: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            double gv = g(0, 0) / double(ga.size());
            for (size_t t = 0; t < ga.size(); ++t) ga.data[t] += gv;
            break;
        }
        case OpKind::FrobeniusNorm: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            double norm = n.value(0, 0);
            double f = g(0, 0) / (norm > kNormFloor ? norm : kNormFloor);
            k.axpy(f, x.data.data(), grad_buf(n.a).data.data(), static_cast<int>(x.size()));
            break;
        }
        case OpKind::FrobDiff: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            const auto& b = *n.ref;
            double norm = n.value(0, 0);
            double f = g(0, 0) / (norm > kNormFloor ? norm : kNormFloor);
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < x.size(); ++t)
                ga.data[t] += f * (x.data[t] - b.data[t]);
            break;
        }
        case OpKind::SquaredDifference: {
            const auto& va = node(n.a).value;
            const auto& vb = node(n.b).value;
            if (input_needs(n.a)) {
                auto& ga = grad_buf(n.a);
                for (size_t t = 0; t < g.size(); ++t)
                    ga.data[t] += 2.0 * (va.data[t] - vb.data[t]) * g.data[t];
            }
            if (input_needs(n.b)) {
                auto& gb = grad_buf(n.b);
                for (size_t t = 0; t < g.size(); ++t)
                    gb.data[t] -= 2.0 * (va.data[t] - vb.data[t]) * g.data[t];
            }
            break;
        }
        case OpKind::Dropout: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t) ga.data[t] += g.data[t] * n.mask[t];
            break;
        }
        case OpKind::SelectRows: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (size_t r = 0; r < n.rows.size(); ++r)
                k.add(ga.row_ptr(n.rows[r]), g.row_ptr(static_cast<int>(r)),
                      ga.row_ptr(n.rows[r]), g.cols);
            break;
        }
        case OpKind::Gather: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < n.pairs.size(); ++t)
                ga(n.pairs[t].first, n.pairs[t].second) += g(static_cast<int>(t), 0);
            break;
        }
        case OpKind::RowNorms: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (int i = 0; i < x.rows; ++i) {
                double norm = n.value(i, 0);
                if (norm <= kNormFloor) continue;
                k.axpy(g(i, 0) / norm, x.row_ptr(i), ga.row_ptr(i), x.cols);
            }
            break;
        }
        case OpKind::RowSums: {
            if (!input_needs(n.a)) break;
            auto& ga = grad_buf(n.a);
            for (int i = 0; i < ga.rows; ++i) {
                double gv = g(i, 0);
                for (int j = 0; j < ga.cols; ++j) ga(i, j) += gv;
            }
            break;
        }
        case OpKind::SafeReciprocal: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            for (size_t t = 0; t < g.size(); ++t)
                if (x.data[t] > kRecipFloor)
                    ga.data[t] -= g.data[t] * n.value.data[t] * n.value.data[t];
            break;
        }
        case OpKind::PairCosine: {
            if (!input_needs(n.a)) break;
            const auto& x = node(n.a).value;
            auto& ga = grad_buf(n.a);
            std::vector<double> norms(x.rows, -1.0);
            auto norm_of = [&](int i) {
                if (norms[i] < 0.0)
                    norms[i] = std::sqrt(k.dot(x.row_ptr(i), x.row_ptr(i), x.cols));
                return norms[i];
            };
            for (size_t t = 0; t < n.pairs.size(); ++t) {
                auto [i, j] = n.pairs[t];
                double ni = norm_of(i), nj = norm_of(j);
                if (ni <= kNormFloor || nj <= kNormFloor) continue;
                double c = n.value(static_cast<int>(t), 0);
                double gv = g(static_cast<int>(t), 0);
                // d cos / d x_i = x_j/(ni*nj) - cos * x_i/ni^2, and symmetrically
                k.axpy(gv / (ni * nj), x.row_ptr(j), ga.row_ptr(i), x.cols);
                k.axpy(-gv * c / (ni * ni), x.row_ptr(i), ga.row_ptr(i), x.cols);
                k.axpy(gv / (ni * nj), x.row_ptr(i), ga.row_ptr(j), x.cols);
                k.axpy(-gv * c / (nj * nj), x.row_ptr(j), ga.row_ptr(j), x.cols);
            }
            break;
        }
    }
}

double grad_check(const std::function<Var(Tape&, Var)>& build, const DenseMatrix& x,
                  double eps) {
    Tape tape;
    Var vx = tape.param(x);
    Var loss = build(tape, vx);
    tape.backward(loss);
    DenseMatrix analytic = tape.grad(vx);

    auto eval = [&](const DenseMatrix& pt) {
        Tape t;
        Var v = t.param(pt);
        return t.value(build(t, v))(0, 0);
    };

    double max_rel = 0.0;
    DenseMatrix pt = x;
    for (size_t t = 0; t < x.size(); ++t) {
        double orig = pt.data[t];
        pt.data[t] = orig + eps;
        double fp = eval(pt);
        pt.data[t] = orig - eps;
        double fm = eval(pt);
        pt.data[t] = orig;
        double numeric = (fp - fm) / (2.0 * eps);
        double a = analytic.data[t];
        double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
    return max_rel;
}

}  // namespace rod
