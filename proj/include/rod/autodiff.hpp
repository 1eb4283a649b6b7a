#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rod/matrix.hpp"
#include "rod/rng.hpp"

namespace rod {

/// Handle to a node on a Tape. Only valid with the tape that produced it.
struct Var {
    int id = -1;
};

enum class OpKind : uint8_t {
    Constant,
    Param,
    MatMul,
    MatMulNT,
    Add,
    Sub,
    Mul,
    Sigmoid,
    Relu,
    Exp,
    Log,
    Sqrt,
    Clamp,
    Affine,
    ScaleRows,
    SoftmaxRows,
    NormalizeRowsSum,
    Sum,
    Mean,
    FrobeniusNorm,
    FrobDiff,
    SquaredDifference,
    Dropout,
    SelectRows,
    Gather,
    RowNorms,
    RowSums,
    SafeReciprocal,
    PairCosine,
    Detach,
};

/// Reverse-mode differentiation tape. A computation is recorded by calling
/// the op builders; backward() runs one reverse topological sweep, summing
/// gradient contributions at fan-out. The record is single-owner and acyclic
/// by construction (ops only reference earlier nodes).
class Tape {
public:
    struct Node {
        OpKind op;
        int a = -1;
        int b = -1;
        bool needs_grad = false;
        DenseMatrix value;
        DenseMatrix grad;                       // allocated on demand in backward
        double c0 = 0.0, c1 = 0.0;              // op constants (affine/clamp/dropout rate)
        std::vector<double> mask;               // dropout keep/scale factors
        std::vector<int> rows;                  // select_rows indices
        std::vector<std::pair<int, int>> pairs; // gather / pair_cosine entries
        const DenseMatrix* ref = nullptr;       // frob_diff target; must outlive the tape
    };

    // --- leaves -----------------------------------------------------------
    Var constant(DenseMatrix v);
    /// Trainable leaf; the value is copied in, gradients are read back via grad().
    Var param(const DenseMatrix& v);

    // --- differentiable primitives -----------------------------------------
    Var matmul(Var a, Var b);
    /// a (m x k) times b^T where b is (n x k).
    Var matmul_nt(Var a, Var b);
    /// Elementwise a + b; b may be 1 x cols (row broadcast), rows x 1
    /// (column broadcast) or 1 x 1 (scalar broadcast).
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    /// Elementwise product; either side may be 1 x 1 (scalar broadcast).
    Var mul(Var a, Var b);
    Var sigmoid(Var a);
    Var relu(Var a);
    Var exp(Var a);
    /// log(max(x, 1e-12)); gradient passes through above the floor, zero below.
    Var log(Var a);
    /// sqrt(max(x, 1e-12)); gradient passes through above the floor, zero below.
    Var sqrt(Var a);
    /// Identity inside [lo, hi], saturates outside; gradient zero outside (lo, hi).
    Var clamp(Var a, double lo, double hi);
    /// scale * a + shift.
    Var affine(Var a, double scale, double shift);
    /// Row i of a scaled by s(i, 0); s must be (rows x 1).
    Var scale_rows(Var a, Var s);
    Var softmax_rows(Var a);
    /// Row i divided by its sum; all row sums must be positive.
    Var normalize_rows_sum(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var frobenius_norm(Var a);
    /// ||a - b||_F without materializing the residual node; b must outlive
    /// the tape.
    Var frob_diff(Var a, const DenseMatrix* b);
    Var squared_difference(Var a, Var b);
    /// Zeroes entries with probability rate and scales survivors by
    /// 1/(1 - rate); the mask is drawn once at record time.
    Var dropout(Var a, double rate, Rng& rng);
    /// Rows of a at the given indices, stacked in order (duplicates allowed).
    Var select_rows(Var a, std::vector<int> indices);
    /// Column vector of entries a(i, j) for each (i, j).
    Var gather(Var a, std::vector<std::pair<int, int>> entries);
    /// Column vector of row L2 norms.
    Var row_norms(Var a);
    Var row_sums(Var a);
    /// 1/x for x above 1e-20, else 0 (value and gradient).
    Var safe_reciprocal(Var a);
    /// Column vector of cosine similarities between row pairs of a; rows with
    /// zero norm yield 0. Touches only the listed pairs.
    Var pair_cosine(Var a, std::vector<std::pair<int, int>> pairs);
    /// Value copy through which no gradient flows.
    Var detach(Var a);

    // --- execution ----------------------------------------------------------
    /// Reverse sweep from a scalar (1 x 1) loss node.
    void backward(Var loss);

    const DenseMatrix& value(Var v) const { return node(v.id).value; }
    /// Gradient accumulated by the last backward(); zeros if none reached v.
    const DenseMatrix& grad(Var v) const;

    size_t size() const { return nodes_.size(); }
    /// Number of node-pair similarity evaluations recorded (pair_cosine
    /// entries); the sampled-loss cost accounting.
    long long pairs_touched() const { return pairs_touched_; }

private:
    Node& node(int id) {
        assert(id >= 0 && id < static_cast<int>(nodes_.size()));
        return nodes_[id];
    }
    const Node& node(int id) const {
        assert(id >= 0 && id < static_cast<int>(nodes_.size()));
        return nodes_[id];
    }
    Var push(Node n);
    Var unary(OpKind op, Var a, double c0 = 0.0, double c1 = 0.0);
    DenseMatrix& grad_buf(int id);
    void backward_node(int id);

    std::vector<Node> nodes_;
    long long pairs_touched_ = 0;
    mutable DenseMatrix zero_grad_;
};

/// Compare the tape gradient of a scalar-valued function against central
/// finite differences at x. Returns the max relative error over entries,
/// with denominator max(|analytic|, |numeric|, 1e-8). The builder must be
/// deterministic (capture any Rng by value).
double grad_check(const std::function<Var(Tape&, Var)>& build, const DenseMatrix& x,
                  double eps = 1e-5);

}  // namespace rod
