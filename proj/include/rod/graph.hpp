#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "rod/matrix.hpp"

namespace rod {

/// Undirected edge with weight; endpoints are node ids in [0, n).
struct WeightedEdge {
    int u;
    int v;
    double w = 1.0;
};

/// Compressed-sparse-row adjacency. Structurally symmetric with equal
/// weights, sorted column indices within each row, no duplicates. Immutable
/// after construction.
struct SparseGraph {
    int n = 0;
    std::vector<int64_t> row_ptr;  // length n + 1, nondecreasing
    std::vector<int> col_idx;      // strictly increasing within each row
    std::vector<double> values;

    int64_t num_entries() const { return static_cast<int64_t>(col_idx.size()); }
    /// Number of undirected edges (diagonal entries count once).
    int64_t num_edges() const;
    /// Weighted degree of node i (sum of incident weights).
    double degree(int i) const;
    /// Unweighted degree (number of stored neighbors of i).
    int neighbor_count(int i) const { return static_cast<int>(row_ptr[i + 1] - row_ptr[i]); }
    bool has_edge(int u, int v) const;
    double entry(int i, int j) const;  // 0 when absent

    /// All entries with u < v plus diagonal, as an edge list.
    std::vector<WeightedEdge> undirected_edges() const;
};

/// Build a symmetric CSR adjacency from an edge list. Self-loops are
/// rejected; duplicate undirected pairs keep the first occurrence and raise
/// DataError when weights conflict. With symmetrize=false the input must
/// already contain both (u,v) and (v,u) with equal weights.
SparseGraph build_csr(const std::vector<WeightedEdge>& edges, int n, bool symmetrize = true);

/// Adjacency with self-connections: diagonal weight fixed at 1.0, off-diagonal
/// unchanged. Input must not already have diagonal entries.
SparseGraph add_self_loops(const SparseGraph& g);

/// Symmetric degree normalization: entry (i,j) becomes w_ij / sqrt(d_i d_j).
/// Every row must have positive degree (guaranteed after add_self_loops).
SparseGraph sym_normalize(const SparseGraph& g_tilde);

/// Sparse-times-dense product. Deterministic: per output element the
/// accumulation runs over neighbors in ascending column index.
DenseMatrix spmm(const SparseGraph& g, const DenseMatrix& x);

/// The list [X_0 ... X_K] of k-hop propagated feature matrices,
/// mats[k] = A_hat^k X_0. Immutable after construction.
struct PropagationSet {
    int depth = 0;                  // K
    std::vector<DenseMatrix> mats;  // K + 1 matrices, all shaped like X_0

    const DenseMatrix& at(int k) const { return mats.at(k); }
};

PropagationSet precompute_propagation(const SparseGraph& a_hat, const DenseMatrix& x0, int depth);

}  // namespace rod
