#include "rod/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rod/kernels.hpp"

namespace rod {

int64_t SparseGraph::num_edges() const {
    int64_t diag = 0;
    for (int i = 0; i < n; ++i)
        if (has_edge(i, i)) ++diag;
    return (num_entries() - diag) / 2 + diag;
}

double SparseGraph::degree(int i) const {
    double d = 0.0;
    for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) d += values[e];
    return d;
}

bool SparseGraph::has_edge(int u, int v) const {
    const int* first = col_idx.data() + row_ptr[u];
    const int* last = col_idx.data() + row_ptr[u + 1];
    return std::binary_search(first, last, v);
}

double SparseGraph::entry(int i, int j) const {
    const int* first = col_idx.data() + row_ptr[i];
    const int* last = col_idx.data() + row_ptr[i + 1];
    const int* it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values[row_ptr[i] + (it - first)];
}

std::vector<WeightedEdge> SparseGraph::undirected_edges() const {
    std::vector<WeightedEdge> out;
    for (int i = 0; i < n; ++i)
        for (int64_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e)
            if (col_idx[e] >= i) out.push_back({i, col_idx[e], values[e]});
    return out;
}

SparseGraph build_csr(const std::vector<WeightedEdge>& edges, int n, bool symmetrize) {
    if (n < 0) throw DataError("build_csr: negative node count");

    // Expand to directed entries, validating as we go.
    std::vector<std::tuple<int, int, double>> entries;
    entries.reserve(edges.size() * 2);
    for (const auto& e : edges) {
        if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
            throw DataError("build_csr: edge (" + std::to_string(e.u) + "," +
                            std::to_string(e.v) + ") out of range for n=" + std::to_string(n));
        if (e.u == e.v)
            throw DataError("build_csr: self-loop at node " + std::to_string(e.u));
        if (!(e.w > 0.0))
            throw DataError("build_csr: nonpositive weight on edge (" + std::to_string(e.u) +
                            "," + std::to_string(e.v) + ")");
        entries.emplace_back(e.u, e.v, e.w);
        if (symmetrize) entries.emplace_back(e.v, e.u, e.w);
    }
    // Stable sort keeps the first occurrence of a duplicate pair first.
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) <
               std::tie(std::get<0>(b), std::get<1>(b));
    });

    SparseGraph g;
    g.n = n;
    g.row_ptr.assign(n + 1, 0);
    for (size_t idx = 0; idx < entries.size(); ++idx) {
        auto [u, v, w] = entries[idx];
        if (idx > 0) {
            auto [pu, pv, pw] = entries[idx - 1];
            if (pu == u && pv == v) {
                if (pw != w)
                    throw DataError("build_csr: conflicting duplicate weights on edge (" +
                                    std::to_string(u) + "," + std::to_string(v) + ")");
                continue;  // duplicate pair, keep first
            }
        }
        g.col_idx.push_back(v);
        g.values.push_back(w);
        ++g.row_ptr[u + 1];
    }
    for (int i = 0; i < n; ++i) g.row_ptr[i + 1] += g.row_ptr[i];

    if (!symmetrize) {
        // Verify the caller really provided a symmetric structure.
        for (int i = 0; i < n; ++i)
            for (int64_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e)
                if (g.entry(g.col_idx[e], i) != g.values[e])
                    throw DataError("build_csr: input not symmetric at (" + std::to_string(i) +
                                    "," + std::to_string(g.col_idx[e]) + ")");
    }
    return g;
}

SparseGraph add_self_loops(const SparseGraph& g) {
    SparseGraph out;
    out.n = g.n;
    out.row_ptr.assign(g.n + 1, 0);
    out.col_idx.reserve(g.col_idx.size() + g.n);
    out.values.reserve(g.values.size() + g.n);
    for (int i = 0; i < g.n; ++i) {
        bool placed = false;
        for (int64_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
            int j = g.col_idx[e];
            if (j == i)
                throw DataError("add_self_loops: node " + std::to_string(i) +
                                " already has a self-loop");
            if (!placed && j > i) {
                out.col_idx.push_back(i);
                out.values.push_back(1.0);
                placed = true;
            }
            out.col_idx.push_back(j);
            out.values.push_back(g.values[e]);
        }
        if (!placed) {
            out.col_idx.push_back(i);
            out.values.push_back(1.0);
        }
        out.row_ptr[i + 1] = static_cast<int64_t>(out.col_idx.size());
    }
    return out;
}

SparseGraph sym_normalize(const SparseGraph& g_tilde) {
    std::vector<double> inv_sqrt_deg(g_tilde.n);
    for (int i = 0; i < g_tilde.n; ++i) {
        double d = g_tilde.degree(i);
        if (!(d > 0.0))
            throw DataError("sym_normalize: zero-degree row " + std::to_string(i));
        inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
    }
    SparseGraph out = g_tilde;
    for (int i = 0; i < out.n; ++i)
        for (int64_t e = out.row_ptr[i]; e < out.row_ptr[i + 1]; ++e)
            out.values[e] = g_tilde.values[e] * inv_sqrt_deg[i] * inv_sqrt_deg[out.col_idx[e]];
    return out;
}

DenseMatrix spmm(const SparseGraph& g, const DenseMatrix& x) {
    if (g.n != x.rows)
        throw std::invalid_argument("spmm: graph has " + std::to_string(g.n) +
                                    " nodes but features have " + std::to_string(x.rows) +
                                    " rows");
    const auto& k = kernels::active();
    DenseMatrix out(g.n, x.cols);
    for (int i = 0; i < g.n; ++i) {
        double* oi = out.row_ptr(i);
        for (int64_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e)
            k.axpy(g.values[e], x.row_ptr(g.col_idx[e]), oi, x.cols);
    }
    return out;
}

PropagationSet precompute_propagation(const SparseGraph& a_hat, const DenseMatrix& x0,
                                      int depth) {
    if (depth < 0) throw std::invalid_argument("precompute_propagation: negative depth");
    PropagationSet ps;
    ps.depth = depth;
    ps.mats.reserve(depth + 1);
    ps.mats.push_back(x0);  // copy, not alias
    for (int kk = 1; kk <= depth; ++kk) ps.mats.push_back(spmm(a_hat, ps.mats.back()));
    return ps;
}

}  // namespace rod
