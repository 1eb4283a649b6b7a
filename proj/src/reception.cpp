#include "rod/reception.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rod/kernels.hpp"

namespace rod {

SimilarityMatrix cosine_similarity(const DenseMatrix& x) {
    const auto& k = kernels::active();
    const int n = x.rows;
    DenseMatrix unit(n, x.cols);
    std::vector<bool> nonzero(n);
    for (int i = 0; i < n; ++i) {
        double norm = std::sqrt(k.dot(x.row_ptr(i), x.row_ptr(i), x.cols));
        nonzero[i] = norm > 0.0;
        if (nonzero[i]) k.scale(x.row_ptr(i), 1.0 / norm, unit.row_ptr(i), x.cols);
    }
    SimilarityMatrix s(n, n);
    // Each unordered pair is computed once and mirrored.
    for (int i = 0; i < n; ++i) {
        if (!nonzero[i]) continue;
        s(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            if (!nonzero[j]) continue;
            double c = k.dot(unit.row_ptr(i), unit.row_ptr(j), x.cols);
            s(i, j) = c;
            s(j, i) = c;
        }
    }
    return s;
}

SimilarityMatrix ensemble_similarity(const std::vector<SimilarityMatrix>& sims) {
    if (sims.empty()) throw std::invalid_argument("ensemble_similarity: empty list");
    SimilarityMatrix out = sims.front();
    for (size_t m = 1; m < sims.size(); ++m) {
        require_same_shape(out, sims[m], "ensemble_similarity");
        kernels::active().add(out.data.data(), sims[m].data.data(), out.data.data(),
                              static_cast<int>(out.size()));
    }
    return out;
}

SampledAdjacency sample_reliable(const SimilarityMatrix& s, const SparseGraph& g,
                                 long long pos_budget, long long neg_budget) {
    const int n = s.rows;
    if (s.cols != n) throw std::invalid_argument("sample_reliable: similarity must be square");
    if (g.n != n) throw std::invalid_argument("sample_reliable: graph/similarity size mismatch");
    if (n > kMaxDensePairNodes)
        throw std::invalid_argument(
            "sample_reliable: n=" + std::to_string(n) + " exceeds the dense pair-ranking cap of " +
            std::to_string(kMaxDensePairNodes) +
            "; subsample the graph or lower the budgets to desk scale");
    const long long total_pairs = static_cast<long long>(n) * (n - 1) / 2;
    const long long num_edges = g.num_edges();
    if (pos_budget < num_edges)
        throw std::invalid_argument("sample_reliable: pos budget " + std::to_string(pos_budget) +
                                    " below edge count " + std::to_string(num_edges));
    if (neg_budget < 1) throw std::invalid_argument("sample_reliable: neg budget must be >= 1");
    if (pos_budget + neg_budget > total_pairs)
        throw std::invalid_argument("sample_reliable: budgets exceed " +
                                    std::to_string(total_pairs) + " available pairs");

    // Materialize and rank every unordered off-diagonal pair.
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<size_t>(total_pairs));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
        double sa = s(a.first, a.second), sb = s(b.first, b.second);
        if (sa != sb) return sa > sb;
        return a < b;
    });

    SampledAdjacency out;
    out.pos_budget = pos_budget;
    out.neg_budget = neg_budget;

    std::vector<bool> positive(pairs.size(), false);
    // Top-M pairs are positive.
    for (long long r = 0; r < pos_budget && r < static_cast<long long>(pairs.size()); ++r)
        positive[r] = true;
    // Every original edge is positive regardless of rank; flagged through a
    // rank lookup keyed by the flat upper-triangle index.
    auto flat_index = [&](int i, int j) {
        return static_cast<size_t>(i) * n - static_cast<size_t>(i) * (i + 1) / 2 + (j - i - 1);
    };
    std::vector<size_t> rank_of(pairs.size());
    for (size_t r = 0; r < pairs.size(); ++r)
        rank_of[flat_index(pairs[r].first, pairs[r].second)] = r;
    for (const auto& e : g.undirected_edges()) {
        if (e.u == e.v) continue;
        int i = std::min(e.u, e.v), j = std::max(e.u, e.v);
        positive[rank_of[flat_index(i, j)]] = true;
    }

    for (size_t r = 0; r < pairs.size(); ++r)
        if (positive[r]) out.pos_pairs.push_back(pairs[r]);

    // Bottom-P from the tail of the ranking, skipping positives.
    long long taken = 0;
    for (size_t r = pairs.size(); r-- > 0 && taken < neg_budget;) {
        if (positive[r]) continue;
        out.neg_pairs.push_back(pairs[r]);
        ++taken;
    }
    if (taken < neg_budget)
        throw std::invalid_argument(
            "sample_reliable: only " + std::to_string(taken) +
            " non-positive pairs available for the negative budget of " +
            std::to_string(neg_budget));
    // Normalize both sets to ascending (i, j) so downstream iteration order
    // is independent of similarity values.
    std::sort(out.neg_pairs.begin(), out.neg_pairs.end());
    std::sort(out.pos_pairs.begin(), out.pos_pairs.end());
    return out;
}

}  // namespace rod
