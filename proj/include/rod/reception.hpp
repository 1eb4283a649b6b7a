#pragma once

#include <utility>
#include <vector>

#include "rod/graph.hpp"
#include "rod/matrix.hpp"

namespace rod {

/// Selected positive/negative node pairs, all undirected with i < j.
/// pos_pairs always contains every original graph edge; the two sets are
/// disjoint and diagonal-free.
struct SampledAdjacency {
    std::vector<std::pair<int, int>> pos_pairs;
    std::vector<std::pair<int, int>> neg_pairs;
    long long pos_budget = 0;  // M
    long long neg_budget = 0;  // P
};

/// Dense cosine similarity of the rows of x: rows are L2-normalized and
/// multiplied out. Rows with zero norm have similarity 0 to everything,
/// their own diagonal included. The result is exactly symmetric; nonzero
/// rows get an exact 1.0 diagonal.
SimilarityMatrix cosine_similarity(const DenseMatrix& x);

/// Elementwise sum of per-hop similarity matrices.
SimilarityMatrix ensemble_similarity(const std::vector<SimilarityMatrix>& sims);

/// Largest node count for which the full pair ranking is materialized.
inline constexpr int kMaxDensePairNodes = 4096;

/// Rank all unordered off-diagonal pairs by similarity (descending, ties by
/// ascending (i, j)); positives are the original edges plus the top-M pairs,
/// negatives the bottom-P pairs that are not already positive. Deterministic
/// and pure. Requires pos_budget >= |E|, neg_budget >= 1, and
/// pos_budget + neg_budget <= n(n-1)/2; nodes capped at kMaxDensePairNodes.
SampledAdjacency sample_reliable(const SimilarityMatrix& s, const SparseGraph& g,
                                 long long pos_budget, long long neg_budget);

}  // namespace rod
