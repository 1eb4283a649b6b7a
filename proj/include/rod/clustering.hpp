#pragma once

#include <optional>
#include <vector>

#include "rod/matrix.hpp"
#include "rod/rng.hpp"

namespace rod {

/// Result of one K-Means fit. Immutable; every assignment points at its
/// nearest centroid (ties to the lowest index) as of fit time.
struct ClusterState {
    DenseMatrix centroids;        // q x e
    std::vector<int> assignments; // per node, in [0, q)
    double inertia = 0.0;         // sum of squared distances to assigned centroid
    long epoch_of_fit = -1;
};

/// Lloyd's algorithm with k-means++ seeding. Runs `restarts` independent
/// fits and keeps the lowest-inertia one (ties to the lowest restart index).
/// Empty clusters are re-seeded from the point farthest from its centroid.
/// Deterministic per (z, q, seed, restarts).
ClusterState kmeans(const DenseMatrix& z, int q, uint64_t seed, int max_iters = 300,
                    int restarts = 10);

/// Runs kmeans when epoch is a multiple of the cadence m (including epoch 0).
std::optional<ClusterState> refresh_if_due(long epoch, int m, const DenseMatrix& z, int q,
                                           uint64_t seed, int max_iters = 300,
                                           int restarts = 10);

}  // namespace rod
