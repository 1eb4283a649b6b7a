#include "rod/clustering.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rod/kernels.hpp"

namespace rod {

namespace {

double sq_dist(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int t = 0; t < d; ++t) {
        double diff = a[t] - b[t];
        acc += diff * diff;
    }
    return acc;
}

struct Fit {
    DenseMatrix centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
};

void assign_all(const DenseMatrix& z, const DenseMatrix& c, std::vector<int>& assign,
                std::vector<double>& dist) {
    const int q = c.rows;
    for (int i = 0; i < z.rows; ++i) {
        int best = 0;
        double best_d = sq_dist(z.row_ptr(i), c.row_ptr(0), z.cols);
        for (int j = 1; j < q; ++j) {
            double d = sq_dist(z.row_ptr(i), c.row_ptr(j), z.cols);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        assign[i] = best;
        dist[i] = best_d;
    }
}

Fit lloyd_once(const DenseMatrix& z, int q, Rng rng, int max_iters) {
    const int n = z.rows, d = z.cols;
    Fit fit;
    fit.centroids = DenseMatrix(q, d);

    // k-means++ seeding
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    int first = static_cast<int>(rng.uniform_int(n));
    std::copy_n(z.row_ptr(first), d, fit.centroids.row_ptr(0));
    for (int j = 1; j < q; ++j) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double dd = sq_dist(z.row_ptr(i), fit.centroids.row_ptr(j - 1), d);
            if (dd < min_d[i]) min_d[i] = dd;
            total += min_d[i];
        }
        int pick;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double run = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                run += min_d[i];
                if (run >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.uniform_int(n));  // all points coincide
        }
        std::copy_n(z.row_ptr(pick), d, fit.centroids.row_ptr(j));
    }

    fit.assignments.assign(n, 0);
    std::vector<double> dist(n, 0.0);
    std::vector<int> prev;
    std::vector<double> accum(static_cast<size_t>(q) * d);
    std::vector<int> counts(q);
    double last_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
        assign_all(z, fit.centroids, fit.assignments, dist);

        // Re-seed any empty cluster from the farthest point, then re-assign.
        for (bool retry = true; retry;) {
            retry = false;
            std::fill(counts.begin(), counts.end(), 0);
            for (int i = 0; i < n; ++i) ++counts[fit.assignments[i]];
            for (int j = 0; j < q; ++j) {
                if (counts[j] != 0) continue;
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i)
                    if (dist[i] > far_d) {
                        far_d = dist[i];
                        far = i;
                    }
                std::copy_n(z.row_ptr(far), d, fit.centroids.row_ptr(j));
                assign_all(z, fit.centroids, fit.assignments, dist);
                retry = true;
                break;
            }
        }

        double inertia = kernels::active().sum(dist.data(), n);
        if (inertia > last_inertia * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("kmeans: inertia increased across a Lloyd iteration");
        last_inertia = inertia;

        if (fit.assignments == prev) break;
        prev = fit.assignments;

        std::fill(accum.begin(), accum.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            int j = fit.assignments[i];
            ++counts[j];
            kernels::active().add(accum.data() + static_cast<size_t>(j) * d, z.row_ptr(i),
                                  accum.data() + static_cast<size_t>(j) * d, d);
        }
        for (int j = 0; j < q; ++j)
            if (counts[j] > 0)
                kernels::active().scale(accum.data() + static_cast<size_t>(j) * d,
                                        1.0 / counts[j], fit.centroids.row_ptr(j), d);
    }

    assign_all(z, fit.centroids, fit.assignments, dist);
    fit.inertia = kernels::active().sum(dist.data(), n);
    return fit;
}

}  // namespace

ClusterState kmeans(const DenseMatrix& z, int q, uint64_t seed, int max_iters, int restarts) {
    if (q < 1) throw std::invalid_argument("kmeans: q must be >= 1");
    if (q > z.rows)
        throw std::invalid_argument("kmeans: q=" + std::to_string(q) + " exceeds " +
                                    std::to_string(z.rows) + " points");
    if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");
    if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");

    Rng root(seed);
    Fit best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Fit fit = lloyd_once(z, q, root.substream("restart", r), max_iters);
        if (fit.inertia < best.inertia) best = std::move(fit);
    }
    ClusterState out;
    out.centroids = std::move(best.centroids);
    out.assignments = std::move(best.assignments);
    out.inertia = best.inertia;
    return out;
}

std::optional<ClusterState> refresh_if_due(long epoch, int m, const DenseMatrix& z, int q,
                                           uint64_t seed, int max_iters, int restarts) {
    if (m < 1) throw std::invalid_argument("refresh_if_due: cadence must be >= 1");
    if (epoch % m != 0) return std::nullopt;
    ClusterState cs = kmeans(z, q, seed, max_iters, restarts);
    cs.epoch_of_fit = epoch;
    return cs;
}

}  // namespace rod
