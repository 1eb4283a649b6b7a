#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rod/matrix.hpp"

namespace rod {

/// Named scalar metrics for one evaluation.
struct MetricReport {
    std::string task;
    std::vector<std::pair<std::string, double>> values;

    void set(const std::string& name, double v) { values.emplace_back(name, v); }
    double get(const std::string& name) const;
    bool has(const std::string& name) const;
    /// One flat JSON object with metric names as keys (plus "task").
    std::string to_json() const;
};

/// Fraction of eval_set nodes whose predicted label matches exactly.
double accuracy(const std::vector<int>& pred_labels, const std::vector<int>& true_labels,
                const std::vector<int>& eval_set);

/// Mann-Whitney AUC with 0.5 credit for score ties. Needs at least one
/// positive and one negative label.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Area under the precision step function at each positive, ranked by
/// (score descending, index ascending).
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

/// Accuracy under the best one-to-one cluster-to-label mapping (optimal
/// assignment). Cluster and label counts are capped at 64.
double clustering_accuracy(const std::vector<int>& pred_clusters,
                           const std::vector<int>& true_labels);

/// Normalized mutual information with arithmetic-mean normalization and
/// natural logs.
double nmi(const std::vector<int>& pred_clusters, const std::vector<int>& true_labels);

/// Adjusted Rand index (pair-counting, chance-adjusted).
double ari(const std::vector<int>& pred_clusters, const std::vector<int>& true_labels);

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column chosen for each row. O(n^3) shortest augmenting paths.
std::vector<int> hungarian_min_assignment(const DenseMatrix& cost);

}  // namespace rod
