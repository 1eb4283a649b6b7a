#include "rod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace rod {

double MetricReport::get(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return v;
    throw std::invalid_argument("MetricReport: no metric named " + name);
}

bool MetricReport::has(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return true;
    return false;
}

std::string MetricReport::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"task\": \"" << task << "\"";
    for (const auto& [k, v] : values) os << ", \"" << k << "\": " << v;
    os << "}";
    return os.str();
}

double accuracy(const std::vector<int>& pred_labels, const std::vector<int>& true_labels,
                const std::vector<int>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("accuracy: empty eval set");
    long correct = 0;
    for (int i : eval_set) {
        if (i < 0 || i >= static_cast<int>(pred_labels.size()) ||
            i >= static_cast<int>(true_labels.size()))
            throw std::invalid_argument("accuracy: eval index out of range");
        if (pred_labels[i] == true_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval_set.size());
}

namespace {
void check_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                  const char* what) {
    if (scores.size() != labels.size())
        throw std::invalid_argument(std::string(what) + ": size mismatch");
    long pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<long>(labels.size()))
        throw std::invalid_argument(std::string(what) +
                                    ": needs at least one positive and one negative");
    for (int l : labels)
        if (l != 0 && l != 1)
            throw std::invalid_argument(std::string(what) + ": labels must be 0/1");
}
}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary(scores, labels, "roc_auc");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    // Average ranks over tie groups (1-based ranks).
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    long n_pos = 0;
    for (size_t t = 0; t < n; ++t)
        if (labels[t] == 1) {
            rank_sum_pos += rank[t];
            ++n_pos;
        }
    long n_neg = static_cast<long>(n) - n_pos;
    return (rank_sum_pos - 0.5 * n_pos * (n_pos + 1.0)) / (static_cast<double>(n_pos) * n_neg);
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary(scores, labels, "average_precision");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    long n_pos = std::count(labels.begin(), labels.end(), 1);
    double ap = 0.0;
    long hits = 0;
    for (size_t r = 0; r < n; ++r) {
        if (labels[order[r]] == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

std::vector<int> hungarian_min_assignment(const DenseMatrix& cost) {
    if (cost.rows != cost.cols) throw std::invalid_argument("hungarian: matrix must be square");
    const int n = cost.rows;
    const double inf = std::numeric_limits<double>::infinity();
    // Shortest augmenting path formulation with potentials (1-based).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

namespace {
struct Contingency {
    int n = 0;
    int q_pred = 0, q_true = 0;
    std::vector<long> counts;  // q_pred x q_true
    std::vector<long> pred_sizes, true_sizes;

    long at(int c, int l) const { return counts[static_cast<size_t>(c) * q_true + l]; }
};

Contingency build_contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("clustering metrics: size mismatch");
    if (pred.empty()) throw std::invalid_argument("clustering metrics: empty input");
    Contingency c;
    c.n = static_cast<int>(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || truth[i] < 0)
            throw std::invalid_argument("clustering metrics: negative label");
        c.q_pred = std::max(c.q_pred, pred[i] + 1);
        c.q_true = std::max(c.q_true, truth[i] + 1);
    }
    c.counts.assign(static_cast<size_t>(c.q_pred) * c.q_true, 0);
    c.pred_sizes.assign(c.q_pred, 0);
    c.true_sizes.assign(c.q_true, 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        ++c.counts[static_cast<size_t>(pred[i]) * c.q_true + truth[i]];
        ++c.pred_sizes[pred[i]];
        ++c.true_sizes[truth[i]];
    }
    return c;
}
}  // namespace

double clustering_accuracy(const std::vector<int>& pred_clusters,
                           const std::vector<int>& true_labels) {
    Contingency c = build_contingency(pred_clusters, true_labels);
    if (c.q_pred > 64 || c.q_true > 64)
        throw std::invalid_argument("clustering_accuracy: more than 64 clusters or labels");
    const int m = std::max(c.q_pred, c.q_true);
    // Maximize matched counts == minimize (max_count - count).
    long max_count = 0;
    for (long v : c.counts) max_count = std::max(max_count, v);
    DenseMatrix cost(m, m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            long cnt = (i < c.q_pred && j < c.q_true) ? c.at(i, j) : 0;
            cost(i, j) = static_cast<double>(max_count - cnt);
        }
    std::vector<int> match = hungarian_min_assignment(cost);
    long correct = 0;
    for (int i = 0; i < c.q_pred; ++i) {
        int j = match[i];
        if (j >= 0 && j < c.q_true) correct += c.at(i, j);
    }
    return static_cast<double>(correct) / static_cast<double>(c.n);
}

double nmi(const std::vector<int>& pred_clusters, const std::vector<int>& true_labels) {
    Contingency c = build_contingency(pred_clusters, true_labels);
    const double n = static_cast<double>(c.n);
    double h_pred = 0.0, h_true = 0.0, mi = 0.0;
    for (long s : c.pred_sizes)
        if (s > 0) h_pred -= (s / n) * std::log(s / n);
    for (long s : c.true_sizes)
        if (s > 0) h_true -= (s / n) * std::log(s / n);
    for (int i = 0; i < c.q_pred; ++i)
        for (int j = 0; j < c.q_true; ++j) {
            long nij = c.at(i, j);
            if (nij == 0) continue;
            mi += (nij / n) *
                  std::log(n * nij / (static_cast<double>(c.pred_sizes[i]) * c.true_sizes[j]));
        }
    double denom = 0.5 * (h_pred + h_true);
    if (denom <= 0.0) return 1.0;  // both partitions trivial, hence identical
    return mi / denom;
}

double ari(const std::vector<int>& pred_clusters, const std::vector<int>& true_labels) {
    Contingency c = build_contingency(pred_clusters, true_labels);
    auto choose2 = [](long x) { return 0.5 * static_cast<double>(x) * (x - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (long v : c.counts) sum_ij += choose2(v);
    for (long v : c.pred_sizes) sum_a += choose2(v);
    for (long v : c.true_sizes) sum_b += choose2(v);
    double total = choose2(c.n);
    double expected = sum_a * sum_b / total;
    double max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected == 0.0) return 1.0;  // both partitions trivial
    return (sum_ij - expected) / (max_index - expected);
}

}  // namespace rod
