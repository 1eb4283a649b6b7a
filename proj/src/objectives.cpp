#include "rod/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rod/kernels.hpp"

namespace rod {

Reduction reduction_from_string(const std::string& s) {
    if (s == "mean") return Reduction::Mean;
    if (s == "sum") return Reduction::Sum;
    throw ConfigError("reduction must be 'mean' or 'sum', got '" + s + "'");
}

LossBreakdown joint_loss(const std::vector<double>& task, const std::vector<double>& reception,
                         const std::vector<double>& distill, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("joint_loss: alpha and beta must be positive");
    if (task.size() != reception.size() || task.size() != distill.size())
        throw std::invalid_argument("joint_loss: per-student lists differ in length");
    LossBreakdown out;
    out.task = task;
    out.reception = reception;
    out.distill = distill;
    for (size_t k = 0; k < task.size(); ++k)
        out.total += task[k] + alpha * reception[k] + beta * distill[k];
    return out;
}

Var classification_ce(Tape& tape, Var probs, const std::vector<int>& labels,
                      const std::vector<int>& labeled, Reduction reduction) {
    if (labeled.empty()) throw std::invalid_argument("classification_ce: empty labeled set");
    std::vector<std::pair<int, int>> entries;
    entries.reserve(labeled.size());
    for (int i : labeled) {
        if (i < 0 || i >= static_cast<int>(labels.size()) || labels[i] < 0)
            throw std::invalid_argument("classification_ce: node " + std::to_string(i) +
                                        " has no label");
        entries.emplace_back(i, labels[i]);
    }
    Var picked = tape.gather(tape.clamp(probs, kProbEps, 1.0), std::move(entries));
    double scale = reduction == Reduction::Mean ? -1.0 / double(labeled.size()) : -1.0;
    return tape.affine(tape.sum(tape.log(picked)), scale, 0.0);
}

Var link_bce(Tape& tape, Var p_pos, Var p_neg, const std::vector<double>& w_pos,
             const std::vector<double>& w_neg, Reduction reduction) {
    const int m_pos = tape.value(p_pos).rows;
    const int m_neg = tape.value(p_neg).rows;
    if (m_pos != static_cast<int>(w_pos.size()) || m_neg != static_cast<int>(w_neg.size()))
        throw std::invalid_argument("link_bce: weight/probability length mismatch");
    if (m_pos + m_neg == 0) throw std::invalid_argument("link_bce: no sampled pairs");

    Var acc{-1};
    bool have = false;
    if (m_pos > 0) {
        DenseMatrix w(m_pos, 1);
        for (int t = 0; t < m_pos; ++t) w(t, 0) = w_pos[t];
        acc = tape.sum(tape.mul(tape.constant(w), tape.log(p_pos)));
        have = true;
    }
    if (m_neg > 0) {
        DenseMatrix w(m_neg, 1);
        for (int t = 0; t < m_neg; ++t) w(t, 0) = 1.0 - w_neg[t];
        Var neg_term =
            tape.sum(tape.mul(tape.constant(w), tape.log(tape.affine(p_neg, -1.0, 1.0))));
        acc = have ? tape.add(acc, neg_term) : neg_term;
    }
    double scale = reduction == Reduction::Mean ? -1.0 / double(m_pos + m_neg) : -1.0;
    return tape.affine(acc, scale, 0.0);
}

Var clustering_margin(Tape& tape, Var distances, const std::vector<int>& assignments, int q,
                      bool paper_literal) {
    const auto& d = tape.value(distances);
    if (q < 1) throw std::invalid_argument("clustering_margin: q must be >= 1");
    if (d.cols != q) throw std::invalid_argument("clustering_margin: distance matrix has " +
                                                 std::to_string(d.cols) + " columns for q=" +
                                                 std::to_string(q));
    if (static_cast<int>(assignments.size()) != d.rows)
        throw std::invalid_argument("clustering_margin: assignment length mismatch");
    std::vector<std::pair<int, int>> own_entries;
    own_entries.reserve(assignments.size());
    for (size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] < 0 || assignments[i] >= q)
            throw std::invalid_argument("clustering_margin: assignment out of range at node " +
                                        std::to_string(i));
        own_entries.emplace_back(static_cast<int>(i), assignments[i]);
    }
    const double n = static_cast<double>(d.rows);
    Var own_sum = tape.sum(tape.gather(distances, std::move(own_entries)));
    Var own_mean = tape.affine(own_sum, 1.0 / n, 0.0);
    if (q == 1) {
        // away term vanishes by convention
        return paper_literal ? tape.affine(own_mean, -1.0, 0.0) : own_mean;
    }
    Var away = tape.affine(tape.sub(tape.sum(distances), own_sum), 1.0 / (n * (q - 1)), 0.0);
    return paper_literal ? tape.sub(away, own_mean) : tape.sub(own_mean, away);
}

Var reception_frob_full(Tape& tape, Var p_hat, const DenseMatrix* s) {
    return tape.frob_diff(p_hat, s);
}

Var reception_frob_masked(Tape& tape, Var p_hat_pairs, const DenseMatrix& s_pairs) {
    return tape.frobenius_norm(tape.sub(p_hat_pairs, tape.constant(s_pairs)));
}

namespace {
DenseMatrix clip_probs(const DenseMatrix& p, double lo, double hi) {
    DenseMatrix out = p;
    for (auto& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
    return out;
}

/// Entropy-style constant computed with the same elementwise expression and
/// summation order the tape uses, so KL(P, P) cancels exactly.
double rows_self_term(const DenseMatrix& p) {
    DenseMatrix terms(p.rows, p.cols);
    for (size_t t = 0; t < p.size(); ++t)
        terms.data[t] = p.data[t] * std::log(p.data[t] > 1e-12 ? p.data[t] : 1e-12);
    return kernels::active().sum(terms.data.data(), static_cast<int>(terms.size()));
}
}  // namespace

Var kl_rows(Tape& tape, const DenseMatrix& teacher, Var student, Reduction reduction) {
    require_same_shape(teacher, tape.value(student), "kl_rows");
    DenseMatrix p = clip_probs(teacher, kProbEps, 1.0);
    const double self_term = rows_self_term(p);
    Var cross =
        tape.sum(tape.mul(tape.constant(p), tape.log(tape.clamp(student, kProbEps, 1.0))));
    Var kl = tape.affine(cross, -1.0, self_term);
    if (reduction == Reduction::Mean) kl = tape.affine(kl, 1.0 / teacher.rows, 0.0);
    return kl;
}

Var kl_bernoulli(Tape& tape, const DenseMatrix& teacher, Var student, Reduction reduction) {
    require_same_shape(teacher, tape.value(student), "kl_bernoulli");
    if (teacher.cols != 1) throw std::invalid_argument("kl_bernoulli: expects m x 1 pair columns");
    DenseMatrix p = clip_probs(teacher, kProbEps, 1.0 - kProbEps);
    DenseMatrix one_minus_p(p.rows, 1);
    for (int t = 0; t < p.rows; ++t) one_minus_p(t, 0) = -1.0 * p(t, 0) + 1.0;
    // Self term mirrors the tape expression structure below.
    DenseMatrix self_terms(p.rows, 1);
    for (int t = 0; t < p.rows; ++t) {
        double lp = std::log(p(t, 0) > 1e-12 ? p(t, 0) : 1e-12);
        double lq = std::log(one_minus_p(t, 0) > 1e-12 ? one_minus_p(t, 0) : 1e-12);
        self_terms(t, 0) = p(t, 0) * lp + one_minus_p(t, 0) * lq;
    }
    const double self_term =
        kernels::active().sum(self_terms.data.data(), static_cast<int>(self_terms.size()));

    Var clamped = tape.clamp(student, kProbEps, 1.0 - kProbEps);
    Var log_q = tape.log(clamped);
    Var log_1mq = tape.log(tape.affine(clamped, -1.0, 1.0));
    Var cross = tape.sum(tape.add(tape.mul(tape.constant(p), log_q),
                                  tape.mul(tape.constant(one_minus_p), log_1mq)));
    Var kl = tape.affine(cross, -1.0, self_term);
    if (reduction == Reduction::Mean) kl = tape.affine(kl, 1.0 / teacher.rows, 0.0);
    return kl;
}

// --- value-level wrappers ----------------------------------------------------

double reception_loss(const SimilarityMatrix& p_hat, const SimilarityMatrix& s,
                      const SampledAdjacency* mask) {
    require_same_shape(p_hat, s, "reception_loss");
    if (mask == nullptr) {
        Tape tape;
        return tape.value(reception_frob_full(tape, tape.constant(p_hat), &s))(0, 0);
    }
    std::vector<std::pair<int, int>> pairs = mask->pos_pairs;
    pairs.insert(pairs.end(), mask->neg_pairs.begin(), mask->neg_pairs.end());
    DenseMatrix s_pairs(static_cast<int>(pairs.size()), 1);
    for (size_t t = 0; t < pairs.size(); ++t)
        s_pairs(static_cast<int>(t), 0) = s(pairs[t].first, pairs[t].second);
    Tape tape;
    Var gathered = tape.gather(tape.constant(p_hat), std::move(pairs));
    return tape.value(reception_frob_masked(tape, gathered, s_pairs))(0, 0);
}

double classification_loss(const DenseMatrix& probs, const std::vector<int>& labels,
                           const std::vector<int>& labeled, Reduction reduction) {
    Tape tape;
    return tape.value(classification_ce(tape, tape.constant(probs), labels, labeled, reduction))(
        0, 0);
}

double link_loss(const std::vector<double>& p_pos, const std::vector<double>& p_neg,
                 const std::vector<double>& w_pos, const std::vector<double>& w_neg,
                 Reduction reduction) {
    Tape tape;
    DenseMatrix pos(static_cast<int>(p_pos.size()), 1), neg(static_cast<int>(p_neg.size()), 1);
    for (size_t t = 0; t < p_pos.size(); ++t) pos(static_cast<int>(t), 0) = p_pos[t];
    for (size_t t = 0; t < p_neg.size(); ++t) neg(static_cast<int>(t), 0) = p_neg[t];
    return tape.value(
        link_bce(tape, tape.constant(pos), tape.constant(neg), w_pos, w_neg, reduction))(0, 0);
}

double clustering_loss(const DenseMatrix& z, const DenseMatrix& centroids,
                       const std::vector<int>& assignments, int q, bool paper_literal) {
    if (centroids.rows != q)
        throw std::invalid_argument("clustering_loss: centroid count differs from q");
    Tape tape;
    Var d = centroid_distances(tape, tape.constant(z), centroids);
    return tape.value(clustering_margin(tape, d, assignments, q, paper_literal))(0, 0);
}

double distillation_loss(const DenseMatrix& p_teacher, const DenseMatrix& p_student, Task task,
                         Reduction reduction) {
    Tape tape;
    Var student = tape.constant(p_student);
    Var kl = task == Task::Link ? kl_bernoulli(tape, p_teacher, student, reduction)
                                : kl_rows(tape, p_teacher, student, reduction);
    return tape.value(kl)(0, 0);
}

LinkWeights link_pair_weights(const SimilarityMatrix& s, const SampledAdjacency& sampled) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    auto scan = [&](const std::vector<std::pair<int, int>>& pairs) {
        for (auto [i, j] : pairs) {
            lo = std::min(lo, s(i, j));
            hi = std::max(hi, s(i, j));
        }
    };
    scan(sampled.pos_pairs);
    scan(sampled.neg_pairs);
    const double span = hi - lo;
    auto rescale = [&](const std::vector<std::pair<int, int>>& pairs) {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (auto [i, j] : pairs)
            out.push_back(span > 1e-12 ? (s(i, j) - lo) / span : 0.5);
        return out;
    };
    return {rescale(sampled.pos_pairs), rescale(sampled.neg_pairs)};
}

}  // namespace rod
