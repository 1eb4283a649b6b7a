#pragma once

#include <string>
#include <vector>

#include "rod/autodiff.hpp"
#include "rod/matrix.hpp"
#include "rod/model.hpp"
#include "rod/reception.hpp"

namespace rod {

enum class Reduction { Mean, Sum };
Reduction reduction_from_string(const std::string& s);

/// Per-student loss pieces plus the joint total
/// total = sum_k (L_t + alpha * L_r + beta * L_d).
struct LossBreakdown {
    std::vector<double> task;       // L_t per student
    std::vector<double> reception;  // L_r per student
    std::vector<double> distill;    // L_d per student
    double teacher_aux = 0.0;       // gate-training loss on the teacher output
    double total = 0.0;
};

LossBreakdown joint_loss(const std::vector<double>& task, const std::vector<double>& reception,
                         const std::vector<double>& distill, double alpha, double beta);

// --- tape-level builders (training path) ----------------------------------

/// Cross entropy of probs rows at the true class over the labeled set.
Var classification_ce(Tape& tape, Var probs, const std::vector<int>& labels,
                      const std::vector<int>& labeled, Reduction reduction);

/// Weighted link reconstruction: -sum w log p over positives minus
/// sum (1 - w) log(1 - p) over negatives. Mean-reduction divides by
/// |pos| + |neg|.
Var link_bce(Tape& tape, Var p_pos, Var p_neg, const std::vector<double>& w_pos,
             const std::vector<double>& w_neg, Reduction reduction);

/// Centroid margin loss from the distance matrix (n x q): mean distance to
/// the assigned centroid minus mean distance to the others (sign-corrected
/// form; paper_literal flips the two terms). With q = 1 the away term is 0.
Var clustering_margin(Tape& tape, Var distances, const std::vector<int>& assignments, int q,
                      bool paper_literal);

/// ||p_hat - s||_F over all entries; s must outlive the tape.
Var reception_frob_full(Tape& tape, Var p_hat, const DenseMatrix* s);

/// Frobenius norm of the residual restricted to sampled pairs; both
/// arguments are (m x 1) pair columns.
Var reception_frob_masked(Tape& tape, Var p_hat_pairs, const DenseMatrix& s_pairs);

/// KL(teacher || student) row-wise for distribution rows; the teacher is a
/// fixed value, clamped into [eps, 1]. Mean-reduction divides by the row count.
Var kl_rows(Tape& tape, const DenseMatrix& teacher, Var student, Reduction reduction);

/// Two-term Bernoulli KL over sampled pairs; teacher fixed in [eps, 1-eps].
Var kl_bernoulli(Tape& tape, const DenseMatrix& teacher, Var student, Reduction reduction);

// --- value-level surfaces ---------------------------------------------------

/// Frobenius residual between predicted and target similarity; with a mask,
/// only pos+neg pairs contribute (each unordered pair once).
double reception_loss(const SimilarityMatrix& p_hat, const SimilarityMatrix& s,
                      const SampledAdjacency* mask = nullptr);

double classification_loss(const DenseMatrix& probs, const std::vector<int>& labels,
                           const std::vector<int>& labeled,
                           Reduction reduction = Reduction::Mean);

double link_loss(const std::vector<double>& p_pos, const std::vector<double>& p_neg,
                 const std::vector<double>& w_pos, const std::vector<double>& w_neg,
                 Reduction reduction = Reduction::Mean);

double clustering_loss(const DenseMatrix& z, const DenseMatrix& centroids,
                       const std::vector<int>& assignments, int q, bool paper_literal = false);

double distillation_loss(const DenseMatrix& p_teacher, const DenseMatrix& p_student, Task task,
                         Reduction reduction = Reduction::Mean);

/// Ensemble-similarity values min-max rescaled to [0, 1] over the sampled
/// pairs, used as positive weights (negatives use the complement). All-equal
/// similarities fall back to 0.5.
struct LinkWeights {
    std::vector<double> pos, neg;
};
LinkWeights link_pair_weights(const SimilarityMatrix& s, const SampledAdjacency& sampled);

}  // namespace rod
