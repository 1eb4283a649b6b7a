#pragma once

#include <string>
#include <vector>

#include "rod/autodiff.hpp"
#include "rod/graph.hpp"
#include "rod/matrix.hpp"
#include "rod/reception.hpp"
#include "rod/rng.hpp"

namespace rod {

enum class Task { Classify, Link, Cluster };

Task task_from_string(const std::string& s);
std::string task_name(Task t);

/// Probability clamp applied wherever a prediction feeds a log.
inline constexpr double kProbEps = 1e-7;

/// Per-hop gate: one weight vector and scalar bias per reception scale.
struct GateParams {
    std::vector<DenseMatrix> w;  // K+1 entries, each d x 1
    std::vector<DenseMatrix> b;  // K+1 entries, each 1 x 1
    int arity() const { return static_cast<int>(w.size()); }
};

/// The shared one-layer encoder.
struct EncoderParams {
    DenseMatrix weight;  // d x h
    DenseMatrix bias;    // 1 x h
    double dropout = 0.0;
};

/// One per reception scale; out = classes for classification, embedding
/// size for link prediction and clustering.
struct StudentHead {
    DenseMatrix weight;  // h x out
    DenseMatrix bias;    // 1 x out
};

/// Teacher combination gate. For classification/clustering each student has
/// a weight vector over its prediction row plus a bias; for link prediction
/// a single scalar logit per student.
struct TeacherGate {
    std::vector<DenseMatrix> v;  // out x 1 (classify/cluster) or 1 x 1 logit (link)
    std::vector<DenseMatrix> c;  // 1 x 1 bias (classify/cluster); empty for link
};

struct RodConfig {
    Task task = Task::Classify;
    int depth = 4;    // K
    int hidden = 128; // h
    int embed = 16;   // e
    int classes = 0;  // q (classes or clusters)
    double alpha = 0.1;
    double beta = 0.1;
    double dropout = 0.0;
    double lr = 0.01;
    double weight_decay = 0.0;
    int epochs = 200;
    uint64_t seed = 0;
    int kmeans_period = 10;  // m
    int kmeans_restarts = 10;
    int kmeans_iters = 300;
    std::string reduction = "mean";    // mean | sum
    bool paper_literal_lc = false;

    int student_out() const { return task == Task::Classify ? classes : embed; }
    void validate() const;
};

/// All trainable state of one ROD model.
struct RodModel {
    RodConfig cfg;
    int feat_dim = 0;
    GateParams gate;
    EncoderParams encoder;
    std::vector<StudentHead> heads;  // K+1
    TeacherGate tgate;

    /// Stable (name, matrix) listing used by the optimizer and checkpoints.
    std::vector<std::pair<std::string, DenseMatrix*>> named_params();
    std::vector<std::pair<std::string, const DenseMatrix*>> named_params() const;
};

/// Glorot-uniform weights, zero biases, deterministic per seed.
RodModel init_params(const RodConfig& cfg, int feat_dim, uint64_t seed);

/// A parameter matrix bound onto a tape for one forward pass.
struct ParamBinding {
    DenseMatrix* storage;
    Var var;
};

/// Registry of bindings created during one forward build.
struct BindingSet {
    std::vector<ParamBinding> items;
    Var bind(Tape& tape, DenseMatrix& m) {
        items.push_back({&m, tape.param(m)});
        return items.back().var;
    }
};

/// H = sum_k sigmoid(X_k w_k + b_k) row-scaled X_k. props are the X_k
/// constants already placed on the tape.
Var gated_combine(Tape& tape, const std::vector<Var>& props, GateParams& gate, BindingSet& binds);

/// relu(dropout(H) W + b); dropout active only in training mode.
Var encode(Tape& tape, Var h, EncoderParams& enc, bool training, Rng dropout_rng,
           BindingSet& binds);

/// Z_k = shared W_k + b_k.
Var student_embedding(Tape& tape, Var shared, StudentHead& head, BindingSet& binds);

/// softmax over classes.
Var classify_prediction(Tape& tape, Var z);

/// n x q matrix of Euclidean distances to fixed centroids.
Var centroid_distances(Tape& tape, Var z, const DenseMatrix& centroids);

/// Distance softmax: row-wise softmax of -D.
Var cluster_prediction(Tape& tape, Var distances);

/// Per-pair Bernoulli parameter clamp((cos + 1)/2, eps, 1 - eps).
Var link_prediction(Tape& tape, Var z, const std::vector<std::pair<int, int>>& pairs);

/// Cosine similarity matrix of an embedding (value level; delegates to the
/// reception module).
SimilarityMatrix embedding_similarity(const DenseMatrix& z);

/// Gated ensemble of student predictions. The students enter as tape nodes
/// the caller controls: pass detached nodes during training so no gradient
/// leaks from teacher to students, or constants when the targets are frozen.
Var teacher_ensemble(Tape& tape, const std::vector<Var>& student_preds, TeacherGate& tgate,
                     Task task, BindingSet& binds);

}  // namespace rod
