#include "rod/model.hpp"

#include <cmath>

#include "rod/kernels.hpp"

namespace rod {

Task task_from_string(const std::string& s) {
    if (s == "classify") return Task::Classify;
    if (s == "link") return Task::Link;
    if (s == "cluster") return Task::Cluster;
    throw ConfigError("unknown task '" + s + "' (expected classify, link or cluster)");
}

std::string task_name(Task t) {
    switch (t) {
        case Task::Classify: return "classify";
        case Task::Link: return "link";
        case Task::Cluster: return "cluster";
    }
    return "?";
}

void RodConfig::validate() const {
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (kmeans_period < 1) throw ConfigError("kmeans_period must be >= 1");
    if (classes < 1) throw ConfigError("classes must be >= 1");
    if (task != Task::Classify && embed < 1) throw ConfigError("embed must be >= 1");
    if (reduction != "mean" && reduction != "sum")
        throw ConfigError("reduction must be 'mean' or 'sum'");
}

std::vector<std::pair<std::string, DenseMatrix*>> RodModel::named_params() {
    std::vector<std::pair<std::string, DenseMatrix*>> out;
    for (size_t k = 0; k < gate.w.size(); ++k) {
        out.emplace_back("gate_w_" + std::to_string(k), &gate.w[k]);
        out.emplace_back("gate_b_" + std::to_string(k), &gate.b[k]);
    }
    out.emplace_back("encoder_weight", &encoder.weight);
    out.emplace_back("encoder_bias", &encoder.bias);
    for (size_t k = 0; k < heads.size(); ++k) {
        out.emplace_back("head_weight_" + std::to_string(k), &heads[k].weight);
        out.emplace_back("head_bias_" + std::to_string(k), &heads[k].bias);
    }
    for (size_t k = 0; k < tgate.v.size(); ++k)
        out.emplace_back("tgate_v_" + std::to_string(k), &tgate.v[k]);
    for (size_t k = 0; k < tgate.c.size(); ++k)
        out.emplace_back("tgate_c_" + std::to_string(k), &tgate.c[k]);
    return out;
}

std::vector<std::pair<std::string, const DenseMatrix*>> RodModel::named_params() const {
    auto mut = const_cast<RodModel*>(this)->named_params();
    std::vector<std::pair<std::string, const DenseMatrix*>> out;
    out.reserve(mut.size());
    for (auto& [name, ptr] : mut) out.emplace_back(name, ptr);
    return out;
}

namespace {
DenseMatrix glorot(int rows, int cols, Rng rng) {
    double limit = std::sqrt(6.0 / (rows + cols));
    DenseMatrix m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-limit, limit);
    return m;
}
}  // namespace

RodModel init_params(const RodConfig& cfg, int feat_dim, uint64_t seed) {
    cfg.validate();
    RodModel model;
    model.cfg = cfg;
    model.feat_dim = feat_dim;
    Rng root = Rng(seed).substream("init");
    const int students = cfg.depth + 1;
    const int out = cfg.student_out();

    for (int k = 0; k < students; ++k) {
        model.gate.w.push_back(glorot(feat_dim, 1, root.substream("gate_w", k)));
        model.gate.b.emplace_back(1, 1);  // biases start at zero
    }
    model.encoder.weight = glorot(feat_dim, cfg.hidden, root.substream("encoder_w"));
    model.encoder.bias = DenseMatrix(1, cfg.hidden);
    model.encoder.dropout = cfg.dropout;
    for (int k = 0; k < students; ++k) {
        StudentHead head;
        head.weight = glorot(cfg.hidden, out, root.substream("head_w", k));
        head.bias = DenseMatrix(1, out);
        model.heads.push_back(std::move(head));
    }
    if (cfg.task == Task::Link) {
        // Scalar logits start at zero: every student weighs in equally.
        for (int k = 0; k < students; ++k) model.tgate.v.emplace_back(1, 1);
    } else {
        // The teacher gates read prediction rows, which have one entry per
        // class/cluster regardless of the embedding size.
        for (int k = 0; k < students; ++k) {
            model.tgate.v.push_back(glorot(cfg.classes, 1, root.substream("tgate_v", k)));
            model.tgate.c.emplace_back(1, 1);
        }
    }
    return model;
}

Var gated_combine(Tape& tape, const std::vector<Var>& props, GateParams& gate,
                  BindingSet& binds) {
    if (props.empty()) throw std::invalid_argument("gated_combine: no propagated features");
    if (gate.arity() != static_cast<int>(props.size()))
        throw std::invalid_argument("gated_combine: gate arity " + std::to_string(gate.arity()) +
                                    " vs " + std::to_string(props.size()) + " hops");
    Var acc{-1};
    for (size_t k = 0; k < props.size(); ++k) {
        Var w = binds.bind(tape, gate.w[k]);
        Var b = binds.bind(tape, gate.b[k]);
        Var score = tape.sigmoid(tape.add(tape.matmul(props[k], w), b));  // n x 1
        Var term = tape.scale_rows(props[k], score);
        acc = k == 0 ? term : tape.add(acc, term);
    }
    return acc;
}

Var encode(Tape& tape, Var h, EncoderParams& enc, bool training, Rng dropout_rng,
           BindingSet& binds) {
    Var in = h;
    if (training && enc.dropout > 0.0) in = tape.dropout(in, enc.dropout, dropout_rng);
    Var w = binds.bind(tape, enc.weight);
    Var b = binds.bind(tape, enc.bias);
    return tape.relu(tape.add(tape.matmul(in, w), b));
}

Var student_embedding(Tape& tape, Var shared, StudentHead& head, BindingSet& binds) {
    Var w = binds.bind(tape, head.weight);
    Var b = binds.bind(tape, head.bias);
    return tape.add(tape.matmul(shared, w), b);
}

Var classify_prediction(Tape& tape, Var z) { return tape.softmax_rows(z); }

Var centroid_distances(Tape& tape, Var z, const DenseMatrix& centroids) {
    // D_ij^2 = |z_i|^2 - 2 <z_i, c_j> + |c_j|^2, assembled from broadcasts.
    const int q = centroids.rows;
    Var c = tape.constant(centroids);
    Var cross = tape.matmul_nt(z, c);                      // n x q
    Var z_sq = tape.row_sums(tape.mul(z, z));              // n x 1
    DenseMatrix c_sq(1, q);
    for (int j = 0; j < q; ++j)
        c_sq(0, j) = kernels::active().dot(centroids.row_ptr(j), centroids.row_ptr(j),
                                           centroids.cols);
    Var d2 = tape.add(tape.add(tape.affine(cross, -2.0, 0.0), z_sq), tape.constant(c_sq));
    return tape.sqrt(d2);
}

Var cluster_prediction(Tape& tape, Var distances) {
    return tape.softmax_rows(tape.affine(distances, -1.0, 0.0));
}

Var link_prediction(Tape& tape, Var z, const std::vector<std::pair<int, int>>& pairs) {
    Var cos = tape.pair_cosine(z, pairs);
    return tape.clamp(tape.affine(cos, 0.5, 0.5), kProbEps, 1.0 - kProbEps);
}

SimilarityMatrix embedding_similarity(const DenseMatrix& z) { return cosine_similarity(z); }

Var teacher_ensemble(Tape& tape, const std::vector<Var>& student_preds, TeacherGate& tgate,
                     Task task, BindingSet& binds) {
    if (student_preds.empty()) throw std::invalid_argument("teacher_ensemble: no students");
    if (tgate.v.size() != student_preds.size())
        throw std::invalid_argument("teacher_ensemble: gate arity " +
                                    std::to_string(tgate.v.size()) + " vs " +
                                    std::to_string(student_preds.size()) + " students");
    if (task == Task::Link) {
        Var num{-1}, den{-1};
        for (size_t k = 0; k < student_preds.size(); ++k) {
            Var g = tape.sigmoid(binds.bind(tape, tgate.v[k]));  // 1 x 1
            Var term = tape.mul(student_preds[k], g);
            num = k == 0 ? term : tape.add(num, term);
            den = k == 0 ? g : tape.add(den, g);
        }
        Var blended = tape.mul(num, tape.safe_reciprocal(den));
        return tape.clamp(blended, kProbEps, 1.0 - kProbEps);
    }
    // classify / cluster: per-node gates over prediction rows, renormalized.
    Var acc{-1};
    for (size_t k = 0; k < student_preds.size(); ++k) {
        Var v = binds.bind(tape, tgate.v[k]);
        Var c = binds.bind(tape, tgate.c[k]);
        Var g = tape.sigmoid(tape.add(tape.matmul(student_preds[k], v), c));  // n x 1
        Var term = tape.scale_rows(student_preds[k], g);
        acc = k == 0 ? term : tape.add(acc, term);
    }
    return tape.normalize_rows_sum(acc);
}

}  // namespace rod
