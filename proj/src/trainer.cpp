#include "rod/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "rod/kernels.hpp"
#include "rod/optimizer.hpp"

namespace fs = std::filesystem;

namespace rod {

namespace {

uint64_t derive_seed(uint64_t root, const std::string& name) {
    return Rng(root).substream(name).next_u64();
}

int argmax_row(const DenseMatrix& m, int i) {
    int best = 0;
    for (int j = 1; j < m.cols; ++j)
        if (m(i, j) > m(i, best)) best = j;
    return best;
}

std::vector<int> argmax_rows(const DenseMatrix& m) {
    std::vector<int> out(m.rows);
    for (int i = 0; i < m.rows; ++i) out[i] = argmax_row(m, i);
    return out;
}

/// Differentiable cosine similarity matrix of the rows of z.
Var cosine_rows(Tape& tape, Var z) {
    Var inv = tape.safe_reciprocal(tape.row_norms(z));
    Var unit = tape.scale_rows(z, inv);
    return tape.matmul_nt(unit, unit);
}

std::vector<std::pair<int, int>> column_entries(int begin, int end) {
    std::vector<std::pair<int, int>> out;
    out.reserve(end - begin);
    for (int t = begin; t < end; ++t) out.emplace_back(t, 0);
    return out;
}

}  // namespace

Dataset resolve_dataset(const RunConfig& cfg) {
    cfg.validate_source();
    if (cfg.use_sbm) return generate_sbm(cfg.sbm, cfg.model.seed);
    return load_dataset(cfg.data_dir);
}

Pipeline build_pipeline(const RunConfig& cfg_in, const Dataset& ds, PropagationCache* cache) {
    Pipeline pipe;
    pipe.cfg = cfg_in;
    RodConfig& mc = pipe.cfg.model;

    if (!kernels::select(pipe.cfg.kernels))
        throw ConfigError("kernel backend '" + pipe.cfg.kernels + "' is not available here");

    if (mc.task == Task::Link) {
        mc.classes = std::max(mc.classes, 1);  // unused by the link heads
    } else if (mc.classes < 1) {
        mc.classes = ds.num_classes();
        if (mc.classes < 1)
            throw ConfigError(task_name(mc.task) +
                              " task needs labels in the dataset or an explicit 'classes'");
    }
    mc.validate();
    pipe.data = ds;

    if (mc.task == Task::Link) {
        pipe.edge_split = split_edges(ds.graph, pipe.cfg.val_frac, pipe.cfg.test_frac, mc.seed);
        pipe.task_graph = build_csr(pipe.edge_split.train_edges, ds.graph.n, true);
    } else {
        pipe.task_graph = ds.graph;
    }

    const int k_depth = mc.depth;
    SparseGraph a_hat = sym_normalize(add_self_loops(pipe.task_graph));
    if (cache && cache->depth_built >= k_depth) {
        ++cache->hits;
        ++pipe.stats.propagation_cache_hits;
        pipe.props.depth = k_depth;
        pipe.props.mats.assign(cache->props.mats.begin(),
                               cache->props.mats.begin() + k_depth + 1);
        pipe.hop_sims.assign(cache->hop_sims.begin(), cache->hop_sims.begin() + k_depth + 1);
    } else {
        pipe.props = precompute_propagation(a_hat, ds.features, k_depth);
        for (int k = 0; k <= k_depth; ++k)
            pipe.hop_sims.push_back(cosine_similarity(pipe.props.mats[k]));
        if (cache) {
            ++cache->misses;
            cache->depth_built = k_depth;
            cache->props = pipe.props;
            cache->hop_sims = pipe.hop_sims;
        }
    }
    pipe.stats.propagation_builds = 1;
    pipe.stats.similarity_builds = 1;
    pipe.ensemble_sim = ensemble_similarity(pipe.hop_sims);

    const int n = pipe.task_graph.n;
    if (pipe.cfg.reception_mode == "sampled")
        pipe.sampled_reception = true;
    else if (pipe.cfg.reception_mode == "auto")
        pipe.sampled_reception = n > kMaxDensePairNodes;

    const bool need_sampled = mc.task == Task::Link || pipe.sampled_reception;
    if (need_sampled) {
        const long long edges = pipe.task_graph.num_edges();
        const long long total = static_cast<long long>(n) * (n - 1) / 2;
        long long pos = pipe.cfg.pos_budget >= 0
                            ? pipe.cfg.pos_budget
                            : std::min(2 * edges, std::max(edges, total - edges - 1));
        // Positives can exceed the budget by up to |E| (edges outside the
        // top-M), so the automatic negative budget leaves room for that.
        long long avail = std::max(static_cast<long long>(1), total - pos - edges);
        long long neg = pipe.cfg.neg_budget >= 0
                            ? pipe.cfg.neg_budget
                            : std::clamp(10 * edges, static_cast<long long>(1), avail);
        pipe.sampled = sample_reliable(pipe.ensemble_sim, pipe.task_graph, pos, neg);
        pipe.cfg.pos_budget = pos;
        pipe.cfg.neg_budget = neg;
        pipe.has_sampled = true;
        pipe.stats.sampling_builds = 1;
        pipe.stats.sampled_pos_pairs = static_cast<long long>(pipe.sampled.pos_pairs.size());
        pipe.stats.sampled_neg_pairs = static_cast<long long>(pipe.sampled.neg_pairs.size());
        pipe.num_pos_pairs = static_cast<int>(pipe.sampled.pos_pairs.size());
        pipe.all_pairs = pipe.sampled.pos_pairs;
        pipe.all_pairs.insert(pipe.all_pairs.end(), pipe.sampled.neg_pairs.begin(),
                              pipe.sampled.neg_pairs.end());
        if (mc.task == Task::Link)
            pipe.link_weights = link_pair_weights(pipe.ensemble_sim, pipe.sampled);
        if (pipe.sampled_reception) {
            for (int k = 0; k <= k_depth; ++k) {
                DenseMatrix col(static_cast<int>(pipe.all_pairs.size()), 1);
                for (size_t t = 0; t < pipe.all_pairs.size(); ++t)
                    col(static_cast<int>(t), 0) =
                        pipe.hop_sims[k](pipe.all_pairs[t].first, pipe.all_pairs[t].second);
                pipe.hop_sim_pairs.push_back(std::move(col));
            }
        }
    }
    return pipe;
}

std::vector<DenseMatrix> compute_embeddings(RodModel& model, const Pipeline& pipe) {
    Tape tape;
    BindingSet binds;
    std::vector<Var> xk;
    for (int k = 0; k <= model.cfg.depth; ++k) xk.push_back(tape.constant(pipe.props.mats[k]));
    Var h = gated_combine(tape, xk, model.gate, binds);
    Var shared = encode(tape, h, model.encoder, /*training=*/false, Rng(0), binds);
    std::vector<DenseMatrix> out;
    for (int k = 0; k <= model.cfg.depth; ++k)
        out.push_back(tape.value(student_embedding(tape, shared, model.heads[k], binds)));
    return out;
}

namespace {

/// Permutes every student's cluster ids onto student 0's, by maximum
/// assignment overlap, so teacher mixing and distillation compare aligned
/// columns.
void align_clusters(std::vector<ClusterState>& states, int q) {
    if (states.size() < 2) return;
    const std::vector<int>& ref = states[0].assignments;
    for (size_t k = 1; k < states.size(); ++k) {
        std::vector<long> overlap(static_cast<size_t>(q) * q, 0);
        for (size_t i = 0; i < ref.size(); ++i)
            ++overlap[static_cast<size_t>(states[k].assignments[i]) * q + ref[i]];
        long max_o = 0;
        for (long v : overlap) max_o = std::max(max_o, v);
        DenseMatrix cost(q, q);
        for (int c = 0; c < q; ++c)
            for (int r = 0; r < q; ++r)
                cost(c, r) = static_cast<double>(max_o - overlap[static_cast<size_t>(c) * q + r]);
        std::vector<int> perm = hungarian_min_assignment(cost);  // cluster c -> ref slot
        DenseMatrix centroids(q, states[k].centroids.cols);
        for (int c = 0; c < q; ++c)
            std::copy_n(states[k].centroids.row_ptr(c), centroids.cols,
                        centroids.row_ptr(perm[c]));
        states[k].centroids = std::move(centroids);
        for (int& a : states[k].assignments) a = perm[a];
    }
}

std::vector<DenseMatrix> centroids_of(const std::vector<ClusterState>& states) {
    std::vector<DenseMatrix> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(s.centroids);
    return out;
}

}  // namespace

LossGraph build_loss_graph(RodModel& model, const Pipeline& pipe, long epoch, bool training,
                           const std::vector<ClusterState>* clusters,
                           const FrozenTargets* frozen) {
    const RodConfig& mc = model.cfg;
    const Reduction red = reduction_from_string(mc.reduction);
    const int students = mc.depth + 1;
    if (mc.task == Task::Cluster &&
        (!clusters || static_cast<int>(clusters->size()) != students))
        throw std::invalid_argument("cluster task requires one ClusterState per student");

    LossGraph lg;
    Tape& tape = lg.tape;

    std::vector<Var> xk;
    for (int k = 0; k < students; ++k) xk.push_back(tape.constant(pipe.props.mats[k]));
    Var h = gated_combine(tape, xk, model.gate, lg.binds);
    Rng drop_rng = Rng(mc.seed).substream("dropout", epoch);
    Var shared = encode(tape, h, model.encoder, training, drop_rng, lg.binds);

    auto pos_idx = column_entries(0, pipe.num_pos_pairs);
    auto neg_idx = column_entries(pipe.num_pos_pairs, static_cast<int>(pipe.all_pairs.size()));

    std::vector<Var> zs, preds, dists;
    for (int k = 0; k < students; ++k) {
        Var z = student_embedding(tape, shared, model.heads[k], lg.binds);
        zs.push_back(z);
        switch (mc.task) {
            case Task::Classify:
                preds.push_back(classify_prediction(tape, z));
                break;
            case Task::Cluster: {
                Var d = centroid_distances(tape, z, (*clusters)[k].centroids);
                dists.push_back(d);
                preds.push_back(cluster_prediction(tape, d));
                break;
            }
            case Task::Link:
                preds.push_back(link_prediction(tape, z, pipe.all_pairs));
                break;
        }
        lg.embeddings.push_back(tape.value(z));
        lg.pred_values.push_back(tape.value(preds.back()));
    }

    // Teacher: detached student inputs during training; frozen constants for
    // gradient checks.
    std::vector<Var> teacher_in;
    for (int k = 0; k < students; ++k)
        teacher_in.push_back(frozen ? tape.constant(frozen->student_preds[k])
                                    : tape.detach(preds[k]));
    Var teacher = teacher_ensemble(tape, teacher_in, model.tgate, mc.task, lg.binds);
    lg.teacher_value = frozen ? frozen->teacher : tape.value(teacher);

    std::vector<Var> lt, lr, ld;
    for (int k = 0; k < students; ++k) {
        switch (mc.task) {
            case Task::Classify:
                lt.push_back(classification_ce(tape, preds[k], pipe.data.labels,
                                               pipe.data.splits.train, red));
                break;
            case Task::Cluster:
                lt.push_back(clustering_margin(tape, dists[k], (*clusters)[k].assignments,
                                               mc.classes, mc.paper_literal_lc));
                break;
            case Task::Link:
                lt.push_back(link_bce(tape, tape.gather(preds[k], pos_idx),
                                      tape.gather(preds[k], neg_idx), pipe.link_weights.pos,
                                      pipe.link_weights.neg, red));
                break;
        }
        if (pipe.sampled_reception) {
            Var pc = tape.pair_cosine(zs[k], pipe.all_pairs);
            lr.push_back(reception_frob_masked(tape, pc, pipe.hop_sim_pairs[k]));
        } else {
            lr.push_back(reception_frob_full(tape, cosine_rows(tape, zs[k]), &pipe.hop_sims[k]));
        }
        ld.push_back(mc.task == Task::Link ? kl_bernoulli(tape, lg.teacher_value, preds[k], red)
                                           : kl_rows(tape, lg.teacher_value, preds[k], red));
    }

    Var aux{-1};
    switch (mc.task) {
        case Task::Classify:
            aux = classification_ce(tape, teacher, pipe.data.labels, pipe.data.splits.train, red);
            break;
        case Task::Link:
            aux = link_bce(tape, tape.gather(teacher, pos_idx), tape.gather(teacher, neg_idx),
                           pipe.link_weights.pos, pipe.link_weights.neg, red);
            break;
        case Task::Cluster: {
            std::vector<int> all_nodes(pipe.data.graph.n);
            std::iota(all_nodes.begin(), all_nodes.end(), 0);
            aux = classification_ce(tape, teacher, (*clusters)[0].assignments, all_nodes, red);
            break;
        }
    }

    Var total{-1};
    std::vector<double> lt_v, lr_v, ld_v;
    for (int k = 0; k < students; ++k) {
        Var term = tape.add(lt[k], tape.add(tape.affine(lr[k], mc.alpha, 0.0),
                                            tape.affine(ld[k], mc.beta, 0.0)));
        total = k == 0 ? term : tape.add(total, term);
        lt_v.push_back(tape.value(lt[k])(0, 0));
        lr_v.push_back(tape.value(lr[k])(0, 0));
        ld_v.push_back(tape.value(ld[k])(0, 0));
    }
    lg.breakdown = joint_loss(lt_v, lr_v, ld_v, mc.alpha, mc.beta);
    lg.breakdown.teacher_aux = tape.value(aux)(0, 0);
    lg.objective = tape.add(total, aux);
    return lg;
}

FrozenTargets freeze_targets(RodModel& model, const Pipeline& pipe, long epoch, bool training,
                             const std::vector<ClusterState>* clusters) {
    LossGraph lg = build_loss_graph(model, pipe, epoch, training, clusters, nullptr);
    FrozenTargets f;
    f.teacher = lg.teacher_value;
    f.student_preds = lg.pred_values;
    return f;
}

MetricReport evaluate_model(RodModel& model, const std::vector<DenseMatrix>& centroids,
                            const Pipeline& pipe) {
    const RodConfig& mc = model.cfg;
    const int students = mc.depth + 1;
    MetricReport report;
    report.task = task_name(mc.task);

    Tape tape;
    BindingSet binds;
    std::vector<Var> xk;
    for (int k = 0; k < students; ++k) xk.push_back(tape.constant(pipe.props.mats[k]));
    Var h = gated_combine(tape, xk, model.gate, binds);
    Var shared = encode(tape, h, model.encoder, /*training=*/false, Rng(0), binds);
    std::vector<Var> zs;
    for (int k = 0; k < students; ++k)
        zs.push_back(student_embedding(tape, shared, model.heads[k], binds));

    if (mc.task == Task::Classify || mc.task == Task::Cluster) {
        std::vector<Var> preds;
        for (int k = 0; k < students; ++k) {
            if (mc.task == Task::Classify) {
                preds.push_back(tape.detach(classify_prediction(tape, zs[k])));
            } else {
                if (static_cast<int>(centroids.size()) != students)
                    throw std::invalid_argument("cluster evaluation needs per-student centroids");
                Var d = centroid_distances(tape, zs[k], centroids[k]);
                preds.push_back(tape.detach(cluster_prediction(tape, d)));
            }
        }
        Var teacher = teacher_ensemble(tape, preds, model.tgate, mc.task, binds);
        std::vector<int> hard = argmax_rows(tape.value(teacher));

        if (mc.task == Task::Classify) {
            if (!pipe.data.splits.val.empty())
                report.set("val_accuracy", accuracy(hard, pipe.data.labels, pipe.data.splits.val));
            if (!pipe.data.splits.test.empty())
                report.set("test_accuracy",
                           accuracy(hard, pipe.data.labels, pipe.data.splits.test));
        } else {
            std::vector<int> labeled;
            for (size_t i = 0; i < pipe.data.labels.size(); ++i)
                if (pipe.data.labels[i] >= 0) labeled.push_back(static_cast<int>(i));
            if (labeled.empty()) throw DataError("clustering evaluation needs labeled nodes");
            std::vector<int> pred_l, true_l;
            for (int i : labeled) {
                pred_l.push_back(hard[i]);
                true_l.push_back(pipe.data.labels[i]);
            }
            report.set("acc", clustering_accuracy(pred_l, true_l));
            report.set("nmi", nmi(pred_l, true_l));
            report.set("ari", ari(pred_l, true_l));
            if (!pipe.data.splits.val.empty()) {
                std::vector<int> pv, tv;
                for (int i : pipe.data.splits.val) {
                    pv.push_back(hard[i]);
                    tv.push_back(pipe.data.labels[i]);
                }
                report.set("val_acc", clustering_accuracy(pv, tv));
            }
        }
        return report;
    }

    // link task
    auto scored = [&](const std::vector<std::pair<int, int>>& pos,
                      const std::vector<std::pair<int, int>>& neg, const std::string& prefix) {
        if (pos.empty() || neg.empty()) return;
        std::vector<std::pair<int, int>> pairs = pos;
        pairs.insert(pairs.end(), neg.begin(), neg.end());
        std::vector<Var> preds;
        for (int k = 0; k < students; ++k)
            preds.push_back(tape.detach(link_prediction(tape, zs[k], pairs)));
        Var teacher = teacher_ensemble(tape, preds, model.tgate, Task::Link, binds);
        const DenseMatrix& sc = tape.value(teacher);
        std::vector<double> scores(sc.data.begin(), sc.data.end());
        std::vector<int> labels(pairs.size(), 0);
        std::fill(labels.begin(), labels.begin() + pos.size(), 1);
        report.set(prefix + "_auc", roc_auc(scores, labels));
        report.set(prefix + "_ap", average_precision(scores, labels));
    };
    scored(pipe.edge_split.val_pos, pipe.edge_split.val_neg, "val");
    scored(pipe.edge_split.test_pos, pipe.edge_split.test_neg, "test");
    return report;
}

namespace {

double selection_metric(const MetricReport& r, Task task, long epoch) {
    const char* key = task == Task::Classify ? "val_accuracy"
                      : task == Task::Link   ? "val_auc"
                                             : "val_acc";
    if (r.has(key)) return r.get(key);
    // No validation signal available: prefer the latest epoch.
    return static_cast<double>(epoch) * 1e-12;
}

}  // namespace

TrainOutput train_on(const RunConfig& cfg_in, const Dataset& ds, PropagationCache* cache) {
    Pipeline pipe = build_pipeline(cfg_in, ds, cache);
    const RodConfig& mc = pipe.cfg.model;

    if (mc.task == Task::Classify) {
        if (!pipe.data.has_labels() || pipe.data.splits.train.empty())
            throw DataError("classification needs labels and a train split");
    }
    if (mc.task == Task::Cluster && !pipe.data.has_labels())
        throw DataError("clustering needs labels for evaluation");

    RodModel model = init_params(mc, pipe.data.features.cols, mc.seed);
    AdamState adam;
    adam.lr = mc.lr;
    adam.weight_decay = mc.weight_decay;

    std::vector<ClusterState> clusters;
    TrainOutput out;

    double best_val = -std::numeric_limits<double>::infinity();
    RodModel best_model = model;
    std::vector<DenseMatrix> best_centroids;
    long best_epoch = -1;

    for (long epoch = 0; epoch < mc.epochs; ++epoch) {
        if (mc.task == Task::Cluster && epoch % mc.kmeans_period == 0) {
            std::vector<DenseMatrix> zs = compute_embeddings(model, pipe);
            clusters.clear();
            for (int k = 0; k <= mc.depth; ++k) {
                auto cs = refresh_if_due(
                    epoch, mc.kmeans_period, zs[k], mc.classes,
                    derive_seed(mc.seed, "kmeans/e" + std::to_string(epoch) + "/s" +
                                             std::to_string(k)),
                    mc.kmeans_iters, mc.kmeans_restarts);
                clusters.push_back(std::move(*cs));
            }
            align_clusters(clusters, mc.classes);
        }

        LossGraph lg = build_loss_graph(model, pipe, epoch, /*training=*/true,
                                        mc.task == Task::Cluster ? &clusters : nullptr, nullptr);
        lg.tape.backward(lg.objective);
        pipe.stats.pairs_touched_last_epoch = lg.tape.pairs_touched();

        std::vector<DenseMatrix*> params;
        std::vector<const DenseMatrix*> grads;
        for (auto& b : lg.binds.items) {
            params.push_back(b.storage);
            grads.push_back(&lg.tape.grad(b.var));
        }
        adam_step(params, grads, adam);
        out.epoch_logs.push_back({epoch, lg.breakdown});

        const bool last = epoch + 1 == mc.epochs;
        if ((epoch + 1) % pipe.cfg.eval_every == 0 || last) {
            MetricReport r = evaluate_model(model, centroids_of(clusters), pipe);
            double v = selection_metric(r, mc.task, epoch);
            if (v > best_val) {
                best_val = v;
                best_epoch = epoch;
                best_model = model;
                best_centroids = centroids_of(clusters);
            }
        }
    }

    out.best.run = pipe.cfg;
    out.best.model = std::move(best_model);
    out.best.centroids = std::move(best_centroids);
    out.report = evaluate_model(out.best.model, out.best.centroids, pipe);
    out.stats = pipe.stats;
    out.best_val = best_val;
    out.best_epoch = best_epoch;
    return out;
}

TrainOutput run_train(const RunConfig& cfg) {
    Dataset ds = resolve_dataset(cfg);
    TrainOutput out = train_on(cfg, ds);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream f(fs::path(cfg.out_dir) / "loss.csv");
        f << loss_csv(out.epoch_logs);
    }
    {
        std::ofstream f(fs::path(cfg.out_dir) / "metrics.json");
        f << out.report.to_json() << "\n";
    }
    save_checkpoint((fs::path(cfg.out_dir) / "model.ckpt").string(), out.best);
    return out;
}

MetricReport evaluate_checkpoint(Checkpoint& ckpt, const Dataset& ds) {
    Pipeline pipe = build_pipeline(ckpt.run, ds);
    if (pipe.data.features.cols != ckpt.model.feat_dim)
        throw DataError("checkpoint expects " + std::to_string(ckpt.model.feat_dim) +
                        "-dimensional features, dataset has " +
                        std::to_string(pipe.data.features.cols));
    return evaluate_model(ckpt.model, ckpt.centroids, pipe);
}

// --- baselines ---------------------------------------------------------------

namespace {

struct BaselineOut {
    std::vector<int> pred_labels;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

/// SGC: softmax regression on X_K. MLP: the shared-encoder architecture on
/// raw features with one prediction head. Same optimizer, selection and
/// determinism story as the main model.
BaselineOut train_linear_baseline(const RunConfig& cfg, const Dataset& ds, bool sgc, int depth,
                                  uint64_t seed) {
    if (!ds.has_labels() || ds.splits.train.empty())
        throw DataError("baselines need labels and a train split");
    const int q = ds.num_classes();
    const int n = ds.graph.n;
    const int d = ds.features.cols;

    DenseMatrix inputs;
    if (sgc) {
        SparseGraph a_hat = sym_normalize(add_self_loops(ds.graph));
        PropagationSet props = precompute_propagation(a_hat, ds.features, depth);
        inputs = props.mats[depth];
    } else {
        inputs = ds.features;
    }

    Rng root = Rng(seed).substream(sgc ? "baseline/sgc" : "baseline/mlp");
    auto glorot = [&](int r, int c, Rng rng) {
        double lim = std::sqrt(6.0 / (r + c));
        DenseMatrix m(r, c);
        for (auto& v : m.data) v = rng.uniform(-lim, lim);
        return m;
    };
    const int hidden = cfg.model.hidden;
    DenseMatrix w1 = sgc ? glorot(d, q, root.substream("w1")) : glorot(d, hidden, root.substream("w1"));
    DenseMatrix b1 = sgc ? DenseMatrix(1, q) : DenseMatrix(1, hidden);
    DenseMatrix w2 = sgc ? DenseMatrix() : glorot(hidden, q, root.substream("w2"));
    DenseMatrix b2 = sgc ? DenseMatrix() : DenseMatrix(1, q);

    AdamState adam;
    adam.lr = cfg.model.lr;
    adam.weight_decay = cfg.model.weight_decay;
    Reduction red = reduction_from_string(cfg.model.reduction);

    auto forward = [&](bool training, long epoch, BindingSet* binds, Tape& tape) {
        Var x = tape.constant(inputs);
        Var logits{-1};
        if (sgc) {
            Var vw = binds->bind(tape, w1), vb = binds->bind(tape, b1);
            logits = tape.add(tape.matmul(x, vw), vb);
        } else {
            Var in = x;
            if (training && cfg.model.dropout > 0.0) {
                Rng drop = Rng(seed).substream("baseline_dropout", epoch);
                in = tape.dropout(in, cfg.model.dropout, drop);
            }
            Var vw1 = binds->bind(tape, w1), vb1 = binds->bind(tape, b1);
            Var hidden_act = tape.relu(tape.add(tape.matmul(in, vw1), vb1));
            Var vw2 = binds->bind(tape, w2), vb2 = binds->bind(tape, b2);
            logits = tape.add(tape.matmul(hidden_act, vw2), vb2);
        }
        return tape.softmax_rows(logits);
    };

    double best_val = -std::numeric_limits<double>::infinity();
    std::vector<int> best_pred(n, 0);
    auto eval_pred = [&]() {
        Tape tape;
        BindingSet binds;
        return argmax_rows(tape.value(forward(false, 0, &binds, tape)));
    };

    for (long epoch = 0; epoch < cfg.model.epochs; ++epoch) {
        Tape tape;
        BindingSet binds;
        Var probs = forward(true, epoch, &binds, tape);
        Var ce = classification_ce(tape, probs, ds.labels, ds.splits.train, red);
        tape.backward(ce);
        std::vector<DenseMatrix*> params;
        std::vector<const DenseMatrix*> grads;
        for (auto& b : binds.items) {
            params.push_back(b.storage);
            grads.push_back(&tape.grad(b.var));
        }
        adam_step(params, grads, adam);

        const bool last = epoch + 1 == cfg.model.epochs;
        if ((epoch + 1) % cfg.eval_every == 0 || last) {
            std::vector<int> pred = eval_pred();
            double v = ds.splits.val.empty() ? static_cast<double>(epoch) * 1e-12
                                             : accuracy(pred, ds.labels, ds.splits.val);
            if (v > best_val) {
                best_val = v;
                best_pred = std::move(pred);
            }
        }
    }

    BaselineOut out;
    out.pred_labels = best_pred;
    if (!ds.splits.val.empty()) out.val_acc = accuracy(best_pred, ds.labels, ds.splits.val);
    if (!ds.splits.test.empty()) out.test_acc = accuracy(best_pred, ds.labels, ds.splits.test);
    return out;
}

}  // namespace

MetricReport run_baseline(const std::string& kind, const RunConfig& cfg, const Dataset& ds) {
    if (cfg.model.task != Task::Classify)
        throw ConfigError("baselines support the classify task only");
    if (kind != "sgc" && kind != "mlp")
        throw ConfigError("unknown baseline '" + kind + "' (expected sgc or mlp)");
    BaselineOut out =
        train_linear_baseline(cfg, ds, kind == "sgc", cfg.model.depth, cfg.model.seed);
    MetricReport r;
    r.task = kind;
    if (!ds.splits.val.empty()) r.set("val_accuracy", out.val_acc);
    if (!ds.splits.test.empty()) r.set("test_accuracy", out.test_acc);
    return r;
}

std::vector<DepthCell> analyze_depth(const RunConfig& cfg, const std::vector<int>& k_range,
                                     const std::vector<uint64_t>& seeds, const Dataset& ds) {
    if (cfg.model.task != Task::Classify)
        throw ConfigError("analyze-depth runs on the classify task");
    if (!ds.has_labels() || ds.splits.test.empty())
        throw DataError("analyze-depth needs labels and a test split");

    std::map<std::pair<int, int>, std::pair<long, long>> agg;  // (degree, K) -> (correct, total)
    for (int k : k_range) {
        for (uint64_t seed : seeds) {
            BaselineOut out = train_linear_baseline(cfg, ds, /*sgc=*/true, k, seed);
            for (int node : ds.splits.test) {
                int deg = ds.graph.neighbor_count(node);
                auto& cell = agg[{deg, k}];
                if (out.pred_labels[node] == ds.labels[node]) ++cell.first;
                ++cell.second;
            }
        }
    }
    std::vector<DepthCell> cells;
    for (const auto& [key, val] : agg)
        cells.push_back({key.first, key.second,
                         static_cast<double>(val.first) / static_cast<double>(val.second),
                         val.second});
    return cells;
}

std::vector<SweepRow> sweep(const std::string& study, const RunConfig& base,
                            const std::vector<double>& grid,
                            const std::vector<uint64_t>& seeds,
                            const std::vector<std::string>& methods, RunStats* stats_out) {
    if (study != "edge_sparsity" && study != "label_sparsity" && study != "depth")
        throw ConfigError("unknown sweep study '" + study + "'");
    Dataset ds = resolve_dataset(base);
    RunStats total_stats;

    PropagationCache cache;
    PropagationCache* cache_ptr = nullptr;
    if (study == "depth") {
        // Prime the cache at the largest depth so every run slices a prefix.
        int k_max = 1;
        for (double g : grid) k_max = std::max(k_max, static_cast<int>(g));
        RunConfig prime = base;
        prime.model.depth = k_max;
        build_pipeline(prime, ds, &cache);
        cache_ptr = &cache;
    }

    std::vector<SweepRow> rows;
    for (double g : grid) {
        for (uint64_t seed : seeds) {
            Dataset ds_run = ds;
            RunConfig cfg = base;
            cfg.model.seed = seed;
            if (study == "edge_sparsity") {
                ds_run = drop_edges(ds, 1.0 - g, seed);
            } else if (study == "label_sparsity") {
                ds_run = subsample_train(ds, static_cast<int>(g), seed);
            } else {
                cfg.model.depth = static_cast<int>(g);
            }
            for (const std::string& method : methods) {
                SweepRow row;
                row.study = study;
                row.grid_value = g;
                row.seed = seed;
                row.method = method;
                if (method == "rod") {
                    TrainOutput out =
                        train_on(cfg, ds_run, study == "depth" ? cache_ptr : nullptr);
                    row.report = out.report;
                    total_stats.propagation_cache_hits += out.stats.propagation_cache_hits;
                } else {
                    row.report = run_baseline(method, cfg, ds_run);
                }
                rows.push_back(std::move(row));
            }
        }
    }
    if (stats_out) *stats_out = total_stats;
    return rows;
}

// --- text outputs --------------------------------------------------------------

namespace {
std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
}  // namespace

std::string loss_csv(const std::vector<EpochLog>& logs) {
    std::ostringstream os;
    if (logs.empty()) return "";
    const size_t students = logs.front().losses.task.size();
    os << "epoch";
    for (size_t k = 0; k < students; ++k) os << ",lt_" << k;
    for (size_t k = 0; k < students; ++k) os << ",lr_" << k;
    for (size_t k = 0; k < students; ++k) os << ",ld_" << k;
    os << ",total,teacher_aux\n";
    for (const auto& log : logs) {
        os << log.epoch;
        for (double v : log.losses.task) os << "," << fmt(v);
        for (double v : log.losses.reception) os << "," << fmt(v);
        for (double v : log.losses.distill) os << "," << fmt(v);
        os << "," << fmt(log.losses.total) << "," << fmt(log.losses.teacher_aux) << "\n";
    }
    return os.str();
}

std::string depth_csv(const std::vector<DepthCell>& cells) {
    std::ostringstream os;
    os << "degree,depth,correct_fraction,count\n";
    for (const auto& c : cells)
        os << c.degree << "," << c.depth << "," << fmt(c.correct_fraction) << "," << c.count
           << "\n";
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    if (rows.empty()) return "";
    os << "study,grid_value,seed,method";
    for (const auto& [name, v] : rows.front().report.values) os << "," << name;
    os << "\n";
    for (const auto& row : rows) {
        os << row.study << "," << fmt(row.grid_value) << "," << row.seed << "," << row.method;
        for (const auto& [name, v] : row.report.values) os << "," << fmt(v);
        os << "\n";
    }
    return os.str();
}

}  // namespace rod
