#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rod/checkpoint.hpp"
#include "rod/clustering.hpp"
#include "rod/config.hpp"
#include "rod/dataio.hpp"
#include "rod/metrics.hpp"
#include "rod/model.hpp"
#include "rod/objectives.hpp"

namespace rod {

/// Counters proving the preprocessing contract: propagation, similarity and
/// sampling each run once per training run, and sampled-loss epochs touch
/// only the selected pairs.
struct RunStats {
    int propagation_builds = 0;
    int similarity_builds = 0;
    int sampling_builds = 0;
    int propagation_cache_hits = 0;
    long long sampled_pos_pairs = 0;
    long long sampled_neg_pairs = 0;
    long long pairs_touched_last_epoch = 0;
};

/// Shared propagated-feature/similarity cache for depth sweeps: build once
/// at the largest depth, slice prefixes for smaller depths.
struct PropagationCache {
    int depth_built = -1;
    PropagationSet props;
    std::vector<SimilarityMatrix> hop_sims;
    int hits = 0;
    int misses = 0;
};

/// Everything precomputed once per run; immutable during the epoch loop.
struct Pipeline {
    RunConfig cfg;  // resolved: classes filled in, budgets concrete
    Dataset data;
    SparseGraph task_graph;  // training graph (link: held-out edges removed)
    EdgeSplit edge_split;    // link task only
    PropagationSet props;
    std::vector<SimilarityMatrix> hop_sims;  // S_k, k = 0..K
    SimilarityMatrix ensemble_sim;           // S
    bool sampled_reception = false;          // reception loss restricted to pairs
    bool has_sampled = false;
    SampledAdjacency sampled;
    LinkWeights link_weights;                     // link task
    std::vector<DenseMatrix> hop_sim_pairs;       // S_k at sampled pairs (m x 1 each)
    std::vector<std::pair<int, int>> all_pairs;   // pos ++ neg
    int num_pos_pairs = 0;
    RunStats stats;
};

Dataset resolve_dataset(const RunConfig& cfg);
Pipeline build_pipeline(const RunConfig& cfg, const Dataset& ds,
                        PropagationCache* cache = nullptr);

/// Teacher targets captured at a fixed parameter point, for training-step
/// gradient checks: the KL target and the student predictions feeding the
/// teacher gate stay constant while parameters move.
struct FrozenTargets {
    DenseMatrix teacher;
    std::vector<DenseMatrix> student_preds;
};

/// One recorded training objective: forward graph, bound parameters and the
/// scalar being optimized (joint loss plus the teacher-gate auxiliary term).
struct LossGraph {
    Tape tape;
    BindingSet binds;
    Var objective;
    LossBreakdown breakdown;
    std::vector<DenseMatrix> embeddings;   // Z_k values
    std::vector<DenseMatrix> pred_values;  // P^(k) values
    DenseMatrix teacher_value;
};

LossGraph build_loss_graph(RodModel& model, const Pipeline& pipe, long epoch, bool training,
                           const std::vector<ClusterState>* clusters,
                           const FrozenTargets* frozen = nullptr);

/// Captures frozen teacher targets at the current parameters.
FrozenTargets freeze_targets(RodModel& model, const Pipeline& pipe, long epoch, bool training,
                             const std::vector<ClusterState>* clusters);

/// Eval-mode student embeddings (for K-Means refreshes).
std::vector<DenseMatrix> compute_embeddings(RodModel& model, const Pipeline& pipe);

/// Deterministic evaluation of a trained model on the pipeline's dataset.
MetricReport evaluate_model(RodModel& model, const std::vector<DenseMatrix>& centroids,
                            const Pipeline& pipe);

struct EpochLog {
    long epoch = 0;
    LossBreakdown losses;
};

struct TrainOutput {
    Checkpoint best;
    MetricReport report;
    std::vector<EpochLog> epoch_logs;
    RunStats stats;
    double best_val = 0.0;
    long best_epoch = -1;
};

TrainOutput train_on(const RunConfig& cfg, const Dataset& ds, PropagationCache* cache = nullptr);

/// Full train command: resolve data, train, write loss.csv / metrics.json /
/// model.ckpt under cfg.out_dir.
TrainOutput run_train(const RunConfig& cfg);

MetricReport evaluate_checkpoint(Checkpoint& ckpt, const Dataset& ds);

/// SGC (softmax regression on X_K) or MLP (encoder-shaped net on raw
/// features); classification only.
MetricReport run_baseline(const std::string& kind, const RunConfig& cfg, const Dataset& ds);

/// Per-(degree, depth) test correctness of SGC, aggregated across seeds.
struct DepthCell {
    int degree = 0;
    int depth = 0;
    double correct_fraction = 0.0;
    long count = 0;
};
std::vector<DepthCell> analyze_depth(const RunConfig& cfg, const std::vector<int>& k_range,
                                     const std::vector<uint64_t>& seeds, const Dataset& ds);

/// Grid studies: edge_sparsity (grid = kept-edge fraction), label_sparsity
/// (grid = labels per class), depth (grid = K). One row per grid point,
/// seed and method.
struct SweepRow {
    std::string study;
    double grid_value = 0.0;
    uint64_t seed = 0;
    std::string method;
    MetricReport report;
};
std::vector<SweepRow> sweep(const std::string& study, const RunConfig& base,
                            const std::vector<double>& grid,
                            const std::vector<uint64_t>& seeds,
                            const std::vector<std::string>& methods,
                            RunStats* stats_out = nullptr);

// --- text outputs ----------------------------------------------------------
std::string loss_csv(const std::vector<EpochLog>& logs);
std::string depth_csv(const std::vector<DepthCell>& cells);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace rod
