#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "rod/optimizer.hpp"
#include "rod/trainer.hpp"
#include "test_util.hpp"

using namespace rod;
namespace fs = std::filesystem;

namespace {

/// Two triangles bridged by one edge; class = triangle.
Dataset toy_dataset() {
    Dataset ds;
    std::vector<WeightedEdge> edges = {{0, 1, 1}, {0, 2, 1}, {1, 2, 1},
                                       {3, 4, 1}, {3, 5, 1}, {4, 5, 1}, {2, 3, 1}};
    ds.graph = build_csr(edges, 6);
    ds.features = DenseMatrix(6, 4);
    Rng rng(202);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j)
            ds.features(i, j) = (j == (i < 3 ? 0 : 1) ? 1.0 : 0.0) + 0.3 * rng.normal();
    ds.labels = {0, 0, 0, 1, 1, 1};
    ds.splits.train = {0, 3};
    ds.splits.val = {1, 4};
    ds.splits.test = {2, 5};
    return ds;
}

RunConfig toy_config(Task task) {
    RunConfig cfg;
    cfg.model.task = task;
    cfg.model.depth = 2;
    cfg.model.hidden = 8;
    cfg.model.embed = 3;
    cfg.model.classes = 2;
    cfg.model.alpha = 0.1;
    cfg.model.beta = 0.1;
    cfg.model.dropout = 0.0;
    cfg.model.lr = 0.05;
    cfg.model.epochs = 20;
    cfg.model.seed = 0;
    cfg.model.kmeans_period = 5;
    cfg.model.kmeans_restarts = 3;
    cfg.eval_every = 5;
    cfg.val_frac = 0.2;  // the toy graph has only 7 edges
    cfg.test_frac = 0.2;
    return cfg;
}

SbmParams test_sbm() {
    SbmParams p;
    p.block_sizes = {40, 40};
    p.p_in = 0.15;
    p.p_out = 0.01;
    p.feature_dim = 8;
    p.feature_shift = 1.0;
    p.noise = 0.5;
    p.labels_per_class = 5;
    p.val_count = 20;
    p.test_count = 40;
    return p;
}

RunConfig sbm_config() {
    RunConfig cfg;
    cfg.model.task = Task::Classify;
    cfg.model.depth = 2;
    cfg.model.hidden = 16;
    cfg.model.classes = 2;
    cfg.model.lr = 0.05;
    cfg.model.dropout = 0.2;
    cfg.model.epochs = 60;
    cfg.eval_every = 10;
    return cfg;
}

}  // namespace

TEST_CASE("pipeline counters: preprocessing happens exactly once") {
    Dataset ds = toy_dataset();
    RunConfig cfg = toy_config(Task::Classify);
    TrainOutput out = train_on(cfg, ds);
    CHECK(out.stats.propagation_builds == 1);
    CHECK(out.stats.similarity_builds == 1);
    CHECK(out.stats.sampling_builds == 0);  // full reception mode, no link task
    CHECK(out.stats.pairs_touched_last_epoch == 0);

    RunConfig link_cfg = toy_config(Task::Link);
    TrainOutput link_out = train_on(link_cfg, ds);
    CHECK(link_out.stats.sampling_builds == 1);
}

TEST_CASE("training lowers the loss on the toy instance") {
    Dataset ds = toy_dataset();
    RunConfig cfg = toy_config(Task::Classify);
    cfg.model.epochs = 50;
    cfg.model.lr = 0.02;
    TrainOutput out = train_on(cfg, ds);
    REQUIRE(out.epoch_logs.size() == 50);
    CHECK(out.epoch_logs.back().losses.total < out.epoch_logs.front().losses.total);
}

TEST_CASE("one optimizer step reduces the joint loss for every task") {
    Dataset ds = toy_dataset();
    for (Task task : {Task::Classify, Task::Link, Task::Cluster}) {
        int improved = 0;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            RunConfig cfg = toy_config(task);
            cfg.model.lr = 1e-3;
            cfg.model.seed = seed;
            Pipeline pipe = build_pipeline(cfg, ds);
            RodModel model = init_params(pipe.cfg.model, ds.features.cols, seed);
            std::vector<ClusterState> clusters;
            if (task == Task::Cluster) {
                std::vector<DenseMatrix> zs = compute_embeddings(model, pipe);
                for (int k = 0; k <= cfg.model.depth; ++k)
                    clusters.push_back(kmeans(zs[k], 2, seed + k));
            }
            auto* cl = task == Task::Cluster ? &clusters : nullptr;
            LossGraph before = build_loss_graph(model, pipe, 0, true, cl);
            before.tape.backward(before.objective);
            AdamState adam;
            adam.lr = 1e-3;
            std::vector<DenseMatrix*> params;
            std::vector<const DenseMatrix*> grads;
            for (auto& b : before.binds.items) {
                params.push_back(b.storage);
                grads.push_back(&before.tape.grad(b.var));
            }
            adam_step(params, grads, adam);
            LossGraph after = build_loss_graph(model, pipe, 0, true, cl);
            if (after.breakdown.total < before.breakdown.total) ++improved;
        }
        INFO("task " << task_name(task));
        CHECK(improved == 10);
    }
}

TEST_CASE("same seed, same logs, byte for byte") {
    RunConfig cfg = sbm_config();
    cfg.use_sbm = true;
    cfg.sbm = test_sbm();
    cfg.model.epochs = 15;
    cfg.model.seed = 3;
    Dataset ds = resolve_dataset(cfg);
    TrainOutput a = train_on(cfg, ds);
    TrainOutput b = train_on(cfg, ds);
    CHECK(loss_csv(a.epoch_logs) == loss_csv(b.epoch_logs));
    CHECK(a.report.to_json() == b.report.to_json());

    cfg.model.seed = 4;
    TrainOutput c = train_on(cfg, resolve_dataset(cfg));
    CHECK(loss_csv(a.epoch_logs) != loss_csv(c.epoch_logs));
}

TEST_CASE("checkpoint round trip evaluates bit-identically") {
    Dataset ds = toy_dataset();
    for (Task task : {Task::Classify, Task::Link, Task::Cluster}) {
        RunConfig cfg = toy_config(task);
        TrainOutput out = train_on(cfg, ds);
        Pipeline pipe = build_pipeline(out.best.run, ds);
        MetricReport in_memory = evaluate_model(out.best.model, out.best.centroids, pipe);

        fs::path path = fs::temp_directory_path() /
                        ("rod_ckpt_" + std::string(task_name(task)) + ".bin");
        save_checkpoint(path.string(), out.best);
        Checkpoint back = load_checkpoint(path.string());
        MetricReport reloaded = evaluate_checkpoint(back, ds);
        fs::remove(path);

        CHECK(in_memory.to_json() == reloaded.to_json());
        CHECK(in_memory.to_json() == out.report.to_json());
    }
}

TEST_CASE("metrics are invariant under node permutation") {
    RunConfig cfg = sbm_config();
    cfg.use_sbm = true;
    cfg.sbm = test_sbm();
    cfg.model.epochs = 20;
    Dataset ds = resolve_dataset(cfg);
    TrainOutput out = train_on(cfg, ds);

    // permuted copy: node i of the original becomes perm[i]
    const int n = ds.graph.n;
    Rng rng(999);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    Dataset pd;
    std::vector<WeightedEdge> edges;
    for (const auto& e : ds.graph.undirected_edges())
        edges.push_back({perm[e.u], perm[e.v], e.w});
    pd.graph = build_csr(edges, n);
    pd.features = DenseMatrix(n, ds.features.cols);
    pd.labels.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ds.features.cols; ++j) pd.features(perm[i], j) = ds.features(i, j);
        pd.labels[perm[i]] = ds.labels[i];
    }
    for (int i : ds.splits.train) pd.splits.train.push_back(perm[i]);
    for (int i : ds.splits.val) pd.splits.val.push_back(perm[i]);
    for (int i : ds.splits.test) pd.splits.test.push_back(perm[i]);

    Pipeline permuted_pipe = build_pipeline(out.best.run, pd);
    MetricReport permuted = evaluate_model(out.best.model, out.best.centroids, permuted_pipe);
    CHECK(permuted.get("val_accuracy") == out.report.get("val_accuracy"));
    CHECK(permuted.get("test_accuracy") == out.report.get("test_accuracy"));
}

TEST_CASE("sampled reception touches exactly the sampled pairs each epoch") {
    RunConfig cfg = sbm_config();
    cfg.use_sbm = true;
    cfg.sbm = test_sbm();
    cfg.model.epochs = 3;
    cfg.reception_mode = "sampled";
    Dataset ds = resolve_dataset(cfg);
    TrainOutput out = train_on(cfg, ds);
    const long long pairs = out.stats.sampled_pos_pairs + out.stats.sampled_neg_pairs;
    const long long students = cfg.model.depth + 1;
    CHECK(pairs > 0);
    CHECK(out.stats.pairs_touched_last_epoch == students * pairs);
}

TEST_CASE("sweep shapes and the identity grid point") {
    RunConfig cfg = sbm_config();
    cfg.use_sbm = true;
    cfg.sbm = test_sbm();
    cfg.model.epochs = 15;
    auto rows = sweep("edge_sparsity", cfg, {1.0, 0.6}, {0, 1}, {"rod", "sgc"});
    CHECK(rows.size() == 8);  // 2 grid x 2 seeds x 2 methods

    // keep-all grid point reproduces a plain train run
    RunConfig plain = cfg;
    plain.model.seed = 0;
    Dataset ds = resolve_dataset(plain);
    TrainOutput direct = train_on(plain, ds);
    for (const auto& row : rows)
        if (row.grid_value == 1.0 && row.seed == 0 && row.method == "rod")
            CHECK(row.report.to_json() == direct.report.to_json());

    CHECK_THROWS_AS(sweep("bogus", cfg, {1.0}, {0}, {"rod"}), ConfigError);
}

TEST_CASE("depth sweep reuses the cached propagation") {
    RunConfig cfg = sbm_config();
    cfg.use_sbm = true;
    cfg.sbm = test_sbm();
    cfg.model.epochs = 8;
    RunStats stats;
    auto rows = sweep("depth", cfg, {1, 2, 3}, {0, 1}, {"rod"}, &stats);
    CHECK(rows.size() == 6);
    CHECK(stats.propagation_cache_hits == 6);  // every run sliced the primed cache
}

TEST_CASE("analyze_depth emits one row per (degree, depth)") {
    RunConfig cfg = sbm_config();
    cfg.use_sbm = true;
    cfg.sbm = test_sbm();
    cfg.model.epochs = 10;
    Dataset ds = resolve_dataset(cfg);
    auto cells = analyze_depth(cfg, {1, 2}, {0, 1}, ds);
    std::set<int> degrees;
    for (int node : ds.splits.test) degrees.insert(ds.graph.neighbor_count(node));
    CHECK(cells.size() == degrees.size() * 2);
    for (const auto& c : cells) {
        CHECK(c.correct_fraction >= 0.0);
        CHECK(c.correct_fraction <= 1.0);
        CHECK(degrees.count(c.degree) == 1);
    }
}

TEST_CASE("baselines") {
    SUBCASE("separable two-clique data is solved by both") {
        SbmParams p;
        p.block_sizes = {12, 12};
        p.p_in = 1.0;
        p.p_out = 0.0;
        p.feature_dim = 4;
        p.noise = 0.0;  // noiseless, separable
        p.labels_per_class = 2;
        p.val_count = 4;
        p.test_count = 10;
        Dataset ds = generate_sbm(p, 5);
        RunConfig cfg = sbm_config();
        cfg.model.epochs = 80;
        cfg.model.dropout = 0.0;
        CHECK(run_baseline("sgc", cfg, ds).get("test_accuracy") == doctest::Approx(1.0));
        CHECK(run_baseline("mlp", cfg, ds).get("test_accuracy") == doctest::Approx(1.0));
        // SGC with zero propagation steps is softmax regression on raw
        // features, which also separates this data
        RunConfig flat = cfg;
        flat.model.depth = 0;
        CHECK(run_baseline("sgc", flat, ds).get("test_accuracy") == doctest::Approx(1.0));
    }
    SUBCASE("structureless graph: SGC and MLP agree within noise") {
        // With p_in = p_out the edges carry no class signal. At depth 0 the
        // structural ablation is exact (SGC reduces to feature-only
        // regression); at depth >= 1 propagation over a structureless graph
        // actively injects neighbor-mixing noise into low-degree nodes, the
        // very failure mode the depth analysis surfaces.
        SbmParams p = test_sbm();
        p.block_sizes = {60, 60};
        p.p_in = 0.04;
        p.p_out = 0.04;
        p.noise = 0.05;
        p.labels_per_class = 20;
        double sgc_mean = 0.0, mlp_mean = 0.0;
        RunConfig cfg = sbm_config();
        cfg.model.epochs = 60;
        cfg.model.dropout = 0.0;
        cfg.model.depth = 0;
        for (uint64_t seed = 0; seed < 5; ++seed) {
            cfg.model.seed = seed;
            Dataset ds = generate_sbm(p, seed);
            sgc_mean += run_baseline("sgc", cfg, ds).get("test_accuracy") / 5.0;
            mlp_mean += run_baseline("mlp", cfg, ds).get("test_accuracy") / 5.0;
        }
        CHECK(std::fabs(sgc_mean - mlp_mean) < 0.03);
    }
    SUBCASE("task and kind validation") {
        RunConfig cfg = toy_config(Task::Link);
        CHECK_THROWS_AS(run_baseline("sgc", cfg, toy_dataset()), ConfigError);
        RunConfig c2 = toy_config(Task::Classify);
        CHECK_THROWS_AS(run_baseline("gat", c2, toy_dataset()), ConfigError);
    }
}

TEST_CASE("link and cluster tasks train end to end") {
    SUBCASE("link") {
        RunConfig cfg = sbm_config();
        cfg.model.task = Task::Link;
        cfg.model.hidden = 16;
        cfg.model.embed = 8;
        cfg.model.lr = 0.01;
        cfg.model.epochs = 30;
        cfg.use_sbm = true;
        cfg.sbm = test_sbm();
        cfg.val_frac = 0.1;
        cfg.test_frac = 0.15;
        Dataset ds = resolve_dataset(cfg);
        TrainOutput out = train_on(cfg, ds);
        CHECK(out.report.get("test_auc") > 0.6);
        CHECK(out.report.get("test_ap") > 0.6);
        CHECK(out.report.get("val_auc") <= 1.0);
    }
    SUBCASE("cluster") {
        RunConfig cfg = sbm_config();
        cfg.model.task = Task::Cluster;
        cfg.model.embed = 4;
        cfg.model.lr = 0.02;
        cfg.model.epochs = 25;
        cfg.model.kmeans_period = 5;
        cfg.use_sbm = true;
        cfg.sbm = test_sbm();
        cfg.sbm.noise = 0.3;
        Dataset ds = resolve_dataset(cfg);
        TrainOutput out = train_on(cfg, ds);
        CHECK(out.report.get("acc") > 0.6);
        CHECK(out.report.get("nmi") >= 0.0);
        CHECK(out.report.get("ari") >= -0.5);
    }
}

TEST_CASE("run_train writes the three artifacts") {
    RunConfig cfg = toy_config(Task::Classify);
    cfg.use_sbm = false;
    fs::path dir = fs::temp_directory_path() / "rod_run_train_test";
    fs::remove_all(dir);
    cfg.out_dir = dir.string();
    Dataset ds = toy_dataset();
    fs::path data_dir = fs::temp_directory_path() / "rod_run_train_data";
    fs::remove_all(data_dir);
    save_dataset(data_dir.string(), ds);
    cfg.data_dir = data_dir.string();
    TrainOutput out = run_train(cfg);
    CHECK(fs::exists(dir / "loss.csv"));
    CHECK(fs::exists(dir / "metrics.json"));
    CHECK(fs::exists(dir / "model.ckpt"));
    CHECK(out.epoch_logs.size() == size_t(cfg.model.epochs));
    fs::remove_all(dir);
    fs::remove_all(data_dir);
}
