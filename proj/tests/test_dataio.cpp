#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "rod/dataio.hpp"
#include "test_util.hpp"

using namespace rod;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("rod_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

}  // namespace

TEST_CASE("load_dataset: two-node fixture") {
    TempDir dir;
    write_file(dir.path / "features.txt", "2 2\n1.0 0.0\n0.0 1.0\n");
    write_file(dir.path / "edges.txt", "# comment line\n0 1 1.0\n");
    write_file(dir.path / "labels.txt", "0 0\n1 1\n");
    write_file(dir.path / "splits.txt", "0 train\n1 test\n");
    Dataset ds = load_dataset(dir.path.string());
    CHECK(ds.graph.n == 2);
    CHECK(ds.graph.degree(0) == 1.0);
    CHECK(ds.graph.degree(1) == 1.0);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.splits.train == std::vector<int>{0});
    CHECK(ds.splits.test == std::vector<int>{1});
}

TEST_CASE("load_dataset: header/row mismatch names line 4") {
    TempDir dir;
    write_file(dir.path / "features.txt", "3 2\n1 0\n0 1\n");
    write_file(dir.path / "edges.txt", "");
    try {
        load_dataset(dir.path.string());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":4") != std::string::npos);
    }
}

TEST_CASE("load_dataset: malformed lines carry their numbers") {
    TempDir dir;
    write_file(dir.path / "features.txt", "2 1\n1\n2\n");
    write_file(dir.path / "edges.txt", "0 1 1.0\n0 xyz\n");
    try {
        load_dataset(dir.path.string());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("edges.txt:2") != std::string::npos);
    }
    write_file(dir.path / "edges.txt", "0 5 1.0\n");
    CHECK_THROWS_AS(load_dataset(dir.path.string()), DataError);  // out of range
    write_file(dir.path / "edges.txt", "0 1 1.0\n");
    write_file(dir.path / "splits.txt", "0 validation\n");
    CHECK_THROWS_AS(load_dataset(dir.path.string()), DataError);  // unknown split kind
}

TEST_CASE("load_dataset: split members must be labeled") {
    TempDir dir;
    write_file(dir.path / "features.txt", "2 1\n1\n2\n");
    write_file(dir.path / "edges.txt", "0 1\n");
    write_file(dir.path / "labels.txt", "0 0\n");
    write_file(dir.path / "splits.txt", "1 train\n");
    CHECK_THROWS_AS(load_dataset(dir.path.string()), DataError);
}

TEST_CASE("save/load round trip") {
    Rng rng(3);
    SbmParams p;
    p.block_sizes = {10, 10};
    p.p_in = 0.4;
    p.p_out = 0.05;
    p.feature_dim = 3;
    p.labels_per_class = 2;
    p.val_count = 4;
    p.test_count = 6;
    Dataset ds = generate_sbm(p, 42);
    TempDir dir;
    save_dataset(dir.path.string(), ds);
    Dataset back = load_dataset(dir.path.string());
    CHECK(back.graph.n == ds.graph.n);
    CHECK(back.graph.col_idx == ds.graph.col_idx);
    CHECK(back.graph.values == ds.graph.values);
    CHECK(back.features.data == ds.features.data);  // exact (printed at %.17g)
    CHECK(back.labels == ds.labels);
    CHECK(back.splits.train == ds.splits.train);
    CHECK(back.splits.val == ds.splits.val);
    CHECK(back.splits.test == ds.splits.test);
}

TEST_CASE("split_edges") {
    Rng rng(5);
    // build a 100-edge graph
    std::vector<WeightedEdge> edges;
    int n = 30;
    for (int i = 0; i < n && int(edges.size()) < 100; ++i)
        for (int j = i + 1; j < n && int(edges.size()) < 100; ++j)
            if ((i + j) % 3 != 0) edges.push_back({i, j, 1.0});
    REQUIRE(edges.size() == 100);
    SparseGraph g = build_csr(edges, n);

    EdgeSplit es = split_edges(g, 0.05, 0.10, 7);
    CHECK(es.val_pos.size() == 5);
    CHECK(es.test_pos.size() == 10);
    CHECK(es.train_edges.size() == 85);
    CHECK(es.val_neg.size() == 5);
    CHECK(es.test_neg.size() == 10);

    SUBCASE("determinism") {
        EdgeSplit es2 = split_edges(g, 0.05, 0.10, 7);
        CHECK(es2.val_pos == es.val_pos);
        CHECK(es2.test_neg == es.test_neg);
        EdgeSplit es3 = split_edges(g, 0.05, 0.10, 8);
        CHECK(es3.val_pos != es.val_pos);
    }
    SUBCASE("negatives are non-edges and all sets are disjoint") {
        std::set<std::pair<int, int>> seen;
        auto check_set = [&](const std::vector<std::pair<int, int>>& pairs, bool must_be_edge) {
            for (auto [u, v] : pairs) {
                CHECK(u < v);
                CHECK(g.has_edge(u, v) == must_be_edge);
                CHECK(seen.insert({u, v}).second);
            }
        };
        check_set(es.val_pos, true);
        check_set(es.test_pos, true);
        check_set(es.val_neg, false);
        check_set(es.test_neg, false);
        for (const auto& e : es.train_edges) CHECK(seen.insert(std::minmax(e.u, e.v)).second);
        // positives + train cover E exactly
        CHECK(es.val_pos.size() + es.test_pos.size() + es.train_edges.size() ==
              size_t(g.num_edges()));
    }
    SUBCASE("fraction validation") {
        CHECK_THROWS_AS(split_edges(g, 0.6, 0.5, 1), DataError);
    }
}

TEST_CASE("generate_sbm corners") {
    SUBCASE("p_in=1, p_out=0 gives two disjoint cliques") {
        SbmParams p;
        p.block_sizes = {3, 3};
        p.p_in = 1.0;
        p.p_out = 0.0;
        p.feature_dim = 2;
        p.labels_per_class = 1;
        p.val_count = 1;
        p.test_count = 1;
        Dataset ds = generate_sbm(p, 1);
        CHECK(ds.graph.num_edges() == 6);  // 2 * C(3,2)
        for (int i = 0; i < 3; ++i)
            for (int j = 3; j < 6; ++j) CHECK_FALSE(ds.graph.has_edge(i, j));
    }
    SUBCASE("zero probabilities give an empty edge set") {
        SbmParams p;
        p.block_sizes = {4, 4};
        p.p_in = 0.0;
        p.p_out = 0.0;
        p.feature_dim = 2;
        p.labels_per_class = 1;
        p.val_count = 2;
        p.test_count = 2;
        CHECK(generate_sbm(p, 9).graph.num_edges() == 0);
    }
    SUBCASE("sigma=0 makes same-block rows identical") {
        SbmParams p;
        p.block_sizes = {3, 2};
        p.noise = 0.0;
        p.feature_dim = 4;
        p.labels_per_class = 1;
        p.val_count = 1;
        p.test_count = 1;
        Dataset ds = generate_sbm(p, 3);
        for (int i = 1; i < 3; ++i)
            for (int j = 0; j < 4; ++j) CHECK(ds.features(i, j) == ds.features(0, j));
        CHECK(ds.features(0, 0) == p.feature_shift);
        CHECK(ds.features(3, 1) == p.feature_shift);
    }
    SUBCASE("parameter validation") {
        SbmParams p;
        p.p_in = 1.5;
        CHECK_THROWS_AS(generate_sbm(p, 0), DataError);
        p = SbmParams{};
        p.block_sizes = {4, 4, 4};
        p.feature_dim = 2;  // fewer dims than blocks
        CHECK_THROWS_AS(generate_sbm(p, 0), DataError);
    }
}

TEST_CASE("sbm edge counts concentrate inside 4-sigma binomial bounds") {
    SbmParams p;  // 200 nodes, defaults p_in=0.05, p_out=0.005
    const double mean_within = 2 * (100.0 * 99.0 / 2.0) * p.p_in;
    const double mean_cross = 100.0 * 100.0 * p.p_out;
    const double mean = mean_within + mean_cross;
    const double var = 2 * (100.0 * 99.0 / 2.0) * p.p_in * (1 - p.p_in) +
                       100.0 * 100.0 * p.p_out * (1 - p.p_out);
    const double bound = 4.0 * std::sqrt(var);
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Dataset ds = generate_sbm(p, seed);
        CHECK(std::fabs(double(ds.graph.num_edges()) - mean) < bound);
    }
}

TEST_CASE("drop_edges") {
    Rng rng(6);
    SparseGraph g = rodtest::random_graph(40, 0.3, rng);
    Dataset ds;
    ds.graph = g;
    ds.features = DenseMatrix(40, 2);
    long long m = g.num_edges();
    Dataset kept = drop_edges(ds, 0.0, 1);
    CHECK(kept.graph.num_edges() == m);
    CHECK(kept.graph.col_idx == g.col_idx);
    Dataset dropped = drop_edges(ds, 0.6, 1);
    CHECK(dropped.graph.num_edges() == m - std::llround(0.6 * double(m)));
    Dataset none = drop_edges(ds, 1.0, 1);
    CHECK(none.graph.num_edges() == 0);
    // determinism
    CHECK(drop_edges(ds, 0.6, 1).graph.col_idx == dropped.graph.col_idx);
}

TEST_CASE("subsample_train keeps at most the budget per class") {
    SbmParams p;
    p.block_sizes = {20, 20};
    p.feature_dim = 2;
    p.labels_per_class = 8;
    p.val_count = 5;
    p.test_count = 5;
    Dataset ds = generate_sbm(p, 11);
    Dataset small = subsample_train(ds, 3, 2);
    std::vector<int> per_class(2, 0);
    for (int i : small.splits.train) ++per_class[ds.labels[i]];
    CHECK(per_class[0] == 3);
    CHECK(per_class[1] == 3);
    // subset of the original train split
    std::set<int> orig(ds.splits.train.begin(), ds.splits.train.end());
    for (int i : small.splits.train) CHECK(orig.count(i) == 1);
}
