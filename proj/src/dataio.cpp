#include "rod/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "rod/rng.hpp"

namespace fs = std::filesystem;

namespace rod {

int Dataset::num_classes() const {
    int q = 0;
    for (int l : labels) q = std::max(q, l + 1);
    return q;
}

namespace {

/// Strips comments and trailing CR; returns false for blank lines.
bool meaningful_line(std::string& line) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
        line.pop_back();
    return !line.empty();
}

[[noreturn]] void fail(const std::string& file, int lineno, const std::string& msg) {
    throw DataError(file + ":" + std::to_string(lineno) + ": " + msg);
}

struct LineReader {
    std::ifstream in;
    std::string file;
    int lineno = 0;

    explicit LineReader(const fs::path& p) : in(p), file(p.string()) {
        if (!in) throw DataError("cannot open " + file);
    }
    /// Next meaningful line, or false at EOF.
    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++lineno;
            if (meaningful_line(line)) return true;
        }
        return false;
    }
};

DenseMatrix load_features(const fs::path& path) {
    LineReader rd(path);
    std::string line;
    if (!rd.next(line)) fail(rd.file, rd.lineno, "missing 'N d' header");
    long n, d;
    {
        std::istringstream is(line);
        if (!(is >> n >> d) || n < 0 || d < 0) fail(rd.file, rd.lineno, "bad 'N d' header");
        std::string extra;
        if (is >> extra) fail(rd.file, rd.lineno, "trailing tokens after header");
    }
    DenseMatrix x(static_cast<int>(n), static_cast<int>(d));
    for (long i = 0; i < n; ++i) {
        if (!rd.next(line))
            fail(rd.file, rd.lineno + 1,
                 "expected feature row " + std::to_string(i + 1) + " of " + std::to_string(n));
        std::istringstream is(line);
        for (long j = 0; j < d; ++j)
            if (!(is >> x(static_cast<int>(i), static_cast<int>(j))))
                fail(rd.file, rd.lineno, "expected " + std::to_string(d) + " values");
        std::string extra;
        if (is >> extra) fail(rd.file, rd.lineno, "row has more than " + std::to_string(d) + " values");
        for (long j = 0; j < d; ++j)
            if (!std::isfinite(x(static_cast<int>(i), static_cast<int>(j))))
                fail(rd.file, rd.lineno, "non-finite feature value");
    }
    if (rd.next(line)) fail(rd.file, rd.lineno, "more feature rows than the header declares");
    return x;
}

std::vector<WeightedEdge> load_edges(const fs::path& path, int n) {
    LineReader rd(path);
    std::string line;
    std::vector<WeightedEdge> edges;
    while (rd.next(line)) {
        std::istringstream is(line);
        long u, v;
        double w = 1.0;
        if (!(is >> u >> v)) fail(rd.file, rd.lineno, "expected 'u v [w]'");
        is >> w;
        std::string extra;
        if (is >> extra) fail(rd.file, rd.lineno, "trailing tokens");
        if (u < 0 || u >= n || v < 0 || v >= n)
            fail(rd.file, rd.lineno, "node index out of range [0, " + std::to_string(n) + ")");
        if (!(w > 0.0)) fail(rd.file, rd.lineno, "edge weight must be positive");
        if (u == v) fail(rd.file, rd.lineno, "self-loops are not allowed");
        edges.push_back({static_cast<int>(u), static_cast<int>(v), w});
    }
    return edges;
}

std::vector<int> load_labels(const fs::path& path, int n) {
    LineReader rd(path);
    std::string line;
    std::vector<int> labels(n, -1);
    while (rd.next(line)) {
        std::istringstream is(line);
        long node, cls;
        if (!(is >> node >> cls)) fail(rd.file, rd.lineno, "expected 'node class'");
        if (node < 0 || node >= n) fail(rd.file, rd.lineno, "node index out of range");
        if (cls < 0) fail(rd.file, rd.lineno, "class must be nonnegative");
        if (labels[node] != -1) fail(rd.file, rd.lineno, "duplicate label for node " + std::to_string(node));
        labels[node] = static_cast<int>(cls);
    }
    return labels;
}

Splits load_splits(const fs::path& path, int n) {
    LineReader rd(path);
    std::string line;
    Splits sp;
    std::vector<char> seen(n, 0);
    while (rd.next(line)) {
        std::istringstream is(line);
        long node;
        std::string kind;
        if (!(is >> node >> kind)) fail(rd.file, rd.lineno, "expected 'node {train|val|test}'");
        if (node < 0 || node >= n) fail(rd.file, rd.lineno, "node index out of range");
        if (seen[node]) fail(rd.file, rd.lineno, "node " + std::to_string(node) + " split twice");
        seen[node] = 1;
        if (kind == "train")
            sp.train.push_back(static_cast<int>(node));
        else if (kind == "val")
            sp.val.push_back(static_cast<int>(node));
        else if (kind == "test")
            sp.test.push_back(static_cast<int>(node));
        else
            fail(rd.file, rd.lineno, "unknown split '" + kind + "'");
    }
    return sp;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
    fs::path base(dir);
    if (!fs::exists(base / "features.txt"))
        throw DataError("dataset directory " + dir + " has no features.txt");
    if (!fs::exists(base / "edges.txt"))
        throw DataError("dataset directory " + dir + " has no edges.txt");

    Dataset ds;
    ds.features = load_features(base / "features.txt");
    const int n = ds.features.rows;
    ds.graph = build_csr(load_edges(base / "edges.txt", n), n, /*symmetrize=*/true);

    if (fs::exists(base / "labels.txt")) {
        std::vector<int> raw = load_labels(base / "labels.txt", n);
        if (std::any_of(raw.begin(), raw.end(), [](int l) { return l >= 0; })) ds.labels = raw;
    }
    if (fs::exists(base / "splits.txt")) ds.splits = load_splits(base / "splits.txt", n);

    // Every split member must carry a label.
    auto check_labeled = [&](const std::vector<int>& set, const char* name) {
        for (int i : set)
            if (ds.labels.empty() || ds.labels[i] < 0)
                throw DataError("dataset " + dir + ": " + name + " node " + std::to_string(i) +
                                " has no label");
    };
    check_labeled(ds.splits.train, "train");
    check_labeled(ds.splits.val, "val");
    check_labeled(ds.splits.test, "test");
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    fs::create_directories(dir);
    fs::path base(dir);
    {
        std::ofstream out(base / "features.txt");
        out.precision(17);
        out << ds.features.rows << " " << ds.features.cols << "\n";
        for (int i = 0; i < ds.features.rows; ++i) {
            for (int j = 0; j < ds.features.cols; ++j)
                out << (j ? " " : "") << ds.features(i, j);
            out << "\n";
        }
    }
    {
        std::ofstream out(base / "edges.txt");
        out.precision(17);
        for (const auto& e : ds.graph.undirected_edges())
            out << e.u << " " << e.v << " " << e.w << "\n";
    }
    if (!ds.labels.empty()) {
        std::ofstream out(base / "labels.txt");
        for (size_t i = 0; i < ds.labels.size(); ++i)
            if (ds.labels[i] >= 0) out << i << " " << ds.labels[i] << "\n";
    }
    if (!ds.splits.empty()) {
        std::ofstream out(base / "splits.txt");
        for (int i : ds.splits.train) out << i << " train\n";
        for (int i : ds.splits.val) out << i << " val\n";
        for (int i : ds.splits.test) out << i << " test\n";
    }
}

namespace {
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
    int largest_component() {
        std::vector<int> size(parent.size(), 0);
        int best = 0;
        for (size_t i = 0; i < parent.size(); ++i) best = std::max(best, ++size[find(static_cast<int>(i))]);
        return best;
    }
};
}  // namespace

EdgeSplit split_edges(const SparseGraph& g, double val_frac, double test_frac, uint64_t seed) {
    if (val_frac < 0 || test_frac < 0 || val_frac + test_frac >= 1.0)
        throw DataError("split_edges: fractions must be nonnegative and sum below 1");
    std::vector<WeightedEdge> edges = g.undirected_edges();
    const long long m = static_cast<long long>(edges.size());
    const long long n_val = static_cast<long long>(std::floor(val_frac * m));
    const long long n_test = static_cast<long long>(std::floor(test_frac * m));
    if (m - n_val - n_test <= 0)
        throw DataError("split_edges: graph too small to hold out " + std::to_string(n_val) +
                        "+" + std::to_string(n_test) + " of " + std::to_string(m) + " edges");

    Rng root(seed);
    Rng pos_rng = root.substream("split_edges/pos");
    // Fisher-Yates over the (deterministically ordered) edge list.
    for (long long i = m - 1; i > 0; --i) {
        long long j = static_cast<long long>(pos_rng.uniform_int(i + 1));
        std::swap(edges[i], edges[j]);
    }
    EdgeSplit out;
    for (long long i = 0; i < m; ++i) {
        auto pr = std::minmax(edges[i].u, edges[i].v);
        if (i < n_val)
            out.val_pos.emplace_back(pr.first, pr.second);
        else if (i < n_val + n_test)
            out.test_pos.emplace_back(pr.first, pr.second);
        else
            out.train_edges.push_back(edges[i]);
    }

    // Equal-count negatives, uniform over non-edges, disjoint across splits.
    const long long total_pairs = static_cast<long long>(g.n) * (g.n - 1) / 2;
    if (total_pairs - m < n_val + n_test)
        throw DataError("split_edges: not enough non-edges for negative samples");
    Rng neg_rng = root.substream("split_edges/neg");
    std::set<std::pair<int, int>> taken;
    auto draw_negatives = [&](long long count, std::vector<std::pair<int, int>>& dst) {
        while (static_cast<long long>(dst.size()) < count) {
            int u = static_cast<int>(neg_rng.uniform_int(g.n));
            int v = static_cast<int>(neg_rng.uniform_int(g.n));
            if (u == v) continue;
            auto pr = std::minmax(u, v);
            std::pair<int, int> key{pr.first, pr.second};
            if (g.has_edge(key.first, key.second)) continue;
            if (!taken.insert(key).second) continue;
            dst.push_back(key);
        }
    };
    draw_negatives(n_val, out.val_neg);
    draw_negatives(n_test, out.test_neg);

    // Connectivity bookkeeping: did held-out removal shrink the largest component?
    UnionFind full(g.n), train(g.n);
    for (const auto& e : g.undirected_edges()) full.unite(e.u, e.v);
    for (const auto& e : out.train_edges) train.unite(e.u, e.v);
    out.largest_component_shrank = train.largest_component() < full.largest_component();
    return out;
}

Dataset generate_sbm(const SbmParams& p, uint64_t seed) {
    if (p.block_sizes.empty()) throw DataError("generate_sbm: no blocks");
    for (int s : p.block_sizes)
        if (s < 1) throw DataError("generate_sbm: block sizes must be >= 1");
    if (p.p_in < 0 || p.p_in > 1 || p.p_out < 0 || p.p_out > 1)
        throw DataError("generate_sbm: probabilities must be in [0, 1]");
    const int blocks = static_cast<int>(p.block_sizes.size());
    if (p.feature_dim < blocks)
        throw DataError("generate_sbm: feature_dim must be >= number of blocks for one-hot means");

    const int n = std::accumulate(p.block_sizes.begin(), p.block_sizes.end(), 0);
    std::vector<int> block_of(n);
    {
        int node = 0;
        for (int b = 0; b < blocks; ++b)
            for (int s = 0; s < p.block_sizes[b]; ++s) block_of[node++] = b;
    }

    Rng root(seed);
    Rng edge_rng = root.substream("sbm/edges");
    std::vector<WeightedEdge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double prob = block_of[i] == block_of[j] ? p.p_in : p.p_out;
            if (prob > 0.0 && edge_rng.uniform() < prob) edges.push_back({i, j, 1.0});
        }

    Dataset ds;
    ds.graph = build_csr(edges, n, /*symmetrize=*/true);
    ds.features = DenseMatrix(n, p.feature_dim);
    Rng feat_rng = root.substream("sbm/features");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p.feature_dim; ++j) {
            double mean = (j == block_of[i]) ? p.feature_shift : 0.0;
            ds.features(i, j) = mean + (p.noise > 0.0 ? p.noise * feat_rng.normal() : 0.0);
        }
    ds.labels = block_of;

    // Splits: labels_per_class train nodes, then fixed val/test counts.
    Rng split_rng = root.substream("sbm/splits");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.uniform_int(i + 1)]);
    std::vector<int> taken_per_class(blocks, 0);
    std::vector<char> used(n, 0);
    for (int i : order)
        if (taken_per_class[block_of[i]] < p.labels_per_class) {
            ds.splits.train.push_back(i);
            ++taken_per_class[block_of[i]];
            used[i] = 1;
        }
    std::vector<int> rest;
    for (int i : order)
        if (!used[i]) rest.push_back(i);
    if (static_cast<int>(rest.size()) < p.val_count + p.test_count)
        throw DataError("generate_sbm: not enough nodes for val/test counts");
    ds.splits.val.assign(rest.begin(), rest.begin() + p.val_count);
    ds.splits.test.assign(rest.begin() + p.val_count, rest.begin() + p.val_count + p.test_count);
    std::sort(ds.splits.train.begin(), ds.splits.train.end());
    std::sort(ds.splits.val.begin(), ds.splits.val.end());
    std::sort(ds.splits.test.begin(), ds.splits.test.end());
    return ds;
}

Dataset drop_edges(const Dataset& ds, double fraction, uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw DataError("drop_edges: fraction must be in [0, 1]");
    std::vector<WeightedEdge> edges = ds.graph.undirected_edges();
    const long long m = static_cast<long long>(edges.size());
    const long long remove = std::llround(fraction * static_cast<double>(m));
    Rng rng = Rng(seed).substream("drop_edges");
    for (long long i = m - 1; i > 0; --i)
        std::swap(edges[i], edges[rng.uniform_int(i + 1)]);
    edges.erase(edges.begin(), edges.begin() + remove);
    Dataset out = ds;
    out.graph = build_csr(edges, ds.graph.n, /*symmetrize=*/true);
    return out;
}

Dataset subsample_train(const Dataset& ds, int labels_per_class, uint64_t seed) {
    if (labels_per_class < 1) throw DataError("subsample_train: need at least one label per class");
    if (!ds.has_labels()) throw DataError("subsample_train: dataset has no labels");
    Dataset out = ds;
    std::vector<int> train = ds.splits.train;
    Rng rng = Rng(seed).substream("subsample_train");
    for (size_t i = train.size(); i > 1; --i)
        std::swap(train[i - 1], train[rng.uniform_int(i)]);
    std::vector<int> per_class(ds.num_classes(), 0);
    out.splits.train.clear();
    for (int node : train)
        if (per_class[ds.labels[node]]++ < labels_per_class) out.splits.train.push_back(node);
    std::sort(out.splits.train.begin(), out.splits.train.end());
    return out;
}

}  // namespace rod
