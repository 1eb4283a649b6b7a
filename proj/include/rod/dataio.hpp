#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rod/graph.hpp"
#include "rod/matrix.hpp"

namespace rod {

/// Node-id sets for the transductive protocol. May all be empty.
struct Splits {
    std::vector<int> train, val, test;
    bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

/// A loaded graph dataset: adjacency, features, optional labels and splits.
struct Dataset {
    SparseGraph graph;
    DenseMatrix features;
    std::vector<int> labels;  // empty when absent
    Splits splits;

    bool has_labels() const { return !labels.empty(); }
    int num_classes() const;
};

/// Reads edges.txt / features.txt and optional labels.txt / splits.txt from
/// a directory. Formats are whitespace-separated text with '#' comments;
/// malformed lines raise DataError with the file and line number.
Dataset load_dataset(const std::string& dir);

/// Inverse of load_dataset; writes only the files whose data is present.
void save_dataset(const std::string& dir, const Dataset& ds);

/// Held-out positive edges plus equal-count sampled non-edges per split.
struct EdgeSplit {
    std::vector<WeightedEdge> train_edges;
    std::vector<std::pair<int, int>> val_pos, val_neg, test_pos, test_neg;
    /// True when removing held-out edges shrank the largest connected
    /// component of the graph (recorded, not fatal).
    bool largest_component_shrank = false;
};

EdgeSplit split_edges(const SparseGraph& g, double val_frac, double test_frac, uint64_t seed);

/// Stochastic block model parameters for the synthetic desk-scale datasets.
struct SbmParams {
    std::vector<int> block_sizes = {100, 100};
    double p_in = 0.05;
    double p_out = 0.005;
    int feature_dim = 16;
    double feature_shift = 1.0;  // block-mean magnitude along one-hot directions
    double noise = 1.0;          // per-entry Gaussian sigma
    int labels_per_class = 5;
    int val_count = 40;
    int test_count = 100;
};

/// Undirected SBM with block-mean features plus Gaussian noise; labels are
/// block ids; splits follow the labels-per-class protocol.
Dataset generate_sbm(const SbmParams& params, uint64_t seed);

/// Uniformly removes round(fraction * |E|) edges without replacement.
Dataset drop_edges(const Dataset& ds, double fraction, uint64_t seed);

/// Shrinks the train split to at most labels_per_class nodes per class.
Dataset subsample_train(const Dataset& ds, int labels_per_class, uint64_t seed);

}  // namespace rod
