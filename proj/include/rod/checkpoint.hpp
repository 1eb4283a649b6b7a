#pragma once

#include <string>
#include <vector>

#include "rod/config.hpp"
#include "rod/model.hpp"

namespace rod {

/// Trained state as stored on disk: the run configuration (text header),
/// every parameter matrix, and per-student centroids for the cluster task.
struct Checkpoint {
    RunConfig run;
    RodModel model;
    std::vector<DenseMatrix> centroids;  // empty unless task == cluster
};

/// Versioned binary container: magic, key-value text header, then each
/// matrix as (name, rows, cols, little-endian 64-bit floats).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rod
