#pragma once

#include <map>
#include <string>

#include "rod/dataio.hpp"
#include "rod/model.hpp"

namespace rod {

using KeyValues = std::map<std::string, std::string>;

/// Parses flat `key = value` text (strings, numbers, booleans; '#' comments).
KeyValues parse_config_file(const std::string& path);

/// Everything one run needs: model hyperparameters plus data source and
/// run controls. Exactly one of data_dir / use_sbm must be set.
struct RunConfig {
    RodConfig model;
    std::string data_dir;
    bool use_sbm = false;
    SbmParams sbm;
    std::string out_dir = "out";
    long long pos_budget = -1;  // -1 selects 2|E|
    long long neg_budget = -1;  // -1 selects 10|E|
    double val_frac = 0.05;     // link edge split
    double test_frac = 0.10;
    int eval_every = 10;
    std::string kernels = "auto";
    std::string reception_mode = "auto";  // auto | full | sampled

    void validate_source() const;
};

/// Applies per-task defaults, then the merged key-values (file first, then
/// command-line overrides). Unknown keys raise ConfigError.
RunConfig build_run_config(const KeyValues& kv);

/// The full RunConfig as key-values (the checkpoint header and the exact
/// inverse of build_run_config for round-trips).
KeyValues run_config_to_kv(const RunConfig& cfg);

}  // namespace rod
