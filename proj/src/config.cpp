#include "rod/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace rod {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(to_int(key, item)));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "' expects a comma list");
    return out;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "task",           "data",
        "out",            "seed",
        "epochs",         "lr",
        "weight_decay",   "dropout",
        "hidden",         "embed",
        "depth",          "alpha",
        "beta",           "classes",
        "kmeans_period",  "kmeans_restarts",
        "kmeans_iters",   "reduction",
        "paper_literal_lc", "pos_budget",
        "neg_budget",     "val_frac",
        "test_frac",      "eval_every",
        "kernels",        "reception_mode",
        "sbm",            "sbm_blocks",
        "sbm_pin",        "sbm_pout",
        "sbm_dim",        "sbm_mu",
        "sbm_sigma",      "sbm_labels_per_class",
        "sbm_val",        "sbm_test",
    };
    return keys;
}

}  // namespace

KeyValues parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key or value");
        kv[key] = value;
    }
    return kv;
}

void RunConfig::validate_source() const {
    if (data_dir.empty() == !use_sbm)
        throw ConfigError(use_sbm ? "both 'data' and 'sbm' are set; pick one data source"
                                  : "no data source: set 'data' or 'sbm = true'");
}

RunConfig build_run_config(const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
        (void)value;
        if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    auto it = kv.find("task");
    if (it == kv.end()) throw ConfigError("missing required key 'task'");

    RunConfig cfg;
    cfg.model.task = task_from_string(it->second);

    // Per-task defaults; explicit keys override below.
    switch (cfg.model.task) {
        case Task::Classify:
            cfg.model.hidden = 128;
            cfg.model.lr = 0.02;
            cfg.model.dropout = 0.8;
            cfg.model.alpha = 0.1;
            cfg.model.beta = 0.1;
            cfg.model.epochs = 200;
            cfg.model.depth = 4;
            break;
        case Task::Link:
            cfg.model.hidden = 1024;
            cfg.model.embed = 16;
            cfg.model.lr = 0.001;
            cfg.model.dropout = 0.0;
            cfg.model.alpha = 0.2;
            cfg.model.beta = 0.1;
            cfg.model.epochs = 400;
            cfg.model.depth = 4;
            break;
        case Task::Cluster:
            cfg.model.hidden = 128;
            cfg.model.embed = 64;
            cfg.model.lr = 0.01;
            cfg.model.dropout = 0.0;
            cfg.model.alpha = 0.1;
            cfg.model.beta = 0.1;
            cfg.model.epochs = 200;
            cfg.model.kmeans_period = 10;
            cfg.model.depth = 4;
            break;
    }

    for (const auto& [key, value] : kv) {
        if (key == "task") continue;
        if (key == "data") cfg.data_dir = value;
        else if (key == "out") cfg.out_dir = value;
        else if (key == "seed") cfg.model.seed = static_cast<uint64_t>(to_int(key, value));
        else if (key == "epochs") cfg.model.epochs = static_cast<int>(to_int(key, value));
        else if (key == "lr") cfg.model.lr = to_double(key, value);
        else if (key == "weight_decay") cfg.model.weight_decay = to_double(key, value);
        else if (key == "dropout") cfg.model.dropout = to_double(key, value);
        else if (key == "hidden") cfg.model.hidden = static_cast<int>(to_int(key, value));
        else if (key == "embed") cfg.model.embed = static_cast<int>(to_int(key, value));
        else if (key == "depth") cfg.model.depth = static_cast<int>(to_int(key, value));
        else if (key == "alpha") cfg.model.alpha = to_double(key, value);
        else if (key == "beta") cfg.model.beta = to_double(key, value);
        else if (key == "classes") cfg.model.classes = static_cast<int>(to_int(key, value));
        else if (key == "kmeans_period") cfg.model.kmeans_period = static_cast<int>(to_int(key, value));
        else if (key == "kmeans_restarts") cfg.model.kmeans_restarts = static_cast<int>(to_int(key, value));
        else if (key == "kmeans_iters") cfg.model.kmeans_iters = static_cast<int>(to_int(key, value));
        else if (key == "reduction") cfg.model.reduction = value;
        else if (key == "paper_literal_lc") cfg.model.paper_literal_lc = to_bool(key, value);
        else if (key == "pos_budget") cfg.pos_budget = to_int(key, value);
        else if (key == "neg_budget") cfg.neg_budget = to_int(key, value);
        else if (key == "val_frac") cfg.val_frac = to_double(key, value);
        else if (key == "test_frac") cfg.test_frac = to_double(key, value);
        else if (key == "eval_every") cfg.eval_every = static_cast<int>(to_int(key, value));
        else if (key == "kernels") cfg.kernels = value;
        else if (key == "reception_mode") cfg.reception_mode = value;
        else if (key == "sbm") cfg.use_sbm = to_bool(key, value);
        else if (key == "sbm_blocks") cfg.sbm.block_sizes = to_int_list(key, value);
        else if (key == "sbm_pin") cfg.sbm.p_in = to_double(key, value);
        else if (key == "sbm_pout") cfg.sbm.p_out = to_double(key, value);
        else if (key == "sbm_dim") cfg.sbm.feature_dim = static_cast<int>(to_int(key, value));
        else if (key == "sbm_mu") cfg.sbm.feature_shift = to_double(key, value);
        else if (key == "sbm_sigma") cfg.sbm.noise = to_double(key, value);
        else if (key == "sbm_labels_per_class")
            cfg.sbm.labels_per_class = static_cast<int>(to_int(key, value));
        else if (key == "sbm_val") cfg.sbm.val_count = static_cast<int>(to_int(key, value));
        else if (key == "sbm_test") cfg.sbm.test_count = static_cast<int>(to_int(key, value));
    }
    if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (cfg.kernels != "auto" && cfg.kernels != "scalar" && cfg.kernels != "avx2")
        throw ConfigError("kernels must be auto, scalar or avx2");
    if (cfg.reception_mode != "auto" && cfg.reception_mode != "full" &&
        cfg.reception_mode != "sampled")
        throw ConfigError("reception_mode must be auto, full or sampled");
    return cfg;
}

KeyValues run_config_to_kv(const RunConfig& cfg) {
    KeyValues kv;
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    kv["task"] = task_name(cfg.model.task);
    if (!cfg.data_dir.empty()) kv["data"] = cfg.data_dir;
    kv["out"] = cfg.out_dir;
    kv["seed"] = std::to_string(cfg.model.seed);
    kv["epochs"] = std::to_string(cfg.model.epochs);
    kv["lr"] = num(cfg.model.lr);
    kv["weight_decay"] = num(cfg.model.weight_decay);
    kv["dropout"] = num(cfg.model.dropout);
    kv["hidden"] = std::to_string(cfg.model.hidden);
    kv["embed"] = std::to_string(cfg.model.embed);
    kv["depth"] = std::to_string(cfg.model.depth);
    kv["alpha"] = num(cfg.model.alpha);
    kv["beta"] = num(cfg.model.beta);
    kv["classes"] = std::to_string(cfg.model.classes);
    kv["kmeans_period"] = std::to_string(cfg.model.kmeans_period);
    kv["kmeans_restarts"] = std::to_string(cfg.model.kmeans_restarts);
    kv["kmeans_iters"] = std::to_string(cfg.model.kmeans_iters);
    kv["reduction"] = cfg.model.reduction;
    kv["paper_literal_lc"] = cfg.model.paper_literal_lc ? "true" : "false";
    kv["pos_budget"] = std::to_string(cfg.pos_budget);
    kv["neg_budget"] = std::to_string(cfg.neg_budget);
    kv["val_frac"] = num(cfg.val_frac);
    kv["test_frac"] = num(cfg.test_frac);
    kv["eval_every"] = std::to_string(cfg.eval_every);
    kv["kernels"] = cfg.kernels;
    kv["reception_mode"] = cfg.reception_mode;
    if (cfg.use_sbm) {
        kv["sbm"] = "true";
        std::string blocks;
        for (size_t b = 0; b < cfg.sbm.block_sizes.size(); ++b)
            blocks += (b ? "," : "") + std::to_string(cfg.sbm.block_sizes[b]);
        kv["sbm_blocks"] = blocks;
        kv["sbm_pin"] = num(cfg.sbm.p_in);
        kv["sbm_pout"] = num(cfg.sbm.p_out);
        kv["sbm_dim"] = std::to_string(cfg.sbm.feature_dim);
        kv["sbm_mu"] = num(cfg.sbm.feature_shift);
        kv["sbm_sigma"] = num(cfg.sbm.noise);
        kv["sbm_labels_per_class"] = std::to_string(cfg.sbm.labels_per_class);
        kv["sbm_val"] = std::to_string(cfg.sbm.val_count);
        kv["sbm_test"] = std::to_string(cfg.sbm.test_count);
    }
    return kv;
}

}  // namespace rod
