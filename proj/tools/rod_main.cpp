#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "rod/checkpoint.hpp"
#include "rod/config.hpp"
#include "rod/trainer.hpp"

namespace fs = std::filesystem;

namespace {

/// Remaining "--key value" tokens become config overrides (flags win over
/// the config file).
rod::KeyValues collect_overrides(const std::vector<std::string>& extras) {
    rod::KeyValues kv;
    for (size_t i = 0; i < extras.size(); i += 2) {
        const std::string& flag = extras[i];
        if (flag.size() < 3 || flag.rfind("--", 0) != 0)
            throw rod::ConfigError("expected --key value pairs, got '" + flag + "'");
        if (i + 1 >= extras.size())
            throw rod::ConfigError("flag '" + flag + "' is missing a value");
        kv[flag.substr(2)] = extras[i + 1];
    }
    return kv;
}

rod::RunConfig config_from(const std::string& config_path,
                           const std::vector<std::string>& extras) {
    rod::KeyValues kv;
    if (!config_path.empty()) kv = rod::parse_config_file(config_path);
    for (const auto& [k, v] : collect_overrides(extras)) kv[k] = v;  // flags win
    return rod::build_run_config(kv);
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
    std::vector<uint64_t> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw rod::ConfigError("empty seed list");
    return out;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw rod::ConfigError("empty grid");
    return out;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream f(path);
    if (!f) throw rod::DataError("cannot write " + path);
    f << content;
}

int run(int argc, char** argv) {
    CLI::App app{"ROD: reception-aware online distillation for sparse graphs"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, data_dir, out_path;
    std::string kind = "sgc", study, grid_str, seeds_str = "0", methods_str = "rod,sgc";
    std::string k_range_str = "1,2,4,8";
    double val_frac = 0.05, test_frac = 0.10;
    uint64_t seed = 0;

    auto* train = app.add_subcommand("train", "train a ROD model");
    train->add_option("--config", config_path, "flat key = value config file");
    train->allow_extras();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval->add_option("--data", data_dir, "dataset directory (defaults to the checkpoint's)");

    auto* baseline = app.add_subcommand("baseline", "run an SGC or MLP baseline");
    baseline->add_option("--kind", kind, "sgc | mlp");
    baseline->add_option("--config", config_path, "config file");
    baseline->allow_extras();

    auto* analyze = app.add_subcommand("analyze-depth",
                                       "per-degree SGC correctness across depths");
    analyze->add_option("--config", config_path, "config file");
    analyze->add_option("--k-range", k_range_str, "comma list of depths");
    analyze->add_option("--seeds", seeds_str, "comma list of seeds");
    analyze->add_option("--out", out_path, "output CSV (stdout when omitted)");
    analyze->allow_extras();

    auto* sweep_cmd = app.add_subcommand("sweep", "grid studies");
    sweep_cmd->add_option("--study", study, "edge_sparsity | label_sparsity | depth")
        ->required();
    sweep_cmd->add_option("--grid", grid_str, "comma list of grid values")->required();
    sweep_cmd->add_option("--seeds", seeds_str, "comma list of seeds");
    sweep_cmd->add_option("--methods", methods_str, "comma list of rod,sgc,mlp");
    sweep_cmd->add_option("--config", config_path, "config file");
    sweep_cmd->add_option("--out", out_path, "output CSV (stdout when omitted)");
    sweep_cmd->allow_extras();

    auto* gen = app.add_subcommand("gen-sbm", "generate a synthetic SBM dataset");
    gen->add_option("--out", out_path, "output dataset directory")->required();
    gen->add_option("--config", config_path, "config file");
    gen->allow_extras();

    auto* split = app.add_subcommand("split-edges", "hold out edges for link prediction");
    split->add_option("--data", data_dir, "dataset directory")->required();
    split->add_option("--val-frac", val_frac, "validation fraction");
    split->add_option("--test-frac", test_frac, "test fraction");
    split->add_option("--seed", seed, "random seed");
    split->add_option("--out", out_path, "output file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        rod::RunConfig cfg = config_from(config_path, train->remaining());
        cfg.validate_source();
        rod::TrainOutput out = rod::run_train(cfg);
        std::cout << out.report.to_json() << "\n";
        std::cerr << "best epoch " << out.best_epoch << "; outputs in " << cfg.out_dir << "\n";
    } else if (eval->parsed()) {
        rod::Checkpoint ckpt = rod::load_checkpoint(ckpt_path);
        if (!data_dir.empty()) {
            ckpt.run.data_dir = data_dir;
            ckpt.run.use_sbm = false;
        }
        rod::Dataset ds = rod::resolve_dataset(ckpt.run);
        std::cout << rod::evaluate_checkpoint(ckpt, ds).to_json() << "\n";
    } else if (baseline->parsed()) {
        rod::RunConfig cfg = config_from(config_path, baseline->remaining());
        cfg.validate_source();
        rod::Dataset ds = rod::resolve_dataset(cfg);
        std::cout << rod::run_baseline(kind, cfg, ds).to_json() << "\n";
    } else if (analyze->parsed()) {
        rod::RunConfig cfg = config_from(config_path, analyze->remaining());
        cfg.validate_source();
        rod::Dataset ds = rod::resolve_dataset(cfg);
        std::vector<int> ks;
        for (double v : parse_grid(k_range_str)) ks.push_back(static_cast<int>(v));
        auto cells = rod::analyze_depth(cfg, ks, parse_seeds(seeds_str), ds);
        write_or_print(out_path, rod::depth_csv(cells));
    } else if (sweep_cmd->parsed()) {
        rod::RunConfig cfg = config_from(config_path, sweep_cmd->remaining());
        cfg.validate_source();
        std::vector<std::string> methods;
        {
            std::istringstream is(methods_str);
            std::string item;
            while (std::getline(is, item, ','))
                if (!item.empty()) methods.push_back(item);
        }
        auto rows = rod::sweep(study, cfg, parse_grid(grid_str), parse_seeds(seeds_str), methods);
        write_or_print(out_path, rod::sweep_csv(rows));
    } else if (gen->parsed()) {
        rod::KeyValues kv;
        if (!config_path.empty()) kv = rod::parse_config_file(config_path);
        for (const auto& [k, v] : collect_overrides(gen->remaining())) kv[k] = v;
        kv["sbm"] = "true";
        if (!kv.count("task")) kv["task"] = "classify";
        rod::RunConfig cfg = rod::build_run_config(kv);
        rod::Dataset ds = rod::generate_sbm(cfg.sbm, cfg.model.seed);
        rod::save_dataset(out_path, ds);
        std::cerr << "wrote " << ds.graph.n << " nodes, " << ds.graph.num_edges()
                  << " edges to " << out_path << "\n";
    } else if (split->parsed()) {
        rod::Dataset ds = rod::load_dataset(data_dir);
        rod::EdgeSplit es = rod::split_edges(ds.graph, val_frac, test_frac, seed);
        std::ostringstream os;
        for (const auto& e : es.train_edges) os << "train " << e.u << " " << e.v << "\n";
        for (const auto& [u, v] : es.val_pos) os << "val_pos " << u << " " << v << "\n";
        for (const auto& [u, v] : es.val_neg) os << "val_neg " << u << " " << v << "\n";
        for (const auto& [u, v] : es.test_pos) os << "test_pos " << u << " " << v << "\n";
        for (const auto& [u, v] : es.test_neg) os << "test_neg " << u << " " << v << "\n";
        write_or_print(out_path, os.str());
        if (es.largest_component_shrank)
            std::cerr << "warning: held-out edges shrank the largest connected component\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const rod::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rod::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
