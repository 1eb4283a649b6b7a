#include "rod/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace rod {

namespace {

constexpr char kMagic[8] = {'R', 'O', 'D', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError(path + ": truncated checkpoint");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_matrix(std::ostream& out, const std::string& name, const DenseMatrix& m) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<uint64_t>(m.rows));
    put_u64(out, static_cast<uint64_t>(m.cols));
    for (double v : m.data) put_u64(out, std::bit_cast<uint64_t>(v));
}

std::pair<std::string, DenseMatrix> get_matrix(std::istream& in, const std::string& path) {
    uint64_t name_len = get_u64(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len)))
        throw DataError(path + ": truncated checkpoint");
    uint64_t rows = get_u64(in, path);
    uint64_t cols = get_u64(in, path);
    DenseMatrix m(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& v : m.data) v = std::bit_cast<double>(get_u64(in, path));
    return {std::move(name), std::move(m)};
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out.write(kMagic, 8);

    std::string header;
    KeyValues kv = run_config_to_kv(ckpt.run);
    kv["feat_dim"] = std::to_string(ckpt.model.feat_dim);
    for (const auto& [k, v] : kv) header += k + " = " + v + "\n";
    put_u64(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    auto params = ckpt.model.named_params();
    put_u64(out, params.size() + ckpt.centroids.size());
    for (const auto& [name, mat] : params) put_matrix(out, name, *mat);
    for (size_t k = 0; k < ckpt.centroids.size(); ++k)
        put_matrix(out, "centroids_" + std::to_string(k), ckpt.centroids[k]);
    if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError(path + ": not a checkpoint file (bad magic)");

    uint64_t header_len = get_u64(in, path);
    std::string header(header_len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
        throw DataError(path + ": truncated header");

    KeyValues kv;
    size_t pos = 0;
    while (pos < header.size()) {
        size_t nl = header.find('\n', pos);
        if (nl == std::string::npos) nl = header.size();
        std::string line = header.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw DataError(path + ": malformed header line");
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    int feat_dim = 0;
    if (auto it = kv.find("feat_dim"); it != kv.end()) {
        feat_dim = std::stoi(it->second);
        kv.erase(it);
    } else {
        throw DataError(path + ": header missing feat_dim");
    }

    Checkpoint ckpt;
    ckpt.run = build_run_config(kv);
    if (ckpt.run.model.classes < 1) throw DataError(path + ": header missing classes");
    ckpt.model = init_params(ckpt.run.model, feat_dim, ckpt.run.model.seed);

    uint64_t count = get_u64(in, path);
    std::map<std::string, DenseMatrix> mats;
    for (uint64_t t = 0; t < count; ++t) {
        auto [name, m] = get_matrix(in, path);
        mats.emplace(std::move(name), std::move(m));
    }
    for (auto& [name, target] : ckpt.model.named_params()) {
        auto it = mats.find(name);
        if (it == mats.end()) throw DataError(path + ": missing parameter " + name);
        if (!target->same_shape(it->second))
            throw DataError(path + ": parameter " + name + " has shape " +
                            it->second.shape_str() + ", expected " + target->shape_str());
        *target = std::move(it->second);
        mats.erase(it);
    }
    for (uint64_t k = 0;; ++k) {
        auto it = mats.find("centroids_" + std::to_string(k));
        if (it == mats.end()) break;
        ckpt.centroids.push_back(std::move(it->second));
        mats.erase(it);
    }
    if (!mats.empty()) throw DataError(path + ": unexpected matrix " + mats.begin()->first);
    return ckpt;
}

}  // namespace rod
