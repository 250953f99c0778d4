#include "mfpt/nn/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "mfpt/core/error.hpp"

namespace mfpt::nn {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'P', 'T', 'C', 'K', 'P', '1'};

void write_u32(std::ofstream& out, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
    uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("archive: truncated file");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}

}  // namespace

const char* group_name(ParamGroup group) {
    switch (group) {
        case ParamGroup::Backbone: return "backbone";
        case ParamGroup::FInP: return "finp";
        case ParamGroup::FFrP: return "ffrp";
        case ParamGroup::Tokens: return "tokens";
        case ParamGroup::Adapter: return "adapter";
        case ParamGroup::Decoder: return "decoder";
    }
    return "?";
}

int ParamStore::add(const std::string& name, ParamGroup group, bool trainable, Tensor value) {
    if (index_.count(name)) throw UsageError("params: duplicate parameter name '" + name + "'");
    Param p;
    p.name = name;
    p.group = group;
    p.trainable = trainable;
    p.grad = Tensor(value.rows(), value.cols());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    const int id = static_cast<int>(params_.size()) - 1;
    index_[name] = id;
    return id;
}

Param* ParamStore::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

const Param* ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

int ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

size_t ParamStore::total_elements() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

size_t ParamStore::trainable_elements() const {
    size_t n = 0;
    for (const auto& p : params_)
        if (p.trainable) n += p.value.size();
    return n;
}

void save_archive(const std::string& path, const std::string& config_json,
                  const ParamStore& store) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("archive: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, static_cast<uint32_t>(config_json.size()));
    out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
    write_u32(out, static_cast<uint32_t>(store.count()));
    for (const auto& p : store.all()) {
        write_u32(out, static_cast<uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_u32(out, static_cast<uint32_t>(p.value.rows()));
        write_u32(out, static_cast<uint32_t>(p.value.cols()));
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw DataError("archive: write failed for '" + path + "'");
}

LoadedArchive load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("archive: cannot open '" + path + "'");
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("archive: '" + path + "' is not a checkpoint archive");
    }
    LoadedArchive archive;
    const uint32_t cfg_len = read_u32(in);
    archive.config_json.resize(cfg_len);
    if (cfg_len > 0 && !in.read(archive.config_json.data(), cfg_len)) {
        throw DataError("archive: truncated config block");
    }
    const uint32_t n = read_u32(in);
    archive.arrays.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw DataError("archive: truncated array name");
        const int rows = static_cast<int>(read_u32(in));
        const int cols = static_cast<int>(read_u32(in));
        Tensor t(rows, cols);
        if (!in.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(t.size() * sizeof(double)))) {
            throw DataError("archive: truncated array data for '" + name + "'");
        }
        archive.arrays.emplace_back(std::move(name), std::move(t));
    }
    return archive;
}

}  // namespace mfpt::nn
