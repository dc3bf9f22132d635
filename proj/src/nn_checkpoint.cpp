#include "veritas/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

namespace veritas::nn {
namespace {

constexpr char kMagic[8] = {'V', 'R', 'T', 'S', 'N', 'N', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated header");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, ModelT<float>& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    auto params = model.params();
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, std::uint32_t(params.size()));
    for (auto* p : params) {
        write_u32(os, std::uint32_t(p->name.size()));
        os.write(p->name.data(), long(p->name.size()));
        write_u32(os, std::uint32_t(p->value.shape.size()));
        for (long d : p->value.shape) write_u32(os, std::uint32_t(d));
    }
    for (auto* p : params) {
        os.write(reinterpret_cast<const char*>(p->value.data()), long(p->value.v.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, ModelT<float>& model) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    const std::uint32_t count = read_u32(is);
    struct Entry {
        std::string name;
        std::vector<long> shape;
    };
    std::vector<Entry> entries(count);
    for (auto& e : entries) {
        const std::uint32_t name_len = read_u32(is);
        e.name.resize(name_len);
        is.read(e.name.data(), name_len);
        const std::uint32_t ndim = read_u32(is);
        e.shape.resize(ndim);
        for (auto& d : e.shape) d = long(read_u32(is));
        if (!is) throw std::runtime_error("checkpoint: truncated header");
    }

    std::map<std::string, ParamT<float>*> by_name;
    for (auto* p : model.params()) by_name[p->name] = p;
    if (by_name.size() != entries.size()) throw std::runtime_error("checkpoint: parameter count mismatch");

    for (const auto& e : entries) {
        auto it = by_name.find(e.name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown parameter " + e.name);
        ParamT<float>* p = it->second;
        if (p->value.shape != e.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + e.name + ": model " +
                                     shape_string(p->value.shape) + " vs file " + shape_string(e.shape));
        is.read(reinterpret_cast<char*>(p->value.data()), long(p->value.v.size() * sizeof(float)));
        if (!is) throw std::runtime_error("checkpoint: truncated data for " + e.name);
    }
}

}  // namespace veritas::nn
