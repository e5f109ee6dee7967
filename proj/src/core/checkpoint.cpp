#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "core/hashing.hpp"

namespace raseg {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'C', 'K'};

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::ifstream& f) {
    uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_string(std::ofstream& f, const std::string& s) {
    write_u32(f, uint32_t(s.size()));
    f.write(s.data(), long(s.size()));
}

std::string read_string(std::ifstream& f) {
    const uint32_t n = read_u32(f);
    std::string s(n, '\0');
    f.read(s.data(), long(n));
    return s;
}

void write_floats(std::ofstream& f, const std::vector<float>& v) {
    write_u64(f, v.size());
    f.write(reinterpret_cast<const char*>(v.data()), long(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::ifstream& f) {
    const uint64_t n = read_u64(f);
    std::vector<float> v(n);
    f.read(reinterpret_cast<char*>(v.data()), long(n * sizeof(float)));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model,
                     const std::string& config_json, int epoch, Adam<float>* optimizer) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);

    f.write(kMagic, 4);
    write_u32(f, 1);  // version
    write_u64(f, fnv1a64(config_json));
    write_string(f, config_json);
    write_u32(f, uint32_t(epoch));

    auto tensors = model.named_tensors();
    write_u32(f, uint32_t(tensors.size()));
    for (auto& t : tensors) {
        write_string(f, t.name);
        const Shape s = t.tensor.shape();
        write_u32(f, uint32_t(s.n));
        write_u32(f, uint32_t(s.c));
        write_u32(f, uint32_t(s.h));
        write_u32(f, uint32_t(s.w));
        f.put(t.trainable ? 1 : 0);
        write_floats(f, t.tensor.values());
    }

    f.put(optimizer ? 1 : 0);
    if (optimizer) {
        write_u64(f, uint64_t(optimizer->t()));
        write_u32(f, uint32_t(optimizer->params().size()));
        for (size_t i = 0; i < optimizer->params().size(); ++i) {
            write_string(f, optimizer->params()[i].name);
            write_floats(f, optimizer->moments_m()[i]);
            write_floats(f, optimizer->moments_v()[i]);
        }
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

namespace {

CheckpointMeta read_header(std::ifstream& f, const std::string& path) {
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    CheckpointMeta meta;
    meta.version = read_u32(f);
    if (meta.version != 1) throw std::runtime_error("checkpoint: unsupported version in " + path);
    meta.config_hash = read_u64(f);
    meta.config_json = read_string(f);
    if (fnv1a64(meta.config_json) != meta.config_hash)
        throw std::runtime_error("checkpoint: config hash mismatch in " + path);
    meta.epoch = int(read_u32(f));
    return meta;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    return read_header(f, path);
}

CheckpointMeta load_checkpoint(const std::string& path, Model<float>& model,
                               Adam<float>* optimizer) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    CheckpointMeta meta = read_header(f, path);

    std::map<std::string, TensorT<float>> by_name;
    for (auto& t : model.named_tensors()) by_name.emplace(t.name, t.tensor);

    const uint32_t n_tensors = read_u32(f);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = read_string(f);
        Shape s;
        s.n = int(read_u32(f));
        s.c = int(read_u32(f));
        s.h = int(read_u32(f));
        s.w = int(read_u32(f));
        f.get();  // trainable flag, implied by the model structure
        std::vector<float> values = read_floats(f);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: unknown tensor " + name + " in " + path);
        if (!(it->second.shape() == s))
            throw std::runtime_error("checkpoint: shape mismatch for " + name + " in " + path);
        it->second.values() = std::move(values);
    }

    const int has_opt = f.get();
    meta.has_optimizer = has_opt == 1;
    if (meta.has_optimizer && optimizer) {
        optimizer->set_t(int64_t(read_u64(f)));
        const uint32_t n = read_u32(f);
        if (n != optimizer->params().size())
            throw std::runtime_error("checkpoint: optimizer state size mismatch in " + path);
        for (uint32_t i = 0; i < n; ++i) {
            const std::string name = read_string(f);
            if (name != optimizer->params()[i].name)
                throw std::runtime_error("checkpoint: optimizer state order mismatch in " + path);
            optimizer->moments_m()[i] = read_floats(f);
            optimizer->moments_v()[i] = read_floats(f);
        }
    }
    if (!f) throw std::runtime_error("checkpoint: truncated file " + path);
    return meta;
}

}  // namespace raseg
