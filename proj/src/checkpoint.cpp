#include "hasn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace hasn::ckpt {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

template <typename U>
void put_le(std::ostream& os, U v) {
    static_assert(std::is_unsigned_v<U>);
    unsigned char buf[sizeof(U)];
    for (size_t i = 0; i < sizeof(U); ++i) buf[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    put_bytes(os, buf, sizeof(U));
}

void put_f32_array(std::ostream& os, const std::vector<float>& data) {
    if constexpr (std::endian::native == std::endian::little) {
        put_bytes(os, data.data(), data.size() * 4);
    } else {
        for (float f : data) {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            put_le(os, u);
        }
    }
}

void get_bytes(std::istream& is, void* p, size_t n, const std::string& what) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (size_t(is.gcount()) != n)
        throw CheckpointError("truncated checkpoint: unexpected end of file reading " + what);
}

template <typename U>
U get_le(std::istream& is, const std::string& what) {
    unsigned char buf[sizeof(U)];
    get_bytes(is, buf, sizeof(U), what);
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= U(buf[i]) << (8 * i);
    return v;
}

void get_f32_array(std::istream& is, std::vector<float>& data, const std::string& what) {
    if constexpr (std::endian::native == std::endian::little) {
        get_bytes(is, data.data(), data.size() * 4, what);
    } else {
        for (float& f : data) {
            const std::uint32_t u = get_le<std::uint32_t>(is, what);
            std::memcpy(&f, &u, 4);
        }
    }
}

void put_tensor_data(std::ostream& os, const Tensor& t) { put_f32_array(os, t.data); }

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
    put_bytes(os, kMagic, 4);
    put_le<std::uint32_t>(os, kVersion);
    const std::string cfg = ckpt.config.to_text();
    put_le<std::uint32_t>(os, std::uint32_t(cfg.size()));
    put_bytes(os, cfg.data(), cfg.size());
    put_le<std::uint64_t>(os, std::uint64_t(ckpt.iteration));
    put_le<std::uint32_t>(os, std::uint32_t(ckpt.params.size()));
    for (const auto& [name, t] : ckpt.params) {
        put_le<std::uint16_t>(os, std::uint16_t(name.size()));
        put_bytes(os, name.data(), name.size());
        put_le<std::uint32_t>(os, std::uint32_t(t.n()));
        put_le<std::uint32_t>(os, std::uint32_t(t.c()));
        put_le<std::uint32_t>(os, std::uint32_t(t.h()));
        put_le<std::uint32_t>(os, std::uint32_t(t.w()));
        put_tensor_data(os, t);
    }
    put_le<std::uint8_t>(os, ckpt.has_optimizer ? 1 : 0);
    if (ckpt.has_optimizer) {
        put_le<std::uint64_t>(os, std::uint64_t(ckpt.adam_step));
        for (const auto& [name, t] : ckpt.params) {
            put_tensor_data(os, ckpt.adam_m.at(name));
            put_tensor_data(os, ckpt.adam_v.at(name));
        }
    }
    os.flush();
    if (!os) throw CheckpointError("write failure on '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
    char magic[4];
    get_bytes(is, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad magic in '" + path + "': not a HSNC checkpoint");
    const auto version = get_le<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kVersion) + ")");
    Checkpoint ckpt;
    const auto cfg_len = get_le<std::uint32_t>(is, "config length");
    std::string cfg_text(cfg_len, '\0');
    get_bytes(is, cfg_text.data(), cfg_len, "config text");
    ckpt.config = model::ModelConfig::from_text(cfg_text);
    ckpt.iteration = std::int64_t(get_le<std::uint64_t>(is, "iteration"));
    const auto ntensors = get_le<std::uint32_t>(is, "tensor count");

    // expected shapes from the config
    std::map<std::string, Shape> expected;
    for (const auto& [name, shape] : model::param_specs(ckpt.config)) expected[name] = shape;
    if (expected.size() != ntensors)
        throw CheckpointError("checkpoint holds " + std::to_string(ntensors) + " tensors, config requires " +
                              std::to_string(expected.size()));

    for (std::uint32_t i = 0; i < ntensors; ++i) {
        const auto name_len = get_le<std::uint16_t>(is, "tensor name length");
        std::string name(name_len, '\0');
        get_bytes(is, name.data(), name_len, "tensor name");
        Shape s;
        s.n = int(get_le<std::uint32_t>(is, "shape"));
        s.c = int(get_le<std::uint32_t>(is, "shape"));
        s.h = int(get_le<std::uint32_t>(is, "shape"));
        s.w = int(get_le<std::uint32_t>(is, "shape"));
        auto it = expected.find(name);
        if (it == expected.end())
            throw CheckpointError("unexpected tensor '" + name + "' in checkpoint");
        if (!(it->second == s))
            throw CheckpointError("shape mismatch for '" + name + "': file has " + s.str() +
                                  ", config requires " + it->second.str());
        Tensor t(s);
        get_f32_array(is, t.data, "tensor '" + name + "'");
        ckpt.params[name] = std::move(t);
    }
    const auto has_opt = get_le<std::uint8_t>(is, "optimizer flag");
    if (has_opt) {
        ckpt.has_optimizer = true;
        ckpt.adam_step = std::int64_t(get_le<std::uint64_t>(is, "adam step"));
        for (const auto& [name, t] : ckpt.params) {
            Tensor m(t.shape), v(t.shape);
            get_f32_array(is, m.data, "adam m for '" + name + "'");
            get_f32_array(is, v.data, "adam v for '" + name + "'");
            ckpt.adam_m[name] = std::move(m);
            ckpt.adam_v[name] = std::move(v);
        }
    }
    return ckpt;
}

}  // namespace hasn::ckpt
