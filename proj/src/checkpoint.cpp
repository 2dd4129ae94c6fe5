#include "neq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace neq {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'N', 'E', 'Q', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NeuralEqModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    const NeuralEqConfig& cfg = model.config();
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(cfg.T));
    write_u32(out, static_cast<std::uint32_t>(cfg.D));
    write_u32(out, static_cast<std::uint32_t>(cfg.N));
    write_u32(out, static_cast<std::uint32_t>(cfg.mod_order));

    const ParamStore& store = model.store();
    out.write(reinterpret_cast<const char*>(store.values.data()),
              static_cast<std::streamsize>(store.values.size() * sizeof(double)));

    std::vector<std::uint8_t> packed((store.mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < store.mask.size(); ++i)
        if (store.mask[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

NeuralEqModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a NEQ1 checkpoint");
    const std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));

    NeuralEqConfig cfg;
    cfg.T = static_cast<int>(read_u32(in));
    cfg.D = static_cast<int>(read_u32(in));
    cfg.N = static_cast<int>(read_u32(in));
    cfg.mod_order = static_cast<int>(read_u32(in));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint header");

    NeuralEqModel model(cfg);
    ParamStore& store = model.store();
    store.allocate();
    in.read(reinterpret_cast<char*>(store.values.data()),
            static_cast<std::streamsize>(store.values.size() * sizeof(double)));
    std::vector<std::uint8_t> packed((store.mask.size() + 7) / 8, 0);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint body");
    for (std::size_t i = 0; i < store.mask.size(); ++i)
        store.mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
    store.apply_mask();
    return model;
}

}  // namespace neq
