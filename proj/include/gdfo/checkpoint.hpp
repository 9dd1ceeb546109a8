#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gdfo/errors.hpp"
#include "gdfo/random.hpp"

namespace gdfo {

// Self-describing binary container shared by model checkpoints, CMA-ES
// snapshots and trainer snapshots. Layout (all little-endian):
//
//   bytes 0..7   magic "GDFOCKPT"
//   u32          format version (currently 1)
//   u32          number of scalars
//   per scalar   u32 name length, name bytes, f64 value
//   u32          number of tensors
//   per tensor   u32 name length, name bytes, u32 ndim, u64 dims..., f64 data...
//
// Entries are written in insertion order, so a writer that always inserts in
// a fixed order produces byte-identical files for identical contents.
class Checkpoint {
  public:
    static constexpr std::uint32_t kVersion = 1;
    static constexpr char kMagic[9] = "GDFOCKPT";

    struct TensorEntry {
        std::string name;
        std::vector<std::uint64_t> shape;
        std::vector<double> data;
    };

    void put_scalar(const std::string& name, double v) {
        scalars_.push_back({name, v});
    }

    void put_tensor(const std::string& name, std::vector<std::uint64_t> shape,
                    std::vector<double> data) {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        if (n != data.size())
            throw ContractError("checkpoint tensor '" + name + "': shape/data size mismatch");
        tensors_.push_back({name, std::move(shape), std::move(data)});
    }

    bool has_scalar(const std::string& name) const {
        for (const auto& s : scalars_)
            if (s.first == name) return true;
        return false;
    }

    double scalar(const std::string& name) const {
        for (const auto& s : scalars_)
            if (s.first == name) return s.second;
        throw ContractError("checkpoint: missing scalar '" + name + "'");
    }

    bool has_tensor(const std::string& name) const {
        for (const auto& t : tensors_)
            if (t.name == name) return true;
        return false;
    }

    const TensorEntry& tensor(const std::string& name) const {
        for (const auto& t : tensors_)
            if (t.name == name) return t;
        throw ContractError("checkpoint: missing tensor '" + name + "'");
    }

    const std::vector<std::pair<std::string, double>>& scalars() const { return scalars_; }
    const std::vector<TensorEntry>& tensors() const { return tensors_; }

    std::vector<std::uint8_t> serialize() const {
        static_assert(std::endian::native == std::endian::little,
                      "checkpoint writer assumes a little-endian host");
        std::vector<std::uint8_t> out;
        append_bytes(out, kMagic, 8);
        append_u32(out, kVersion);
        append_u32(out, static_cast<std::uint32_t>(scalars_.size()));
        for (const auto& [name, value] : scalars_) {
            append_u32(out, static_cast<std::uint32_t>(name.size()));
            append_bytes(out, name.data(), name.size());
            append_f64(out, value);
        }
        append_u32(out, static_cast<std::uint32_t>(tensors_.size()));
        for (const auto& t : tensors_) {
            append_u32(out, static_cast<std::uint32_t>(t.name.size()));
            append_bytes(out, t.name.data(), t.name.size());
            append_u32(out, static_cast<std::uint32_t>(t.shape.size()));
            for (auto d : t.shape) append_u64(out, d);
            append_bytes(out, t.data.data(), t.data.size() * sizeof(double));
        }
        return out;
    }

    static Checkpoint parse(const std::vector<std::uint8_t>& bytes) {
        Reader r{bytes, 0};
        char magic[8];
        r.read(magic, 8);
        if (std::memcmp(magic, kMagic, 8) != 0)
            throw ContractError("checkpoint: bad magic");
        const auto version = r.u32();
        if (version != kVersion)
            throw ContractError("checkpoint: unsupported version " + std::to_string(version));
        Checkpoint ck;
        const auto n_scalars = r.u32();
        for (std::uint32_t i = 0; i < n_scalars; ++i) {
            std::string name = r.string(r.u32());
            ck.scalars_.push_back({std::move(name), r.f64()});
        }
        const auto n_tensors = r.u32();
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            TensorEntry t;
            t.name = r.string(r.u32());
            const auto ndim = r.u32();
            std::uint64_t n = 1;
            t.shape.resize(ndim);
            for (auto& d : t.shape) {
                d = r.u64();
                n *= d;
            }
            t.data.resize(n);
            r.read(t.data.data(), n * sizeof(double));
            ck.tensors_.push_back(std::move(t));
        }
        return ck;
    }

    void save(const std::string& path) const {
        const auto bytes = serialize();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ServiceError("cannot open '" + path + "' for writing");
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f) throw ServiceError("short write to '" + path + "'");
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary | std::ios::ate);
        if (!f) throw ServiceError("cannot open '" + path + "'");
        const auto size = static_cast<std::size_t>(f.tellg());
        f.seekg(0);
        std::vector<std::uint8_t> bytes(size);
        f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
        if (!f) throw ServiceError("short read from '" + path + "'");
        return parse(bytes);
    }

    std::uint64_t checksum() const {
        const auto bytes = serialize();
        return fnv1a64(bytes.data(), bytes.size());
    }

  private:
    struct Reader {
        const std::vector<std::uint8_t>& bytes;
        std::size_t pos;

        void read(void* dst, std::size_t n) {
            if (pos + n > bytes.size()) throw ContractError("checkpoint: truncated file");
            std::memcpy(dst, bytes.data() + pos, n);
            pos += n;
        }
        std::uint32_t u32() {
            std::uint32_t v;
            read(&v, 4);
            return v;
        }
        std::uint64_t u64() {
            std::uint64_t v;
            read(&v, 8);
            return v;
        }
        double f64() {
            double v;
            read(&v, 8);
            return v;
        }
        std::string string(std::uint32_t len) {
            std::string s(len, '\0');
            read(s.data(), len);
            return s;
        }
    };

    static void append_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    static void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
        append_bytes(out, &v, 4);
    }
    static void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
        append_bytes(out, &v, 8);
    }
    static void append_f64(std::vector<std::uint8_t>& out, double v) {
        append_bytes(out, &v, 8);
    }

    std::vector<std::pair<std::string, double>> scalars_;
    std::vector<TensorEntry> tensors_;
};

}  // namespace gdfo
