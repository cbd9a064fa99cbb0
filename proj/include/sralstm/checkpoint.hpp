#pragma once

// Binary checkpoint archive.
//
// Layout (all integers little-endian):
//
//   offset  size        field
//   0       8           magic "SRACKPT\0"
//   8       4           u32 format version (kCheckpointVersion)
//   12      4           u32 header length L
//   16      L           UTF-8 JSON header: config, epoch, seed, loss_history,
//                       optimizer (null or {step, learning_rate, beta1, beta2, epsilon})
//   16+L    4           u32 array count
//           ...         per array: u32 name length, name bytes, u32 rank,
//                       rank x u64 extents, numel x f64 (IEEE-754 binary64)
//   end-8   8           u64 FNV-1a 64 of every preceding byte
//
// Parameters are stored under their own names; optimizer moments under
// "adam.m/<name>" and "adam.v/<name>".

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "diffcore.hpp"
#include "model.hpp"

namespace sralstm {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'R', 'A', 'C', 'K', 'P', 'T', '\0'};

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { missing_file, corrupt_payload, version_mismatch, shape_mismatch, io };

    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct TrainingMeta {
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    std::vector<double> loss_history;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    ModelConfig config;
    NamedTensors params;
    std::optional<AdamState> optimizer;
    TrainingMeta meta;
};

inline Checkpoint make_checkpoint(const ModelParams& params, const AdamState* adam, TrainingMeta meta) {
    Checkpoint ck;
    ck.config = params.config();
    for (const auto& [name, t] : params.tensors()) ck.params.emplace(name, Tensor(t.shape, t.values));
    if (adam) ck.optimizer = *adam;
    ck.meta = std::move(meta);
    return ck;
}

namespace detail {

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    template <class T>
    void le(T v) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        U u = std::bit_cast<U>(v);
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<unsigned char>(u >> (8 * i)));
    }
    void str(std::string_view s) {
        le(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::vector<unsigned char>& bytes() { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

class ByteReader {
public:
    ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

    void need(std::size_t k) const {
        if (k > n_ - pos_) throw CheckpointError(CheckpointError::Kind::corrupt_payload, "checkpoint: truncated payload");
    }
    template <class T>
    T le() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        need(sizeof(U));
        U u = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(p_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return std::bit_cast<T>(u);
    }
    std::string str(std::size_t max_len = 1u << 20) {
        const auto len = le<std::uint32_t>();
        if (len > max_len) throw CheckpointError(CheckpointError::Kind::corrupt_payload, "checkpoint: bad string length");
        need(len);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
        pos_ += len;
        return s;
    }
    std::size_t remaining() const { return n_ - pos_; }

private:
    const unsigned char* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a64(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ull;
    return h;
}

inline void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
    w.str(name);
    w.le(static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) w.le(static_cast<std::uint64_t>(e));
    for (double v : t.values) w.le(v);
}

inline nlohmann::json config_json(const ModelConfig& c) {
    return {{"embed_dim", c.embed_dim},
            {"hidden_dim", c.hidden_dim},
            {"strategy", std::string(to_string(c.strategy))},
            {"obs_len", c.obs_len},
            {"pred_len", c.pred_len}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.obs_len = j.at("obs_len").get<std::size_t>();
    c.pred_len = j.at("pred_len").get<std::size_t>();
    c.validate();
    return c;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
    nlohmann::json header = {{"config", detail::config_json(ck.config)},
                             {"epoch", ck.meta.epoch},
                             {"seed", ck.meta.seed},
                             {"loss_history", ck.meta.loss_history},
                             {"optimizer", nullptr}};
    if (ck.optimizer) {
        const auto& a = *ck.optimizer;
        header["optimizer"] = {{"step", a.step},
                               {"learning_rate", a.config.learning_rate},
                               {"beta1", a.config.beta1},
                               {"beta2", a.config.beta2},
                               {"epsilon", a.config.epsilon}};
    }
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
    w.le(ck.version);
    w.str(header.dump());
    std::uint32_t count = static_cast<std::uint32_t>(ck.params.size());
    if (ck.optimizer) count += static_cast<std::uint32_t>(ck.optimizer->first_moment.size() + ck.optimizer->second_moment.size());
    w.le(count);
    for (const auto& [name, t] : ck.params) detail::write_tensor(w, name, t);
    if (ck.optimizer) {
        for (const auto& [name, t] : ck.optimizer->first_moment) detail::write_tensor(w, "adam.m/" + name, t);
        for (const auto& [name, t] : ck.optimizer->second_moment) detail::write_tensor(w, "adam.v/" + name, t);
    }
    const auto h = detail::fnv1a64(w.bytes().data(), w.bytes().size());
    w.le(h);
    return std::move(w.bytes());
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
    using K = CheckpointError::Kind;
    if (bytes.size() < sizeof kCheckpointMagic + 4 + 8 ||
        std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw CheckpointError(K::corrupt_payload, "checkpoint: bad magic or truncated file");
    detail::ByteReader r(bytes.data() + sizeof kCheckpointMagic, bytes.size() - sizeof kCheckpointMagic);
    Checkpoint ck;
    ck.version = r.le<std::uint32_t>();
    if (ck.version != kCheckpointVersion)
        throw CheckpointError(K::version_mismatch, "checkpoint: format version " + std::to_string(ck.version) +
                                                       ", this build reads " + std::to_string(kCheckpointVersion));
    detail::ByteReader trailer(bytes.data() + bytes.size() - 8, 8);
    if (trailer.le<std::uint64_t>() != detail::fnv1a64(bytes.data(), bytes.size() - 8))
        throw CheckpointError(K::corrupt_payload, "checkpoint: checksum mismatch (truncated or corrupt file)");
    try {
        const auto header = nlohmann::json::parse(r.str(1u << 26));
        ck.config = detail::config_from_json(header.at("config"));
        ck.meta.epoch = header.at("epoch").get<std::uint64_t>();
        ck.meta.seed = header.at("seed").get<std::uint64_t>();
        ck.meta.loss_history = header.at("loss_history").get<std::vector<double>>();
        const auto& opt = header.at("optimizer");
        if (!opt.is_null()) {
            AdamConfig ac{opt.at("learning_rate").get<double>(), opt.at("beta1").get<double>(),
                          opt.at("beta2").get<double>(), opt.at("epsilon").get<double>()};
            ck.optimizer = AdamState(ac);
            ck.optimizer->step = opt.at("step").get<std::uint64_t>();
        }
        const auto count = r.le<std::uint32_t>();
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::string name = r.str();
            const auto rank = r.le<std::uint32_t>();
            if (rank == 0 || rank > 8) throw CheckpointError(K::corrupt_payload, "checkpoint: bad rank for " + name);
            Shape shape;
            std::size_t n = 1;
            for (std::uint32_t d = 0; d < rank; ++d) {
                const auto e = r.le<std::uint64_t>();
                if (e == 0 || e > (1ull << 32)) throw CheckpointError(K::corrupt_payload, "checkpoint: bad extent for " + name);
                shape.push_back(static_cast<std::size_t>(e));
                n *= static_cast<std::size_t>(e);
            }
            r.need(n * 8);
            std::vector<double> values(n);
            for (auto& v : values) v = r.le<double>();
            Tensor t(shape, std::move(values));
            if (name.starts_with("adam.m/")) {
                if (!ck.optimizer) throw CheckpointError(K::corrupt_payload, "checkpoint: moments without optimizer");
                ck.optimizer->first_moment.emplace(name.substr(7), std::move(t));
            } else if (name.starts_with("adam.v/")) {
                if (!ck.optimizer) throw CheckpointError(K::corrupt_payload, "checkpoint: moments without optimizer");
                ck.optimizer->second_moment.emplace(name.substr(7), std::move(t));
            } else {
                ck.params.emplace(name, std::move(t));
            }
        }
        if (r.remaining() != 8) throw CheckpointError(K::corrupt_payload, "checkpoint: trailing bytes");
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(K::corrupt_payload, std::string("checkpoint: malformed payload: ") + e.what());
    }
    return ck;
}

/// Writes to a sibling temporary file and renames it into place.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    const auto bytes = encode_checkpoint(ck);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot write " + tmp.string());
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError(CheckpointError::Kind::missing_file, "checkpoint: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

/// Copies checkpoint parameters into `target`. Every tensor of the target must
/// be present with an identical shape; on any mismatch `target` is untouched.
inline void restore_params(ModelParams& target, const Checkpoint& ck) {
    using K = CheckpointError::Kind;
    for (const auto& [name, t] : target.tensors()) {
        auto it = ck.params.find(name);
        if (it == ck.params.end()) throw CheckpointError(K::shape_mismatch, "checkpoint: missing tensor '" + name + "'");
        if (it->second.shape != t.shape)
            throw CheckpointError(K::shape_mismatch, "checkpoint: tensor '" + name + "' has shape " +
                                                         shape_str(it->second.shape) + ", model expects " +
                                                         shape_str(t.shape));
    }
    for (const auto& [name, _] : ck.params)
        if (!target.contains(name))
            throw CheckpointError(K::shape_mismatch, "checkpoint: unexpected tensor '" + name + "'");
    for (auto& [name, t] : target.tensors()) t.values = ck.params.at(name).values;
}

inline ModelParams params_from_checkpoint(const Checkpoint& ck) {
    ModelParams p = ModelParams::zeros(ck.config);
    restore_params(p, ck);
    return p;
}

}  // namespace sralstm
