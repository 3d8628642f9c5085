#include "sogr/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sogr/errors.hpp"

namespace sogr {

namespace {

using Kind = CheckpointError::Kind;

constexpr char kMagic[4] = {'S', 'O', 'G', 'R'};
constexpr size_t kMaxNameLen = 4096;
constexpr size_t kMaxConfigLen = 1 << 20;
constexpr int kMaxRank = 8;

class Writer {
public:
    explicit Writer(const std::filesystem::path& p) : path_(p), f_(p, std::ios::binary | std::ios::trunc) {
        if (!f_) throw DataError("cannot open '" + p.string() + "' for writing");
    }
    void bytes(const void* p, size_t n) { f_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
        bytes(b, 2);
    }
    void u32(std::uint32_t v) {
        const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                                   static_cast<std::uint8_t>(v >> 16),
                                   static_cast<std::uint8_t>(v >> 24)};
        bytes(b, 4);
    }
    void f32_array(const float* p, std::int64_t n) {
        std::uint8_t buf[1 << 16];
        std::int64_t i = 0;
        while (i < n) {
            size_t m = 0;
            for (; m + 4 <= sizeof(buf) && i < n; ++i, m += 4) {
                const std::uint32_t u = std::bit_cast<std::uint32_t>(p[i]);
                buf[m] = static_cast<std::uint8_t>(u);
                buf[m + 1] = static_cast<std::uint8_t>(u >> 8);
                buf[m + 2] = static_cast<std::uint8_t>(u >> 16);
                buf[m + 3] = static_cast<std::uint8_t>(u >> 24);
            }
            bytes(buf, m);
        }
    }
    void finish() {
        f_.flush();
        if (!f_) throw DataError("write to '" + path_.string() + "' failed");
    }

private:
    std::filesystem::path path_;
    std::ofstream f_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& p) : f_(p, std::ios::binary) {
        if (!f_) throw DataError("cannot open checkpoint '" + p.string() + "'");
    }
    void bytes(void* dst, size_t n) {
        f_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(f_.gcount()) != n)
            throw CheckpointError(Kind::truncated, "checkpoint ends unexpectedly");
    }
    std::uint8_t u8() {
        std::uint8_t b;
        bytes(&b, 1);
        return b;
    }
    std::uint16_t u16() {
        std::uint8_t b[2];
        bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        std::uint8_t b[4];
        bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    void f32_array(float* dst, std::int64_t n) {
        std::uint8_t buf[1 << 16];
        std::int64_t i = 0;
        while (i < n) {
            const std::int64_t take = std::min<std::int64_t>(n - i, sizeof(buf) / 4);
            bytes(buf, static_cast<size_t>(take) * 4);
            for (std::int64_t j = 0; j < take; ++j, ++i) {
                const std::uint32_t u = static_cast<std::uint32_t>(buf[j * 4]) |
                                        (static_cast<std::uint32_t>(buf[j * 4 + 1]) << 8) |
                                        (static_cast<std::uint32_t>(buf[j * 4 + 2]) << 16) |
                                        (static_cast<std::uint32_t>(buf[j * 4 + 3]) << 24);
                dst[i] = std::bit_cast<float>(u);
            }
        }
    }
    bool at_eof() { return f_.peek() == std::ifstream::traits_type::eof(); }

private:
    std::ifstream f_;
};

std::string format_f32(float v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

const char* const kConfigKeys[] = {"beta",       "learning_rate", "adam_beta1", "adam_beta2",
                                   "adam_eps",   "batch_size",    "total_steps", "seed",
                                   "optimizer",  "size",          "depth",       "ngf",
                                   "ndf",        "sar_channels",  "n_stride2",   "step"};
constexpr size_t kConfigKeyCount = sizeof(kConfigKeys) / sizeof(kConfigKeys[0]);

std::string config_block(const ReciprocalModel& m, const TrainConfig& c) {
    std::string s;
    auto kv = [&s](const char* k, const std::string& v) {
        s += k;
        s += '=';
        s += v;
        s += '\n';
    };
    kv("beta", format_f32(c.beta));
    kv("learning_rate", format_f32(c.learning_rate));
    kv("adam_beta1", format_f32(c.adam_beta1));
    kv("adam_beta2", format_f32(c.adam_beta2));
    kv("adam_eps", format_f32(c.adam_eps));
    kv("batch_size", std::to_string(c.batch_size));
    kv("total_steps", std::to_string(c.total_steps));
    kv("seed", std::to_string(c.seed));
    kv("optimizer", optimizer_name(c.optimizer));
    kv("size", std::to_string(m.net.size));
    kv("depth", std::to_string(m.net.depth));
    kv("ngf", std::to_string(m.net.ngf));
    kv("ndf", std::to_string(m.net.ndf));
    kv("sar_channels", std::to_string(m.net.sar_channels));
    kv("n_stride2", std::to_string(m.net.n_stride2));
    kv("step", std::to_string(m.step));
    return s;
}

float parse_f32(const std::string& v) {
    char* end = nullptr;
    const float f = std::strtof(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw CheckpointError(Kind::malformed, "bad float '" + v + "' in checkpoint config");
    return f;
}

std::int64_t parse_i64(const std::string& v) {
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw CheckpointError(Kind::malformed, "bad integer '" + v + "' in checkpoint config");
    return n;
}

std::uint64_t parse_u64(const std::string& v) {
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw CheckpointError(Kind::malformed, "bad integer '" + v + "' in checkpoint config");
    return n;
}

struct ParsedConfig {
    TrainConfig train;
    NetConfig net;
    std::int64_t step = 0;
};

ParsedConfig parse_config_block(const std::string& s) {
    std::vector<std::string> values;
    size_t pos = 0, key_idx = 0;
    while (pos < s.size()) {
        const size_t nl = s.find('\n', pos);
        if (nl == std::string::npos)
            throw CheckpointError(Kind::malformed, "checkpoint config line missing newline");
        const std::string line = s.substr(pos, nl - pos);
        pos = nl + 1;
        const size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw CheckpointError(Kind::malformed, "checkpoint config line '" + line +
                                                       "' is not key=value");
        const std::string key = line.substr(0, eq);
        if (key_idx >= kConfigKeyCount || key != kConfigKeys[key_idx])
            throw CheckpointError(Kind::malformed, "unexpected checkpoint config key '" + key + "'");
        values.push_back(line.substr(eq + 1));
        ++key_idx;
    }
    if (key_idx != kConfigKeyCount)
        throw CheckpointError(Kind::malformed, "checkpoint config block incomplete");

    ParsedConfig p;
    p.train.beta = parse_f32(values[0]);
    p.train.learning_rate = parse_f32(values[1]);
    p.train.adam_beta1 = parse_f32(values[2]);
    p.train.adam_beta2 = parse_f32(values[3]);
    p.train.adam_eps = parse_f32(values[4]);
    p.train.batch_size = static_cast<int>(parse_i64(values[5]));
    p.train.total_steps = static_cast<int>(parse_i64(values[6]));
    p.train.seed = parse_u64(values[7]);
    p.net.size = static_cast<int>(parse_i64(values[9]));
    p.net.depth = static_cast<int>(parse_i64(values[10]));
    p.net.ngf = static_cast<int>(parse_i64(values[11]));
    p.net.ndf = static_cast<int>(parse_i64(values[12]));
    p.net.sar_channels = static_cast<int>(parse_i64(values[13]));
    p.net.n_stride2 = static_cast<int>(parse_i64(values[14]));
    p.step = parse_i64(values[15]);
    try {
        p.train.optimizer = optimizer_from_name(values[8]);
        p.net.validate();
        p.train.validate();
    } catch (const CheckpointError&) {
        throw;
    } catch (const Error& e) {
        throw CheckpointError(Kind::malformed, std::string("invalid checkpoint config: ") + e.what());
    }
    if (p.step < 0) throw CheckpointError(Kind::malformed, "negative step counter");
    return p;
}

template <class Model, class Fn>
void visit_param_entries(Model& m, Fn&& fn) {
    auto net = [&fn](const char* prefix, auto& params) {
        params.for_each_tensor([&fn, prefix](const std::string& path, auto& t) {
            fn(std::string(prefix) + "/" + path, t);
        });
    };
    net("t_s2o", m.t_s2o);
    net("t_o2s", m.t_o2s);
    net("d_opt", m.d_opt);
    net("d_sar", m.d_sar);
}

void write_record(Writer& w, const std::string& name, const Tensor& t) {
    if (name.size() > kMaxNameLen) throw ContractError("checkpoint tensor name too long: " + name);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) w.u32(static_cast<std::uint32_t>(t.dim(i)));
    w.f32_array(t.data(), t.numel());
}

struct RecordHead {
    std::string name;
    std::vector<int> shape;
};

RecordHead read_record_head(Reader& r) {
    RecordHead h;
    const std::uint16_t nlen = r.u16();
    if (nlen == 0 || nlen > kMaxNameLen)
        throw CheckpointError(Kind::malformed, "bad tensor name length");
    h.name.resize(nlen);
    r.bytes(h.name.data(), nlen);
    const int rank = r.u8();
    if (rank < 1 || rank > kMaxRank)
        throw CheckpointError(Kind::malformed, "tensor '" + h.name + "' has bad rank " +
                                                   std::to_string(rank));
    std::int64_t numel = 1;
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32();
        if (d < 1 || d > (1u << 30))
            throw CheckpointError(Kind::malformed, "tensor '" + h.name + "' has bad dimension");
        numel *= d;
        if (numel > (std::int64_t(1) << 31))
            throw CheckpointError(Kind::malformed, "tensor '" + h.name + "' is implausibly large");
        h.shape.push_back(static_cast<int>(d));
    }
    return h;
}

}  // namespace

void save_checkpoint(const ReciprocalModel& model, const TrainConfig& cfg,
                     const std::filesystem::path& path) {
    cfg.validate();
    model.net.validate();

    std::vector<std::pair<std::string, const Tensor*>> entries;
    visit_param_entries(model, [&entries](const std::string& p, const Tensor& t) {
        entries.emplace_back(p, &t);
    });
    std::vector<std::pair<std::string, const AdamState*>> adam;
    for (const auto& e : entries) {
        if (auto it = model.adam.find(e.first); it != model.adam.end())
            adam.emplace_back(e.first, &it->second);
    }
    if (adam.size() != model.adam.size())
        throw ContractError("optimizer state holds tensors not present in the model");

    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    const std::string cb = config_block(model, cfg);
    w.u32(static_cast<std::uint32_t>(cb.size()));
    w.bytes(cb.data(), cb.size());
    w.u32(static_cast<std::uint32_t>(entries.size() + 2 * adam.size()));
    for (const auto& e : entries) write_record(w, e.first, *e.second);
    for (const auto& a : adam) {
        write_record(w, "adam/" + a.first + "/m", a.second->m);
        write_record(w, "adam/" + a.first + "/v", a.second->v);
    }
    w.finish();
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError(Kind::bad_magic, "not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError(Kind::bad_version, "unsupported checkpoint version " +
                                                     std::to_string(version));
    const std::uint32_t cblen = r.u32();
    if (cblen == 0 || cblen > kMaxConfigLen)
        throw CheckpointError(Kind::malformed, "bad config block length");
    std::string cb(cblen, '\0');
    r.bytes(cb.data(), cblen);
    const ParsedConfig pc = parse_config_block(cb);

    LoadedCheckpoint out;
    out.config = pc.train;
    ReciprocalModel& m = out.model;
    m.net = pc.net;
    m.step = pc.step;
    m.t_s2o = translator_param_shapes(pc.net.t_s2o_config());
    m.t_o2s = translator_param_shapes(pc.net.t_o2s_config());
    m.d_opt = discriminator_param_shapes(pc.net.d_opt_config());
    m.d_sar = discriminator_param_shapes(pc.net.d_sar_config());

    std::vector<std::pair<std::string, Tensor*>> entries;
    visit_param_entries(m, [&entries](const std::string& p, Tensor& t) {
        entries.emplace_back(p, &t);
    });
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < entries.size(); ++i) index.emplace(entries[i].first, i);

    const std::uint32_t count = r.u32();
    if (count < entries.size())
        throw CheckpointError(Kind::malformed,
                              "checkpoint lists " + std::to_string(count) + " tensors, model needs " +
                                  std::to_string(entries.size()));

    for (auto& e : entries) {
        const RecordHead h = read_record_head(r);
        if (h.name != e.first)
            throw CheckpointError(Kind::malformed, "expected tensor '" + e.first + "', found '" +
                                                       h.name + "'");
        if (h.shape != e.second->shape())
            throw CheckpointError(Kind::shape_mismatch,
                                  "tensor '" + h.name + "' has shape " + shape_str(h.shape) +
                                      ", expected " + shape_str(e.second->shape()));
        r.f32_array(e.second->data(), e.second->numel());
    }

    const std::uint32_t extra = count - static_cast<std::uint32_t>(entries.size());
    if (extra % 2 != 0)
        throw CheckpointError(Kind::malformed, "odd number of optimizer-state tensors");
    size_t cursor = 0;
    for (std::uint32_t pair = 0; pair < extra / 2; ++pair) {
        const RecordHead hm = read_record_head(r);
        if (hm.name.size() < 8 || hm.name.compare(0, 5, "adam/") != 0 ||
            hm.name.compare(hm.name.size() - 2, 2, "/m") != 0)
            throw CheckpointError(Kind::malformed, "unexpected tensor '" + hm.name + "'");
        const std::string path_key = hm.name.substr(5, hm.name.size() - 7);
        auto it = index.find(path_key);
        if (it == index.end() || it->second < cursor)
            throw CheckpointError(Kind::malformed, "optimizer state for unknown or out-of-order "
                                                   "tensor '" + path_key + "'");
        Tensor* param = entries[it->second].second;
        cursor = it->second + 1;
        if (hm.shape != param->shape())
            throw CheckpointError(Kind::shape_mismatch, "tensor '" + hm.name + "' has shape " +
                                                            shape_str(hm.shape) + ", expected " +
                                                            shape_str(param->shape()));
        AdamState st;
        st.m = Tensor(param->shape());
        r.f32_array(st.m.data(), st.m.numel());

        const RecordHead hv = read_record_head(r);
        if (hv.name != "adam/" + path_key + "/v")
            throw CheckpointError(Kind::malformed, "expected tensor 'adam/" + path_key +
                                                       "/v', found '" + hv.name + "'");
        if (hv.shape != param->shape())
            throw CheckpointError(Kind::shape_mismatch, "tensor '" + hv.name + "' has shape " +
                                                            shape_str(hv.shape) + ", expected " +
                                                            shape_str(param->shape()));
        st.v = Tensor(param->shape());
        r.f32_array(st.v.data(), st.v.numel());
        m.adam.emplace(path_key, std::move(st));
    }

    if (!r.at_eof())
        throw CheckpointError(Kind::malformed, "trailing bytes after last tensor");
    return out;
}

}  // namespace sogr
