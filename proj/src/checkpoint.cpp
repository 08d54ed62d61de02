#include "ood/uen.hpp"

#include <cstring>
#include <fstream>

namespace ood {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static std::uint32_t table[256];
    static bool built = false;
    if (!built) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int j = 0; j < 8; ++j)
                c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
            table[i] = c;
        }
        built = true;
    }
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

struct Writer {
    std::vector<std::uint8_t> buf;

    void u8(std::uint8_t v) { buf.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf.insert(buf.end(), s.begin(), s.end());
    }
};

struct Reader {
    const std::uint8_t* data;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > len) throw TruncationError("checkpoint payload ends mid-field");
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data[pos++]) << (8 * i);
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const UenWeights& w, const UenConfig& cfg, const std::string& path) {
    Writer p;
    p.u32(static_cast<std::uint32_t>(cfg.k_mixture));
    p.f64(cfg.lambda);
    p.f64(cfg.lr);
    p.u32(static_cast<std::uint32_t>(cfg.batch_size));
    p.u32(static_cast<std::uint32_t>(cfg.epochs));
    p.u64(cfg.seed);
    p.u8(cfg.early_stop ? 1 : 0);
    p.f64(cfg.plateau_tol);
    p.u32(static_cast<std::uint32_t>(cfg.plateau_epochs));
    p.u32(static_cast<std::uint32_t>(cfg.decoder_width));
    p.u32(static_cast<std::uint32_t>(cfg.branch_widths.size()));
    for (int v : cfg.branch_widths) p.u32(static_cast<std::uint32_t>(v));
    p.str(cfg.strategy);

    // Architecture descriptor, then the weights, in layer order.
    std::uint32_t n_layers = 0;
    w.for_each_layer([&](const ConvParams&) { ++n_layers; });
    p.u32(n_layers);
    w.for_each_layer([&](const ConvParams& l) {
        p.u32(static_cast<std::uint32_t>(l.c_out));
        p.u32(static_cast<std::uint32_t>(l.c_in));
        p.u32(static_cast<std::uint32_t>(l.k));
        p.u32(static_cast<std::uint32_t>(l.stride));
        p.u32(static_cast<std::uint32_t>(l.padding));
    });
    w.for_each_layer([&](const ConvParams& l) {
        for (float v : l.kernel) p.f32(v);
        for (float v : l.bias) p.f32(v);
    });

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint: " + path);
    out.write("UENC", 4);
    Writer hdr;
    hdr.u32(kCheckpointVersion);
    hdr.u32(static_cast<std::uint32_t>(p.buf.size()));
    hdr.u32(crc32(p.buf.data(), p.buf.size()));
    out.write(reinterpret_cast<const char*>(hdr.buf.data()),
              static_cast<std::streamsize>(hdr.buf.size()));
    out.write(reinterpret_cast<const char*>(p.buf.data()),
              static_cast<std::streamsize>(p.buf.size()));
    if (!out) throw FormatError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    if (!in.read(magic, 4)) throw TruncationError("checkpoint header truncated");
    if (std::memcmp(magic, "UENC", 4) != 0) throw FormatError("bad checkpoint magic");

    std::uint8_t hdr[12];
    if (!in.read(reinterpret_cast<char*>(hdr), 12))
        throw TruncationError("checkpoint header truncated");
    Reader hr{hdr, 12};
    const std::uint32_t version = hr.u32();
    if (version != kCheckpointVersion)
        throw VersionError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t payload_size = hr.u32();
    const std::uint32_t stored_crc = hr.u32();

    std::vector<std::uint8_t> payload(payload_size);
    if (payload_size > 0 &&
        !in.read(reinterpret_cast<char*>(payload.data()), payload_size))
        throw TruncationError("checkpoint payload truncated");
    if (crc32(payload.data(), payload.size()) != stored_crc)
        throw ChecksumError("checkpoint checksum mismatch");

    Reader r{payload.data(), payload.size()};
    Checkpoint ck;
    ck.config.k_mixture = static_cast<int>(r.u32());
    ck.config.lambda = r.f64();
    ck.config.lr = r.f64();
    ck.config.batch_size = static_cast<int>(r.u32());
    ck.config.epochs = static_cast<int>(r.u32());
    ck.config.seed = r.u64();
    ck.config.early_stop = r.u8() != 0;
    ck.config.plateau_tol = r.f64();
    ck.config.plateau_epochs = static_cast<int>(r.u32());
    ck.config.decoder_width = static_cast<int>(r.u32());
    const std::uint32_t n_widths = r.u32();
    ck.config.branch_widths.clear();
    for (std::uint32_t i = 0; i < n_widths; ++i)
        ck.config.branch_widths.push_back(static_cast<int>(r.u32()));
    ck.config.strategy = r.str();

    ck.weights = init_weights(ck.config);
    std::uint32_t n_layers_expected = 0;
    ck.weights.for_each_layer([&](const ConvParams&) { ++n_layers_expected; });
    const std::uint32_t n_layers = r.u32();
    if (n_layers != n_layers_expected)
        throw FormatError("checkpoint architecture descriptor does not match config");
    ck.weights.for_each_layer([&](ConvParams& l) {
        if (r.u32() != static_cast<std::uint32_t>(l.c_out) ||
            r.u32() != static_cast<std::uint32_t>(l.c_in) ||
            r.u32() != static_cast<std::uint32_t>(l.k) ||
            r.u32() != static_cast<std::uint32_t>(l.stride) ||
            r.u32() != static_cast<std::uint32_t>(l.padding))
            throw FormatError("checkpoint layer shape does not match config");
    });
    ck.weights.for_each_layer([&](ConvParams& l) {
        for (float& v : l.kernel) v = r.f32();
        for (float& v : l.bias) v = r.f32();
    });
    if (r.pos != payload.size())
        throw FormatError("checkpoint payload longer than expected");
    return ck;
}

}  // namespace ood
