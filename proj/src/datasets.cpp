#include "ood/datasets.hpp"

#include "ood/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ood {

namespace {

std::uint32_t read_u32_be(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncationError(std::string("unexpected end of file reading ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::uint32_t read_u32_le(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncationError(std::string("unexpected end of file reading ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

constexpr std::uint32_t kImgbVersion = 1;

// A gentle linear ramp confined to one 8-level histogram bin, so the whole
// channel quantizes into a single bin at the oracle's default 32 bins.
void narrow_gradient_channel(Rng& rng, std::uint8_t* ch, int h, int w) {
    const int bin = 2 + static_cast<int>(rng.next_below(28));
    const double base = bin * 8 + 1;
    const double span = rng.uniform(0.0, 5.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double dx = std::cos(angle), dy = std::sin(angle);
    double pmin = 1e30, pmax = -1e30;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double p = dx * x + dy * y;
            pmin = std::min(pmin, p);
            pmax = std::max(pmax, p);
        }
    const double scale = (pmax > pmin) ? 1.0 / (pmax - pmin) : 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double p = (dx * x + dy * y - pmin) * scale;
            ch[y * w + x] = static_cast<std::uint8_t>(std::lround(base + span * p));
        }
}

void wide_gradient_channel(Rng& rng, std::uint8_t* ch, int h, int w) {
    const double base = static_cast<double>(rng.next_below(64));
    const double span = rng.uniform(96.0, 191.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double dx = std::cos(angle), dy = std::sin(angle);
    double pmin = 1e30, pmax = -1e30;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double p = dx * x + dy * y;
            pmin = std::min(pmin, p);
            pmax = std::max(pmax, p);
        }
    const double scale = (pmax > pmin) ? 1.0 / (pmax - pmin) : 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double p = (dx * x + dy * y - pmin) * scale;
            double v = std::clamp(base + span * p, 0.0, 255.0);
            ch[y * w + x] = static_cast<std::uint8_t>(std::lround(v));
        }
}

// Band-limited texture: a coarse random grid bilinearly upsampled.
void value_noise_channel(Rng& rng, std::uint8_t* ch, int h, int w, int grid) {
    std::vector<double> g(static_cast<std::size_t>(grid) * grid);
    for (double& v : g) v = static_cast<double>(rng.next_below(256));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gy = static_cast<double>(y) * (grid - 1) / (h - 1);
            double gx = static_cast<double>(x) * (grid - 1) / (w - 1);
            int y0 = std::min(static_cast<int>(gy), grid - 2);
            int x0 = std::min(static_cast<int>(gx), grid - 2);
            double fy = gy - y0, fx = gx - x0;
            double v = g[y0 * grid + x0] * (1 - fy) * (1 - fx) +
                       g[y0 * grid + x0 + 1] * (1 - fy) * fx +
                       g[(y0 + 1) * grid + x0] * fy * (1 - fx) +
                       g[(y0 + 1) * grid + x0 + 1] * fy * fx;
            ch[y * w + x] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
}

ImageDataset make_dataset(int n, const std::string& name, const std::string& prov) {
    if (n < 0) throw std::invalid_argument("dataset size must be >= 0");
    ImageDataset ds;
    ds.n = n;
    ds.data.assign(static_cast<std::size_t>(n) * 3 * 32 * 32, 0);
    ds.name = name;
    ds.provenance = prov;
    return ds;
}

}  // namespace

Tensor ImageDataset::normalized(int i) const {
    Tensor t({c, h, w});
    const std::uint8_t* src = image(i);
    for (std::size_t j = 0; j < image_size(); ++j)
        t.data[j] = static_cast<float>(src[j]) * (2.0f / 255.0f) - 1.0f;
    return t;
}

std::vector<std::uint8_t> gray_to_rgb(const std::vector<std::uint8_t>& x, int h, int w,
                                      int channels) {
    if (channels != 1)
        throw std::invalid_argument("gray_to_rgb expects a 1-channel image, got " +
                                    std::to_string(channels));
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    if (x.size() != plane) throw std::invalid_argument("gray_to_rgb: size mismatch");
    std::vector<std::uint8_t> out(plane * 3);
    for (int c = 0; c < 3; ++c) std::memcpy(out.data() + c * plane, x.data(), plane);
    return out;
}

std::vector<std::uint8_t> resize_bilinear(const std::uint8_t* src, int c, int h, int w,
                                          int oh, int ow) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(c) * oh * ow);
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int cc = 0; cc < c; ++cc) {
        const std::uint8_t* in = src + static_cast<std::size_t>(cc) * h * w;
        std::uint8_t* dst = out.data() + static_cast<std::size_t>(cc) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
            int y0 = static_cast<int>(fy);
            int y1 = std::min(y0 + 1, h - 1);
            double wy = fy - y0;
            for (int x = 0; x < ow; ++x) {
                double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
                int x0 = static_cast<int>(fx);
                int x1 = std::min(x0 + 1, w - 1);
                double wx = fx - x0;
                double v = in[y0 * w + x0] * (1 - wy) * (1 - wx) +
                           in[y0 * w + x1] * (1 - wy) * wx +
                           in[y1 * w + x0] * wy * (1 - wx) + in[y1 * w + x1] * wy * wx;
                dst[y * ow + x] = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

ImageDataset load_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open IDX file: " + path);
    const std::uint32_t magic = read_u32_be(in, "IDX magic");
    if (magic != 0x00000803u)
        throw FormatError("bad IDX magic (expected 0x00000803): " + path);
    const std::uint32_t n = read_u32_be(in, "IDX count");
    const std::uint32_t h = read_u32_be(in, "IDX height");
    const std::uint32_t w = read_u32_be(in, "IDX width");
    if (h == 0 || w == 0 || h > 4096 || w > 4096 || n > 10'000'000u)
        throw FormatError("IDX dimensions out of range");

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<std::uint8_t> raw(plane);
    ImageDataset ds = make_dataset(static_cast<int>(n), path, "idx:" + path);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(plane)))
            throw TruncationError("IDX payload truncated at image " + std::to_string(i));
        std::vector<std::uint8_t> rgb = gray_to_rgb(raw, static_cast<int>(h),
                                                    static_cast<int>(w), 1);
        std::vector<std::uint8_t> img = rgb;
        if (h != 32 || w != 32)
            img = resize_bilinear(rgb.data(), 3, static_cast<int>(h), static_cast<int>(w), 32, 32);
        std::memcpy(ds.image(static_cast<int>(i)), img.data(), ds.image_size());
    }
    return ds;
}

void save_imgb(const ImageDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write IMGB file: " + path);
    out.write("IMGB", 4);
    write_u32_le(out, kImgbVersion);
    write_u32_le(out, static_cast<std::uint32_t>(ds.n));
    write_u32_le(out, static_cast<std::uint32_t>(ds.c));
    write_u32_le(out, static_cast<std::uint32_t>(ds.h));
    write_u32_le(out, static_cast<std::uint32_t>(ds.w));
    out.write(reinterpret_cast<const char*>(ds.data.data()),
              static_cast<std::streamsize>(ds.data.size()));
    if (!out) throw FormatError("short write to " + path);
}

ImageDataset load_imgb(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open IMGB file: " + path);
    char magic[4];
    if (!in.read(magic, 4)) throw TruncationError("IMGB header truncated: " + path);
    if (std::memcmp(magic, "IMGB", 4) != 0) throw FormatError("bad IMGB magic: " + path);
    const std::uint32_t version = read_u32_le(in, "IMGB version");
    if (version != kImgbVersion)
        throw VersionError("unsupported IMGB version " + std::to_string(version));
    const std::uint32_t n = read_u32_le(in, "IMGB N");
    const std::uint32_t c = read_u32_le(in, "IMGB C");
    const std::uint32_t h = read_u32_le(in, "IMGB H");
    const std::uint32_t w = read_u32_le(in, "IMGB W");

    ImageDataset ds;
    ds.n = static_cast<int>(n);
    ds.c = static_cast<int>(c);
    ds.h = static_cast<int>(h);
    ds.w = static_cast<int>(w);
    ds.name = path;
    ds.provenance = "imgb:" + path;
    const std::size_t total = static_cast<std::size_t>(n) * c * h * w;
    ds.data.resize(total);
    if (total > 0 &&
        !in.read(reinterpret_cast<char*>(ds.data.data()), static_cast<std::streamsize>(total)))
        throw TruncationError("IMGB payload truncated: " + path);
    // Trailing garbage counts as a malformed file.
    char extra;
    if (in.read(&extra, 1)) throw FormatError("IMGB payload longer than header claims: " + path);
    return ds;
}

ImageDataset synth_lowH(int n, std::uint64_t seed) {
    ImageDataset ds = make_dataset(n, "synth_lowH",
                                   "synth:lowh:" + std::to_string(n) + ":" + std::to_string(seed));
    Rng root(seed ^ 0x10F1ULL);
    for (int i = 0; i < n; ++i) {
        Rng rng(root.sub_seed(static_cast<std::uint64_t>(i)));
        for (int c = 0; c < 3; ++c)
            narrow_gradient_channel(rng, ds.image(i) + static_cast<std::size_t>(c) * 1024, 32, 32);
    }
    return ds;
}

ImageDataset synth_highH(int n, std::uint64_t seed) {
    ImageDataset ds = make_dataset(n, "synth_highH",
                                   "synth:highh:" + std::to_string(n) + ":" + std::to_string(seed));
    Rng root(seed ^ 0x417FULL);
    for (int i = 0; i < n; ++i) {
        Rng rng(root.sub_seed(static_cast<std::uint64_t>(i)));
        for (int c = 0; c < 3; ++c) {
            std::uint8_t* ch = ds.image(i) + static_cast<std::size_t>(c) * 1024;
            narrow_gradient_channel(rng, ch, 32, 32);
            for (int y = 8; y < 24; ++y)
                for (int x = 8; x < 24; ++x)
                    ch[y * 32 + x] = static_cast<std::uint8_t>(rng.next_below(256));
        }
    }
    return ds;
}

ImageDataset synth_midH(int n, std::uint64_t seed) {
    ImageDataset ds = make_dataset(n, "synth_midH",
                                   "synth:midh:" + std::to_string(n) + ":" + std::to_string(seed));
    Rng root(seed ^ 0x3117ULL);
    for (int i = 0; i < n; ++i) {
        Rng rng(root.sub_seed(static_cast<std::uint64_t>(i)));
        // One rectangle straddling a boundary of the center 16x16 patch, so
        // its color shows up in both patch and surround.
        const bool vertical = rng.next_below(2) == 0;
        const int boundary = rng.next_below(2) == 0 ? 8 : 24;
        const int a = 2 + static_cast<int>(rng.next_below(5));   // outside extent
        const int b = 2 + static_cast<int>(rng.next_below(7));   // inside extent
        const int len = 6 + static_cast<int>(rng.next_below(7));
        const int off = 4 + static_cast<int>(rng.next_below(17));
        int x0, x1, y0, y1;
        if (vertical) {
            x0 = boundary == 8 ? boundary - a : boundary - b;
            x1 = boundary == 8 ? boundary + b : boundary + a;
            y0 = off;
            y1 = std::min(off + len, 32);
        } else {
            y0 = boundary == 8 ? boundary - a : boundary - b;
            y1 = boundary == 8 ? boundary + b : boundary + a;
            x0 = off;
            x1 = std::min(off + len, 32);
        }
        for (int c = 0; c < 3; ++c) {
            std::uint8_t* ch = ds.image(i) + static_cast<std::size_t>(c) * 1024;
            narrow_gradient_channel(rng, ch, 32, 32);
            const int base_bin = ch[0] / 8;
            int rect_bin = base_bin;
            while (rect_bin == base_bin) rect_bin = 2 + static_cast<int>(rng.next_below(28));
            const std::uint8_t color = static_cast<std::uint8_t>(rect_bin * 8 + 3);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) ch[y * 32 + x] = color;
        }
    }
    return ds;
}

ImageDataset synth_complex(int n, std::uint64_t seed) {
    ImageDataset ds = make_dataset(n, "synth_complex",
                                   "synth:complex:" + std::to_string(n) + ":" +
                                       std::to_string(seed));
    Rng root(seed ^ 0xC09ULL);
    for (int i = 0; i < n; ++i) {
        Rng rng(root.sub_seed(static_cast<std::uint64_t>(i)));
        const int family = static_cast<int>(rng.next_below(4));
        std::uint8_t* img = ds.image(i);
        switch (family) {
            case 0:  // smooth wide-range gradient
                for (int c = 0; c < 3; ++c) wide_gradient_channel(rng, img + c * 1024, 32, 32);
                break;
            case 1: {  // gradient background with random shapes
                for (int c = 0; c < 3; ++c) wide_gradient_channel(rng, img + c * 1024, 32, 32);
                const int shapes = 3 + static_cast<int>(rng.next_below(4));
                for (int s = 0; s < shapes; ++s) {
                    const bool ellipse = rng.next_below(2) == 0;
                    const int cx = static_cast<int>(rng.next_below(32));
                    const int cy = static_cast<int>(rng.next_below(32));
                    const int rx = 2 + static_cast<int>(rng.next_below(9));
                    const int ry = 2 + static_cast<int>(rng.next_below(9));
                    std::uint8_t col[3];
                    for (int c = 0; c < 3; ++c)
                        col[c] = static_cast<std::uint8_t>(rng.next_below(256));
                    for (int y = std::max(0, cy - ry); y <= std::min(31, cy + ry); ++y)
                        for (int x = std::max(0, cx - rx); x <= std::min(31, cx + rx); ++x) {
                            if (ellipse) {
                                double u = static_cast<double>(x - cx) / rx;
                                double v = static_cast<double>(y - cy) / ry;
                                if (u * u + v * v > 1.0) continue;
                            }
                            for (int c = 0; c < 3; ++c) img[c * 1024 + y * 32 + x] = col[c];
                        }
                }
                break;
            }
            case 2: {  // band-limited value noise
                const int grid = rng.next_below(2) == 0 ? 4 : 8;
                for (int c = 0; c < 3; ++c)
                    value_noise_channel(rng, img + c * 1024, 32, 32, grid);
                break;
            }
            default: {  // gradient + noise composite
                std::vector<std::uint8_t> noise(1024);
                for (int c = 0; c < 3; ++c) {
                    std::uint8_t* ch = img + c * 1024;
                    wide_gradient_channel(rng, ch, 32, 32);
                    value_noise_channel(rng, noise.data(), 32, 32, 8);
                    for (int p = 0; p < 1024; ++p)
                        ch[p] = static_cast<std::uint8_t>((ch[p] + noise[p]) / 2);
                }
                break;
            }
        }
    }
    return ds;
}

ImageDataset load_dataset(const std::string& uri) {
    auto colon = uri.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("dataset URI needs a scheme prefix: " + uri);
    const std::string scheme = uri.substr(0, colon);
    const std::string rest = uri.substr(colon + 1);
    if (scheme == "idx") return load_idx(rest);
    if (scheme == "imgb") return load_imgb(rest);
    if (scheme == "synth") {
        auto c1 = rest.find(':');
        auto c2 = rest.find(':', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("synth URI must be synth:<family>:<n>:<seed>: " + uri);
        const std::string family = rest.substr(0, c1);
        const int n = std::stoi(rest.substr(c1 + 1, c2 - c1 - 1));
        const std::uint64_t seed = std::stoull(rest.substr(c2 + 1));
        if (family == "complex") return synth_complex(n, seed);
        if (family == "lowh") return synth_lowH(n, seed);
        if (family == "midh") return synth_midH(n, seed);
        if (family == "highh") return synth_highH(n, seed);
        throw std::invalid_argument("unknown synth family: " + family);
    }
    throw std::invalid_argument("unknown dataset scheme: " + scheme);
}

}  // namespace ood
