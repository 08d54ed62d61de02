#include "ood/erasing.hpp"

#include <cmath>
#include <stdexcept>

namespace ood {

int EraseMask::erased_count() const {
    int n = 0;
    for (std::uint8_t v : m) n += (v == 0);
    return n;
}

int EraseMask::surround_count() const {
    return static_cast<int>(m.size()) - erased_count();
}

EraseMask build_mask(const EraseStrategy& s, int h, int w) {
    const int ph = s.patch_h, pw = s.patch_w;
    if (ph <= 0 || pw <= 0 || ph >= h || pw >= w)
        throw std::invalid_argument("erase patch " + std::to_string(ph) + "x" +
                                    std::to_string(pw) + " does not fit strictly inside " +
                                    std::to_string(h) + "x" + std::to_string(w));
    int max_variant = (s.kind == EraseKind::Center) ? 0 : 3;
    if (s.variant < 0 || s.variant > max_variant)
        throw std::invalid_argument("erase variant out of range for strategy kind");

    int r0 = 0, c0 = 0;
    switch (s.kind) {
        case EraseKind::Center:
            r0 = (h - ph) / 2;
            c0 = (w - pw) / 2;
            break;
        case EraseKind::Corner:
            r0 = (s.variant == 0 || s.variant == 1) ? 0 : h - ph;
            c0 = (s.variant == 0 || s.variant == 2) ? 0 : w - pw;
            break;
        case EraseKind::Side:
            switch (s.variant) {
                case 0: r0 = 0;      c0 = (w - pw) / 2; break;  // top
                case 1: r0 = (h - ph) / 2; c0 = w - pw; break;  // right
                case 2: r0 = h - ph; c0 = (w - pw) / 2; break;  // bottom
                case 3: r0 = (h - ph) / 2; c0 = 0;      break;  // left
            }
            break;
    }

    EraseMask mask;
    mask.h = h;
    mask.w = w;
    mask.strategy = s;
    mask.m.assign(static_cast<std::size_t>(h) * w, 1);
    for (int y = r0; y < r0 + ph; ++y)
        for (int x = c0; x < c0 + pw; ++x)
            mask.m[static_cast<std::size_t>(y) * w + x] = 0;
    return mask;
}

EraseStrategy make_strategy(EraseKind kind, int variant, int h, int w) {
    EraseStrategy s;
    s.kind = kind;
    s.variant = variant;
    s.patch_h = static_cast<int>(std::lround(h / 2.0));
    s.patch_w = static_cast<int>(std::lround(w / 2.0));
    return s;
}

std::vector<EraseStrategy> strategy_variants(EraseKind kind, int h, int w) {
    int count = (kind == EraseKind::Center) ? 1 : 4;
    std::vector<EraseStrategy> out;
    for (int v = 0; v < count; ++v) out.push_back(make_strategy(kind, v, h, w));
    return out;
}

ErasedPair apply_mask(const std::uint8_t* x, int channels, const EraseMask& mask) {
    const std::size_t plane = static_cast<std::size_t>(mask.h) * mask.w;
    ErasedPair pair;
    pair.mask = mask;
    pair.x_r.assign(plane * channels, 0);
    pair.x_f.assign(plane * channels, 0);
    for (int c = 0; c < channels; ++c) {
        const std::uint8_t* src = x + static_cast<std::size_t>(c) * plane;
        std::uint8_t* r = pair.x_r.data() + static_cast<std::size_t>(c) * plane;
        std::uint8_t* f = pair.x_f.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            if (mask.m[i])
                r[i] = src[i];
            else
                f[i] = src[i];
        }
    }
    return pair;
}

std::vector<EraseStrategy> parse_strategy(const std::string& text, int h, int w) {
    auto kind_of = [](const std::string& name) {
        if (name == "center") return EraseKind::Center;
        if (name == "corner") return EraseKind::Corner;
        if (name == "side") return EraseKind::Side;
        throw std::invalid_argument("unknown erase strategy: " + name);
    };
    auto colon = text.find(':');
    if (colon == std::string::npos) {
        EraseKind k = kind_of(text);
        if (k != EraseKind::Center)
            throw std::invalid_argument("strategy '" + text + "' needs a variant (0-3 or *)");
        return {make_strategy(k, 0, h, w)};
    }
    EraseKind k = kind_of(text.substr(0, colon));
    std::string v = text.substr(colon + 1);
    if (k == EraseKind::Center)
        throw std::invalid_argument("center strategy takes no variant");
    if (v == "*") return strategy_variants(k, h, w);
    if (v.size() != 1 || v[0] < '0' || v[0] > '3')
        throw std::invalid_argument("strategy variant must be 0-3 or *: " + text);
    return {make_strategy(k, v[0] - '0', h, w)};
}

std::string strategy_name(const EraseStrategy& s) {
    switch (s.kind) {
        case EraseKind::Center: return "center";
        case EraseKind::Corner: return "corner:" + std::to_string(s.variant);
        case EraseKind::Side: return "side:" + std::to_string(s.variant);
    }
    return "?";
}

}  // namespace ood
