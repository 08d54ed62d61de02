#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ood {

/// Which rectangle of the image gets erased.
enum class EraseKind { Center, Corner, Side };

/// Corner variants: 0=TL, 1=TR, 2=BL, 3=BR.
/// Side variants: 0=top, 1=right, 2=bottom, 3=left (patch flush with the
/// edge, centered along it).
struct EraseStrategy {
    EraseKind kind = EraseKind::Center;
    int variant = 0;
    int patch_h = 16;
    int patch_w = 16;
};

/// Binary per-pixel mask: 1 = kept surround, 0 = erased patch.
struct EraseMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> m;
    EraseStrategy strategy;

    bool kept(int y, int x) const { return m[static_cast<std::size_t>(y) * w + x] != 0; }
    int erased_count() const;   // N_f
    int surround_count() const; // N_r
};

/// x split per the masking identity: x_r holds the surround (zeros inside the
/// patch), x_f the erased patch (zeros outside); x_r + x_f == x exactly.
struct ErasedPair {
    std::vector<std::uint8_t> x_r;
    std::vector<std::uint8_t> x_f;
    EraseMask mask;
};

/// Patch placement: Center at ((h-ph)/2, (w-pw)/2); Corner flush with the
/// chosen corner; Side flush with the chosen edge, centered along it.
EraseMask build_mask(const EraseStrategy& s, int h, int w);

/// Default patch size for an h x w image: round(h/2) x round(w/2).
EraseStrategy make_strategy(EraseKind kind, int variant, int h, int w);

std::vector<EraseStrategy> strategy_variants(EraseKind kind, int h, int w);

/// x is a C x h x w uint8 image (channels share the mask).
ErasedPair apply_mask(const std::uint8_t* x, int channels, const EraseMask& mask);

/// Parse a CLI strategy string: "center", "corner:0".."corner:3", "side:0..3",
/// or "corner:*" / "side:*" for all variants.
std::vector<EraseStrategy> parse_strategy(const std::string& text, int h, int w);

std::string strategy_name(const EraseStrategy& s);

}  // namespace ood
