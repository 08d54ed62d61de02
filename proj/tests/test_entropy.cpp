#include "ood/entropy.hpp"

#include "ood/datasets.hpp"
#include "ood/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace ood;

namespace {

EraseMask center16(int h = 32, int w = 32) {
    return build_mask(make_strategy(EraseKind::Center, 0, h, w), h, w);
}

std::vector<std::uint8_t> constant_image(std::uint8_t v, int h = 32, int w = 32) {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(3) * h * w, v);
}

}  // namespace

TEST_CASE("constant image has vanishing entropy as alpha approaches zero") {
    EntropyConfig cfg;
    cfg.alpha = 1e-9;
    double h = conditional_entropy(constant_image(77).data(), center16(), cfg);
    CHECK(h >= 0.0);
    CHECK(h < 1e-6);
}

TEST_CASE("uniform patch over uniform surround approaches log2(bins)") {
    const int hh = 32, ww = 32;
    EraseMask m = center16(hh, ww);
    std::vector<std::uint8_t> img(3 * hh * ww);
    // cycle all 32 bins independently inside and outside the patch
    for (int c = 0; c < 3; ++c) {
        int in_i = 0, out_i = 0;
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) {
                int& i = m.kept(y, x) ? out_i : in_i;
                img[static_cast<std::size_t>(c) * hh * ww + y * ww + x] =
                    static_cast<std::uint8_t>((i++ % 32) * 8);
            }
    }
    EntropyConfig cfg;
    cfg.alpha = 1e-9;
    double h = conditional_entropy(img.data(), m, cfg);
    CHECK(h == doctest::Approx(5.0).epsilon(1e-4));
}

TEST_CASE("hand-computed two-bin histogram example") {
    // 16x16 image, 4x4 center patch (N_f = 16, N_r = 240), surround all zero.
    // Patch holds values {0,0,128,255} tiled four times; with bins=2 the bin
    // of v is floor(v*2/256), so 0 -> bin 0 and 128, 255 -> bin 1, giving
    // P_B = (0.5, 0.5). Smoothed surround: P(0|A) = 241/242, P(1|A) = 1/242.
    const int hh = 16, ww = 16;
    std::vector<std::uint8_t> img(3 * hh * ww, 0);
    EraseStrategy s;
    s.patch_h = 4;
    s.patch_w = 4;
    EraseMask m = build_mask(s, hh, ww);
    REQUIRE(m.erased_count() == 16);
    REQUIRE(m.surround_count() == 240);
    const std::uint8_t vals[4] = {0, 0, 128, 255};
    for (int c = 0; c < 3; ++c) {
        int i = 0;
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x)
                if (!m.kept(y, x))
                    img[static_cast<std::size_t>(c) * hh * ww + y * ww + x] = vals[i++ % 4];
    }
    EntropyConfig cfg;
    cfg.bins = 2;
    cfg.alpha = 1.0;
    double want = -(0.5 * std::log2(241.0 / 242.0) + 0.5 * std::log2(1.0 / 242.0));
    CHECK(conditional_entropy(img.data(), m, cfg) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("patch of one value absent from the surround hits the smoothed term exactly") {
    const int hh = 32, ww = 32;
    std::vector<std::uint8_t> img = constant_image(0, hh, ww);
    EraseMask m = center16(hh, ww);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x)
                if (!m.kept(y, x))
                    img[static_cast<std::size_t>(c) * hh * ww + y * ww + x] = 255;
    for (double alpha : {0.25, 1.0, 4.0}) {
        EntropyConfig cfg;
        cfg.alpha = alpha;
        double nr = m.surround_count();
        double want = -std::log2(alpha / (nr + alpha * cfg.bins));
        CHECK(conditional_entropy(img.data(), m, cfg) ==
              doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("entropy is finite, nonnegative, and below the smoothed bound") {
    Rng rng(41);
    EraseMask m = center16();
    EntropyConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::uint8_t> img(3 * 32 * 32);
        for (auto& v : img) v = static_cast<std::uint8_t>(rng.next_below(256));
        double h = conditional_entropy(img.data(), m, cfg);
        double bound = std::log2((m.surround_count() + cfg.alpha * cfg.bins) / cfg.alpha);
        CHECK(std::isfinite(h));
        CHECK(h >= 0.0);
        CHECK(h <= bound);
    }
}

TEST_CASE("permuting pixels inside the patch leaves the entropy unchanged") {
    Rng rng(42);
    EraseMask m = center16();
    std::vector<std::uint8_t> img(3 * 32 * 32);
    for (auto& v : img) v = static_cast<std::uint8_t>(rng.next_below(256));

    std::vector<int> patch_idx;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (!m.kept(y, x)) patch_idx.push_back(y * 32 + x);
    std::vector<int> perm = patch_idx;
    rng.shuffle(perm);

    std::vector<std::uint8_t> shuffled = img;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < patch_idx.size(); ++i)
            shuffled[static_cast<std::size_t>(c) * 1024 + perm[i]] =
                img[static_cast<std::size_t>(c) * 1024 + patch_idx[i]];

    EntropyConfig cfg;
    CHECK(conditional_entropy(img.data(), m, cfg) ==
          conditional_entropy(shuffled.data(), m, cfg));
}

TEST_CASE("config validation") {
    EraseMask m = center16();
    auto img = constant_image(1);
    EntropyConfig bad;
    bad.bins = 1;
    CHECK_THROWS_AS(conditional_entropy(img.data(), m, bad), std::invalid_argument);
    bad.bins = 300;
    CHECK_THROWS_AS(conditional_entropy(img.data(), m, bad), std::invalid_argument);
    bad.bins = 32;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(conditional_entropy(img.data(), m, bad), std::invalid_argument);
}

TEST_CASE("entropy_scores on a singleton matches conditional_entropy") {
    ImageDataset ds = synth_midH(1, 5);
    EntropyConfig cfg;
    auto variants = strategy_variants(EraseKind::Center, 32, 32);
    auto scores = entropy_scores(ds, variants, cfg);
    REQUIRE(scores.size() == 1);
    EraseMask m = build_mask(variants[0], 32, 32);
    CHECK(scores[0] == conditional_entropy(ds.image(0), m, cfg));
}

TEST_CASE("entropy_scores permute with the dataset") {
    ImageDataset ds = synth_midH(8, 6);
    EntropyConfig cfg;
    auto variants = strategy_variants(EraseKind::Corner, 32, 32);
    auto scores = entropy_scores(ds, variants, cfg);
    REQUIRE(scores.size() == 8);

    ImageDataset rev = ds;
    for (int i = 0; i < 8; ++i)
        std::copy(ds.image(7 - i), ds.image(7 - i) + ds.image_size(), rev.image(i));
    auto rscores = entropy_scores(rev, variants, cfg);
    for (int i = 0; i < 8; ++i) CHECK(rscores[i] == scores[7 - i]);
}

TEST_CASE("multi-variant scores average the per-variant entropies") {
    ImageDataset ds = synth_highH(3, 7);
    EntropyConfig cfg;
    auto variants = strategy_variants(EraseKind::Side, 32, 32);
    auto scores = entropy_scores(ds, variants, cfg);
    for (int i = 0; i < 3; ++i) {
        double acc = 0.0;
        for (const auto& v : variants)
            acc += conditional_entropy(ds.image(i), build_mask(v, 32, 32), cfg);
        CHECK(scores[i] == doctest::Approx(acc / variants.size()).epsilon(1e-12));
    }
}

TEST_CASE("generated low-entropy images score far below high-entropy images") {
    EntropyConfig cfg;
    auto variants = strategy_variants(EraseKind::Center, 32, 32);
    auto low = entropy_scores(synth_lowH(64, 11), variants, cfg);
    auto high = entropy_scores(synth_highH(64, 12), variants, cfg);
    double max_low = *std::max_element(low.begin(), low.end());
    double min_high = *std::min_element(high.begin(), high.end());
    CHECK(max_low < 1.0);
    CHECK(min_high > 4.0);
}
