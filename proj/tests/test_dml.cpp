#include "ood/dml.hpp"

#include "ood/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace ood;

namespace {

Tensor random_features(int k, int h, int w, Rng& rng, double span = 1.0) {
    Tensor z({mixture_channels(k), h, w});
    for (float& v : z.data) v = static_cast<float>(rng.uniform(-span, span));
    return z;
}

Tensor image_from_bytes(const std::vector<std::uint8_t>& bytes, int h, int w) {
    Tensor x({3, h, w});
    for (std::size_t i = 0; i < bytes.size(); ++i) x.data[i] = normalize_u8(bytes[i]);
    return x;
}

std::vector<std::uint8_t> random_bytes(std::size_t n, Rng& rng) {
    std::vector<std::uint8_t> b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.next_below(256));
    return b;
}

EraseMask center_mask(int h, int w) {
    EraseStrategy s;
    s.patch_h = h / 2;
    s.patch_w = w / 2;
    return build_mask(s, h, w);
}

// Element accessor for C x H x W maps (feature tensors, log-prob outputs).
float& chw(Tensor& t, int c, int y, int x) {
    return t.data[(static_cast<std::size_t>(c) * t.dim(1) + y) * t.dim(2) + x];
}

float chw(const Tensor& t, int c, int y, int x) {
    return t.data[(static_cast<std::size_t>(c) * t.dim(1) + y) * t.dim(2) + x];
}

}  // namespace

TEST_CASE("channel slicing follows the documented Z layout") {
    const int k = 3, h = 2, w = 2;
    for (int ch = 0; ch < mixture_channels(k); ++ch) {
        Tensor z({mixture_channels(k), h, w});
        chw(z, ch, 1, 0) = 0.25f;
        MixtureField f = params_from_features(z);
        const std::size_t pix = static_cast<std::size_t>(1) * w + 0;
        if (ch < k) {
            CHECK(f.logits[ch * h * w + pix] == 0.25f);
        } else if (ch < 4 * k) {
            CHECK(f.means[static_cast<std::size_t>(ch - k) * h * w + pix] == 0.25f);
        } else if (ch < 7 * k) {
            CHECK(f.log_scales[static_cast<std::size_t>(ch - 4 * k) * h * w + pix] == 0.25f);
        } else {
            std::size_t idx = static_cast<std::size_t>(ch - 7 * k) * h * w + pix;
            CHECK(f.coeffs_raw[idx] == 0.25f);
            CHECK(f.coeffs[idx] == doctest::Approx(std::tanh(0.25)).epsilon(1e-6));
        }
    }
}

TEST_CASE("params_from_features rejects non-multiple channel counts") {
    Tensor z({13, 2, 2});
    CHECK_THROWS_AS(params_from_features(z), std::invalid_argument);
}

TEST_CASE("discrete probabilities sum to one per channel") {
    Rng rng(21);
    const int h = 2, w = 2;
    for (int trial = 0; trial < 4; ++trial) {
        const int k = (trial % 2) ? 1 : 4;
        Tensor z = random_features(k, h, w, rng, 2.0);
        std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
        for (int c = 0; c < 3; ++c) {
            const int y = static_cast<int>(rng.next_below(h));
            const int x = static_cast<int>(rng.next_below(w));
            double total = 0.0;
            for (int v = 0; v < 256; ++v) {
                std::vector<std::uint8_t> b = bytes;
                b[static_cast<std::size_t>(c * h * w) + y * w + x] =
                    static_cast<std::uint8_t>(v);
                Tensor lp = log_prob_pixel(params_from_features(z), image_from_bytes(b, h, w));
                total += std::exp2(static_cast<double>(chw(lp, c, y, x)));
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
        }
    }
}

TEST_CASE("a sharply peaked single component concentrates on its bin") {
    const int h = 1, w = 1;
    Tensor z({mixture_channels(1), h, w});
    const std::uint8_t target = 128;
    for (int c = 0; c < 3; ++c) {
        chw(z, 1 + c, 0, 0) = normalize_u8(target);
        chw(z, 4 + c, 0, 0) = -7.0f;
    }
    Tensor lp = log_prob_pixel(params_from_features(z),
                               image_from_bytes({target, target, target}, h, w));
    for (int c = 0; c < 3; ++c) {
        double p = std::exp2(static_cast<double>(chw(lp, c, 0, 0)));
        CHECK(p > 0.95);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("duplicated components collapse to the single-component value") {
    Rng rng(22);
    const int h = 2, w = 2;
    Tensor z1 = random_features(1, h, w, rng);
    Tensor z2({mixture_channels(2), h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    // both logits equal, parameter blocks copied for each component
    for (std::size_t p = 0; p < plane; ++p) {
        z2.data[0 * plane + p] = z1.data[0 * plane + p];
        z2.data[1 * plane + p] = z1.data[0 * plane + p];
        for (int c = 0; c < 3; ++c) {
            for (int blk = 0; blk < 3; ++blk) {
                // z1 block bases: means 1, log_scales 4, coeffs 7; z2: 2, 8, 14
                std::size_t src = (static_cast<std::size_t>(1 + 3 * blk + c)) * plane + p;
                std::size_t d0 = (static_cast<std::size_t>(2 + 6 * blk + c)) * plane + p;
                std::size_t d1 = (static_cast<std::size_t>(2 + 6 * blk + 3 + c)) * plane + p;
                z2.data[d0] = z1.data[src];
                z2.data[d1] = z1.data[src];
            }
        }
    }
    std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
    Tensor x = image_from_bytes(bytes, h, w);
    Tensor a = log_prob_pixel(params_from_features(z1), x);
    Tensor b = log_prob_pixel(params_from_features(z2), x);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
}

TEST_CASE("log-likelihood stays finite at parameter extremes") {
    const int h = 1, w = 1;
    for (float mean : {-20.0f, 0.0f, 20.0f})
        for (float lsc : {-20.0f, -7.0f, 0.0f, 5.0f})
            for (std::uint8_t v : {std::uint8_t(0), std::uint8_t(128), std::uint8_t(255)}) {
                Tensor z({mixture_channels(1), h, w});
                for (int c = 0; c < 3; ++c) {
                    chw(z, 1 + c, 0, 0) = mean;
                    chw(z, 4 + c, 0, 0) = lsc;
                }
                Tensor lp = log_prob_pixel(params_from_features(z),
                                           image_from_bytes({v, v, v}, h, w));
                for (float e : lp.data) {
                    CHECK(std::isfinite(e));
                    CHECK(e <= 1e-6f);
                }
            }
}

TEST_CASE("single-component likelihood decays with distance from the mean") {
    const int h = 1, w = 1;
    auto logp_at = [&](std::uint8_t v) {
        Tensor z({mixture_channels(1), h, w});
        Tensor lp = log_prob_pixel(params_from_features(z),
                                   image_from_bytes({v, v, v}, h, w));
        return chw(lp, 0, 0, 0);
    };
    // zero features put the mean at 0; 128 is the closest byte value
    float prev = logp_at(128);
    for (std::uint8_t v : {std::uint8_t(160), std::uint8_t(200), std::uint8_t(240)}) {
        float cur = logp_at(v);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("generation_loss matches a direct log_prob_pixel reduction") {
    Rng rng(23);
    const int h = 4, w = 4;
    Tensor z = random_features(2, h, w, rng);
    std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
    Tensor x = image_from_bytes(bytes, h, w);
    EraseStrategy s;
    s.patch_h = 2;
    s.patch_w = 2;
    EraseMask m = build_mask(s, h, w);

    MixtureField f = params_from_features(z);
    Tensor lp = log_prob_pixel(f, x);
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                if (!m.kept(y, xx)) acc += chw(lp, c, y, xx);
    double want = -acc / (m.erased_count() * 3.0);
    CHECK(generation_loss(f, x, m) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("generation_loss of a perfectly confident model approaches zero bits") {
    const int h = 4, w = 4;
    Tensor z({mixture_channels(1), h, w});
    std::vector<std::uint8_t> bytes(3 * h * w, 64);
    for (int c = 0; c < 3; ++c)
        for (int p = 0; p < h * w; ++p) {
            z.data[static_cast<std::size_t>(1 + c) * h * w + p] = normalize_u8(64);
            z.data[static_cast<std::size_t>(4 + c) * h * w + p] = -7.0f;
        }
    double loss = generation_loss(params_from_features(z), image_from_bytes(bytes, h, w),
                                  center_mask(h, w));
    CHECK(loss >= 0.0);
    CHECK(loss < 0.1);
}

TEST_CASE("adding a constant to every logit leaves the loss unchanged") {
    Rng rng(24);
    const int h = 4, w = 4, k = 3;
    Tensor z = random_features(k, h, w, rng);
    std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
    Tensor x = image_from_bytes(bytes, h, w);
    EraseMask m = center_mask(h, w);
    double base = generation_loss(params_from_features(z), x, m);
    Tensor shifted = z;
    for (int c = 0; c < k; ++c)
        for (int p = 0; p < h * w; ++p)
            shifted.data[static_cast<std::size_t>(c) * h * w + p] += 5.5f;
    double moved = generation_loss(params_from_features(shifted), x, m);
    CHECK(base == doctest::Approx(moved).epsilon(1e-6));
}

TEST_CASE("logit gradients sum to zero per pixel") {
    Rng rng(25);
    const int h = 4, w = 4, k = 4;
    Tensor z = random_features(k, h, w, rng);
    std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
    Tensor x = image_from_bytes(bytes, h, w);
    Tensor g = generation_loss_grad(params_from_features(z), x, center_mask(h, w));
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            double s = 0.0;
            for (int c = 0; c < k; ++c) s += chw(g, c, y, xx);
            CHECK(std::abs(s) < 1e-6);
        }
}

TEST_CASE("a component with logit -40 receives no mean gradient") {
    const int h = 4, w = 4, k = 2;
    Tensor z({mixture_channels(k), h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            chw(z, 1, y, x) = -40.0f;            // component 1 logit
            chw(z, k + 3 + 0, y, x) = 0.3f;      // its red mean, away from the data
        }
    std::vector<std::uint8_t> bytes(3 * h * w, 100);
    Tensor g = generation_loss_grad(params_from_features(z),
                                    image_from_bytes(bytes, h, w), center_mask(h, w));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                CHECK(std::abs(chw(g, k + 3 + c, y, x)) < 1e-12);
}

TEST_CASE("generation_loss_grad matches central finite differences") {
    Rng rng(26);
    const int h = 3, w = 3, k = 2;
    Tensor z = random_features(k, h, w, rng, 1.5);
    std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
    Tensor x = image_from_bytes(bytes, h, w);
    EraseStrategy s;
    s.patch_h = 2;
    s.patch_w = 2;
    EraseMask m = build_mask(s, h, w);

    Tensor g = generation_loss_grad(params_from_features(z), x, m);
    REQUIRE(g.size() == z.size());

    const double eps = 1e-3;
    int checked = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        Tensor zp = z, zm = z;
        zp.data[i] += static_cast<float>(eps);
        zm.data[i] -= static_cast<float>(eps);
        double num = (generation_loss(params_from_features(zp), x, m) -
                      generation_loss(params_from_features(zm), x, m)) /
                     (2.0 * eps);
        double ana = g.data[i];
        double denom = std::abs(ana) + std::abs(num) + 1e-7;
        CHECK(std::abs(ana - num) / denom < 1e-3);
        if (std::abs(num) > 1e-9) ++checked;
    }
    // the mask keeps surround gradients at zero; make sure the check actually
    // exercised nonzero entries too
    CHECK(checked > 50);
}

TEST_CASE("gradients vanish outside the erased region") {
    Rng rng(27);
    const int h = 4, w = 4, k = 2;
    Tensor z = random_features(k, h, w, rng);
    std::vector<std::uint8_t> bytes = random_bytes(3 * h * w, rng);
    Tensor x = image_from_bytes(bytes, h, w);
    EraseStrategy s;
    s.patch_h = 2;
    s.patch_w = 2;
    EraseMask m = build_mask(s, h, w);
    Tensor g = generation_loss_grad(params_from_features(z), x, m);
    for (int c = 0; c < mixture_channels(k); ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                if (m.kept(y, xx)) CHECK(chw(g, c, y, xx) == 0.0f);
}
