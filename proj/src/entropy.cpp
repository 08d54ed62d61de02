#include "ood/entropy.hpp"

#include "ood/datasets.hpp"

#include <cmath>
#include <stdexcept>

namespace ood {

double conditional_entropy(const std::uint8_t* image, const EraseMask& mask,
                           const EntropyConfig& cfg) {
    if (cfg.bins < 2 || cfg.bins > 256)
        throw std::invalid_argument("entropy bins must be in [2, 256]");
    if (cfg.alpha <= 0.0) throw std::invalid_argument("entropy alpha must be > 0");
    const int nf = mask.erased_count();
    const int nr = mask.surround_count();
    if (nf == 0 || nr == 0)
        throw std::invalid_argument("conditional_entropy: empty patch or surround");

    const std::size_t plane = static_cast<std::size_t>(mask.h) * mask.w;
    double total = 0.0;
    std::vector<int> patch_hist(static_cast<std::size_t>(cfg.bins));
    std::vector<int> surround_hist(static_cast<std::size_t>(cfg.bins));

    for (int c = 0; c < 3; ++c) {
        std::fill(patch_hist.begin(), patch_hist.end(), 0);
        std::fill(surround_hist.begin(), surround_hist.end(), 0);
        const std::uint8_t* ch = image + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            int bin = static_cast<int>(ch[i]) * cfg.bins / 256;
            (mask.m[i] ? surround_hist : patch_hist)[static_cast<std::size_t>(bin)]++;
        }
        const double denom = nr + cfg.alpha * cfg.bins;
        double h = 0.0;
        for (int b = 0; b < cfg.bins; ++b) {
            if (patch_hist[b] == 0) continue;
            double pb = static_cast<double>(patch_hist[b]) / nf;
            double pcond = (surround_hist[b] + cfg.alpha) / denom;
            h -= pb * std::log2(pcond);
        }
        total += h;
    }
    return total / 3.0;
}

std::vector<double> entropy_scores(const ImageDataset& ds,
                                   const std::vector<EraseStrategy>& variants,
                                   const EntropyConfig& cfg) {
    if (variants.empty()) throw std::invalid_argument("entropy_scores: no strategy variants");
    std::vector<EraseMask> masks;
    for (const EraseStrategy& s : variants) masks.push_back(build_mask(s, ds.h, ds.w));

    std::vector<double> out(static_cast<std::size_t>(ds.n));
    for (int i = 0; i < ds.n; ++i) {
        double acc = 0.0;
        for (const EraseMask& m : masks) acc += conditional_entropy(ds.image(i), m, cfg);
        out[static_cast<std::size_t>(i)] = acc / static_cast<double>(masks.size());
    }
    return out;
}

}  // namespace ood
