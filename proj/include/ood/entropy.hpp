#pragma once

#include "ood/erasing.hpp"

#include <cstdint>
#include <vector>

namespace ood {

struct ImageDataset;  // datasets.hpp

struct EntropyConfig {
    int bins = 32;       // uniform quantization: bin = value * bins / 256
    double alpha = 1.0;  // Laplace smoothing
};

/// Histogram estimate of the conditional entropy H(patch | surround) in bits
/// for one 3 x h x w uint8 image, averaged over channels. The surround
/// value-histogram (Laplace-smoothed) stands in for P(value | surround); the
/// result is the cross-entropy of the patch histogram under it.
double conditional_entropy(const std::uint8_t* image, const EraseMask& mask,
                           const EntropyConfig& cfg);

/// Per-sample entropies; multi-variant strategies are averaged over variants.
std::vector<double> entropy_scores(const ImageDataset& ds,
                                   const std::vector<EraseStrategy>& variants,
                                   const EntropyConfig& cfg);

}  // namespace ood
