#pragma once

#include "ood/datasets.hpp"
#include "ood/dml.hpp"
#include "ood/erasing.hpp"
#include "ood/tensor.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ood {

/// Raised when the training loss goes non-finite.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UenConfig {
    int k_mixture = 10;
    double lambda = 0.8;
    double lr = 1e-5;
    int batch_size = 64;
    int epochs = 30;
    std::uint64_t seed = 0;
    /// Channel widths of the four conv layers in each encoder branch.
    std::vector<int> branch_widths{32, 64, 32, 16};
    int decoder_width = 32;
    std::string strategy = "center";
    bool early_stop = true;
    /// Stop when relative improvement over plateau_epochs falls below this.
    double plateau_tol = 1e-3;
    int plateau_epochs = 5;

    void validate() const;
};

/// Kernel sizes of the three parallel encoder branches.
inline constexpr std::array<int, 3> kBranchKernels{3, 5, 7};

/// All learnable parameters. Each encoder branch is
///   conv(k, s2, w0) relu, conv(k, s2, w1) relu, up x2,
///   conv(k, s1, w2) relu, up x2, conv(k, s1, w3) relu;
/// branch outputs are channel-concatenated and a shared 1x1 conv produces
/// the 10*K-channel feature map Z. The decoder maps Z through
/// conv3x3(decoder_width) relu and conv3x3(3) tanh to the reconstruction o.
struct UenWeights {
    std::array<std::array<ConvParams, 4>, 3> branches;
    ConvParams head;
    ConvParams dec1;
    ConvParams dec2;

    /// Apply fn to every layer in a fixed, documented order:
    /// branch 0 layers 0-3, branch 1, branch 2, head, dec1, dec2.
    template <typename F>
    void for_each_layer(F&& fn) {
        for (auto& b : branches)
            for (auto& l : b) fn(l);
        fn(head);
        fn(dec1);
        fn(dec2);
    }
    template <typename F>
    void for_each_layer(F&& fn) const {
        for (const auto& b : branches)
            for (const auto& l : b) fn(l);
        fn(head);
        fn(dec1);
        fn(dec2);
    }
};

/// He-uniform initialization, seeded from cfg.seed.
UenWeights init_weights(const UenConfig& cfg);

/// Zero-valued gradient container with the same layer shapes as w.
UenWeights zero_like(const UenWeights& w);

struct UenOutput {
    Tensor z;  // N x 10K x H x W
    Tensor o;  // N x 3 x H x W
};

/// x_r: normalized surround batch (erased pixels carry -1). H and W must be
/// divisible by 4 and the input must have 3 channels.
UenOutput forward(const UenWeights& w, const Tensor& x_r);

/// Mean squared reconstruction error over surround pixels and channels,
/// batch-averaged.
double loss_r(const Tensor& o, const Tensor& x, const EraseMask& mask);

struct LossBreakdown {
    double total = 0.0;
    double rec = 0.0;  // L_r
    double gen = 0.0;  // L_e, bits per (pixel, channel)
};

/// L_total = lambda * L_r + (1 - lambda) * L_e on a batch of normalized full
/// images with per-sample masks. When grads_out is non-null it receives the
/// gradient of L_total with respect to every weight.
LossBreakdown loss_total(const UenWeights& w, const Tensor& x,
                         const std::vector<EraseMask>& masks, double lambda,
                         UenWeights* grads_out = nullptr);

struct EpochLoss {
    int epoch = 0;
    double total = 0.0;
    double rec = 0.0;
    double gen = 0.0;
};

struct TrainResult {
    UenWeights weights;
    std::vector<EpochLoss> log;
};

/// Adam training on L_total. Deterministic given cfg.seed; single-threaded.
/// Multi-variant strategies draw a variant uniformly per sample per step.
TrainResult train(const UenConfig& cfg, const ImageDataset& dataset);

/// Per-sample L_e, in dataset order. Multi-variant strategies are averaged
/// over the variant set.
std::vector<double> score_dataset(const UenWeights& w, const ImageDataset& ds,
                                  const std::vector<EraseStrategy>& variants);

/// H x W map of the dataset-mean per-pixel log2 likelihood (channel-averaged).
/// Erased pixels are scored by the mixture likelihood; surround pixels by a
/// Gaussian surrogate around the reconstruction with sigma = 0.1.
std::vector<float> likelihood_heatmap(const UenWeights& w, const ImageDataset& ds,
                                      const std::vector<EraseStrategy>& variants);

/// Write per-sample flattened Z vectors (10K * H * W floats each) for the
/// first strategy variant. FMAT container: magic "FMAT", version, N, D as
/// little-endian u32, then N*D little-endian float-32.
void export_features(const UenWeights& w, const ImageDataset& ds,
                     const std::vector<EraseStrategy>& variants, const std::string& path);

/// Read back an FMAT file as N rows of D floats.
std::vector<std::vector<float>> load_features(const std::string& path);

/// UENC checkpoint: magic "UENC", version, CRC-32 of the payload, then the
/// config, a per-layer architecture descriptor, and the weights as
/// little-endian float-32. Round-trips bit-exactly.
void save_checkpoint(const UenWeights& w, const UenConfig& cfg, const std::string& path);
struct Checkpoint {
    UenWeights weights;
    UenConfig config;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ood
