#pragma once

#include "ood/erasing.hpp"
#include "ood/tensor.hpp"

namespace ood {

/// Number of logistic components per pixel.
inline constexpr int kMixtureDefault = 10;

/// Channels the feature map must carry for K components:
/// K logits + K*3 means + K*3 log-scales + K*3 coupling coefficients.
constexpr int mixture_channels(int k) { return k * 10; }

/// Per-pixel mixture-of-logistics parameters sliced out of the uncertainty
/// feature map Z. Channel order in Z (K = number of components):
///   [0, K)          mixture logits, component k at channel k
///   [K, 4K)         means, channel K + k*3 + c
///   [4K, 7K)        raw log-scales, channel 4K + k*3 + c (clamped at -7 on use)
///   [7K, 10K)       raw coupling coefficients, channel 7K + k*3 + j
/// Coupling (tanh-bounded): mean_g += c0 * x_red, mean_b += c1 * x_red + c2 * x_green,
/// where x_* are the target pixel's normalized channel values.
struct MixtureField {
    int k_mix = 0;
    int h = 0;
    int w = 0;
    std::vector<float> logits;      // [K][H][W]
    std::vector<float> means;       // [K][3][H][W]
    std::vector<float> log_scales;  // raw values, [K][3][H][W]
    std::vector<float> coeffs_raw;  // pre-tanh, [K][3][H][W]
    std::vector<float> coeffs;      // tanh(coeffs_raw)
};

/// Minimum log-scale after clamping.
inline constexpr float kLogScaleFloor = -7.0f;
/// Below this the discretized bracket is replaced by pdf * bin width.
inline constexpr double kCdfDeltaFloor = 1e-12;

/// Slice a C x H x W (or 1 x C x H x W) feature map into mixture parameters.
/// The channel count must be mixture_channels(K) for some integer K.
MixtureField params_from_features(const Tensor& z);

/// Map a raw byte value to the normalized 256-level grid on [-1, 1].
inline float normalize_u8(std::uint8_t v) { return static_cast<float>(v) * (2.0f / 255.0f) - 1.0f; }

/// Per-pixel, per-channel log2 likelihood of the discretized pixel values of
/// x (a normalized 3 x H x W image) under the mixture. Left/right edge bins
/// integrate the full CDF tail.
Tensor log_prob_pixel(const MixtureField& f, const Tensor& x);

/// Generation loss L_e in bits per (pixel, channel), averaged over the erased
/// region of one image: -(1/(N_f * 3)) * sum log2 p.
double generation_loss(const MixtureField& f, const Tensor& x, const EraseMask& mask);

/// Gradient of generation_loss with respect to the raw feature map entries;
/// returned with the Z channel layout described above (shape 10K x H x W).
Tensor generation_loss_grad(const MixtureField& f, const Tensor& x, const EraseMask& mask);

}  // namespace ood
