#pragma once

#include "ood/tensor.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ood {

/// Loader/format errors, distinguished by type so callers can tell a bad
/// magic from a short file from a checksum mismatch.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionError : FormatError {
    using FormatError::FormatError;
};
struct TruncationError : FormatError {
    using FormatError::FormatError;
};
struct ChecksumError : FormatError {
    using FormatError::FormatError;
};

/// A batch of 3 x 32 x 32 uint8 images. Every loader and generator emits this
/// shape; nothing downstream handles anything else.
struct ImageDataset {
    int n = 0;
    int c = 3;
    int h = 32;
    int w = 32;
    std::vector<std::uint8_t> data;  // n * c * h * w row-major
    std::string name;
    std::string provenance;

    std::size_t image_size() const {
        return static_cast<std::size_t>(c) * h * w;
    }
    const std::uint8_t* image(int i) const { return data.data() + i * image_size(); }
    std::uint8_t* image(int i) { return data.data() + i * image_size(); }

    /// Normalized [-1, 1] view of image i on the 256-level grid.
    Tensor normalized(int i) const;
};

/// IDX (MNIST family) image file: big-endian magic 0x00000803, then N, H, W.
/// Grayscale content is channel-replicated to RGB and bilinearly resized to
/// 32 x 32.
ImageDataset load_idx(const std::string& path);

/// IMGB raw tensor file: magic "IMGB", then version=1, N, C, H, W as
/// little-endian u32, then N*C*H*W bytes row-major.
void save_imgb(const ImageDataset& ds, const std::string& path);
ImageDataset load_imgb(const std::string& path);

/// Replicate a single channel to three. Throws on multi-channel input.
std::vector<std::uint8_t> gray_to_rgb(const std::vector<std::uint8_t>& x, int h, int w,
                                      int channels);

/// Bilinear resize of one c x h x w u8 image to c x oh x ow.
std::vector<std::uint8_t> resize_bilinear(const std::uint8_t* src, int c, int h, int w,
                                          int oh, int ow);

/// Synthetic families. All are pure functions of (n, seed).
/// complex: mixed gradients, shapes, and value-noise textures (training set).
ImageDataset synth_complex(int n, std::uint64_t seed);
/// lowH: gentle global gradients; the center patch continues the surround.
ImageDataset synth_lowH(int n, std::uint64_t seed);
/// midH: gentle gradient plus one rectangle straddling the center patch.
ImageDataset synth_midH(int n, std::uint64_t seed);
/// highH: smooth surround with iid uniform noise in the center 16 x 16.
ImageDataset synth_highH(int n, std::uint64_t seed);

/// Dataset URI: "idx:<path>", "imgb:<path>", or "synth:<family>:<n>:<seed>"
/// with family in {complex, lowh, midh, highh}.
ImageDataset load_dataset(const std::string& uri);

}  // namespace ood
