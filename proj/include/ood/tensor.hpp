#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ood {

/// Dense float tensor, row-major, N x C x H x W layout for image data.
/// Storage is float-32; reduction-style kernels accumulate in double unless
/// noted otherwise (the GEMM-backed convolution accumulates in float).
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> s, float fill = 0.0f);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data.size(); }

    // N,C,H,W accessor for 4-d tensors.
    float& at(int n, int c, int h, int w);
    float at(int n, int c, int h, int w) const;
};

/// Throws std::invalid_argument naming the first non-finite element.
void require_finite(const Tensor& t, const std::string& where);

/// Weights for one 2-d convolution layer. Convolution is cross-correlation
/// (no kernel flip) with zero padding.
struct ConvParams {
    int c_out = 0;
    int c_in = 0;
    int k = 0;        // odd kernel size
    int stride = 1;
    int padding = 0;
    std::vector<float> kernel;  // c_out * c_in * k * k
    std::vector<float> bias;    // c_out

    ConvParams() = default;
    ConvParams(int co, int ci, int kk, int s, int p);

    int out_size(int in) const { return (in + 2 * padding - k) / stride + 1; }
};

Tensor conv2d_forward(const Tensor& x, const ConvParams& p);

struct ConvGrads {
    Tensor grad_x;
    std::vector<float> grad_kernel;
    std::vector<float> grad_bias;
};

/// Gradients of sum(grad_out * conv2d_forward(x, p)) w.r.t. x, kernel, bias.
ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out);

Tensor upsample_nearest(const Tensor& x, int factor);
Tensor upsample_nearest_backward(const Tensor& grad_out, int factor);

Tensor relu(const Tensor& x);
/// grad_out masked by the sign of the forward input.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor tanh_forward(const Tensor& x);
/// y is the forward output; returns grad_out * (1 - y^2).
Tensor tanh_backward(const Tensor& y, const Tensor& grad_out);

/// Concatenate along the channel axis. All inputs must share N, H, W.
Tensor concat_channels(const std::vector<Tensor>& xs);
/// Split grad of a concat back into per-input grads with the given channel counts.
std::vector<Tensor> split_channels(const Tensor& grad, const std::vector<int>& channels);

}  // namespace ood
