#include "ood/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace ood {

namespace {

std::size_t shape_product(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void require_4d(const Tensor& t, const char* name) {
    if (t.shape.size() != 4)
        throw std::invalid_argument(std::string(name) + ": expected 4-d N,C,H,W tensor, got " +
                                    std::to_string(t.shape.size()) + " dims");
}

// Unpack x[n] into a (c_in*k*k) x (h_out*w_out) column matrix.
void im2col(const float* src, int c_in, int h, int w, const ConvParams& p,
            int h_out, int w_out, float* col) {
    const int k = p.k;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) *
                                       (static_cast<std::size_t>(h_out) * w_out);
                for (int oy = 0; oy < h_out; ++oy) {
                    int iy = oy * p.stride - p.padding + ky;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst + static_cast<std::size_t>(oy) * w_out, 0,
                                    sizeof(float) * static_cast<std::size_t>(w_out));
                        continue;
                    }
                    const float* row = src + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < w_out; ++ox) {
                        int ix = ox * p.stride - p.padding + kx;
                        dst[static_cast<std::size_t>(oy) * w_out + ox] =
                            (ix >= 0 && ix < w) ? row[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

// Scatter-accumulate a column matrix back into an image gradient.
void col2im(const float* col, int c_in, int h, int w, const ConvParams& p,
            int h_out, int w_out, float* dst) {
    const int k = p.k;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) *
                                             (static_cast<std::size_t>(h_out) * w_out);
                for (int oy = 0; oy < h_out; ++oy) {
                    int iy = oy * p.stride - p.padding + ky;
                    if (iy < 0 || iy >= h) continue;
                    float* row = dst + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < w_out; ++ox) {
                        int ix = ox * p.stride - p.padding + kx;
                        if (ix >= 0 && ix < w)
                            row[ix] += src[static_cast<std::size_t>(oy) * w_out + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor::Tensor(std::vector<int> s, float fill)
    : shape(std::move(s)), data(shape_product(shape), fill) {}

float& Tensor::at(int n, int c, int h, int w) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
}

float Tensor::at(int n, int c, int h, int w) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
}

void require_finite(const Tensor& t, const std::string& where) {
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i]))
            throw std::invalid_argument(where + ": non-finite value at flat index " +
                                        std::to_string(i));
    }
}

ConvParams::ConvParams(int co, int ci, int kk, int s, int p)
    : c_out(co), c_in(ci), k(kk), stride(s), padding(p),
      kernel(static_cast<std::size_t>(co) * ci * kk * kk, 0.0f),
      bias(static_cast<std::size_t>(co), 0.0f) {
    if (kk % 2 == 0) throw std::invalid_argument("conv kernel size must be odd");
    if (s < 1 || p < 0) throw std::invalid_argument("bad conv stride/padding");
}

Tensor conv2d_forward(const Tensor& x, const ConvParams& p) {
    require_4d(x, "conv2d_forward");
    const int n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c_in != p.c_in)
        throw std::invalid_argument("conv2d_forward: input channels " + std::to_string(c_in) +
                                    " != kernel c_in " + std::to_string(p.c_in));
    const int h_out = p.out_size(h), w_out = p.out_size(w);
    if (h_out <= 0 || w_out <= 0)
        throw std::invalid_argument("conv2d_forward: kernel larger than padded input");

    Tensor out({n, p.c_out, h_out, w_out});
    const std::size_t kdim = static_cast<std::size_t>(p.c_in) * p.k * p.k;
    const std::size_t odim = static_cast<std::size_t>(h_out) * w_out;
    std::vector<float> col(kdim * odim);

    for (int i = 0; i < n; ++i) {
        const float* src = x.data.data() + static_cast<std::size_t>(i) * c_in * h * w;
        float* dst = out.data.data() + static_cast<std::size_t>(i) * p.c_out * odim;
        im2col(src, c_in, h, w, p, h_out, w_out, col.data());
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, p.c_out,
                    static_cast<int>(odim), static_cast<int>(kdim), 1.0f, p.kernel.data(),
                    static_cast<int>(kdim), col.data(), static_cast<int>(odim), 0.0f, dst,
                    static_cast<int>(odim));
        for (int c = 0; c < p.c_out; ++c) {
            float b = p.bias[static_cast<std::size_t>(c)];
            float* row = dst + static_cast<std::size_t>(c) * odim;
            for (std::size_t j = 0; j < odim; ++j) row[j] += b;
        }
    }
    require_finite(out, "conv2d_forward output");
    return out;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& grad_out) {
    require_4d(x, "conv2d_backward");
    require_4d(grad_out, "conv2d_backward grad_out");
    const int n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int h_out = p.out_size(h), w_out = p.out_size(w);
    if (grad_out.dim(0) != n || grad_out.dim(1) != p.c_out || grad_out.dim(2) != h_out ||
        grad_out.dim(3) != w_out)
        throw std::invalid_argument("conv2d_backward: grad_out shape mismatch");

    ConvGrads g;
    g.grad_x = Tensor({n, c_in, h, w});
    g.grad_kernel.assign(p.kernel.size(), 0.0f);
    g.grad_bias.assign(p.bias.size(), 0.0f);

    const std::size_t kdim = static_cast<std::size_t>(p.c_in) * p.k * p.k;
    const std::size_t odim = static_cast<std::size_t>(h_out) * w_out;
    std::vector<float> col(kdim * odim);
    std::vector<float> gcol(kdim * odim);

    for (int i = 0; i < n; ++i) {
        const float* src = x.data.data() + static_cast<std::size_t>(i) * c_in * h * w;
        const float* go = grad_out.data.data() + static_cast<std::size_t>(i) * p.c_out * odim;

        // grad_kernel += grad_out * col^T
        im2col(src, c_in, h, w, p, h_out, w_out, col.data());
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, p.c_out, static_cast<int>(kdim),
                    static_cast<int>(odim), 1.0f, go, static_cast<int>(odim), col.data(),
                    static_cast<int>(odim), 1.0f, g.grad_kernel.data(),
                    static_cast<int>(kdim));

        // grad_col = kernel^T * grad_out, then scatter back.
        cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(kdim),
                    static_cast<int>(odim), p.c_out, 1.0f, p.kernel.data(),
                    static_cast<int>(kdim), go, static_cast<int>(odim), 0.0f, gcol.data(),
                    static_cast<int>(odim));
        col2im(gcol.data(), c_in, h, w, p, h_out, w_out,
               g.grad_x.data.data() + static_cast<std::size_t>(i) * c_in * h * w);

        for (int c = 0; c < p.c_out; ++c) {
            double acc = 0.0;
            const float* row = go + static_cast<std::size_t>(c) * odim;
            for (std::size_t j = 0; j < odim; ++j) acc += row[j];
            g.grad_bias[static_cast<std::size_t>(c)] += static_cast<float>(acc);
        }
    }
    require_finite(g.grad_x, "conv2d_backward grad_x");
    return g;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    require_4d(x, "upsample_nearest");
    if (factor < 1) throw std::invalid_argument("upsample factor must be >= 1");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor out({n, c, h * factor, w * factor});
    for (int i = 0; i < n; ++i)
        for (int cc = 0; cc < c; ++cc)
            for (int y = 0; y < h * factor; ++y)
                for (int z = 0; z < w * factor; ++z)
                    out.at(i, cc, y, z) = x.at(i, cc, y / factor, z / factor);
    return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, int factor) {
    require_4d(grad_out, "upsample_nearest_backward");
    const int n = grad_out.dim(0), c = grad_out.dim(1);
    const int ho = grad_out.dim(2), wo = grad_out.dim(3);
    if (ho % factor != 0 || wo % factor != 0)
        throw std::invalid_argument("upsample_nearest_backward: dims not divisible by factor");
    Tensor gx({n, c, ho / factor, wo / factor});
    for (int i = 0; i < n; ++i)
        for (int cc = 0; cc < c; ++cc)
            for (int y = 0; y < ho; ++y)
                for (int z = 0; z < wo; ++z)
                    gx.at(i, cc, y / factor, z / factor) += grad_out.at(i, cc, y, z);
    return gx;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    if (x.shape != grad_out.shape)
        throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (x.data[i] <= 0.0f) g.data[i] = 0.0f;
    return g;
}

Tensor tanh_forward(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = std::tanh(v);
    return out;
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_out) {
    if (y.shape != grad_out.shape)
        throw std::invalid_argument("tanh_backward: shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] *= 1.0f - y.data[i] * y.data[i];
    return g;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
    require_4d(xs[0], "concat_channels");
    const int n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
    int c_total = 0;
    for (const Tensor& t : xs) {
        require_4d(t, "concat_channels");
        if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w)
            throw std::invalid_argument("concat_channels: spatial/batch dims mismatch");
        c_total += t.dim(1);
    }
    Tensor out({n, c_total, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::size_t off = static_cast<std::size_t>(i) * c_total * plane;
        for (const Tensor& t : xs) {
            const std::size_t sz = static_cast<std::size_t>(t.dim(1)) * plane;
            std::memcpy(out.data.data() + off,
                        t.data.data() + static_cast<std::size_t>(i) * sz, sz * sizeof(float));
            off += sz;
        }
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& grad, const std::vector<int>& channels) {
    require_4d(grad, "split_channels");
    const int n = grad.dim(0), h = grad.dim(2), w = grad.dim(3);
    int c_total = std::accumulate(channels.begin(), channels.end(), 0);
    if (c_total != grad.dim(1))
        throw std::invalid_argument("split_channels: channel counts do not sum to input");
    std::vector<Tensor> parts;
    parts.reserve(channels.size());
    for (int c : channels) parts.emplace_back(std::vector<int>{n, c, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::size_t off = static_cast<std::size_t>(i) * c_total * plane;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            const std::size_t sz = static_cast<std::size_t>(channels[pi]) * plane;
            std::memcpy(parts[pi].data.data() + static_cast<std::size_t>(i) * sz,
                        grad.data.data() + off, sz * sizeof(float));
            off += sz;
        }
    }
    return parts;
}

}  // namespace ood
