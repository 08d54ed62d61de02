#include "ood/uen.hpp"

#include "ood/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ood {

namespace {

constexpr double kLn2 = 0.6931471805599453;

struct BranchCache {
    Tensor c1, r1, c2, r2, u1, c3, r3, u2, c4, r4;
};

struct ForwardCache {
    Tensor x0;
    std::array<BranchCache, 3> br;
    Tensor cat, z, d1, rd1, d2, o;
};

void run_forward(const UenWeights& w, const Tensor& x_r, ForwardCache& c) {
    if (x_r.shape.size() != 4 || x_r.dim(1) != 3)
        throw std::invalid_argument("uen forward: expected N x 3 x H x W input");
    if (x_r.dim(2) % 4 != 0 || x_r.dim(3) % 4 != 0)
        throw std::invalid_argument("uen forward: spatial dims must be divisible by 4");

    c.x0 = x_r;
    std::vector<Tensor> outs;
    for (int b = 0; b < 3; ++b) {
        BranchCache& bc = c.br[static_cast<std::size_t>(b)];
        const auto& layers = w.branches[static_cast<std::size_t>(b)];
        bc.c1 = conv2d_forward(c.x0, layers[0]);
        bc.r1 = relu(bc.c1);
        bc.c2 = conv2d_forward(bc.r1, layers[1]);
        bc.r2 = relu(bc.c2);
        bc.u1 = upsample_nearest(bc.r2, 2);
        bc.c3 = conv2d_forward(bc.u1, layers[2]);
        bc.r3 = relu(bc.c3);
        bc.u2 = upsample_nearest(bc.r3, 2);
        bc.c4 = conv2d_forward(bc.u2, layers[3]);
        bc.r4 = relu(bc.c4);
        outs.push_back(bc.r4);
    }
    c.cat = concat_channels(outs);
    c.z = conv2d_forward(c.cat, w.head);
    c.d1 = conv2d_forward(c.z, w.dec1);
    c.rd1 = relu(c.d1);
    c.d2 = conv2d_forward(c.rd1, w.dec2);
    c.o = tanh_forward(c.d2);
}

UenWeights run_backward(const UenWeights& w, const ForwardCache& c, const Tensor& grad_z,
                        const Tensor& grad_o) {
    UenWeights g = zero_like(w);

    auto add_into = [](std::vector<float>& dst, const std::vector<float>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };

    // Decoder.
    Tensor gd2 = tanh_backward(c.o, grad_o);
    ConvGrads cg = conv2d_backward(c.rd1, w.dec2, gd2);
    add_into(g.dec2.kernel, cg.grad_kernel);
    add_into(g.dec2.bias, cg.grad_bias);
    Tensor gd1 = relu_backward(c.d1, cg.grad_x);
    cg = conv2d_backward(c.z, w.dec1, gd1);
    add_into(g.dec1.kernel, cg.grad_kernel);
    add_into(g.dec1.bias, cg.grad_bias);

    // Z receives the likelihood gradient plus the decoder path.
    Tensor gz = grad_z;
    for (std::size_t i = 0; i < gz.data.size(); ++i) gz.data[i] += cg.grad_x.data[i];

    cg = conv2d_backward(c.cat, w.head, gz);
    add_into(g.head.kernel, cg.grad_kernel);
    add_into(g.head.bias, cg.grad_bias);

    std::vector<int> widths;
    for (int b = 0; b < 3; ++b)
        widths.push_back(w.branches[static_cast<std::size_t>(b)][3].c_out);
    std::vector<Tensor> parts = split_channels(cg.grad_x, widths);

    for (int b = 0; b < 3; ++b) {
        const BranchCache& bc = c.br[static_cast<std::size_t>(b)];
        const auto& layers = w.branches[static_cast<std::size_t>(b)];
        auto& grads = g.branches[static_cast<std::size_t>(b)];

        Tensor gb = relu_backward(bc.c4, parts[static_cast<std::size_t>(b)]);
        cg = conv2d_backward(bc.u2, layers[3], gb);
        add_into(grads[3].kernel, cg.grad_kernel);
        add_into(grads[3].bias, cg.grad_bias);
        gb = upsample_nearest_backward(cg.grad_x, 2);
        gb = relu_backward(bc.c3, gb);
        cg = conv2d_backward(bc.u1, layers[2], gb);
        add_into(grads[2].kernel, cg.grad_kernel);
        add_into(grads[2].bias, cg.grad_bias);
        gb = upsample_nearest_backward(cg.grad_x, 2);
        gb = relu_backward(bc.c2, gb);
        cg = conv2d_backward(bc.r1, layers[1], gb);
        add_into(grads[1].kernel, cg.grad_kernel);
        add_into(grads[1].bias, cg.grad_bias);
        gb = relu_backward(bc.c1, cg.grad_x);
        cg = conv2d_backward(c.x0, layers[0], gb);
        add_into(grads[0].kernel, cg.grad_kernel);
        add_into(grads[0].bias, cg.grad_bias);
    }
    return g;
}

Tensor slice_sample(const Tensor& batch, int i) {
    const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    Tensor t({c, h, w});
    const std::size_t sz = t.size();
    std::memcpy(t.data.data(), batch.data.data() + static_cast<std::size_t>(i) * sz,
                sz * sizeof(float));
    return t;
}

/// x_r built from a normalized batch: erased pixels dropped to -1
/// (raw-domain zero fill).
Tensor masked_input(const Tensor& x, const std::vector<EraseMask>& masks) {
    Tensor x_r = x;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        const EraseMask& m = masks[static_cast<std::size_t>(i)];
        for (int cc = 0; cc < c; ++cc) {
            float* ch = x_r.data.data() +
                        (static_cast<std::size_t>(i) * c + cc) * plane;
            for (std::size_t p = 0; p < plane; ++p)
                if (!m.m[p]) ch[p] = -1.0f;
        }
    }
    return x_r;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncationError(std::string("unexpected end of file reading ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

void UenConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must be in [0, 1]");
    if (lr < 0.0) throw std::invalid_argument("learning rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (k_mixture < 1) throw std::invalid_argument("k_mixture must be >= 1");
    if (branch_widths.size() != 4)
        throw std::invalid_argument("branch_widths must list 4 channel counts");
    for (int v : branch_widths)
        if (v < 1) throw std::invalid_argument("branch widths must be positive");
    if (decoder_width < 1) throw std::invalid_argument("decoder width must be >= 1");
}

UenWeights init_weights(const UenConfig& cfg) {
    cfg.validate();
    UenWeights w;
    const auto& bw = cfg.branch_widths;
    for (int b = 0; b < 3; ++b) {
        const int k = kBranchKernels[static_cast<std::size_t>(b)];
        const int pad = k / 2;
        auto& layers = w.branches[static_cast<std::size_t>(b)];
        layers[0] = ConvParams(bw[0], 3, k, 2, pad);
        layers[1] = ConvParams(bw[1], bw[0], k, 2, pad);
        layers[2] = ConvParams(bw[2], bw[1], k, 1, pad);
        layers[3] = ConvParams(bw[3], bw[2], k, 1, pad);
    }
    w.head = ConvParams(mixture_channels(cfg.k_mixture), 3 * bw[3], 1, 1, 0);
    w.dec1 = ConvParams(cfg.decoder_width, mixture_channels(cfg.k_mixture), 3, 1, 1);
    w.dec2 = ConvParams(3, cfg.decoder_width, 3, 1, 1);

    Rng rng(Rng(cfg.seed).sub_seed(0x1217));
    w.for_each_layer([&](ConvParams& l) {
        const double limit = std::sqrt(6.0 / (static_cast<double>(l.c_in) * l.k * l.k));
        for (float& v : l.kernel) v = static_cast<float>(rng.uniform(-limit, limit));
        // biases start at zero
    });
    return w;
}

UenWeights zero_like(const UenWeights& w) {
    UenWeights g = w;
    g.for_each_layer([](ConvParams& l) {
        std::fill(l.kernel.begin(), l.kernel.end(), 0.0f);
        std::fill(l.bias.begin(), l.bias.end(), 0.0f);
    });
    return g;
}

UenOutput forward(const UenWeights& w, const Tensor& x_r) {
    ForwardCache c;
    run_forward(w, x_r, c);
    return {std::move(c.z), std::move(c.o)};
}

double loss_r(const Tensor& o, const Tensor& x, const EraseMask& mask) {
    const Tensor* ot = &o;
    const Tensor* xt = &x;
    if (o.shape != x.shape) throw std::invalid_argument("loss_r: shape mismatch");
    const bool batched = o.shape.size() == 4;
    const int n = batched ? o.dim(0) : 1;
    const int c = o.dim(batched ? 1 : 0);
    const int h = o.dim(batched ? 2 : 1);
    const int w = o.dim(batched ? 3 : 2);
    if (h != mask.h || w != mask.w) throw std::invalid_argument("loss_r: mask dims mismatch");
    const int nr = mask.surround_count();
    if (nr == 0) throw std::invalid_argument("loss_r: empty surround");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int cc = 0; cc < c; ++cc) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + cc) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                if (!mask.m[p]) continue;
                const double d = static_cast<double>(ot->data[off + p]) - xt->data[off + p];
                acc += d * d;
            }
        }
    return acc / (static_cast<double>(nr) * c * n);
}

LossBreakdown loss_total(const UenWeights& w, const Tensor& x,
                         const std::vector<EraseMask>& masks, double lambda,
                         UenWeights* grads_out) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    if (static_cast<int>(masks.size()) != n)
        throw std::invalid_argument("loss_total: one mask per sample required");

    ForwardCache cache;
    run_forward(w, masked_input(x, masks), cache);

    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    LossBreakdown lb;

    // Reconstruction term and its gradient.
    Tensor grad_o({n, c, h, wd});
    double rec_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const EraseMask& m = masks[static_cast<std::size_t>(i)];
        const double nr = m.surround_count();
        for (int cc = 0; cc < c; ++cc) {
            const std::size_t off = (static_cast<std::size_t>(i) * c + cc) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                if (!m.m[p]) continue;
                const double d =
                    static_cast<double>(cache.o.data[off + p]) - x.data[off + p];
                rec_acc += d * d / (nr * c * n);
                grad_o.data[off + p] =
                    static_cast<float>(lambda * 2.0 * d / (nr * c * n));
            }
        }
    }
    lb.rec = rec_acc;

    // Generation term per sample.
    Tensor grad_z({n, cache.z.dim(1), h, wd});
    double gen_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        MixtureField field = params_from_features(slice_sample(cache.z, i));
        Tensor xi = slice_sample(x, i);
        gen_acc += generation_loss(field, xi, masks[static_cast<std::size_t>(i)]);
        if (grads_out) {
            Tensor gz = generation_loss_grad(field, xi, masks[static_cast<std::size_t>(i)]);
            const double scale = (1.0 - lambda) / n;
            float* dst = grad_z.data.data() + static_cast<std::size_t>(i) * gz.size();
            for (std::size_t j = 0; j < gz.size(); ++j)
                dst[j] = static_cast<float>(scale * gz.data[j]);
        }
    }
    lb.gen = gen_acc / n;
    lb.total = lambda * lb.rec + (1.0 - lambda) * lb.gen;

    if (grads_out) *grads_out = run_backward(w, cache, grad_z, grad_o);
    return lb;
}

TrainResult train(const UenConfig& cfg, const ImageDataset& dataset) {
    cfg.validate();
    if (dataset.n < cfg.batch_size)
        throw std::invalid_argument("dataset smaller than one batch");
    const std::vector<EraseStrategy> variants =
        parse_strategy(cfg.strategy, dataset.h, dataset.w);
    std::vector<EraseMask> variant_masks;
    for (const EraseStrategy& s : variants)
        variant_masks.push_back(build_mask(s, dataset.h, dataset.w));

    TrainResult result;
    result.weights = init_weights(cfg);

    // Adam state, one slot per parameter vector in layer order.
    struct Moments {
        std::vector<float> m, v;
    };
    std::vector<Moments> mom_k, mom_b;
    result.weights.for_each_layer([&](ConvParams& l) {
        mom_k.push_back({std::vector<float>(l.kernel.size(), 0.0f),
                         std::vector<float>(l.kernel.size(), 0.0f)});
        mom_b.push_back({std::vector<float>(l.bias.size(), 0.0f),
                         std::vector<float>(l.bias.size(), 0.0f)});
    });
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    Rng root(cfg.seed);
    std::vector<int> order(static_cast<std::size_t>(dataset.n));
    for (int i = 0; i < dataset.n; ++i) order[static_cast<std::size_t>(i)] = i;

    const int batches = dataset.n / cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(root.sub_seed(2 * static_cast<std::uint64_t>(epoch)));
        Rng variant_rng(root.sub_seed(2 * static_cast<std::uint64_t>(epoch) + 1));
        shuffle_rng.shuffle(order);

        double et = 0.0, er = 0.0, eg = 0.0;
        for (int bi = 0; bi < batches; ++bi) {
            Tensor x({cfg.batch_size, 3, dataset.h, dataset.w});
            std::vector<EraseMask> masks;
            for (int s = 0; s < cfg.batch_size; ++s) {
                const int idx = order[static_cast<std::size_t>(bi * cfg.batch_size + s)];
                Tensor img = dataset.normalized(idx);
                std::memcpy(x.data.data() + static_cast<std::size_t>(s) * img.size(),
                            img.data.data(), img.size() * sizeof(float));
                const std::size_t v =
                    variants.size() > 1 ? variant_rng.next_below(variants.size()) : 0;
                masks.push_back(variant_masks[v]);
            }

            UenWeights grads = zero_like(result.weights);
            LossBreakdown lb = loss_total(result.weights, x, masks, cfg.lambda, &grads);
            if (!std::isfinite(lb.total))
                throw DivergenceError("training loss became non-finite at epoch " +
                                      std::to_string(epoch));
            et += lb.total;
            er += lb.rec;
            eg += lb.gen;

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            std::vector<ConvParams*> wl, gl;
            result.weights.for_each_layer([&](ConvParams& l) { wl.push_back(&l); });
            grads.for_each_layer([&](ConvParams& l) { gl.push_back(&l); });
            auto update = [&](std::vector<float>& p, const std::vector<float>& g,
                              Moments& mo) {
                for (std::size_t j = 0; j < p.size(); ++j) {
                    mo.m[j] = static_cast<float>(beta1 * mo.m[j] + (1.0 - beta1) * g[j]);
                    mo.v[j] =
                        static_cast<float>(beta2 * mo.v[j] + (1.0 - beta2) * g[j] * g[j]);
                    const double mhat = mo.m[j] / bc1;
                    const double vhat = mo.v[j] / bc2;
                    p[j] = static_cast<float>(p[j] - cfg.lr * mhat / (std::sqrt(vhat) + eps));
                }
            };
            for (std::size_t li = 0; li < wl.size(); ++li) {
                update(wl[li]->kernel, gl[li]->kernel, mom_k[li]);
                update(wl[li]->bias, gl[li]->bias, mom_b[li]);
            }
        }

        result.log.push_back({epoch, et / batches, er / batches, eg / batches});

        if (cfg.early_stop && epoch >= cfg.plateau_epochs) {
            const double prev =
                result.log[static_cast<std::size_t>(epoch - cfg.plateau_epochs)].total;
            const double cur = result.log.back().total;
            if (prev > 0.0 && (prev - cur) / std::abs(prev) < cfg.plateau_tol) break;
        }
    }
    return result;
}

std::vector<double> score_dataset(const UenWeights& w, const ImageDataset& ds,
                                  const std::vector<EraseStrategy>& variants) {
    if (variants.empty()) throw std::invalid_argument("score_dataset: no strategy variants");
    std::vector<double> scores(static_cast<std::size_t>(ds.n), 0.0);
    const int chunk = 64;
    for (const EraseStrategy& s : variants) {
        const EraseMask mask = build_mask(s, ds.h, ds.w);
        for (int start = 0; start < ds.n; start += chunk) {
            const int count = std::min(chunk, ds.n - start);
            Tensor x({count, 3, ds.h, ds.w});
            for (int i = 0; i < count; ++i) {
                Tensor img = ds.normalized(start + i);
                std::memcpy(x.data.data() + static_cast<std::size_t>(i) * img.size(),
                            img.data.data(), img.size() * sizeof(float));
            }
            UenOutput out = forward(w, masked_input(x, std::vector<EraseMask>(
                                                           static_cast<std::size_t>(count),
                                                           mask)));
            for (int i = 0; i < count; ++i) {
                MixtureField field = params_from_features(slice_sample(out.z, i));
                scores[static_cast<std::size_t>(start + i)] +=
                    generation_loss(field, slice_sample(x, i), mask);
            }
        }
    }
    for (double& v : scores) v /= static_cast<double>(variants.size());
    return scores;
}

std::vector<float> likelihood_heatmap(const UenWeights& w, const ImageDataset& ds,
                                      const std::vector<EraseStrategy>& variants) {
    if (ds.n == 0) throw std::invalid_argument("likelihood_heatmap: empty dataset");
    if (variants.empty()) throw std::invalid_argument("likelihood_heatmap: no variants");
    const std::size_t plane = static_cast<std::size_t>(ds.h) * ds.w;
    std::vector<double> acc(plane, 0.0);
    const double sigma = 0.1;
    const double log2_norm = -std::log(sigma * std::sqrt(2.0 * M_PI)) / kLn2;
    const int chunk = 64;

    for (const EraseStrategy& s : variants) {
        const EraseMask mask = build_mask(s, ds.h, ds.w);
        for (int start = 0; start < ds.n; start += chunk) {
            const int count = std::min(chunk, ds.n - start);
            Tensor x({count, 3, ds.h, ds.w});
            for (int i = 0; i < count; ++i) {
                Tensor img = ds.normalized(start + i);
                std::memcpy(x.data.data() + static_cast<std::size_t>(i) * img.size(),
                            img.data.data(), img.size() * sizeof(float));
            }
            UenOutput out = forward(w, masked_input(x, std::vector<EraseMask>(
                                                           static_cast<std::size_t>(count),
                                                           mask)));
            for (int i = 0; i < count; ++i) {
                Tensor xi = slice_sample(x, i);
                MixtureField field = params_from_features(slice_sample(out.z, i));
                Tensor lp = log_prob_pixel(field, xi);
                for (std::size_t p = 0; p < plane; ++p) {
                    double v = 0.0;
                    if (!mask.m[p]) {
                        for (int c = 0; c < 3; ++c) v += lp.data[c * plane + p];
                    } else {
                        for (int c = 0; c < 3; ++c) {
                            const std::size_t off =
                                (static_cast<std::size_t>(i) * 3 + c) * plane + p;
                            const double d =
                                (xi.data[c * plane + p] - out.o.data[off]) / sigma;
                            v += log2_norm - 0.5 * d * d / kLn2;
                        }
                    }
                    acc[p] += v / 3.0;
                }
            }
        }
    }
    std::vector<float> map(plane);
    const double denom = static_cast<double>(ds.n) * variants.size();
    for (std::size_t p = 0; p < plane; ++p) map[p] = static_cast<float>(acc[p] / denom);
    return map;
}

void export_features(const UenWeights& w, const ImageDataset& ds,
                     const std::vector<EraseStrategy>& variants, const std::string& path) {
    if (variants.empty()) throw std::invalid_argument("export_features: no variants");
    const EraseMask mask = build_mask(variants.front(), ds.h, ds.w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write feature file: " + path);
    const int chunk = 64;
    std::uint32_t dim = 0;

    // First pass writes a placeholder dim; with a fixed architecture we know
    // it after the first forward, so compute one sample up front.
    {
        Tensor probe({1, 3, ds.h, ds.w});
        if (ds.n > 0) {
            Tensor img = ds.normalized(0);
            std::memcpy(probe.data.data(), img.data.data(), img.size() * sizeof(float));
        }
        UenOutput o = forward(w, masked_input(probe, {mask}));
        dim = static_cast<std::uint32_t>(o.z.size());
    }

    out.write("FMAT", 4);
    write_u32_le(out, 1);
    write_u32_le(out, static_cast<std::uint32_t>(ds.n));
    write_u32_le(out, dim);

    for (int start = 0; start < ds.n; start += chunk) {
        const int count = std::min(chunk, ds.n - start);
        Tensor x({count, 3, ds.h, ds.w});
        for (int i = 0; i < count; ++i) {
            Tensor img = ds.normalized(start + i);
            std::memcpy(x.data.data() + static_cast<std::size_t>(i) * img.size(),
                        img.data.data(), img.size() * sizeof(float));
        }
        UenOutput o = forward(w, masked_input(x, std::vector<EraseMask>(
                                                     static_cast<std::size_t>(count), mask)));
        out.write(reinterpret_cast<const char*>(o.z.data.data()),
                  static_cast<std::streamsize>(o.z.size() * sizeof(float)));
    }
    if (!out) throw FormatError("short write to " + path);
}

std::vector<std::vector<float>> load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open feature file: " + path);
    char magic[4];
    if (!in.read(magic, 4)) throw TruncationError("FMAT header truncated");
    if (std::memcmp(magic, "FMAT", 4) != 0) throw FormatError("bad FMAT magic");
    const std::uint32_t version = read_u32_le(in, "FMAT version");
    if (version != 1) throw VersionError("unsupported FMAT version");
    const std::uint32_t n = read_u32_le(in, "FMAT N");
    const std::uint32_t d = read_u32_le(in, "FMAT D");
    std::vector<std::vector<float>> rows(n, std::vector<float>(d));
    for (auto& row : rows)
        if (!in.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(d * sizeof(float))))
            throw TruncationError("FMAT payload truncated");
    return rows;
}

}  // namespace ood
