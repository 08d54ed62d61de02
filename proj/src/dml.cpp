#include "ood/dml.hpp"

#include <cmath>
#include <stdexcept>

namespace ood {

namespace {

constexpr double kHalfBin = 1.0 / 255.0;
constexpr double kLn2 = 0.6931471805599453;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 30.0) return z;
    return std::log1p(std::exp(z));
}

// Log-probability of one discretized value under one logistic component,
// plus (optionally) gradients w.r.t. the coupled mean and the clamped
// log-scale. x is on the normalized grid, mu the coupled mean, lsc the
// clamped log-scale.
struct CompEval {
    double logp;
    double dmu;
    double dls;
};

CompEval component_logp(double x, double mu, double lsc, bool want_grad) {
    const double inv_s = std::exp(-lsc);
    const double p_in = (x + kHalfBin - mu) * inv_s;
    const double m_in = (x - kHalfBin - mu) * inv_s;
    CompEval e{0.0, 0.0, 0.0};

    if (x < -0.999) {
        // Left edge bin: integrate the lower tail.
        e.logp = -softplus(-p_in);
        if (want_grad) {
            double d = sigmoid(-p_in);
            e.dmu = d * -inv_s;
            e.dls = d * -p_in;
        }
    } else if (x > 0.999) {
        // Right edge bin: integrate the upper tail.
        e.logp = -softplus(m_in);
        if (want_grad) {
            double d = -sigmoid(m_in);
            e.dmu = d * -inv_s;
            e.dls = d * -m_in;
        }
    } else {
        const double cp = sigmoid(p_in);
        const double cm = sigmoid(m_in);
        const double delta = cp - cm;
        if (delta > kCdfDeltaFloor) {
            e.logp = std::log(delta);
            if (want_grad) {
                const double dp = cp * (1.0 - cp);
                const double dm = cm * (1.0 - cm);
                e.dmu = inv_s * (dm - dp) / delta;
                e.dls = (m_in * dm - p_in * dp) / delta;
            }
        } else {
            // Underflowed bracket: logistic pdf times the bin width.
            const double mid = (x - mu) * inv_s;
            e.logp = mid - lsc - 2.0 * softplus(mid) + std::log(2.0 * kHalfBin);
            if (want_grad) {
                const double d = 1.0 - 2.0 * sigmoid(mid);
                e.dmu = d * -inv_s;
                e.dls = d * -mid - 1.0;
            }
        }
    }
    return e;
}

const Tensor& check_image(const Tensor& x, int h, int w) {
    if (x.shape.size() != 3 || x.dim(0) != 3 || x.dim(1) != h || x.dim(2) != w)
        throw std::invalid_argument("expected normalized 3x" + std::to_string(h) + "x" +
                                    std::to_string(w) + " image");
    return x;
}

// Mixture log2-likelihood of one channel at one pixel, all in double.
double channel_log2p(const MixtureField& f, const Tensor& x, std::size_t px, int c,
                     const double* lw) {
    const int k = f.k_mix;
    const std::size_t plane = static_cast<std::size_t>(f.h) * f.w;
    const double xr = x.data[px];
    const double xg = x.data[plane + px];
    const double xv = x.data[static_cast<std::size_t>(c) * plane + px];
    double amax = -1e300;
    double a[64];
    for (int j = 0; j < k; ++j) {
        const std::size_t pi = (static_cast<std::size_t>(j) * 3 + c) * plane + px;
        double mu = f.means[pi];
        if (c == 1) mu += f.coeffs[(static_cast<std::size_t>(j) * 3 + 0) * plane + px] * xr;
        if (c == 2)
            mu += f.coeffs[(static_cast<std::size_t>(j) * 3 + 1) * plane + px] * xr +
                  f.coeffs[(static_cast<std::size_t>(j) * 3 + 2) * plane + px] * xg;
        double lsc = std::max((double)f.log_scales[pi], (double)kLogScaleFloor);
        a[j] = lw[j] + component_logp(xv, mu, lsc, false).logp;
        amax = std::max(amax, a[j]);
    }
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(a[j] - amax);
    return (amax + std::log(s)) / kLn2;
}

void pixel_log_weights(const MixtureField& f, std::size_t px, double* lw) {
    const int k = f.k_mix;
    const std::size_t plane = static_cast<std::size_t>(f.h) * f.w;
    double mx = -1e30;
    for (int j = 0; j < k; ++j) mx = std::max(mx, (double)f.logits[j * plane + px]);
    double lse_w = 0.0;
    for (int j = 0; j < k; ++j) lse_w += std::exp(f.logits[j * plane + px] - mx);
    lse_w = mx + std::log(lse_w);
    for (int j = 0; j < k; ++j) lw[j] = f.logits[j * plane + px] - lse_w;
}

}  // namespace

MixtureField params_from_features(const Tensor& z) {
    const Tensor* t = &z;
    if (z.shape.size() == 4) {
        if (z.dim(0) != 1)
            throw std::invalid_argument("params_from_features: batch input not supported");
    } else if (z.shape.size() != 3) {
        throw std::invalid_argument("params_from_features: expected C x H x W feature map");
    }
    const int off = static_cast<int>(t->shape.size()) - 3;
    const int c = t->dim(off), h = t->dim(off + 1), w = t->dim(off + 2);
    if (c % 10 != 0)
        throw std::invalid_argument("feature map channel count " + std::to_string(c) +
                                    " is not 10*K");
    const int k = c / 10;
    if (k > 64) throw std::invalid_argument("mixture component count > 64 not supported");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* d = t->data.data();

    MixtureField f;
    f.k_mix = k;
    f.h = h;
    f.w = w;
    f.logits.assign(d, d + k * plane);
    f.means.assign(d + k * plane, d + 4 * k * plane);
    f.log_scales.assign(d + 4 * k * plane, d + 7 * k * plane);
    f.coeffs_raw.assign(d + 7 * k * plane, d + 10 * k * plane);
    f.coeffs.resize(f.coeffs_raw.size());
    for (std::size_t i = 0; i < f.coeffs_raw.size(); ++i)
        f.coeffs[i] = std::tanh(f.coeffs_raw[i]);
    return f;
}

Tensor log_prob_pixel(const MixtureField& f, const Tensor& x) {
    check_image(x, f.h, f.w);
    const std::size_t plane = static_cast<std::size_t>(f.h) * f.w;
    Tensor out({3, f.h, f.w});
    double lw[64];
    for (std::size_t px = 0; px < plane; ++px) {
        pixel_log_weights(f, px, lw);
        for (int c = 0; c < 3; ++c)
            out.data[static_cast<std::size_t>(c) * plane + px] =
                static_cast<float>(channel_log2p(f, x, px, c, lw));
    }
    require_finite(out, "log_prob_pixel");
    return out;
}

double generation_loss(const MixtureField& f, const Tensor& x, const EraseMask& mask) {
    check_image(x, f.h, f.w);
    if (mask.h != f.h || mask.w != f.w)
        throw std::invalid_argument("generation_loss: mask dims do not match field");
    const int nf = mask.erased_count();
    if (nf == 0) throw std::invalid_argument("generation_loss: empty erased region");
    const std::size_t plane = static_cast<std::size_t>(f.h) * f.w;
    double lw[64];
    double acc = 0.0;
    for (std::size_t px = 0; px < plane; ++px) {
        if (mask.m[px]) continue;
        pixel_log_weights(f, px, lw);
        for (int c = 0; c < 3; ++c) acc += channel_log2p(f, x, px, c, lw);
    }
    if (!std::isfinite(acc))
        throw std::invalid_argument("generation_loss: non-finite likelihood");
    return -acc / (static_cast<double>(nf) * 3.0);
}

Tensor generation_loss_grad(const MixtureField& f, const Tensor& x, const EraseMask& mask) {
    check_image(x, f.h, f.w);
    if (mask.h != f.h || mask.w != f.w)
        throw std::invalid_argument("generation_loss_grad: mask dims do not match field");
    const int k = f.k_mix;
    const int nf = mask.erased_count();
    if (nf == 0) throw std::invalid_argument("generation_loss_grad: empty erased region");
    const std::size_t plane = static_cast<std::size_t>(f.h) * f.w;
    Tensor grad({mixture_channels(k), f.h, f.w});
    const double scale = -1.0 / (static_cast<double>(nf) * 3.0 * kLn2);

    std::vector<double> lw(static_cast<std::size_t>(k)), wgt(static_cast<std::size_t>(k));
    std::vector<double> a(static_cast<std::size_t>(k));
    std::vector<CompEval> ev(static_cast<std::size_t>(k));

    for (std::size_t px = 0; px < plane; ++px) {
        if (mask.m[px]) continue;

        double mx = -1e30;
        for (int j = 0; j < k; ++j) mx = std::max(mx, (double)f.logits[j * plane + px]);
        double lse_w = 0.0;
        for (int j = 0; j < k; ++j) lse_w += std::exp(f.logits[j * plane + px] - mx);
        lse_w = mx + std::log(lse_w);
        for (int j = 0; j < k; ++j) {
            lw[j] = f.logits[j * plane + px] - lse_w;
            wgt[j] = std::exp(lw[j]);
        }

        const double xr = x.data[px];
        const double xg = x.data[plane + px];
        const double xb = x.data[2 * plane + px];
        const double xc[3] = {xr, xg, xb};

        for (int c = 0; c < 3; ++c) {
            double amax = -1e300;
            for (int j = 0; j < k; ++j) {
                const std::size_t pi = (static_cast<std::size_t>(j) * 3 + c) * plane + px;
                double mu = f.means[pi];
                if (c == 1) mu += f.coeffs[(static_cast<std::size_t>(j) * 3 + 0) * plane + px] * xr;
                if (c == 2)
                    mu += f.coeffs[(static_cast<std::size_t>(j) * 3 + 1) * plane + px] * xr +
                          f.coeffs[(static_cast<std::size_t>(j) * 3 + 2) * plane + px] * xg;
                double lsc = std::max((double)f.log_scales[pi], (double)kLogScaleFloor);
                ev[j] = component_logp(xc[c], mu, lsc, true);
                a[j] = lw[j] + ev[j].logp;
                amax = std::max(amax, a[j]);
            }
            double s = 0.0;
            for (int j = 0; j < k; ++j) s += std::exp(a[j] - amax);
            const double lse = amax + std::log(s);

            for (int j = 0; j < k; ++j) {
                const double r = std::exp(a[j] - lse);  // responsibility
                const std::size_t pi = (static_cast<std::size_t>(j) * 3 + c) * plane + px;
                // logits: d lse / d logit_j accumulated over channels
                grad.data[static_cast<std::size_t>(j) * plane + px] +=
                    static_cast<float>(scale * (r - wgt[j]));
                // mean
                const double gmu = r * ev[j].dmu;
                grad.data[(static_cast<std::size_t>(k) + j * 3 + c) * plane + px] +=
                    static_cast<float>(scale * gmu);
                // log-scale (clamp gate)
                if (f.log_scales[pi] > kLogScaleFloor)
                    grad.data[(static_cast<std::size_t>(4 * k) + j * 3 + c) * plane + px] +=
                        static_cast<float>(scale * r * ev[j].dls);
                // coupling coefficients via tanh
                auto coeff_grad = [&](int ci, double xdep) {
                    const std::size_t qi = (static_cast<std::size_t>(j) * 3 + ci) * plane + px;
                    const double t = f.coeffs[qi];
                    grad.data[(static_cast<std::size_t>(7 * k) + j * 3 + ci) * plane + px] +=
                        static_cast<float>(scale * gmu * xdep * (1.0 - t * t));
                };
                if (c == 1) coeff_grad(0, xr);
                if (c == 2) {
                    coeff_grad(1, xr);
                    coeff_grad(2, xg);
                }
            }
        }
    }
    require_finite(grad, "generation_loss_grad");
    return grad;
}

}  // namespace ood
