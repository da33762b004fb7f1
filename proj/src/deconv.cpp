#include "csf/deconv.hpp"

#include <fftw3.h>

#include <complex>
#include <cstdlib>
#include <mutex>
#include <vector>

namespace csf {

// ---------------------------------------------------------------- fft

namespace {

std::mutex g_fftw_plan_mutex;  // FFTW planning is not thread-safe

// real 2-D FFT pair on a fixed grid; spectra stored packed (h x (w/2+1))
class Fft2 {
public:
    Fft2(int h, int w) : h_(h), w_(w), wc_(w / 2 + 1) {
        real_ = fftw_alloc_real(static_cast<size_t>(h_) * w_);
        cplx_ = fftw_alloc_complex(static_cast<size_t>(h_) * wc_);
        std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
        fwd_ = fftw_plan_dft_r2c_2d(h_, w_, real_, cplx_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(h_, w_, cplx_, real_, FFTW_ESTIMATE);
    }
    ~Fft2() {
        std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(cplx_);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    using Spectrum = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

    Spectrum forward(const Eigen::MatrixXd& m) {
        for (int r = 0; r < h_; ++r)
            for (int c = 0; c < w_; ++c) real_[static_cast<size_t>(r) * w_ + c] = m(r, c);
        fftw_execute(fwd_);
        Spectrum s(h_, wc_);
        for (int r = 0; r < h_; ++r)
            for (int c = 0; c < wc_; ++c) {
                auto* v = cplx_ + static_cast<size_t>(r) * wc_ + c;
                s(r, c) = std::complex<double>((*v)[0], (*v)[1]);
            }
        return s;
    }

    Eigen::MatrixXd inverse(const Spectrum& s) {
        for (int r = 0; r < h_; ++r)
            for (int c = 0; c < wc_; ++c) {
                auto* v = cplx_ + static_cast<size_t>(r) * wc_ + c;
                (*v)[0] = s(r, c).real();
                (*v)[1] = s(r, c).imag();
            }
        fftw_execute(bwd_);
        Eigen::MatrixXd m(h_, w_);
        const double norm = 1.0 / (static_cast<double>(h_) * w_);
        for (int r = 0; r < h_; ++r)
            for (int c = 0; c < w_; ++c) m(r, c) = real_[static_cast<size_t>(r) * w_ + c] * norm;
        return m;
    }

    int h() const { return h_; }
    int w() const { return w_; }

private:
    int h_, w_, wc_;
    double* real_;
    fftw_complex* cplx_;
    fftw_plan fwd_, bwd_;
};

// kernel embedded at the origin with its center wrapped, ready for FFT
Eigen::MatrixXd embed_kernel(const Eigen::MatrixXd& k, int h, int w) {
    const int a = static_cast<int>(k.rows());
    const int c = a / 2;
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(h, w);
    for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v)
            e(((u - c) % h + h) % h, ((v - c) % w + w) % w) += k(u, v);
    return e;
}

// circular forward differences and adjoints
void dx_fwd(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) {
    const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
    out.resize(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out(r, c) = x(r, (c + 1) % w) - x(r, c);
}
void dy_fwd(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) {
    const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
    out.resize(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out(r, c) = x((r + 1) % h, c) - x(r, c);
}
void dx_adj(const Eigen::MatrixXd& g, Eigen::MatrixXd& out) {
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    out.resize(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out(r, c) = g(r, (c - 1 + w) % w) - g(r, c);
}
void dy_adj(const Eigen::MatrixXd& g, Eigen::MatrixXd& out) {
    const int h = static_cast<int>(g.rows()), w = static_cast<int>(g.cols());
    out.resize(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out(r, c) = g((r - 1 + h) % h, c) - g(r, c);
}

Eigen::MatrixXd mirror_pad(const Eigen::MatrixXd& m, int pad_top, int pad_bottom,
                           int pad_left, int pad_right) {
    const int h = static_cast<int>(m.rows()), w = static_cast<int>(m.cols());
    Eigen::MatrixXd out(h + pad_top + pad_bottom, w + pad_left + pad_right);
    auto fold = [](int j, int n) {
        while (j < 0 || j >= n) {
            if (j < 0) j = -j;
            if (j >= n) j = 2 * (n - 1) - j;
        }
        return j;
    };
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c)
            out(r, c) = m(fold(static_cast<int>(r) - pad_top, h),
                          fold(static_cast<int>(c) - pad_left, w));
    return out;
}

// smallest 5-smooth size >= n, keeps the FFTs fast
int next_fast_size(int n) {
    for (int s = n;; ++s) {
        int r = s;
        for (int f : {2, 3, 5})
            while (r % f == 0) r /= f;
        if (r == 1) return s;
    }
}

}  // namespace

// ---------------------------------------------------------------- kernels

BlurKernel BlurKernel::centered_delta(int a) {
    BlurKernel k;
    k.k = Eigen::MatrixXd::Zero(a, a);
    k.k(a / 2, a / 2) = 1.0;
    return k;
}

void BlurKernel::project() {
    k = k.cwiseMax(0.0);
    const double s = k.sum();
    if (s > 1e-12) {
        k /= s;
    } else {
        const int a = side();
        k.setZero();
        k(a / 2, a / 2) = 1.0;
    }
}

double kernel_correlation(const BlurKernel& a, const BlurKernel& b) {
    if (a.side() != b.side()) throw DimensionError("kernel_correlation: side mismatch");
    const double na = a.k.norm(), nb = b.k.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return (a.k.array() * b.k.array()).sum() / (na * nb);
}

GrayImage convolve_mirror(const GrayImage& img, const BlurKernel& kernel) {
    const int h = img.h(), w = img.w(), a = kernel.side(), c0 = a / 2;
    auto fold = [](int j, int n) {
        while (j < 0 || j >= n) {
            if (j < 0) j = -j;
            if (j >= n) j = 2 * (n - 1) - j;
        }
        return j;
    };
    GrayImage out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int u = 0; u < a; ++u)
                for (int v = 0; v < a; ++v)
                    s += kernel.k(u, v) * img.pix(fold(r - (u - c0), h), fold(c - (v - c0), w));
            out.at(r, c) = s;
        }
    return out;
}

// ---------------------------------------------------------------- synth

GrayImage synth_natural_image(int h, int w, RandomSeed seed) {
    Rng rng(seed);
    GrayImage img(h, w);
    // smooth base illumination
    const double a0 = 0.35 + 0.3 * rng.uniform();
    const double gr = (rng.uniform() - 0.5) * 0.4;
    const double gc = (rng.uniform() - 0.5) * 0.4;
    const double f1 = 1.0 + 2.0 * rng.uniform(), f2 = 1.0 + 2.0 * rng.uniform();
    const double ph1 = 2.0 * M_PI * rng.uniform(), ph2 = 2.0 * M_PI * rng.uniform();
    const double amp = 0.05 + 0.12 * rng.uniform();
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double yr = static_cast<double>(r) / h, xc = static_cast<double>(c) / w;
            img.at(r, c) = a0 + gr * yr + gc * xc +
                           amp * std::sin(2.0 * M_PI * f1 * yr + ph1) *
                               std::sin(2.0 * M_PI * f2 * xc + ph2);
        }
    // elliptical regions; edge widths go down to a fraction of a pixel so
    // raw patches keep genuinely sharp structure
    const int n_shapes = 5 + static_cast<int>(rng.uniform_int(7));
    for (int s = 0; s < n_shapes; ++s) {
        const double cy = h * rng.uniform(), cx = w * rng.uniform();
        const double ry = (0.06 + 0.22 * rng.uniform()) * h;
        const double rx = (0.06 + 0.22 * rng.uniform()) * w;
        const double th = M_PI * rng.uniform();
        const double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + 0.3 * rng.uniform());
        const double soft = 0.2 + 1.0 * rng.uniform();  // edge width in pixels
        const double ct = std::cos(th), st = std::sin(th);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double dy = r - cy, dx = c - cx;
                const double u = (ct * dx + st * dy) / rx;
                const double v = (-st * dx + ct * dy) / ry;
                const double d = (std::sqrt(u * u + v * v) - 1.0) * std::min(rx, ry);
                img.at(r, c) += delta / (1.0 + std::exp(std::min(40.0, d / soft)));
            }
    }
    // a few hard-edged rectangles: exact step edges
    const int n_rects = 2 + static_cast<int>(rng.uniform_int(3));
    for (int s = 0; s < n_rects; ++s) {
        const int r0 = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h)));
        const int c0 = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w)));
        const int rh = 3 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h / 3)));
        const int rw = 3 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w / 3)));
        const double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.08 + 0.25 * rng.uniform());
        for (int r = r0; r < std::min(h, r0 + rh); ++r)
            for (int c = c0; c < std::min(w, c0 + rw); ++c) img.at(r, c) += delta;
    }
    // smoothed texture plus per-pixel sensor-like noise
    const double tex_amp = 0.01 + 0.03 * rng.uniform();
    Eigen::MatrixXd noise(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) noise(r, c) = rng.normal();
    const int rad = 1 + static_cast<int>(rng.uniform_int(2));
    auto fold = [](int j, int n) {
        while (j < 0 || j >= n) {
            if (j < 0) j = -j;
            if (j >= n) j = 2 * (n - 1) - j;
        }
        return j;
    };
    Eigen::MatrixXd sm = Eigen::MatrixXd::Zero(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int dr = -rad; dr <= rad; ++dr)
                for (int dc = -rad; dc <= rad; ++dc) s += noise(fold(r + dr, h), fold(c + dc, w));
            sm(r, c) = s / ((2 * rad + 1) * (2 * rad + 1));
        }
    img.pix += tex_amp * sm;
    // sharp mid-contrast speckle over a few elliptical regions, like grass
    // or fabric in camera patches
    const int n_tex = 1 + static_cast<int>(rng.uniform_int(2));
    for (int s = 0; s < n_tex; ++s) {
        const double cy = h * rng.uniform(), cx = w * rng.uniform();
        const double ry = (0.10 + 0.18 * rng.uniform()) * h;
        const double rx = (0.10 + 0.18 * rng.uniform()) * w;
        const double amp = 0.015 + 0.02 * rng.uniform();
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double u = (c - cx) / rx, v = (r - cy) / ry;
                if (u * u + v * v < 1.0) img.at(r, c) += amp * (2.0 * rng.uniform() - 1.0);
                else rng.uniform();  // keep the draw sequence position-independent
            }
    }
    // fine global grain: never-compressed captures keep pixel-level detail
    const double grain_amp = 0.008 + 0.006 * rng.uniform();
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img.at(r, c) += grain_amp * (2.0 * rng.uniform() - 1.0);
    const double noise_amp = 0.003 + 0.005 * rng.uniform();
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img.at(r, c) += noise_amp * rng.normal();
    img.pix = img.pix.cwiseMax(0.02).cwiseMin(0.98);
    return img;
}

// ---------------------------------------------------------------- lsi fit

BlurKernel fit_lsi_kernel(const ImagePipeline& pipeline, int kernel_side, int n_probes,
                          RandomSeed seed, int probe_size) {
    const int a = kernel_side;
    if (a < 1 || a % 2 == 0) throw Error("fit_lsi_kernel: kernel side must be odd and positive");
    if (n_probes < a * a) throw Error("fit_lsi_kernel: need at least a^2 probes");
    const int n = probe_size;
    const int margin = a;  // stay clear of boundary effects
    if (n <= 4 * margin) throw DimensionError("fit_lsi_kernel: probe size too small");

    const int d = a * a;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    const int c0 = a / 2;

    for (int pi = 0; pi < n_probes; ++pi) {
        GrayImage probe = synth_natural_image(n, n, Rng::derive(seed, static_cast<uint64_t>(pi)));
        GrayImage out = pipeline(probe);
        if (out.h() != n || out.w() != n)
            throw DimensionError("fit_lsi_kernel: pipeline changed image dimensions");
        const int rows = (n - 2 * margin) * (n - 2 * margin);
        Eigen::MatrixXd P(rows, d);
        Eigen::VectorXd t(rows);
        int row = 0;
        for (int r = margin; r < n - margin; ++r)
            for (int c = margin; c < n - margin; ++c) {
                int col = 0;
                for (int u = 0; u < a; ++u)
                    for (int v = 0; v < a; ++v)
                        P(row, col++) = probe.pix(r - (u - c0), c - (v - c0));
                t(row) = out.pix(r, c);
                ++row;
            }
        G.noalias() += P.transpose() * P;
        b.noalias() += P.transpose() * t;
    }

    // tiny ridge for conditioning only
    const double ridge = 1e-10 * G.trace() / d;
    G.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success)
        throw NumericalRankError("fit_lsi_kernel: probes lack spectral diversity");
    Eigen::VectorXd k = ldlt.solve(b);
    if (!k.allFinite())
        throw NumericalRankError("fit_lsi_kernel: singular normal equations");

    BlurKernel out;
    out.k.resize(a, a);
    int col = 0;
    for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v) out.k(u, v) = k(col++);
    out.project();
    return out;
}

// ---------------------------------------------------------------- blind

namespace {

// non-negative quadratic solve: min_{k>=0} 1/2 k'Gk - b'k, projected
// accelerated gradient with fixed step
Eigen::VectorXd nnls_projected(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                               const Eigen::VectorXd& init) {
    const Eigen::Index d = b.size();
    // largest eigenvalue by power iteration (deterministic start)
    Eigen::VectorXd v = Eigen::VectorXd::Ones(d).normalized();
    double L = 1.0;
    for (int i = 0; i < 40; ++i) {
        v = G * v;
        L = v.norm();
        if (L <= 0) break;
        v /= L;
    }
    if (L <= 0) return init;
    const double step = 1.0 / (1.01 * L);
    Eigen::VectorXd x = init.cwiseMax(0.0), yv = x, x_old = x;
    double t = 1.0;
    for (int it = 0; it < 400; ++it) {
        x = (yv - step * (G * yv - b)).cwiseMax(0.0);
        const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        yv = x + ((t - 1.0) / t_new) * (x - x_old);
        if ((x - x_old).norm() < 1e-12 * (1.0 + x.norm())) { x_old = x; break; }
        x_old = x;
        t = t_new;
    }
    return x_old;
}

}  // namespace

namespace {

// kernel step: robust least squares on derivative-domain patches. Rows are
// reweighted against the current kernel's residual so reconstruction
// artifacts in the observation act as outliers instead of data.
BlurKernel solve_kernel_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gxo,
                             const Eigen::MatrixXd& gyo, int a, int band,
                             const BlurKernel& current, double robust_eps) {
    const int H = static_cast<int>(x.rows()), W = static_cast<int>(x.cols());
    const int d = a * a, c0 = a / 2;
    Eigen::MatrixXd gx, gy;
    dx_fwd(x, gx);
    dy_fwd(x, gy);

    // rank valid pixels by gradient magnitude, keep the strongest
    std::vector<std::pair<double, int>> mag;
    mag.reserve(static_cast<size_t>(H - 2 * band) * (W - 2 * band));
    for (int r = band; r < H - band; ++r)
        for (int c = band; c < W - band; ++c) {
            const double m = gx(r, c) * gx(r, c) + gy(r, c) * gy(r, c);
            mag.emplace_back(-m, r * W + c);
        }
    const size_t keep = std::min<size_t>(8000, mag.size());
    std::partial_sort(mag.begin(), mag.begin() + keep, mag.end());

    Eigen::MatrixXd P(2 * keep, d);
    Eigen::VectorXd t(2 * keep);
    for (size_t s = 0; s < keep; ++s) {
        const int p = mag[s].second;
        const int r = p / W, c = p % W;
        int col = 0;
        for (int u = 0; u < a; ++u)
            for (int v = 0; v < a; ++v) {
                P(2 * s, col) = gx(r - (u - c0), c - (v - c0));
                P(2 * s + 1, col) = gy(r - (u - c0), c - (v - c0));
                ++col;
            }
        t(2 * s) = gxo(r, c);
        t(2 * s + 1) = gyo(r, c);
    }

    Eigen::VectorXd k(d);
    for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v) k(u * a + v) = current.k(u, v);
    const int robust_passes = 3;
    for (int pass = 0; pass < robust_passes; ++pass) {
        Eigen::VectorXd resid = P * k - t;
        Eigen::VectorXd wsqrt =
            (robust_eps / (resid.array().square() + robust_eps * robust_eps).sqrt())
                .sqrt()
                .matrix();
        Eigen::MatrixXd Pw = wsqrt.asDiagonal() * P;
        Eigen::MatrixXd G = Pw.transpose() * Pw;
        Eigen::VectorXd bb = Pw.transpose() * (wsqrt.asDiagonal() * t);
        G.diagonal().array() += 1e-8 * G.trace() / d;
        k = nnls_projected(G, bb, k);
    }

    BlurKernel next;
    next.k.resize(a, a);
    for (int u = 0; u < a; ++u)
        for (int v = 0; v < a; ++v) next.k(u, v) = k(u * a + v);
    next.project();
    return next;
}

}  // namespace

DeconvResult blind_deconvolve(const GrayImage& img, const DeconvConfig& cfg) {
    const int a = cfg.kernel_side;
    if (a < 3 || a % 2 == 0) throw Error("blind_deconvolve: kernel side must be odd and >= 3");
    if (img.h() < 4 * a || img.w() < 4 * a)
        throw DimensionError("blind_deconvolve: image side must be at least 4x the kernel side");

    // degenerate flat input: no gradients to constrain a kernel
    {
        Eigen::MatrixXd gx, gy;
        dx_fwd(img.pix, gx);
        dy_fwd(img.pix, gy);
        const double ge = (gx.squaredNorm() + gy.squaredNorm()) / img.pix.size();
        if (ge < 1e-12) throw DegenerateInputError("blind_deconvolve: flat image");
    }

    // mirror padding sized so the transforms are 5-smooth
    const int Hf = next_fast_size(img.h() + 2 * a), Wf = next_fast_size(img.w() + 2 * a);
    const int pad_t = (Hf - img.h()) / 2, pad_b = Hf - img.h() - pad_t;
    const int pad_l = (Wf - img.w()) / 2, pad_r = Wf - img.w() - pad_l;
    const Eigen::MatrixXd y = mirror_pad(img.pix, pad_t, pad_b, pad_l, pad_r);
    const int H = Hf, W = Wf;
    const int band = std::min({pad_t, pad_b, pad_l, pad_r}) + a / 2 + 1;
    Fft2 fft(H, W);
    const auto Yhat = fft.forward(y);

    Eigen::MatrixXd x = y;  // latent sharp estimate
    BlurKernel kernel = BlurKernel::centered_delta(a);

    Eigen::MatrixXd gxo, gyo;
    dx_fwd(y, gxo);
    dy_fwd(y, gyo);

    double eps2 = 1e-6;  // IRLS weight floor
    if (const char* e = std::getenv("CSF_TUNE_EPS2")) eps2 = std::atof(e);
    int anneal_steps = 5;
    if (const char* e = std::getenv("CSF_TUNE_ANNEAL")) anneal_steps = std::atoi(e);
    double data_eps = 1e-2;  // robust data-loss scale
    if (const char* e = std::getenv("CSF_TUNE_DEPS")) data_eps = std::atof(e);
    double kernel_eps = 1e-2;
    if (const char* e = std::getenv("CSF_TUNE_KEPS")) kernel_eps = std::atof(e);
    DeconvResult res;
    int outer = 0;
    for (; outer < cfg.outer_iters; ++outer) {
        const double lam =
            cfg.lambda * static_cast<double>(1 << std::max(0, anneal_steps - outer));

        // ---- image step: IRLS with a sparse-gradient prior and a robust
        // data weight, so solver artifacts in y count as outliers
        const auto Khat = fft.forward(embed_kernel(kernel.k, H, W));
        for (int irls = 0; irls < cfg.irls_iters; ++irls) {
            Eigen::MatrixXd gx, gy;
            dx_fwd(x, gx);
            dy_fwd(x, gy);
            Eigen::MatrixXd wx =
                (gx.array().square() + eps2).pow(0.5 * (cfg.prior_p - 2.0)).matrix();
            Eigen::MatrixXd wy =
                (gy.array().square() + eps2).pow(0.5 * (cfg.prior_p - 2.0)).matrix();
            Eigen::MatrixXd rdat =
                fft.inverse(Khat.cwiseProduct(fft.forward(x))) - y;
            Eigen::MatrixXd wd =
                (data_eps / (rdat.array().square() + data_eps * data_eps).sqrt()).matrix();

            auto apply = [&](const Eigen::MatrixXd& v) {
                Eigen::MatrixXd kv = fft.inverse(Khat.cwiseProduct(fft.forward(v)));
                kv.array() *= wd.array();
                kv = fft.inverse(Khat.conjugate().cwiseProduct(fft.forward(kv)));
                Eigen::MatrixXd dv, tmp;
                dx_fwd(v, dv);
                dv.array() *= wx.array();
                dx_adj(dv, tmp);
                kv += lam * tmp;
                dy_fwd(v, dv);
                dv.array() *= wy.array();
                dy_adj(dv, tmp);
                kv += lam * tmp;
                return kv;
            };
            Eigen::MatrixXd rhs_in = y;
            rhs_in.array() *= wd.array();
            Eigen::MatrixXd kty = fft.inverse(Khat.conjugate().cwiseProduct(fft.forward(rhs_in)));

            // conjugate gradients, warm started at the current x
            Eigen::MatrixXd r = kty - apply(x);
            Eigen::MatrixXd p = r;
            double rs = r.squaredNorm();
            const double rs0 = rs;
            for (int cg = 0; cg < cfg.cg_iters && rs > 1e-12 * rs0; ++cg) {
                Eigen::MatrixXd ap = apply(p);
                const double alpha = rs / p.cwiseProduct(ap).sum();
                x += alpha * p;
                r -= alpha * ap;
                const double rs_new = r.squaredNorm();
                p = r + (rs_new / rs) * p;
                rs = rs_new;
            }
        }

        // ---- kernel step
        BlurKernel next = solve_kernel_step(x, gxo, gyo, a, band, kernel, kernel_eps);
        const double change = (next.k - kernel.k).norm();
        kernel = next;
        if (outer >= anneal_steps && change < cfg.tol) {
            res.converged = true;
            ++outer;
            break;
        }
    }

    res.kernel = kernel;
    res.outer_iterations = outer;
    GrayImage sharp(img.h(), img.w());
    sharp.pix = x.block(pad_t, pad_l, img.h(), img.w());
    sharp.clamp01();
    res.sharp = sharp;
    return res;
}

BlurKernel estimate_kernel(const GrayImage& img, int kernel_side, const DeconvConfig& cfg) {
    DeconvConfig c = cfg;
    c.kernel_side = kernel_side;
    return blind_deconvolve(img, c).kernel;
}

}  // namespace csf
