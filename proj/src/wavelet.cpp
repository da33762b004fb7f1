#include "csf/wavelet.hpp"

namespace csf {

namespace {

// whole-point symmetric index fold into [0, n)
inline int mirror(int j, int n) {
    while (j < 0 || j >= n) {
        if (j < 0) j = -j;
        if (j >= n) j = 2 * (n - 1) - j;
    }
    return j;
}

}  // namespace

const FilterBank& FilterBank::bior44() {
    // CDF 9/7 pair scaled so both lowpass DC gains equal sqrt(2); the
    // analysis/synthesis highpass follow from the alternating-sign
    // relations h1[k] = (-1)^(k+1) g0[k], g1[k] = (-1)^(k+1) h0[k]
    // (centered indices), which give perfect reconstruction.
    static const FilterBank fb = [] {
        FilterBank f;
        f.analysis_lo = {0.03782845550726404,  -0.023849465019556843, -0.11062440441843718,
                         0.37740285561283066,  0.8526986790088938,    0.37740285561283066,
                         -0.11062440441843718, -0.023849465019556843, 0.03782845550726404};
        f.synthesis_lo = {-0.06453888262869706, -0.04068941760916406, 0.41809227322161724,
                          0.7884856164055829,   0.41809227322161724,  -0.04068941760916406,
                          -0.06453888262869706};
        f.analysis_hi.resize(f.synthesis_lo.size());
        for (size_t k = 0; k < f.synthesis_lo.size(); ++k) {
            const int c = static_cast<int>(k) - static_cast<int>(f.synthesis_lo.size() / 2);
            f.analysis_hi[k] = ((c % 2 == 0) ? -1.0 : 1.0) * f.synthesis_lo[k];
        }
        f.synthesis_hi.resize(f.analysis_lo.size());
        for (size_t k = 0; k < f.analysis_lo.size(); ++k) {
            const int c = static_cast<int>(k) - static_cast<int>(f.analysis_lo.size() / 2);
            f.synthesis_hi[k] = ((c % 2 == 0) ? -1.0 : 1.0) * f.analysis_lo[k];
        }
        return f;
    }();
    return fb;
}

int FilterBank::max_support() const {
    size_t m = std::max(std::max(analysis_lo.size(), analysis_hi.size()),
                        std::max(synthesis_lo.size(), synthesis_hi.size()));
    return static_cast<int>(m);
}

void dwt1(const std::vector<double>& x, const FilterBank& fb,
          std::vector<double>& approx, std::vector<double>& detail) {
    const int n = static_cast<int>(x.size());
    if (n < 2 || n % 2 != 0) throw DimensionError("dwt1: signal length must be even and >= 2");
    const int m = n / 2;
    approx.assign(m, 0.0);
    detail.assign(m, 0.0);
    const int c0 = static_cast<int>(fb.analysis_lo.size()) / 2;
    const int c1 = static_cast<int>(fb.analysis_hi.size()) / 2;
    for (int i = 0; i < m; ++i) {
        double a = 0.0;
        for (size_t k = 0; k < fb.analysis_lo.size(); ++k)
            a += fb.analysis_lo[k] * x[mirror(2 * i + static_cast<int>(k) - c0, n)];
        approx[i] = a;
        double d = 0.0;
        for (size_t k = 0; k < fb.analysis_hi.size(); ++k)
            d += fb.analysis_hi[k] * x[mirror(2 * i + 1 + static_cast<int>(k) - c1, n)];
        detail[i] = d;
    }
}

std::vector<double> idwt1(const std::vector<double>& approx,
                          const std::vector<double>& detail, const FilterBank& fb) {
    const int m = static_cast<int>(approx.size());
    if (static_cast<int>(detail.size()) != m)
        throw DimensionError("idwt1: subband length mismatch");
    const int n = 2 * m;
    // The interleaved coefficient sequence inherits the whole-point
    // symmetry of the input, so one mirror rule serves both subbands.
    auto coeff = [&](int j) {
        j = mirror(j, n);
        return (j % 2 == 0) ? approx[j / 2] : detail[(j - 1) / 2];
    };
    const int c0 = static_cast<int>(fb.synthesis_lo.size()) / 2;
    const int c1 = static_cast<int>(fb.synthesis_hi.size()) / 2;
    std::vector<double> out(n, 0.0);
    for (int p = 0; p < n; ++p) {
        double s = 0.0;
        for (size_t k = 0; k < fb.synthesis_lo.size(); ++k) {
            const int j = p - (static_cast<int>(k) - c0);
            if (((j % 2) + 2) % 2 == 0) s += fb.synthesis_lo[k] * coeff(j);
        }
        for (size_t k = 0; k < fb.synthesis_hi.size(); ++k) {
            const int j = p - (static_cast<int>(k) - c1);
            if (((j % 2) + 2) % 2 == 1) s += fb.synthesis_hi[k] * coeff(j);
        }
        out[p] = s;
    }
    return out;
}

namespace {

// one 2-D level: rows first, then columns
void level_forward(const Eigen::MatrixXd& in, const FilterBank& fb,
                   Eigen::MatrixXd& ll, Eigen::MatrixXd& lh,
                   Eigen::MatrixXd& hl, Eigen::MatrixXd& hh) {
    const int h = static_cast<int>(in.rows());
    const int w = static_cast<int>(in.cols());
    Eigen::MatrixXd lo_cols(h, w / 2), hi_cols(h, w / 2);
    std::vector<double> buf(w), a, d;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) buf[c] = in(r, c);
        dwt1(buf, fb, a, d);
        for (int c = 0; c < w / 2; ++c) {
            lo_cols(r, c) = a[c];
            hi_cols(r, c) = d[c];
        }
    }
    ll.resize(h / 2, w / 2);
    lh.resize(h / 2, w / 2);
    hl.resize(h / 2, w / 2);
    hh.resize(h / 2, w / 2);
    std::vector<double> col(h);
    for (int c = 0; c < w / 2; ++c) {
        for (int r = 0; r < h; ++r) col[r] = lo_cols(r, c);
        dwt1(col, fb, a, d);
        for (int r = 0; r < h / 2; ++r) {
            ll(r, c) = a[r];
            hl(r, c) = d[r];
        }
        for (int r = 0; r < h; ++r) col[r] = hi_cols(r, c);
        dwt1(col, fb, a, d);
        for (int r = 0; r < h / 2; ++r) {
            lh(r, c) = a[r];
            hh(r, c) = d[r];
        }
    }
}

Eigen::MatrixXd level_inverse(const Eigen::MatrixXd& ll, const Eigen::MatrixXd& lh,
                              const Eigen::MatrixXd& hl, const Eigen::MatrixXd& hh,
                              const FilterBank& fb) {
    const int hh2 = static_cast<int>(ll.rows());
    const int wh2 = static_cast<int>(ll.cols());
    if (lh.rows() != hh2 || hl.rows() != hh2 || hh.rows() != hh2 ||
        lh.cols() != wh2 || hl.cols() != wh2 || hh.cols() != wh2)
        throw DimensionError("idwt2: inconsistent subband shapes");
    const int h = 2 * hh2, w = 2 * wh2;
    Eigen::MatrixXd lo_cols(h, wh2), hi_cols(h, wh2);
    std::vector<double> a(hh2), d(hh2);
    for (int c = 0; c < wh2; ++c) {
        for (int r = 0; r < hh2; ++r) { a[r] = ll(r, c); d[r] = hl(r, c); }
        auto col = idwt1(a, d, fb);
        for (int r = 0; r < h; ++r) lo_cols(r, c) = col[r];
        for (int r = 0; r < hh2; ++r) { a[r] = lh(r, c); d[r] = hh(r, c); }
        col = idwt1(a, d, fb);
        for (int r = 0; r < h; ++r) hi_cols(r, c) = col[r];
    }
    Eigen::MatrixXd out(h, w);
    std::vector<double> ra(wh2), rd(wh2);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < wh2; ++c) { ra[c] = lo_cols(r, c); rd[c] = hi_cols(r, c); }
        auto row = idwt1(ra, rd, fb);
        for (int c = 0; c < w; ++c) out(r, c) = row[c];
    }
    return out;
}

}  // namespace

int max_levels(int h, int w, const FilterBank& fb) {
    const int support = fb.max_support();
    int levels = 0;
    int sh = h, sw = w;
    while (sh % 2 == 0 && sw % 2 == 0 && sh >= support && sw >= support) {
        ++levels;
        sh /= 2;
        sw /= 2;
    }
    return levels;
}

WaveletPyramid dwt2(const GrayImage& img, int levels, const FilterBank& fb) {
    if (levels < 1) throw DimensionError("dwt2: levels must be >= 1");
    if (levels > max_levels(img.h(), img.w(), fb))
        throw DimensionError("dwt2: image too small for " + std::to_string(levels) + " levels");
    WaveletPyramid pyr;
    pyr.img_h = img.h();
    pyr.img_w = img.w();
    pyr.levels.resize(levels);
    Eigen::MatrixXd cur = img.pix;
    for (int l = 0; l < levels; ++l) {
        Eigen::MatrixXd ll;
        level_forward(cur, fb, ll, pyr.levels[l].lh, pyr.levels[l].hl, pyr.levels[l].hh);
        cur = std::move(ll);
    }
    pyr.ll = std::move(cur);
    return pyr;
}

GrayImage idwt2(const WaveletPyramid& pyr, const FilterBank& fb) {
    if (pyr.levels.empty()) throw DimensionError("idwt2: empty pyramid");
    Eigen::MatrixXd cur = pyr.ll;
    for (int l = pyr.level_count() - 1; l >= 0; --l)
        cur = level_inverse(cur, pyr.levels[l].lh, pyr.levels[l].hl, pyr.levels[l].hh, fb);
    if (cur.rows() != pyr.img_h || cur.cols() != pyr.img_w)
        throw DimensionError("idwt2: pyramid shape does not match recorded image size");
    return GrayImage(std::move(cur));
}

Eigen::Index WaveletPyramid::coeff_count() const {
    Eigen::Index n = ll.size();
    for (const auto& l : levels) n += l.lh.size() + l.hl.size() + l.hh.size();
    return n;
}

SignalVector flatten(const WaveletPyramid& pyr) {
    SignalVector v(pyr.coeff_count());
    Eigen::Index pos = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
        v.segment(pos, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        pos += m.size();
    };
    put(pyr.ll);
    for (int l = pyr.level_count() - 1; l >= 0; --l) {
        put(pyr.levels[l].lh);
        put(pyr.levels[l].hl);
        put(pyr.levels[l].hh);
    }
    return v;
}

WaveletPyramid unflatten(const SignalVector& v, const PyramidShape& shape) {
    if (shape.levels < 1) throw DimensionError("unflatten: levels must be >= 1");
    if ((shape.h % (1 << shape.levels)) != 0 || (shape.w % (1 << shape.levels)) != 0)
        throw DimensionError("unflatten: dimensions not divisible by 2^levels");
    if (v.size() != static_cast<Eigen::Index>(shape.h) * shape.w)
        throw DimensionError("unflatten: coefficient count mismatch");
    WaveletPyramid pyr;
    pyr.img_h = shape.h;
    pyr.img_w = shape.w;
    pyr.levels.resize(shape.levels);
    Eigen::Index pos = 0;
    auto take = [&](Eigen::MatrixXd& m, int r, int c) {
        m = Eigen::Map<const Eigen::MatrixXd>(v.data() + pos, r, c);
        pos += static_cast<Eigen::Index>(r) * c;
    };
    const int lr = shape.h >> shape.levels, lc = shape.w >> shape.levels;
    take(pyr.ll, lr, lc);
    for (int l = shape.levels - 1; l >= 0; --l) {
        const int r = shape.h >> (l + 1), c = shape.w >> (l + 1);
        take(pyr.levels[l].lh, r, c);
        take(pyr.levels[l].hl, r, c);
        take(pyr.levels[l].hh, r, c);
    }
    return pyr;
}

}  // namespace csf
