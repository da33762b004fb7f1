#include "csf/wavelet.hpp"

#include "csf/core.hpp"
#include "doctest.h"

using namespace csf;

namespace {

GrayImage random_image(int h, int w, RandomSeed seed) {
    Rng rng(seed);
    GrayImage img(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img.at(r, c) = rng.uniform();
    return img;
}

// naive single-level 1-D analysis oracle: direct convolution against the
// whole-point symmetric extension, independent of the dwt1 code path
void oracle_dwt1(const std::vector<double>& x, const FilterBank& fb,
                 std::vector<double>& a, std::vector<double>& d) {
    const int n = static_cast<int>(x.size());
    auto sample = [&](int j) {
        while (j < 0 || j >= n) {
            if (j < 0) j = -j;
            if (j >= n) j = 2 * (n - 1) - j;
        }
        return x[j];
    };
    a.assign(n / 2, 0.0);
    d.assign(n / 2, 0.0);
    const int c0 = static_cast<int>(fb.analysis_lo.size()) / 2;
    const int c1 = static_cast<int>(fb.analysis_hi.size()) / 2;
    for (int i = 0; i < n / 2; ++i) {
        for (size_t k = 0; k < fb.analysis_lo.size(); ++k)
            a[i] += fb.analysis_lo[k] * sample(2 * i + static_cast<int>(k) - c0);
        for (size_t k = 0; k < fb.analysis_hi.size(); ++k)
            d[i] += fb.analysis_hi[k] * sample(2 * i + 1 + static_cast<int>(k) - c1);
    }
}

}  // namespace

TEST_CASE("filter bank satisfies perfect reconstruction on random signals") {
    const auto& fb = FilterBank::bior44();
    Rng rng(1);
    for (int n : {8, 16, 20, 32, 64, 128}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.normal();
        std::vector<double> a, d;
        dwt1(x, fb, a, d);
        auto back = idwt1(a, d, fb);
        double err = 0;
        for (int i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - x[i]));
        CHECK(err < 1e-8);
    }
}

TEST_CASE("constant image has zero detail subbands") {
    GrayImage img(32, 32);
    img.pix.setConstant(0.7);
    auto pyr = dwt2(img, 2);
    for (const auto& l : pyr.levels) {
        CHECK(l.lh.cwiseAbs().maxCoeff() < 1e-10);
        CHECK(l.hl.cwiseAbs().maxCoeff() < 1e-10);
        CHECK(l.hh.cwiseAbs().maxCoeff() < 1e-10);
    }
    // LL is constant: gain 2 per level in amplitude
    const double expected = 0.7 * 4.0;
    CHECK((pyr.ll.array() - expected).abs().maxCoeff() < 1e-10);
}

TEST_CASE("pyramid subband sizes halve per level") {
    auto img = random_image(128, 128, 2);
    auto pyr = dwt2(img, 4);
    REQUIRE(pyr.level_count() == 4);
    CHECK(pyr.levels[0].lh.rows() == 64);
    CHECK(pyr.levels[1].lh.rows() == 32);
    CHECK(pyr.levels[2].lh.rows() == 16);
    CHECK(pyr.levels[3].lh.rows() == 8);
    CHECK(pyr.ll.rows() == 8);
    CHECK(pyr.coeff_count() == 128 * 128);
}

TEST_CASE("impulse detail equals shifted filter taps (oracle)") {
    const auto& fb = FilterBank::bior44();
    std::vector<double> x(32, 0.0);
    x[15] = 1.0;
    std::vector<double> a, d, oa, od;
    dwt1(x, fb, a, d);
    oracle_dwt1(x, fb, oa, od);
    for (size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i] == doctest::Approx(od[i]).epsilon(1e-14));
        CHECK(a[i] == doctest::Approx(oa[i]).epsilon(1e-14));
    }
    // interior impulse: detail picks up the reversed highpass taps around
    // the impulse; check one tap against the filter constant directly
    // d[i] = h1[c1 + (15 - 2i - 1)] => i=7: h1[c1]
    CHECK(d[7] == doctest::Approx(fb.analysis_hi[fb.analysis_hi.size() / 2]).epsilon(1e-14));
}

TEST_CASE("dwt2 rejects images too small for the level count") {
    auto img = random_image(16, 16, 3);
    CHECK_NOTHROW(dwt2(img, 1));
    CHECK_THROWS_AS(dwt2(img, 2), DimensionError);  // level 2 input is 8 < 9 taps
    CHECK_THROWS_AS(dwt2(img, 0), DimensionError);
    CHECK(max_levels(128, 128) == 4);
    CHECK(max_levels(32, 32) == 2);
}

TEST_CASE("perfect reconstruction across sizes") {
    // acceptance criterion 1 runs 200 images; a smaller sweep here
    Rng rng(4);
    for (int t = 0; t < 30; ++t) {
        const int sizes[3] = {32, 64, 128};
        int h = sizes[rng.uniform_int(3)];
        int w = sizes[rng.uniform_int(3)];
        auto img = random_image(h, w, rng.uniform_int(1 << 30));
        int L = std::min(3, max_levels(h, w));
        auto pyr = dwt2(img, L);
        auto back = idwt2(pyr);
        CHECK((back.pix - img.pix).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("zero pyramid reconstructs zero image") {
    auto img = random_image(32, 32, 5);
    auto pyr = dwt2(img, 2);
    pyr.ll.setZero();
    for (auto& l : pyr.levels) {
        l.lh.setZero();
        l.hl.setZero();
        l.hh.setZero();
    }
    auto back = idwt2(pyr);
    CHECK(back.pix.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LL-only reconstruction is a finite-PSNR smoothing") {
    // regression value frozen from a fixed deterministic image
    GrayImage img(64, 64);
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c)
            img.at(r, c) = 0.5 + 0.3 * std::sin(0.17 * r) * std::cos(0.11 * c) +
                           0.15 * ((r / 16 + c / 16) % 2 == 0 ? 1.0 : -1.0);
    auto pyr = dwt2(img, 3);
    for (auto& l : pyr.levels) {
        l.lh.setZero();
        l.hl.setZero();
        l.hh.setZero();
    }
    auto back = idwt2(pyr);
    double p = psnr(img, back);
    CHECK(std::isfinite(p));
    CHECK(p > 0.0);
    CHECK(p > 15.0);  // frozen loose regression bound for this image
}

TEST_CASE("flatten ordering and round trip") {
    auto img = random_image(32, 32, 6);
    auto pyr = dwt2(img, 2);
    auto v = flatten(pyr);
    REQUIRE(v.size() == 32 * 32);
    CHECK(v(0) == pyr.ll(0, 0));

    PyramidShape shape{32, 32, 2};
    auto back = unflatten(v, shape);
    CHECK((back.ll - pyr.ll).cwiseAbs().maxCoeff() == 0.0);
    for (int l = 0; l < 2; ++l) {
        CHECK((back.levels[l].lh - pyr.levels[l].lh).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.levels[l].hl - pyr.levels[l].hl).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.levels[l].hh - pyr.levels[l].hh).cwiseAbs().maxCoeff() == 0.0);
    }
    SignalVector bad(100);
    CHECK_THROWS_AS(unflatten(bad, shape), DimensionError);
}

TEST_CASE("energy approximately preserved on natural-statistics images") {
    // bior4.4 is not orthonormal; the empirical bound is frozen at 5%
    GrayImage img(128, 128);
    for (int r = 0; r < 128; ++r)
        for (int c = 0; c < 128; ++c)
            img.at(r, c) = 0.5 + 0.25 * std::sin(0.05 * r + 0.5) * std::cos(0.04 * c) +
                           0.1 * std::tanh(0.2 * (c - 64.0));
    auto pyr = dwt2(img, 4);
    double ec = flatten(pyr).squaredNorm();
    double ei = img.pix.squaredNorm();
    CHECK(std::abs(ec - ei) / ei < 0.05);
}

TEST_CASE("detail coefficients of natural images are mostly tiny") {
    GrayImage img(128, 128);
    for (int r = 0; r < 128; ++r)
        for (int c = 0; c < 128; ++c)
            img.at(r, c) = 0.5 + 0.3 * std::sin(0.06 * r) * std::sin(0.05 * c) +
                           (r > 64 ? 0.15 : -0.05);
    auto pyr = dwt2(img, 4);
    auto v = flatten(pyr);
    const Eigen::Index ll_n = pyr.ll.size();
    double maxc = v.cwiseAbs().maxCoeff();
    Eigen::Index small = 0, total = v.size() - ll_n;
    for (Eigen::Index i = ll_n; i < v.size(); ++i)
        if (std::abs(v(i)) < 0.01 * maxc) ++small;
    CHECK(static_cast<double>(small) / static_cast<double>(total) >= 0.70);
}
