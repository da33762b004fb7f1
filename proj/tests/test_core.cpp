#include <cstdio>
#include <filesystem>

#include "csf/core.hpp"
#include "csf/io.hpp"
#include "doctest.h"

using namespace csf;

TEST_CASE("raster scan is column-wise") {
    GrayImage img(2, 2);
    img.at(0, 0) = 1; img.at(0, 1) = 2;
    img.at(1, 0) = 3; img.at(1, 1) = 4;
    SignalVector v = raster_scan(img);
    REQUIRE(v.size() == 4);
    CHECK(v(0) == 1);
    CHECK(v(1) == 3);
    CHECK(v(2) == 2);
    CHECK(v(3) == 4);
}

TEST_CASE("raster scan 1x1 identity") {
    GrayImage img(1, 1);
    img.at(0, 0) = 5;
    SignalVector v = raster_scan(img);
    CHECK(v(0) == 5);
    GrayImage back = inverse_raster_scan(v, 1, 1);
    CHECK(back.at(0, 0) == 5);
}

TEST_CASE("inverse raster scan") {
    SignalVector v(4);
    v << 1, 3, 2, 4;
    GrayImage img = inverse_raster_scan(v, 2, 2);
    CHECK(img.at(0, 0) == 1);
    CHECK(img.at(0, 1) == 2);
    CHECK(img.at(1, 0) == 3);
    CHECK(img.at(1, 1) == 4);

    CHECK_THROWS_AS(inverse_raster_scan(v, 3, 2), DimensionError);

    SignalVector z = SignalVector::Zero(4);
    GrayImage zi = inverse_raster_scan(z, 2, 2);
    CHECK(zi.pix.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("raster round trip random sizes") {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        int h = 1 + static_cast<int>(rng.uniform_int(40));
        int w = 1 + static_cast<int>(rng.uniform_int(40));
        GrayImage img(h, w);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) img.at(r, c) = rng.uniform();
        GrayImage back = inverse_raster_scan(raster_scan(img), h, w);
        CHECK((back.pix - img.pix).cwiseAbs().maxCoeff() == 0.0);
    }
    // 128x128 case from the contract
    GrayImage big(128, 128);
    for (int r = 0; r < 128; ++r)
        for (int c = 0; c < 128; ++c) big.at(r, c) = rng.uniform();
    SignalVector v = raster_scan(big);
    REQUIRE(v.size() == 16384);
    GrayImage back = inverse_raster_scan(v, 128, 128);
    CHECK((back.pix - big.pix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("psnr basics") {
    GrayImage a(4, 4), b(4, 4);
    CHECK(std::isinf(psnr(a, b)));

    b.pix.setConstant(1.0);  // constant error of 255 on the 8-bit scale
    CHECK(psnr(a, b) == doctest::Approx(0.0).epsilon(1e-12));

    b.pix.setConstant(1.0 / 255.0);  // error of 1 on the 8-bit scale
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0)).epsilon(1e-12));
    CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-4));

    GrayImage c(4, 5);
    CHECK_THROWS_AS(psnr(a, c), DimensionError);
}

TEST_CASE("psnr shift invariance and noise monotonicity") {
    Rng rng(3);
    GrayImage a(8, 8), b(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            a.at(r, c) = rng.uniform() * 0.5;
            b.at(r, c) = a.at(r, c) + 0.01 * rng.normal();
        }
    double p1 = psnr(a, b);
    GrayImage a2 = a, b2 = b;
    a2.pix.array() += 0.25;
    b2.pix.array() += 0.25;
    CHECK(psnr(a2, b2) == doctest::Approx(p1).epsilon(1e-12));

    GrayImage b3 = b;
    b3.pix = a.pix + 3.0 * (b.pix - a.pix);  // triple the noise
    CHECK(psnr(a, b3) < p1);
}

TEST_CASE("8-bit round trip stays within 1/510") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        double p = rng.uniform();
        double back = to_8bit_value(p) / 255.0;
        CHECK(std::abs(back - p) <= 1.0 / 510.0 + 1e-15);
    }
    CHECK(to_8bit_value(0.0) == 0);
    CHECK(to_8bit_value(1.0) == 255);
}

TEST_CASE("rng determinism and normal moments") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

    Rng r(5);
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);

    CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
    CHECK(Rng::derive(1, 0) == Rng::derive(1, 0));
}

TEST_CASE("pgm round trip") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "csf_test_core";
    fs::create_directories(dir);
    Rng rng(9);
    GrayImage img(17, 23);
    for (int r = 0; r < img.h(); ++r)
        for (int c = 0; c < img.w(); ++c) img.at(r, c) = rng.uniform();
    auto path = (dir / "t.pgm").string();
    write_pgm(img, path);
    GrayImage back = read_pgm(path);
    REQUIRE(back.h() == 17);
    REQUIRE(back.w() == 23);
    for (int r = 0; r < img.h(); ++r)
        for (int c = 0; c < img.w(); ++c)
            CHECK(std::abs(back.at(r, c) - img.at(r, c)) <= 1.0 / 510.0 + 1e-15);
    // writing the read-back image again is byte-identical
    auto path2 = (dir / "t2.pgm").string();
    write_pgm(back, path2);
    CHECK(file_digest(path) == file_digest(path2));
    fs::remove_all(dir);
}

TEST_CASE("csv round trip keeps full precision") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "csf_test_core_csv";
    fs::create_directories(dir);
    Rng rng(13);
    Eigen::MatrixXd m(5, 7);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c) m(r, c) = rng.normal();
    auto path = (dir / "m.csv").string();
    write_csv(m, path);
    Eigen::MatrixXd back = read_csv(path);
    REQUIRE(back.rows() == 5);
    REQUIRE(back.cols() == 7);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
    fs::remove_all(dir);
}
