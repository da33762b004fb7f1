#ifndef CSF_CORE_HPP
#define CSF_CORE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace csf {

// ---------------------------------------------------------------- errors

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

struct DegenerateInputError : Error {
    explicit DegenerateInputError(const std::string& msg) : Error(msg) {}
};

struct NumericalRankError : Error {
    explicit NumericalRankError(const std::string& msg) : Error(msg) {}
};

struct RateControlError : Error {
    RateControlError(const std::string& msg, double achieved)
        : Error(msg), best_achieved_ratio(achieved) {}
    double best_achieved_ratio;
};

struct MalformedStreamError : Error {
    explicit MalformedStreamError(const std::string& msg) : Error(msg) {}
};

// Solver failed to converge; carries the final residual and, for block
// pipelines, the block coordinates where it happened.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double res, int block_row = -1, int block_col = -1)
        : Error(msg), residual(res), block_r(block_row), block_c(block_col) {}
    double residual;
    int block_r, block_c;
};

// ---------------------------------------------------------------- types

using SignalVector = Eigen::VectorXd;

// Grayscale image, canonical pixel range [0,1]. Stored column-major
// (Eigen default) which matches the vertical raster-scan convention.
struct GrayImage {
    Eigen::MatrixXd pix;  // h x w

    GrayImage() = default;
    GrayImage(int h, int w) : pix(Eigen::MatrixXd::Zero(h, w)) {
        if (h < 1 || w < 1) throw DimensionError("GrayImage: h and w must be >= 1");
    }
    explicit GrayImage(Eigen::MatrixXd m) : pix(std::move(m)) {
        if (pix.rows() < 1 || pix.cols() < 1)
            throw DimensionError("GrayImage: h and w must be >= 1");
    }

    int h() const { return static_cast<int>(pix.rows()); }
    int w() const { return static_cast<int>(pix.cols()); }
    double& at(int r, int c) { return pix(r, c); }
    double at(int r, int c) const { return pix(r, c); }

    GrayImage& clamp01() {
        pix = pix.cwiseMax(0.0).cwiseMin(1.0);
        return *this;
    }
};

// Round half away from zero, the convention used for all 8-bit conversions.
inline int round_half_away(double x) {
    return static_cast<int>(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

inline uint8_t to_8bit_value(double p) {
    int v = round_half_away(p * 255.0);
    if (v < 0) v = 0;
    if (v > 255) v = 255;
    return static_cast<uint8_t>(v);
}

enum class ClassLabel : uint8_t { C = 0, J = 1, R = 2 };

inline const char* to_string(ClassLabel l) {
    switch (l) {
        case ClassLabel::C: return "C";
        case ClassLabel::J: return "J";
        default: return "R";
    }
}

inline ClassLabel label_from_string(const std::string& s) {
    if (s == "C") return ClassLabel::C;
    if (s == "J") return ClassLabel::J;
    if (s == "R") return ClassLabel::R;
    throw Error("unknown class label: " + s);
}

using RandomSeed = uint64_t;

// Deterministic random generator. mt19937_64 is fully specified by the
// standard; the uniform/normal mappings below avoid std::*_distribution,
// whose output is implementation-defined. Same seed => bit-identical
// draws on every platform.
class Rng {
public:
    explicit Rng(RandomSeed seed) : eng_(seed) {}

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling for an unbiased draw
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return x % n;
    }

    // standard normal via Box-Muller (pair cached)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * M_PI * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    // Derive an independent child seed (splitmix64 finalizer over the pair).
    static RandomSeed derive(RandomSeed parent, uint64_t index) {
        uint64_t z = parent + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ---------------------------------------------------------------- operations

// Column-wise (vertical) raster scan of an image into a vector of length h*w.
inline SignalVector raster_scan(const GrayImage& img) {
    return Eigen::Map<const Eigen::VectorXd>(img.pix.data(), img.pix.size());
}

inline GrayImage inverse_raster_scan(const SignalVector& v, int h, int w) {
    if (h < 1 || w < 1 || v.size() != static_cast<Eigen::Index>(h) * w)
        throw DimensionError("inverse_raster_scan: length != h*w");
    GrayImage img(h, w);
    img.pix = Eigen::Map<const Eigen::MatrixXd>(v.data(), h, w);
    return img;
}

// PSNR in dB on the 8-bit scale: 10*log10(M^2 / MSE) with the MSE taken
// over pixels mapped to [0,M]. Returns +inf when the images are identical.
inline double psnr(const GrayImage& ref, const GrayImage& test, double M = 255.0) {
    if (ref.h() != test.h() || ref.w() != test.w())
        throw DimensionError("psnr: image dimensions differ");
    if (M <= 0.0) throw Error("psnr: M must be > 0");
    const double mse = (M * (ref.pix - test.pix)).squaredNorm() / ref.pix.size();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(M * M / mse);
}

}  // namespace csf

#endif
