#ifndef CSF_CODEC_HPP
#define CSF_CODEC_HPP

#include <functional>
#include <vector>

#include "csf/core.hpp"
#include "csf/cs.hpp"

namespace csf {

// Serialized wavelet-codec stream. Container: magic "CSFJ", version byte,
// little-endian header (h, w as u16, levels as u8, q as f64), then the
// entropy-coded payload bits.
struct CompressedStream {
    std::vector<uint8_t> bytes;

    int height = 0, width = 0, levels = 0;
    double q = 0.0;

    // input bytes (8-bit grayscale) over stream bytes
    double ratio() const {
        return bytes.empty() ? 0.0
                             : static_cast<double>(height) * width / static_cast<double>(bytes.size());
    }
};

struct Jp2Config {
    double target_ratio = 54.0;
    double ratio_tol = 0.05;   // relative tolerance on the achieved ratio
    int levels = 4;
    int max_bisect_steps = 40;
    // when false, an unreachable target returns the closest achievable
    // stream instead of throwing
    bool strict = true;
};

// Identity pipeline of the raw imager: the decoder sees exactly the sensed
// pixels.
GrayImage raw_pipeline(const GrayImage& img);

// Wavelet analysis, dead-zone uniform quantization at step q, lossless
// prefix coding. q is chosen by bisection so the achieved compression ratio
// lands within cfg.ratio_tol of cfg.target_ratio.
CompressedStream jp2_encode(const GrayImage& img, const Jp2Config& cfg);

// Single fixed-q encode (no rate control); used by the rate controller and
// by PSNR-matched calibration.
CompressedStream jp2_encode_fixed_q(const GrayImage& img, double q, int levels = 4);

GrayImage jp2_decode(const CompressedStream& stream);
GrayImage jp2_pipeline(const GrayImage& img, const Jp2Config& cfg);

// Finds the compression ratio whose mean decoded PSNR over the calibration
// images matches the mean PSNR of the compressive pipeline at rate cs_rate,
// within psnr_tol dB. Returns the matched target ratio.
double calibrate_ratio(const std::vector<GrayImage>& images, double cs_rate,
                       const CsConfig& cs_cfg, double psnr_tol = 0.5,
                       SensingCache* cache = nullptr);

// Same search against an already-computed mean PSNR target; lets callers
// reuse compressive outputs they have on hand.
double calibrate_ratio_to_psnr(const std::vector<GrayImage>& images, double target_psnr,
                               double psnr_tol = 0.5, int levels = 4);

}  // namespace csf

#endif
