#ifndef CSF_WAVELET_HPP
#define CSF_WAVELET_HPP

#include <vector>

#include "csf/core.hpp"

namespace csf {

// Two-channel biorthogonal filter bank with odd-length symmetric filters.
// Taps are stored centered; analysis lowpass output sits on the even phase,
// highpass on the odd phase. Whole-point symmetric extension throughout.
struct FilterBank {
    std::vector<double> analysis_lo;   // odd length, center at size/2
    std::vector<double> analysis_hi;
    std::vector<double> synthesis_lo;
    std::vector<double> synthesis_hi;

    // Biorthogonal 4.4 (CDF 9/7), sqrt(2) DC-gain normalization.
    static const FilterBank& bior44();

    int max_support() const;
};

// Multilevel 2-D decomposition. Subbands per level: LH (horizontal detail,
// lowpass rows / highpass cols), HL, HH; one LL approximation at the
// coarsest level. Total coefficient count equals h*w.
struct WaveletPyramid {
    struct Level {
        Eigen::MatrixXd lh, hl, hh;
    };
    Eigen::MatrixXd ll;           // coarsest approximation
    std::vector<Level> levels;    // levels[0] = finest
    int img_h = 0, img_w = 0;

    int level_count() const { return static_cast<int>(levels.size()); }
    Eigen::Index coeff_count() const;
};

// Shape descriptor used by unflatten.
struct PyramidShape {
    int h = 0, w = 0, levels = 0;
};

WaveletPyramid dwt2(const GrayImage& img, int levels, const FilterBank& fb = FilterBank::bior44());
GrayImage idwt2(const WaveletPyramid& pyr, const FilterBank& fb = FilterBank::bior44());

// Largest decomposition depth for which every filtered side stays at least
// as long as the longest filter tap sequence.
int max_levels(int h, int w, const FilterBank& fb = FilterBank::bior44());

// Fixed coarse-to-fine subband order: LL, then per level from coarsest to
// finest LH, HL, HH, column-major within each subband.
SignalVector flatten(const WaveletPyramid& pyr);
WaveletPyramid unflatten(const SignalVector& v, const PyramidShape& shape);

// 1-D single-level helpers (exposed for oracle tests).
void dwt1(const std::vector<double>& x, const FilterBank& fb,
          std::vector<double>& approx, std::vector<double>& detail);
std::vector<double> idwt1(const std::vector<double>& approx,
                          const std::vector<double>& detail, const FilterBank& fb);

}  // namespace csf

#endif
