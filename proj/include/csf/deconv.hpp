#ifndef CSF_DECONV_HPP
#define CSF_DECONV_HPP

#include <functional>

#include "csf/core.hpp"

namespace csf {

// Small convolution kernel; after estimation entries are non-negative and
// sum to one.
struct BlurKernel {
    Eigen::MatrixXd k;  // a x a, a odd

    int side() const { return static_cast<int>(k.rows()); }

    static BlurKernel centered_delta(int a);

    // clip negatives and renormalize to unit sum
    void project();
};

// cosine similarity between kernels, 1.0 for identical shapes
double kernel_correlation(const BlurKernel& a, const BlurKernel& b);

struct DeconvConfig {
    int kernel_side = 9;        // a, odd, 3..13
    int outer_iters = 15;
    int irls_iters = 5;         // image-step reweighting passes
    double lambda = 2e-3;       // gradient-prior weight
    double prior_p = 0.8;       // |grad|^p exponent
    double tol = 1e-5;          // outer stop on kernel change
    int cg_iters = 30;          // inner linear-solve iterations
    RandomSeed seed = 1;        // reserved for config lineage
};

struct DeconvResult {
    GrayImage sharp;
    BlurKernel kernel;
    bool converged = false;
    int outer_iterations = 0;
};

// Alternating MAP estimation of (sharp image, blur kernel) from a single
// degraded image: IRLS on the sparse-gradient image objective, then
// non-negative least squares for the kernel on derivative-domain data,
// projected each round. Deterministic.
DeconvResult blind_deconvolve(const GrayImage& img, const DeconvConfig& cfg);

// Feature extractor: the kernel half of blind_deconvolve.
BlurKernel estimate_kernel(const GrayImage& img, int kernel_side, const DeconvConfig& cfg);

using ImagePipeline = std::function<GrayImage(const GrayImage&)>;

// Best LSI approximation of an arbitrary image-to-image pipeline: runs it
// on seeded random natural-statistics probes and solves the least-squares
// convolution kernel over valid-region pixels.
BlurKernel fit_lsi_kernel(const ImagePipeline& pipeline, int kernel_side, int n_probes,
                          RandomSeed seed, int probe_size = 64);

// Spatial convolution with whole-point mirror boundary; used to plant
// ground-truth blurs.
GrayImage convolve_mirror(const GrayImage& img, const BlurKernel& kernel);

// Deterministic synthetic image with piecewise-smooth regions, soft edges
// and light texture; shared by probe generation and the test corpus.
GrayImage synth_natural_image(int h, int w, RandomSeed seed);

}  // namespace csf

#endif
