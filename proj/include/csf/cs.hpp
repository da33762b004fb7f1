#ifndef CSF_CS_HPP
#define CSF_CS_HPP

#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "csf/core.hpp"

namespace csf {

// Random sampling pattern over signal indices; equivalently the diagonal
// 0/1 measurement matrix of the mask sensing model.
struct SamplingMask {
    int n = 0;
    std::vector<int> kept;  // sorted, 0-based, strictly increasing

    double rate() const { return n ? static_cast<double>(kept.size()) / n : 0.0; }
};

enum class SensingKind : uint8_t { Gaussian, Mask };

struct SensingMatrix {
    Eigen::MatrixXd A;  // m x n
    SensingKind kind = SensingKind::Gaussian;
    RandomSeed seed = 0;

    int m() const { return static_cast<int>(A.rows()); }
    int n() const { return static_cast<int>(A.cols()); }
};

struct MeasurementVector {
    Eigen::VectorXd y;
    double delta = 0.0;  // noise-energy bound for the recovery constraint
};

struct CsConfig {
    double rate = 0.25;      // sampling rate R_s
    int block = 32;          // block side; 0 = whole image
    int levels = 0;          // wavelet levels; 0 = auto (up to 4)
    SensingKind kind = SensingKind::Gaussian;
    int max_iters = 8000;
    double tol = 1e-5;
    double delta = 0.0;
    double rho = 1.0;        // ADMM penalty
    RandomSeed seed = 1;
};

struct BpResult {
    SignalVector x;
    bool converged = false;
    int iterations = 0;
    double residual_sq = 0.0;  // ||y - Ax||^2 at the returned iterate
};

SamplingMask build_sampling_mask(int n, double rate, RandomSeed seed);

// Dense matrix view of a mask: one 1 per row at the kept index.
SensingMatrix mask_to_matrix(const SamplingMask& mask);

// i.i.d. N(0, 1/m) entries.
SensingMatrix build_gaussian_matrix(int m, int n, RandomSeed seed);

MeasurementVector measure(const SensingMatrix& A, const SignalVector& s);

// Precomputed per-matrix factorizations shared across bp_recover calls.
// Keyed by (seed, m, n, kind); safe for concurrent use.
class SensingCache {
public:
    struct Entry;
    std::shared_ptr<const Entry> get(const SensingMatrix& A);

private:
    std::mutex mu_;
    std::unordered_map<uint64_t, std::shared_ptr<const Entry>> map_;
};

// Basis pursuit: min ||x||_1  s.t.  ||y - Ax||^2 <= delta.
// ADMM with exact projection onto the constraint set (affine for delta = 0,
// residual ball otherwise). Deterministic.
BpResult bp_recover(const SensingMatrix& A, const MeasurementVector& y, double delta,
                    const CsConfig& cfg,
                    std::shared_ptr<const SensingCache::Entry> entry = nullptr);

// Minimum-l2-norm solution  A^T (A A^T)^{-1} y.
SignalVector l2_recover(const SensingMatrix& A, const Eigen::VectorXd& y);

// The l2-recovery degradation kernel A^+ A: a rank-m orthogonal projector.
Eigen::MatrixXd theoretical_kernel_l2(const SensingMatrix& A);

// Full compressive encode/decode round trip: per block, wavelet analysis,
// random measurement, basis-pursuit recovery, wavelet synthesis. Output
// clamped to [0,1]. Block sensing seeds derive from (cfg.seed, block index).
GrayImage cs_pipeline(const GrayImage& img, const CsConfig& cfg, SensingCache* cache = nullptr);

}  // namespace csf

#endif
