#include "csf/cs.hpp"

#include <Eigen/SVD>
#include <algorithm>

#include "csf/wavelet.hpp"

namespace csf {

SamplingMask build_sampling_mask(int n, double rate, RandomSeed seed) {
    if (n < 1) throw DimensionError("build_sampling_mask: n must be >= 1");
    if (rate <= 0.0 || rate > 1.0) throw Error("build_sampling_mask: rate must be in (0,1]");
    const int m = round_half_away(rate * n);
    if (m == 0) throw Error("build_sampling_mask: rate too small, no indices kept");
    // partial Fisher-Yates, then sort
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (int i = 0; i < m; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    SamplingMask mask;
    mask.n = n;
    mask.kept.assign(idx.begin(), idx.begin() + m);
    std::sort(mask.kept.begin(), mask.kept.end());
    return mask;
}

SensingMatrix mask_to_matrix(const SamplingMask& mask) {
    SensingMatrix s;
    s.kind = SensingKind::Mask;
    s.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mask.kept.size()), mask.n);
    for (size_t r = 0; r < mask.kept.size(); ++r) s.A(static_cast<Eigen::Index>(r), mask.kept[r]) = 1.0;
    return s;
}

SensingMatrix build_gaussian_matrix(int m, int n, RandomSeed seed) {
    if (m < 1 || m > n) throw DimensionError("build_gaussian_matrix: need 1 <= m <= n");
    SensingMatrix s;
    s.kind = SensingKind::Gaussian;
    s.seed = seed;
    s.A.resize(m, n);
    Rng rng(seed);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(m));
    // row-major fill order so the draw sequence is part of the format
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) s.A(r, c) = sigma * rng.normal();
    return s;
}

MeasurementVector measure(const SensingMatrix& A, const SignalVector& s) {
    if (s.size() != A.A.cols()) throw DimensionError("measure: signal length != n");
    MeasurementVector mv;
    mv.y = A.A * s;
    return mv;
}

// ---------------------------------------------------------------- solver

struct SensingCache::Entry {
    Eigen::MatrixXd pinv;     // A^T (A A^T)^{-1}, n x m
    Eigen::MatrixXd U, V;     // thin SVD pieces, built on demand for delta > 0
    Eigen::VectorXd sv;
    bool has_svd = false;
};

namespace {

std::shared_ptr<SensingCache::Entry> build_entry(const SensingMatrix& A, bool want_svd) {
    auto e = std::make_shared<SensingCache::Entry>();
    const Eigen::MatrixXd gram = A.A * A.A.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalRankError("sensing matrix: A A^T is not positive definite");
    e->pinv = llt.solve(A.A).transpose();
    if (want_svd) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(A.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        e->U = svd.matrixU();
        e->V = svd.matrixV();
        e->sv = svd.singularValues();
        if (e->sv(e->sv.size() - 1) < 1e-12 * e->sv(0))
            throw NumericalRankError("sensing matrix is numerically rank deficient");
        e->has_svd = true;
    }
    return e;
}

uint64_t cache_key(const SensingMatrix& A) {
    uint64_t h = A.seed;
    h = Rng::derive(h, static_cast<uint64_t>(A.m()));
    h = Rng::derive(h, static_cast<uint64_t>(A.n()));
    h = Rng::derive(h, static_cast<uint64_t>(A.kind));
    return h;
}

// projection of w onto {v : ||Av - y||^2 <= delta} using the cached SVD;
// 1-D monotone search on the multiplier
Eigen::VectorXd project_ball(const SensingCache::Entry& e, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             double delta) {
    Eigen::VectorXd r = A * w - y;
    if (r.squaredNorm() <= delta) return w;
    const Eigen::VectorXd alpha = e.V.transpose() * w;
    const Eigen::VectorXd beta = e.U.transpose() * y;
    const auto resid_sq = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < e.sv.size(); ++i) {
            const double t = (e.sv(i) * alpha(i) - beta(i)) / (1.0 + mu * e.sv(i) * e.sv(i));
            s += t * t;
        }
        return s;
    };
    double lo = 0.0, hi = 1.0;
    while (resid_sq(hi) > delta) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e18) break;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (resid_sq(mid) > delta) lo = mid; else hi = mid;
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    const double mu = hi;
    Eigen::VectorXd z = w;
    for (Eigen::Index i = 0; i < e.sv.size(); ++i) {
        const double den = 1.0 + mu * e.sv(i) * e.sv(i);
        const double coef = (1.0 / den - 1.0) * alpha(i) + (mu * e.sv(i) / den) * beta(i);
        z += coef * e.V.col(i);
    }
    return z;
}

}  // namespace

std::shared_ptr<const SensingCache::Entry> SensingCache::get(const SensingMatrix& A) {
    const uint64_t key = cache_key(A);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(key);
        if (it != map_.end()) return it->second;
    }
    auto e = build_entry(A, false);
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = map_.emplace(key, e);
    return it->second;
}

BpResult bp_recover(const SensingMatrix& A, const MeasurementVector& meas, double delta,
                    const CsConfig& cfg, std::shared_ptr<const SensingCache::Entry> entry) {
    if (delta < 0.0) throw Error("bp_recover: delta must be >= 0");
    if (meas.y.size() != A.A.rows()) throw DimensionError("bp_recover: measurement length != m");
    const Eigen::Index n = A.A.cols();
    if (!entry || (delta > 0.0 && !entry->has_svd)) entry = build_entry(A, delta > 0.0);

    const Eigen::VectorXd& y = meas.y;
    auto project = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
        if (delta == 0.0) return w - entry->pinv * (A.A * w - y);
        return project_ball(*entry, A.A, y, w, delta);
    };

    double rho = cfg.rho;
    Eigen::VectorXd x = entry->pinv * y;  // feasible start (min-l2 solution)
    Eigen::VectorXd z = x, u = Eigen::VectorXd::Zero(n);

    BpResult res;
    const double eps_abs = cfg.tol, eps_rel = cfg.tol;
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        x = project(z - u);
        Eigen::VectorXd z_old = std::move(z);
        Eigen::VectorXd v = x + u;
        const double kappa = 1.0 / rho;
        z = ((v.array().abs() - kappa).max(0.0) * v.array().sign()).matrix();
        u += x - z;
        const double prim = (x - z).norm();
        const double dual = rho * (z - z_old).norm();
        const double tol_prim =
            std::sqrt(static_cast<double>(n)) * eps_abs + eps_rel * std::max(x.norm(), z.norm());
        const double tol_dual = std::sqrt(static_cast<double>(n)) * eps_abs + eps_rel * (rho * u.norm());
        if (prim <= tol_prim && dual <= tol_dual) {
            res.converged = true;
            ++it;
            break;
        }
        // residual balancing keeps the two tolerances comparable
        if ((it + 1) % 25 == 0) {
            if (prim > 10.0 * dual) {
                rho *= 2.0;
                u *= 0.5;
            } else if (dual > 10.0 * prim) {
                rho *= 0.5;
                u *= 2.0;
            }
        }
    }
    res.x = std::move(x);
    res.iterations = it;
    res.residual_sq = (y - A.A * res.x).squaredNorm();
    return res;
}

SignalVector l2_recover(const SensingMatrix& A, const Eigen::VectorXd& y) {
    if (y.size() != A.A.rows()) throw DimensionError("l2_recover: measurement length != m");
    const Eigen::MatrixXd gram = A.A * A.A.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalRankError("l2_recover: A A^T singular");
    return A.A.transpose() * llt.solve(y);
}

Eigen::MatrixXd theoretical_kernel_l2(const SensingMatrix& A) {
    const Eigen::MatrixXd gram = A.A * A.A.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericalRankError("theoretical_kernel_l2: rank-deficient sensing matrix");
    return A.A.transpose() * llt.solve(A.A);
}

// ---------------------------------------------------------------- pipeline

GrayImage cs_pipeline(const GrayImage& img, const CsConfig& cfg, SensingCache* cache) {
    const int B = cfg.block > 0 ? cfg.block : img.h();
    if (img.h() % B != 0 || img.w() % B != 0)
        throw DimensionError("cs_pipeline: image sides must be divisible by the block side");
    int levels = cfg.levels;
    if (levels == 0) levels = std::min(4, max_levels(B, B));
    if (levels < 1 || levels > max_levels(B, B))
        throw DimensionError("cs_pipeline: invalid wavelet level count for block size");

    const int nbr = img.h() / B, nbc = img.w() / B;
    const int n = B * B;
    const int m = round_half_away(cfg.rate * n);
    if (m < 1 || m > n) throw Error("cs_pipeline: rate yields invalid measurement count");

    GrayImage out(img.h(), img.w());
    const PyramidShape shape{B, B, levels};

    for (int bc = 0; bc < nbc; ++bc) {
        for (int br = 0; br < nbr; ++br) {
            const int block_index = br + bc * nbr;  // column-major block order
            const RandomSeed bseed = Rng::derive(cfg.seed, static_cast<uint64_t>(block_index));

            GrayImage block(B, B);
            block.pix = img.pix.block(br * B, bc * B, B, B);
            SignalVector coeffs = flatten(dwt2(block, levels));

            SensingMatrix A;
            if (cfg.kind == SensingKind::Gaussian) {
                A = build_gaussian_matrix(m, n, bseed);
            } else {
                A = mask_to_matrix(build_sampling_mask(n, cfg.rate, bseed));
                A.seed = bseed;
            }

            MeasurementVector y = measure(A, coeffs);
            y.delta = cfg.delta;

            BpResult rec;
            if (cfg.kind == SensingKind::Mask && cfg.delta == 0.0) {
                // mask rows are orthonormal: BP fixes kept coefficients and
                // zeroes the rest, so solve directly
                rec.x = A.A.transpose() * y.y;
                rec.converged = true;
            } else {
                std::shared_ptr<const SensingCache::Entry> entry;
                if (cache && cfg.delta == 0.0) entry = cache->get(A);
                rec = bp_recover(A, y, cfg.delta, cfg, entry);
            }
            if (!rec.converged)
                throw ConvergenceError("cs_pipeline: basis pursuit did not converge",
                                       rec.residual_sq, br, bc);

            GrayImage back = idwt2(unflatten(rec.x, shape));
            out.pix.block(br * B, bc * B, B, B) = back.pix;
        }
    }
    out.clamp01();
    return out;
}

}  // namespace csf
