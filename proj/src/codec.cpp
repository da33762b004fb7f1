#include "csf/codec.hpp"

#include <cstring>

#include "csf/wavelet.hpp"

namespace csf {

namespace {

// ------------------------------------------------------------- bit streams

class BitWriter {
public:
    void put_bit(int b) {
        cur_ = static_cast<uint8_t>((cur_ << 1) | (b & 1));
        if (++nbits_ == 8) {
            out_.push_back(cur_);
            cur_ = 0;
            nbits_ = 0;
        }
    }
    void put_bits(uint64_t v, int count) {
        for (int i = count - 1; i >= 0; --i) put_bit(static_cast<int>((v >> i) & 1));
    }
    // order-0 exp-Golomb for unsigned values
    void put_eg(uint64_t u) {
        const uint64_t g = u + 1;
        int k = 0;
        while ((g >> (k + 1)) != 0) ++k;
        for (int i = 0; i < k; ++i) put_bit(0);
        put_bits(g, k + 1);
    }
    std::vector<uint8_t> finish() {
        if (nbits_ > 0) {
            cur_ = static_cast<uint8_t>(cur_ << (8 - nbits_));
            out_.push_back(cur_);
            cur_ = 0;
            nbits_ = 0;
        }
        return std::move(out_);
    }

private:
    std::vector<uint8_t> out_;
    uint8_t cur_ = 0;
    int nbits_ = 0;
};

class BitReader {
public:
    BitReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
    int get_bit() {
        if (pos_ >= size_ * 8) throw MalformedStreamError("codec: truncated payload");
        const int b = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1;
        ++pos_;
        return b;
    }
    uint64_t get_eg() {
        int k = 0;
        while (get_bit() == 0) {
            if (++k > 63) throw MalformedStreamError("codec: invalid exp-Golomb code");
        }
        uint64_t g = 1;
        for (int i = 0; i < k; ++i) g = (g << 1) | static_cast<uint64_t>(get_bit());
        return g - 1;
    }

private:
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

inline uint64_t zigzag(int64_t v) {
    return v >= 0 ? static_cast<uint64_t>(v) * 2 : static_cast<uint64_t>(-v) * 2 - 1;
}
inline int64_t unzigzag(uint64_t u) {
    return (u & 1) ? -static_cast<int64_t>((u + 1) / 2) : static_cast<int64_t>(u / 2);
}

// ------------------------------------------------------------- quantizer

// dead-zone uniform quantizer: indices truncate toward zero, reconstruction
// sits at the bin midpoint
inline int64_t quantize(double c, double q) { return static_cast<int64_t>(c / q); }
inline double dequantize(int64_t idx, double q) {
    if (idx == 0) return 0.0;
    return idx > 0 ? (static_cast<double>(idx) + 0.5) * q : (static_cast<double>(idx) - 0.5) * q;
}

constexpr char kMagic[4] = {'C', 'S', 'F', 'J'};
constexpr uint8_t kVersion = 1;
constexpr size_t kHeaderSize = 4 + 1 + 2 + 2 + 1 + 8;

void write_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void write_f64(std::vector<uint8_t>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
}

}  // namespace

GrayImage raw_pipeline(const GrayImage& img) { return img; }

// the approximation subband keeps a finer step so extreme ratios degrade
// toward an LL-only reconstruction instead of collapsing
constexpr double kLLStepWeight = 0.25;

CompressedStream jp2_encode_fixed_q(const GrayImage& img, double q, int levels) {
    if (q <= 0.0) throw Error("jp2_encode: q must be > 0");
    // decompose as deep as requested, clamped to what the image admits
    levels = std::min(levels, max_levels(img.h(), img.w()));
    if (levels < 1) throw DimensionError("jp2_encode: image too small to decompose");
    auto pyr = dwt2(img, levels);
    const SignalVector coeffs = flatten(pyr);
    const Eigen::Index ll_n = pyr.ll.size();

    BitWriter bw;
    // LL subband: DPCM over quantized indices
    const double q_ll = q * kLLStepWeight;
    int64_t prev = 0;
    for (Eigen::Index i = 0; i < ll_n; ++i) {
        const int64_t idx = quantize(coeffs(i), q_ll);
        bw.put_eg(zigzag(idx - prev));
        prev = idx;
    }
    // detail subbands: (zero-run, value) tokens in flatten order
    Eigen::Index i = ll_n;
    while (i < coeffs.size()) {
        Eigen::Index run = 0;
        while (i < coeffs.size() && quantize(coeffs(i), q) == 0) {
            ++run;
            ++i;
        }
        bw.put_eg(static_cast<uint64_t>(run));
        if (i < coeffs.size()) {
            const int64_t idx = quantize(coeffs(i), q);
            bw.put_eg(static_cast<uint64_t>(std::llabs(idx)) - 1);  // magnitude >= 1 known
            bw.put_bit(idx < 0 ? 1 : 0);
            ++i;
        }
    }

    CompressedStream s;
    s.height = img.h();
    s.width = img.w();
    s.levels = levels;
    s.q = q;
    s.bytes.reserve(kHeaderSize + 64);
    s.bytes.insert(s.bytes.end(), kMagic, kMagic + 4);
    s.bytes.push_back(kVersion);
    write_u16(s.bytes, static_cast<uint16_t>(img.h()));
    write_u16(s.bytes, static_cast<uint16_t>(img.w()));
    s.bytes.push_back(static_cast<uint8_t>(levels));
    write_f64(s.bytes, q);
    auto payload = bw.finish();
    s.bytes.insert(s.bytes.end(), payload.begin(), payload.end());
    return s;
}

CompressedStream jp2_encode(const GrayImage& img, const Jp2Config& cfg) {
    if (cfg.target_ratio < 1.0) throw Error("jp2_encode: target ratio must be >= 1");
    // bisection on log q; achieved ratio grows with q
    double q_lo = 1e-7, q_hi = 1e-7;
    CompressedStream lo = jp2_encode_fixed_q(img, q_lo, cfg.levels);
    CompressedStream best = lo;
    auto better = [&](const CompressedStream& a, const CompressedStream& b) {
        return std::abs(a.ratio() - cfg.target_ratio) < std::abs(b.ratio() - cfg.target_ratio);
    };
    auto within = [&](const CompressedStream& s) {
        return std::abs(s.ratio() - cfg.target_ratio) / cfg.target_ratio <= cfg.ratio_tol;
    };
    if (lo.ratio() >= cfg.target_ratio) {
        // even near-lossless coding beats the target; nothing to search
        if (within(lo) || !cfg.strict) return lo;
        throw RateControlError("jp2_encode: target ratio below achievable range", lo.ratio());
    }
    CompressedStream hi = lo;
    while (hi.ratio() < cfg.target_ratio && q_hi < 1e9) {
        q_hi *= 8.0;
        hi = jp2_encode_fixed_q(img, q_hi, cfg.levels);
        if (better(hi, best)) best = hi;
        if (within(hi)) return hi;
    }
    if (hi.ratio() < cfg.target_ratio) {
        if (!cfg.strict) return best;
        throw RateControlError("jp2_encode: target ratio above achievable range", best.ratio());
    }
    for (int step = 0; step < cfg.max_bisect_steps; ++step) {
        const double q_mid = std::sqrt(q_lo * q_hi);
        CompressedStream mid = jp2_encode_fixed_q(img, q_mid, cfg.levels);
        if (better(mid, best)) best = mid;
        if (within(mid)) return mid;
        if (mid.ratio() < cfg.target_ratio) q_lo = q_mid; else q_hi = q_mid;
    }
    if (within(best) || !cfg.strict) return best;
    throw RateControlError("jp2_encode: rate control missed the target tolerance", best.ratio());
}

GrayImage jp2_decode(const CompressedStream& stream) {
    const auto& b = stream.bytes;
    if (b.size() < kHeaderSize || std::memcmp(b.data(), kMagic, 4) != 0)
        throw MalformedStreamError("jp2_decode: bad magic");
    if (b[4] != kVersion) throw MalformedStreamError("jp2_decode: unsupported version");
    const int h = b[5] | (b[6] << 8);
    const int w = b[7] | (b[8] << 8);
    const int levels = b[9];
    uint64_t qbits = 0;
    for (int i = 0; i < 8; ++i) qbits |= static_cast<uint64_t>(b[10 + i]) << (8 * i);
    double q;
    std::memcpy(&q, &qbits, 8);
    if (h < 1 || w < 1 || levels < 1 || !(q > 0.0))
        throw MalformedStreamError("jp2_decode: invalid header fields");
    if (levels > max_levels(h, w))
        throw MalformedStreamError("jp2_decode: level count inconsistent with dimensions");

    const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
    const Eigen::Index ll_n = static_cast<Eigen::Index>(h >> levels) * (w >> levels);
    SignalVector coeffs(n);
    BitReader br(b.data() + kHeaderSize, b.size() - kHeaderSize);
    const double q_ll = q * kLLStepWeight;
    int64_t prev = 0;
    for (Eigen::Index i = 0; i < ll_n; ++i) {
        prev += unzigzag(br.get_eg());
        coeffs(i) = dequantize(prev, q_ll);
    }
    Eigen::Index i = ll_n;
    while (i < n) {
        uint64_t run = br.get_eg();
        if (run > static_cast<uint64_t>(n - i))
            throw MalformedStreamError("jp2_decode: zero run exceeds subband size");
        for (uint64_t r = 0; r < run; ++r) coeffs(i++) = 0.0;
        if (i < n) {
            const int64_t mag = static_cast<int64_t>(br.get_eg()) + 1;
            const int64_t idx = br.get_bit() ? -mag : mag;
            coeffs(i++) = dequantize(idx, q);
        }
    }
    GrayImage out = idwt2(unflatten(coeffs, PyramidShape{h, w, levels}));
    out.clamp01();
    return out;
}

GrayImage jp2_pipeline(const GrayImage& img, const Jp2Config& cfg) {
    return jp2_decode(jp2_encode(img, cfg));
}

double calibrate_ratio_to_psnr(const std::vector<GrayImage>& images, double target_psnr,
                               double psnr_tol, int levels) {
    if (images.empty()) throw Error("calibrate_ratio: empty calibration set");

    // phase 1: cheap global-q bisection against the PSNR target
    auto at_q = [&](double q, double& mean_ratio) {
        double p = 0.0, rr = 0.0;
        for (const auto& img : images) {
            auto s = jp2_encode_fixed_q(img, q, levels);
            p += psnr(img, jp2_decode(s));
            rr += s.ratio();
        }
        mean_ratio = rr / static_cast<double>(images.size());
        return p / static_cast<double>(images.size());
    };
    double q_lo = 1e-6, q_hi = 64.0, ratio_at;
    if (at_q(q_lo, ratio_at) < target_psnr - psnr_tol)
        throw Error("calibrate_ratio: target PSNR above the codec's reachable range");
    while (at_q(q_hi, ratio_at) > target_psnr && q_hi < 1e9) q_hi *= 8.0;
    double q_mid = std::sqrt(q_lo * q_hi);
    for (int step = 0; step < 50; ++step) {
        q_mid = std::sqrt(q_lo * q_hi);
        const double p = at_q(q_mid, ratio_at);
        if (std::abs(p - target_psnr) <= 0.5 * psnr_tol) break;
        if (p > target_psnr) q_lo = q_mid; else q_hi = q_mid;
    }
    double target = std::max(1.0, ratio_at);

    // phase 2: verify on the actual generation path (per-image rate control),
    // nudging the target when the two paths disagree
    auto mean_j = [&](double t) {
        Jp2Config jc;
        jc.target_ratio = std::max(1.0, t);
        jc.levels = levels;
        jc.strict = false;
        double s = 0.0;
        for (const auto& img : images) s += psnr(img, jp2_pipeline(img, jc));
        return s / static_cast<double>(images.size());
    };
    double lo = target / 8.0, hi = target * 8.0;
    double best_target = target, best_gap = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 40; ++step) {
        const double p = mean_j(target);
        const double gap = std::abs(p - target_psnr);
        if (gap < best_gap) {
            best_gap = gap;
            best_target = target;
        }
        if (gap <= 0.8 * psnr_tol) return target;
        if (p > target_psnr) lo = target; else hi = target;
        target = std::sqrt(lo * hi);
    }
    if (best_gap <= psnr_tol) return best_target;
    throw Error("calibrate_ratio: search did not converge to the PSNR tolerance");
}

double calibrate_ratio(const std::vector<GrayImage>& images, double cs_rate,
                       const CsConfig& cs_cfg, double psnr_tol, SensingCache* cache) {
    if (images.empty()) throw Error("calibrate_ratio: empty calibration set");
    CsConfig cfg = cs_cfg;
    cfg.rate = cs_rate;
    double mean_c = 0.0;
    for (const auto& img : images) mean_c += psnr(img, cs_pipeline(img, cfg, cache));
    mean_c /= static_cast<double>(images.size());
    return calibrate_ratio_to_psnr(images, mean_c, psnr_tol, cfg.levels == 0 ? 4 : cfg.levels);
}

}  // namespace csf
