#include "csf/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace csf {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(f),
                                std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

// ---------------------------------------------------------------- PGM

namespace {

// skips whitespace and '#' comments between header tokens
int next_token(const std::vector<uint8_t>& b, size_t& pos) {
    while (pos < b.size()) {
        if (std::isspace(b[pos])) { ++pos; continue; }
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    int v = 0;
    bool any = false;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + (b[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) throw IoError("malformed PGM header");
    return v;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw IoError(path + ": not a binary PGM (P5)");
    size_t pos = 2;
    const int w = next_token(bytes, pos);
    const int h = next_token(bytes, pos);
    const int maxval = next_token(bytes, pos);
    if (maxval != 255) throw IoError(path + ": only maxval 255 supported");
    ++pos;  // single whitespace after header
    if (bytes.size() - pos < static_cast<size_t>(w) * h)
        throw IoError(path + ": truncated PGM payload");
    GrayImage img(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            img.at(r, c) = bytes[pos + static_cast<size_t>(r) * w + c] / 255.0;
    return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::string header = "P5\n" + std::to_string(img.w()) + " " +
                         std::to_string(img.h()) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + static_cast<size_t>(img.h()) * img.w());
    for (int r = 0; r < img.h(); ++r)
        for (int c = 0; c < img.w(); ++c)
            out.push_back(to_8bit_value(img.at(r, c)));
    write_file_bytes(path, out);
}

// ---------------------------------------------------------------- BMP

namespace {

uint32_t le32(const std::vector<uint8_t>& b, size_t off) {
    if (off + 4 > b.size()) throw IoError("truncated BMP header");
    return static_cast<uint32_t>(b[off]) | (static_cast<uint32_t>(b[off + 1]) << 8) |
           (static_cast<uint32_t>(b[off + 2]) << 16) | (static_cast<uint32_t>(b[off + 3]) << 24);
}

uint16_t le16(const std::vector<uint8_t>& b, size_t off) {
    if (off + 2 > b.size()) throw IoError("truncated BMP header");
    return static_cast<uint16_t>(b[off] | (b[off + 1] << 8));
}

}  // namespace

GrayImage read_bmp_gray(const std::string& path) {
    auto b = read_file_bytes(path);
    if (b.size() < 54 || b[0] != 'B' || b[1] != 'M')
        throw IoError(path + ": not a BMP file");
    const uint32_t data_off = le32(b, 10);
    const uint32_t hdr_size = le32(b, 14);
    if (hdr_size < 40) throw IoError(path + ": unsupported BMP header");
    const int32_t w = static_cast<int32_t>(le32(b, 18));
    int32_t h = static_cast<int32_t>(le32(b, 22));
    const bool top_down = h < 0;
    if (top_down) h = -h;
    if (le16(b, 26) != 1) throw IoError(path + ": BMP planes != 1");
    const uint16_t bpp = le16(b, 28);
    if (le32(b, 30) != 0) throw IoError(path + ": compressed BMP not supported");

    GrayImage img(h, w);
    if (bpp == 8) {
        // grayscale palette assumed; map index through the palette's red channel
        const size_t pal_off = 14 + hdr_size;
        uint32_t pal_n = le32(b, 46);
        if (pal_n == 0) pal_n = 256;
        std::vector<double> lut(256, 0.0);
        for (uint32_t i = 0; i < pal_n && i < 256; ++i)
            lut[i] = b[pal_off + 4 * i + 2] / 255.0;
        const size_t stride = (static_cast<size_t>(w) + 3) & ~size_t{3};
        for (int r = 0; r < h; ++r) {
            const int src_row = top_down ? r : (h - 1 - r);
            const size_t row_off = data_off + stride * src_row;
            if (row_off + w > b.size()) throw IoError(path + ": truncated BMP payload");
            for (int c = 0; c < w; ++c) img.at(r, c) = lut[b[row_off + c]];
        }
    } else if (bpp == 24) {
        // accept 24-bit too and convert via ITU-R 601 luma
        const size_t stride = (static_cast<size_t>(w) * 3 + 3) & ~size_t{3};
        for (int r = 0; r < h; ++r) {
            const int src_row = top_down ? r : (h - 1 - r);
            const size_t row_off = data_off + stride * src_row;
            if (row_off + 3 * w > b.size()) throw IoError(path + ": truncated BMP payload");
            for (int c = 0; c < w; ++c) {
                const double bl = b[row_off + 3 * c] / 255.0;
                const double g = b[row_off + 3 * c + 1] / 255.0;
                const double rd = b[row_off + 3 * c + 2] / 255.0;
                img.at(r, c) = 0.299 * rd + 0.587 * g + 0.114 * bl;
            }
        }
    } else {
        throw IoError(path + ": only 8-bit and 24-bit BMPs supported");
    }
    return img;
}

GrayImage read_image(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == "bmp") return read_bmp_gray(path);
    return read_pgm(path);
}

// ---------------------------------------------------------------- CSV

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const Eigen::MatrixXd& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) f << ',';
            f << format_double(m(r, c));
        }
        f << '\n';
    }
}

Eigen::MatrixXd read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError(path + ": ragged CSV");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

std::string file_digest(const std::string& path) {
    auto bytes = read_file_bytes(path);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (uint8_t byte : bytes) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace csf
