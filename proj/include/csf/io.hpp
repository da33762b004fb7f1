#ifndef CSF_IO_HPP
#define CSF_IO_HPP

#include <string>
#include <vector>

#include "csf/core.hpp"

namespace csf {

// Binary PGM (P5, maxval 255).
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

// 8-bit uncompressed grayscale BMP (palette or top-down), read only.
// Used for corpus ingestion.
GrayImage read_bmp_gray(const std::string& path);

// Reads either format based on extension.
GrayImage read_image(const std::string& path);

// Row-major CSV with full-precision decimals.
void write_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd read_csv(const std::string& path);

// Full round-trip decimal formatting shared by all writers.
std::string format_double(double v);

// FNV-1a 64-bit digest of a file's bytes, hex encoded.
std::string file_digest(const std::string& path);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace csf

#endif
