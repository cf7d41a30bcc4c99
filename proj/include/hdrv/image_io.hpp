#pragma once

#include <filesystem>

#include "hdrv/tensor.hpp"

namespace hdrv::io {

enum class PngDepth { k8 = 8, k16 = 16 };
enum class ExrPrecision { kHalf, kFloat };

// 3 x H x W in [0, 1]; gray is replicated and alpha dropped. Values map
// linearly: v / 255 or v / 65535.
Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& rgb, PngDepth depth = PngDepth::k8);

Tensor read_exr(const std::filesystem::path& path);
void write_exr(const std::filesystem::path& path, const Tensor& rgb,
               ExrPrecision precision = ExrPrecision::kFloat);

// Radiance RGBE (.hdr / .pic); reads flat and run-length encoded scanlines.
Tensor read_rgbe(const std::filesystem::path& path);
void write_rgbe(const std::filesystem::path& path, const Tensor& rgb);

// Dispatch on extension: .png (LDR), .exr or .hdr/.pic (HDR). All failures
// raise IoError naming the path.
Tensor read_frame(const std::filesystem::path& path);
void write_frame(const std::filesystem::path& path, const Tensor& rgb);

bool is_hdr_path(const std::filesystem::path& path);

}  // namespace hdrv::io
