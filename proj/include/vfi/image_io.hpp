#pragma once

#include <filesystem>

#include "vfi/imaging.hpp"

namespace vfi {

// Reads an 8-bit PNG (gray, gray+alpha, RGB, RGBA) or binary PPM (P6, maxval
// 255). Alpha is dropped; samples are mapped to [0,1] by division by 255.
Frame load_frame(const std::filesystem::path& path);

// Clamps to [0,1], quantizes with round-half-up, and writes PNG or P6
// depending on the extension (.png, .ppm).
void save_frame(const Frame& frame, const std::filesystem::path& path);

// round(v * 255) with halves rounded up, after clamping to [0,1].
unsigned char quantize_sample(double v);

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
// interleaved float32 (u,v) rows; all little-endian.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& flow, const std::filesystem::path& path);

}  // namespace vfi
