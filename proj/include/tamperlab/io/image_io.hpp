#pragma once

#include <filesystem>

#include "tamperlab/core/image.hpp"

namespace tamperlab {

// PNG/JPEG codecs, isolated here so only one translation unit pulls OpenCV.

void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);  // 0 / 255
void write_softmask_png(const std::filesystem::path& path, const SoftMask& mask);  // round(255*p)

RgbImage read_png(const std::filesystem::path& path);
BinaryMask read_mask_png(const std::filesystem::path& path);  // values > 127 -> 1

// Baseline-DCT JPEG encode/decode round trip at the given quality (1..100).
RgbImage jpeg_roundtrip(const RgbImage& img, int quality);

// Input with the red channel boosted where p > 0.5; qualitative inspection aid.
RgbImage render_overlay(const RgbImage& img, const SoftMask& mask);

}  // namespace tamperlab
