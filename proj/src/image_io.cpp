#include "tamperlab/io/image_io.hpp"

#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <stdexcept>

namespace tamperlab {

namespace {

inline std::uint8_t to_u8(float v) {
    const float s = std::round(clamp01(v) * 255.f);
    return static_cast<std::uint8_t>(s);
}

cv::Mat to_bgr8(const RgbImage& img) {
    cv::Mat m(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y) {
        auto* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.w; ++x) {
            row[3 * x + 0] = to_u8(img.at(y, x, 2));  // B
            row[3 * x + 1] = to_u8(img.at(y, x, 1));  // G
            row[3 * x + 2] = to_u8(img.at(y, x, 0));  // R
        }
    }
    return m;
}

RgbImage from_bgr8(const cv::Mat& m) {
    RgbImage img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < m.cols; ++x) {
            img.at(y, x, 0) = row[3 * x + 2] / 255.f;
            img.at(y, x, 1) = row[3 * x + 1] / 255.f;
            img.at(y, x, 2) = row[3 * x + 0] / 255.f;
        }
    }
    return img;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& img) {
    if (!cv::imwrite(path.string(), to_bgr8(img)))
        throw std::runtime_error("failed to write " + path.string());
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
    cv::Mat m(mask.h, mask.w, CV_8UC1);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) m.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
    if (!cv::imwrite(path.string(), m))
        throw std::runtime_error("failed to write " + path.string());
}

void write_softmask_png(const std::filesystem::path& path, const SoftMask& mask) {
    cv::Mat m(mask.h, mask.w, CV_8UC1);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) m.at<std::uint8_t>(y, x) = to_u8(mask.at(y, x));
    if (!cv::imwrite(path.string(), m))
        throw std::runtime_error("failed to write " + path.string());
}

RgbImage read_png(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw std::runtime_error("failed to read " + path.string());
    return from_bgr8(m);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw std::runtime_error("failed to read " + path.string());
    BinaryMask mask(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) mask.at(y, x) = m.at<std::uint8_t>(y, x) > 127 ? 1 : 0;
    return mask;
}

RgbImage jpeg_roundtrip(const RgbImage& img, int quality) {
    if (quality < 1 || quality > 100)
        throw std::invalid_argument("jpeg quality must be in [1,100]");
    std::vector<uchar> buf;
    if (!cv::imencode(".jpg", to_bgr8(img), buf, {cv::IMWRITE_JPEG_QUALITY, quality}))
        throw std::runtime_error("jpeg encode failed");
    cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (dec.empty()) throw std::runtime_error("jpeg decode failed");
    return from_bgr8(dec);
}

RgbImage render_overlay(const RgbImage& img, const SoftMask& mask) {
    RgbImage out = img;
    for (int y = 0; y < img.h && y < mask.h; ++y)
        for (int x = 0; x < img.w && x < mask.w; ++x)
            if (mask.at(y, x) > 0.5f) {
                out.at(y, x, 0) = clamp01(0.55f * img.at(y, x, 0) + 0.45f);
                out.at(y, x, 1) = 0.55f * img.at(y, x, 1);
                out.at(y, x, 2) = 0.55f * img.at(y, x, 2);
            }
    return out;
}

}  // namespace tamperlab
