#include "orunet/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

namespace orunet::img {

ImageU8 read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("failed to read image: " + path.string());
  ImageU8 out(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y)
    for (int x = 0; x < bgr.cols; ++x) {
      const cv::Vec3b px = bgr.at<cv::Vec3b>(y, x);
      out.at(y, x, 0) = px[2];
      out.at(y, x, 1) = px[1];
      out.at(y, x, 2) = px[0];
    }
  return out;
}

MaskU8 read_mask(const std::filesystem::path& path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw std::runtime_error("failed to read mask: " + path.string());
  MaskU8 out(gray.rows, gray.cols);
  for (int y = 0; y < gray.rows; ++y)
    for (int x = 0; x < gray.cols; ++x) out.at(y, x) = gray.at<uint8_t>(y, x);
  return out;
}

void write_image(const std::filesystem::path& path, const ImageU8& image) {
  cv::Mat bgr(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3);
  for (int64_t y = 0; y < image.height; ++y)
    for (int64_t x = 0; x < image.width; ++x)
      bgr.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) =
          cv::Vec3b(image.at(y, x, 2), image.at(y, x, 1), image.at(y, x, 0));
  if (!cv::imwrite(path.string(), bgr))
    throw std::runtime_error("failed to write image: " + path.string());
}

void write_mask(const std::filesystem::path& path, const MaskU8& mask) {
  cv::Mat gray(static_cast<int>(mask.height), static_cast<int>(mask.width), CV_8UC1);
  for (int64_t y = 0; y < mask.height; ++y)
    for (int64_t x = 0; x < mask.width; ++x)
      gray.at<uint8_t>(static_cast<int>(y), static_cast<int>(x)) = mask.at(y, x);
  if (!cv::imwrite(path.string(), gray))
    throw std::runtime_error("failed to write mask: " + path.string());
}

}  // namespace orunet::img
