#pragma once

#include <cassert>

#include <Eigen/Core>

namespace axisforge {

// Row-major, channel-interleaved image of scalars. Flat storage is an Eigen
// vector so the diffusion code can treat an image as a tensor without copies.
template <int Channels>
struct Image {
  static constexpr int kChannels = Channels;

  int width = 0;
  int height = 0;
  Eigen::VectorXd data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w) * h * Channels)) {}
  Image(int w, int h, Eigen::VectorXd flat) : width(w), height(h), data(std::move(flat)) {
    assert(data.size() == static_cast<Eigen::Index>(w) * h * Channels);
  }

  Eigen::Index index(int row, int col, int ch = 0) const {
    return (static_cast<Eigen::Index>(row) * width + col) * Channels + ch;
  }
  double& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
  double at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }

  Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(width) * height; }
  Eigen::Index size() const { return data.size(); }

  bool operator==(const Image& other) const {
    return width == other.width && height == other.height && data == other.data;
  }
};

using TriAxisImage = Image<3>;
using QueryImage = Image<1>;

}  // namespace axisforge
