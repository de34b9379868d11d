#pragma once

#include <array>
#include <cstddef>

namespace prokan {

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  // Row-major, x fastest.
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) +
                                           static_cast<std::size_t>(ny) * static_cast<std::size_t>(z));
  }
  std::array<int, 3> coords(std::size_t i) const {
    const auto sx = static_cast<std::size_t>(nx);
    const auto sy = static_cast<std::size_t>(ny);
    return {static_cast<int>(i % sx), static_cast<int>((i / sx) % sy),
            static_cast<int>(i / (sx * sy))};
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  bool operator==(const Dims&) const = default;
};

// Voxel size in mm along each axis.
struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;
  bool operator==(const Spacing&) const = default;
};

}  // namespace prokan
