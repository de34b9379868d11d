#include "prokan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prokan/error.hpp"

namespace prokan {

namespace {

void check_dims(const BinaryMask& x, const BinaryMask& y) {
  if (!(x.dims == y.dims) || x.voxels.size() != y.voxels.size()) {
    throw Error(ErrorCode::kDimsMismatch, "masks have different dimensions");
  }
}

struct Overlap {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t both = 0;
};

Overlap overlap(const BinaryMask& x, const BinaryMask& y) {
  check_dims(x, y);
  Overlap o;
  for (std::size_t i = 0; i < x.voxels.size(); ++i) {
    const bool a = x.voxels[i] != 0;
    const bool b = y.voxels[i] != 0;
    o.x += a;
    o.y += b;
    o.both += a && b;
  }
  if (o.x == 0 && o.y == 0) throw Error(ErrorCode::kBothEmpty, "both masks are empty");
  return o;
}

double directed(const std::vector<std::array<int, 3>>& from,
                const std::vector<std::array<int, 3>>& to, const Spacing& s) {
  double worst = 0.0;
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dx = (a[0] - b[0]) * s.x;
      const double dy = (a[1] - b[1]) * s.y;
      const double dz = (a[2] - b[2]) * s.z;
      best = std::min(best, dx * dx + dy * dy + dz * dz);
      if (best == 0.0) break;
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(voxels.begin(), voxels.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

double dice(const BinaryMask& x, const BinaryMask& y) {
  const Overlap o = overlap(x, y);
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.x + o.y);
}

double miou(const BinaryMask& x, const BinaryMask& y) {
  const Overlap o = overlap(x, y);
  return static_cast<double>(o.both) / static_cast<double>(o.x + o.y - o.both);
}

std::vector<std::array<int, 3>> boundary_voxels(const BinaryMask& mask) {
  static constexpr std::array<std::array<int, 3>, 6> kFaces{
      {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  const Dims& d = mask.dims;
  std::vector<std::array<int, 3>> out;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        bool edge = false;
        for (const auto& f : kFaces) {
          const int a = x + f[0], b = y + f[1], c = z + f[2];
          if (!d.contains(a, b, c) || !mask.at(a, b, c)) {
            edge = true;
            break;
          }
        }
        if (edge) out.push_back({x, y, z});
      }
  return out;
}

double hausdorff(const BinaryMask& x, const BinaryMask& y, const Spacing& spacing) {
  check_dims(x, y);
  const auto bx = boundary_voxels(x);
  const auto by = boundary_voxels(y);
  if (bx.empty() || by.empty()) throw Error(ErrorCode::kEmptyMask, "Hausdorff needs non-empty masks");
  // sqrt is monotone, so taking it once at the end is exact.
  return std::sqrt(std::max(directed(bx, by, spacing), directed(by, bx, spacing)));
}

double voxel_accuracy(const BinaryMask& x, const BinaryMask& y) {
  check_dims(x, y);
  if (x.voxels.empty()) throw Error(ErrorCode::kDimsMismatch, "empty volume");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < x.voxels.size(); ++i) agree += (x.voxels[i] != 0) == (y.voxels[i] != 0);
  return static_cast<double>(agree) / static_cast<double>(x.voxels.size());
}

CaseMetrics evaluate_case(const std::string& case_id, const BinaryMask& predicted,
                          const BinaryMask& truth, const Spacing& spacing) {
  CaseMetrics m;
  m.case_id = case_id;
  m.accuracy = voxel_accuracy(predicted, truth);
  try {
    m.dice = dice(predicted, truth);
    m.miou = miou(predicted, truth);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kBothEmpty) throw;
    m.error = e.what();
  }
  try {
    m.hd = hausdorff(predicted, truth, spacing);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyMask) throw;
    if (m.error.empty()) m.error = e.what();
  }
  return m;
}

}  // namespace prokan
