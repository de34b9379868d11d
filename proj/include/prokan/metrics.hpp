#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prokan/grid.hpp"

namespace prokan {

struct BinaryMask {
  Dims dims;
  std::vector<std::uint8_t> voxels;  // 0 or 1, dims.count() entries

  BinaryMask() = default;
  explicit BinaryMask(Dims d) : dims(d), voxels(d.count(), 0) {}

  bool at(int x, int y, int z) const { return voxels[dims.index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool v) { voxels[dims.index(x, y, z)] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;
};

// 2|X n Y| / (|X| + |Y|). Throws dims-mismatch, or both-empty when 0/0.
double dice(const BinaryMask& x, const BinaryMask& y);

// |X n Y| / |X u Y|. Same error rules as dice.
double miou(const BinaryMask& x, const BinaryMask& y);

// Foreground voxels with a background face-neighbour or on the volume edge.
std::vector<std::array<int, 3>> boundary_voxels(const BinaryMask& mask);

// Symmetric Hausdorff distance between the boundary voxel centres, in the
// units of `spacing`. Exact pairwise computation. Throws empty-mask if either
// mask has no foreground.
double hausdorff(const BinaryMask& x, const BinaryMask& y, const Spacing& spacing = {});

// Fraction of voxels on which the masks agree.
double voxel_accuracy(const BinaryMask& x, const BinaryMask& y);

struct CaseMetrics {
  std::string case_id;
  std::optional<double> dice;
  std::optional<double> miou;
  std::optional<double> hd;
  double accuracy = 0.0;
  std::string error;  // why a metric is missing, empty when all are defined
};

// All four metrics; undefined ones are left empty and explained in `error`.
CaseMetrics evaluate_case(const std::string& case_id, const BinaryMask& predicted,
                          const BinaryMask& truth, const Spacing& spacing = {});

}  // namespace prokan
