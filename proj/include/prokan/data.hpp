#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "prokan/grid.hpp"
#include "prokan/metrics.hpp"
#include "prokan/training.hpp"

namespace prokan {

struct Volume {
  Dims dims;
  Spacing spacing;
  std::vector<float> intensities;  // dims.count() entries, x fastest

  float at(int x, int y, int z) const { return intensities[dims.index(x, y, z)]; }
  bool operator==(const Volume&) const = default;
};

struct Ellipsoid {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double rx = 1.0, ry = 1.0, rz = 1.0;

  bool contains(int x, int y, int z) const;
};

struct LabeledCase {
  std::string case_id;
  Volume volume;
  BinaryMask mask;
  std::vector<Ellipsoid> blobs;  // generator provenance, empty for loaded cases
};

struct SynthParams {
  std::uint64_t seed = 7;
  int n_cases = 20;
  Dims dims{16, 16, 16};
  Spacing spacing{};
  int blob_count_min = 1;
  int blob_count_max = 3;
  double radius_min = 2.0;
  double radius_max = 4.0;
  double noise_sigma = 0.1;
  double contrast = 1.0;

  void validate() const;
};

std::string case_id_for(int index);

// Ellipsoidal blobs at intensity `contrast` on a zero background plus seeded
// Gaussian noise. The mask is the exact blob support. Case i depends only on
// (seed, i).
std::vector<LabeledCase> generate_synthetic_cases(const SynthParams& params);

struct IntensityRange {
  double min = 0.0;
  double max = 0.0;
};

IntensityRange intensity_range(const Volume& volume);

// (2r+1)^3 edge-replicated patch around `center`, x fastest, rescaled from the
// volume's [min, max] into [-1, 1]. A constant volume maps to zeros.
std::vector<double> extract_patch_features(const Volume& volume, std::size_t center, int radius);
std::vector<double> extract_patch_features(const Volume& volume, const IntensityRange& range,
                                           std::size_t center, int radius);

int feature_length(int radius);

// Features of every voxel, labels from `truth`.
SampleSet dense_samples(const Volume& volume, const BinaryMask& truth, int radius);

// Equal numbers of foreground and background voxels (at most `max_per_class`
// each), interleaved fg/bg.
SampleSet balanced_samples(const LabeledCase& c, int radius, std::size_t max_per_class,
                           std::mt19937_64& rng);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Seeded permutation cut into k folds whose sizes differ by at most one.
std::vector<Fold> kfold_split(std::size_t n_cases, int k, std::uint64_t seed);

// Binary volume/mask files: magic | u32 version | 3 x u32 dims | 3 x f64
// spacing | payload, little-endian. Volumes ("PKVL") store f32 intensities,
// masks ("PKMS") packed bits, least significant bit first.
inline constexpr std::uint32_t kVolumeFormatVersion = 1;

void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask,
                const Spacing& spacing = {});
BinaryMask read_mask(const std::filesystem::path& path, Spacing* spacing = nullptr);

}  // namespace prokan
