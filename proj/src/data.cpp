#include "prokan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string_view>

#include "prokan/error.hpp"

namespace prokan {

static_assert(std::endian::native == std::endian::little,
              "volume I/O assumes a little-endian host");

void SynthParams::validate() const {
  if (n_cases < 1) throw Error(ErrorCode::kInvalidGeometry, "n_cases must be >= 1");
  if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8) {
    throw Error(ErrorCode::kInvalidGeometry, "every dimension must be >= 8");
  }
  if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) {
    throw Error(ErrorCode::kInvalidGeometry, "spacing must be positive");
  }
  if (blob_count_min < 1 || blob_count_max < blob_count_min) {
    throw Error(ErrorCode::kInvalidGeometry, "blob count range must satisfy 1 <= min <= max");
  }
  if (!(radius_min >= 1.0) || !(radius_max >= radius_min)) {
    throw Error(ErrorCode::kInvalidGeometry, "radius range must satisfy 1 <= min <= max");
  }
  const int smallest = std::min({dims.nx, dims.ny, dims.nz});
  if (2.0 * radius_max > smallest - 1) {
    throw Error(ErrorCode::kInvalidGeometry, "radius_max does not fit inside the volume");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::kInvalidGeometry, "noise_sigma must be >= 0");
  }
  if (!std::isfinite(contrast)) throw Error(ErrorCode::kInvalidGeometry, "contrast must be finite");
}

bool Ellipsoid::contains(int x, int y, int z) const {
  const double a = (x - cx) / rx;
  const double b = (y - cy) / ry;
  const double c = (z - cz) / rz;
  return a * a + b * b + c * c <= 1.0;
}

std::string case_id_for(int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "case_" + digits;
}

std::vector<LabeledCase> generate_synthetic_cases(const SynthParams& params) {
  params.validate();
  std::vector<LabeledCase> cases;
  cases.reserve(static_cast<std::size_t>(params.n_cases));
  const Dims d = params.dims;

  for (int index = 0; index < params.n_cases; ++index) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed),
                      static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<int> count_dist(params.blob_count_min, params.blob_count_max);
    std::uniform_real_distribution<double> radius_dist(params.radius_min, params.radius_max);

    LabeledCase c;
    c.case_id = case_id_for(index);
    c.mask = BinaryMask(d);
    const int blobs = count_dist(rng);
    for (int b = 0; b < blobs; ++b) {
      Ellipsoid e;
      e.rx = radius_dist(rng);
      e.ry = radius_dist(rng);
      e.rz = radius_dist(rng);
      e.cx = std::uniform_real_distribution<double>(e.rx, d.nx - 1 - e.rx)(rng);
      e.cy = std::uniform_real_distribution<double>(e.ry, d.ny - 1 - e.ry)(rng);
      e.cz = std::uniform_real_distribution<double>(e.rz, d.nz - 1 - e.rz)(rng);
      c.blobs.push_back(e);
    }
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const bool inside = std::any_of(c.blobs.begin(), c.blobs.end(),
                                          [&](const Ellipsoid& e) { return e.contains(x, y, z); });
          c.mask.set(x, y, z, inside);
        }

    c.volume.dims = d;
    c.volume.spacing = params.spacing;
    c.volume.intensities.resize(d.count());
    std::normal_distribution<double> noise(0.0, params.noise_sigma > 0.0 ? params.noise_sigma : 1.0);
    for (std::size_t i = 0; i < d.count(); ++i) {
      double v = c.mask.voxels[i] ? params.contrast : 0.0;
      if (params.noise_sigma > 0.0) v += noise(rng);
      c.volume.intensities[i] = static_cast<float>(v);
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

IntensityRange intensity_range(const Volume& volume) {
  if (volume.intensities.empty()) return {};
  const auto [lo, hi] = std::minmax_element(volume.intensities.begin(), volume.intensities.end());
  return {static_cast<double>(*lo), static_cast<double>(*hi)};
}

int feature_length(int radius) {
  const int side = 2 * radius + 1;
  return side * side * side;
}

std::vector<double> extract_patch_features(const Volume& volume, const IntensityRange& range,
                                           std::size_t center, int radius) {
  if (radius < 0) throw Error(ErrorCode::kInvalidArgument, "patch radius must be >= 0");
  const Dims& d = volume.dims;
  if (center >= d.count()) throw Error(ErrorCode::kIndexOutOfRange, "voxel index outside volume");
  const auto [cx, cy, cz] = d.coords(center);
  const double width = range.max - range.min;

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(feature_length(radius)));
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) {
        const int x = std::clamp(cx + dx, 0, d.nx - 1);
        const int y = std::clamp(cy + dy, 0, d.ny - 1);
        const int z = std::clamp(cz + dz, 0, d.nz - 1);
        if (!(width > 0.0)) {
          out.push_back(0.0);
          continue;
        }
        const double v = 2.0 * (static_cast<double>(volume.at(x, y, z)) - range.min) / width - 1.0;
        out.push_back(std::clamp(v, -1.0, 1.0));
      }
  return out;
}

std::vector<double> extract_patch_features(const Volume& volume, std::size_t center, int radius) {
  return extract_patch_features(volume, intensity_range(volume), center, radius);
}

SampleSet dense_samples(const Volume& volume, const BinaryMask& truth, int radius) {
  if (!(volume.dims == truth.dims)) throw Error(ErrorCode::kDimsMismatch, "volume/mask dims differ");
  const IntensityRange range = intensity_range(volume);
  SampleSet out;
  out.dim = feature_length(radius);
  out.features.reserve(volume.dims.count() * static_cast<std::size_t>(out.dim));
  out.labels.reserve(volume.dims.count());
  for (std::size_t i = 0; i < volume.dims.count(); ++i) {
    out.append(extract_patch_features(volume, range, i, radius), truth.voxels[i] ? 1.0 : 0.0);
  }
  return out;
}

SampleSet balanced_samples(const LabeledCase& c, int radius, std::size_t max_per_class,
                           std::mt19937_64& rng) {
  std::vector<std::size_t> fg;
  std::vector<std::size_t> bg;
  for (std::size_t i = 0; i < c.mask.voxels.size(); ++i) (c.mask.voxels[i] ? fg : bg).push_back(i);
  std::shuffle(fg.begin(), fg.end(), rng);
  std::shuffle(bg.begin(), bg.end(), rng);
  const std::size_t n = std::min({fg.size(), bg.size(), max_per_class});

  const IntensityRange range = intensity_range(c.volume);
  SampleSet out;
  out.dim = feature_length(radius);
  for (std::size_t i = 0; i < n; ++i) {
    out.append(extract_patch_features(c.volume, range, fg[i], radius), 1.0);
    out.append(extract_patch_features(c.volume, range, bg[i], radius), 0.0);
  }
  return out;
}

std::vector<Fold> kfold_split(std::size_t n_cases, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kTooFewCases, "k must be >= 2");
  if (n_cases < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kTooFewCases, std::to_string(n_cases) + " cases cannot fill " +
                                             std::to_string(k) + " folds");
  }
  std::vector<std::size_t> perm(n_cases);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const std::size_t kk = static_cast<std::size_t>(k);
  const std::size_t base = n_cases / kk;
  const std::size_t extra = n_cases % kk;
  std::vector<Fold> folds(kk);
  std::size_t start = 0;
  for (std::size_t f = 0; f < kk; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].val.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                        perm.begin() + static_cast<std::ptrdiff_t>(start + size));
    start += size;
  }
  for (std::size_t f = 0; f < kk; ++f) {
    std::sort(folds[f].val.begin(), folds[f].val.end());
    for (std::size_t g = 0; g < kk; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].val.begin(), folds[g].val.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

namespace {

constexpr std::string_view kVolumeMagic = "PKVL";
constexpr std::string_view kMaskMagic = "PKMS";

template <typename T>
void put(std::string& buf, T value) {
  const auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  buf.append(bytes.data(), bytes.size());
}

void put_header(std::string& buf, std::string_view magic, const Dims& d, const Spacing& s) {
  buf.append(magic);
  put<std::uint32_t>(buf, kVolumeFormatVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.nx));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.ny));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.nz));
  put<double>(buf, s.x);
  put<double>(buf, s.y);
  put<double>(buf, s.z);
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::array<char, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return std::bit_cast<T>(raw);
  }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view v(bytes_.data() + pos_, n);
    pos_ += n;
    return v;
  }

  void finish() const {
    if (pos_ != bytes_.size()) {
      throw Error(ErrorCode::kParseError, name_ + ": unexpected trailing bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kTruncatedFile, name_ + " ends early");
  }

  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void read_header(Reader& r, std::string_view magic, Dims& d, Spacing& s, const std::string& name) {
  if (r.take(4) != magic) throw Error(ErrorCode::kBadMagic, name + ": expected " + std::string(magic));
  const auto version = r.get<std::uint32_t>();
  if (version != kVolumeFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                name + ": unsupported format version " + std::to_string(version));
  }
  const auto nx = r.get<std::uint32_t>();
  const auto ny = r.get<std::uint32_t>();
  const auto nz = r.get<std::uint32_t>();
  constexpr std::uint32_t kMaxAxis = 1u << 12;
  if (nx == 0 || ny == 0 || nz == 0 || nx > kMaxAxis || ny > kMaxAxis || nz > kMaxAxis) {
    throw Error(ErrorCode::kParseError, name + ": invalid dimensions");
  }
  d = Dims{static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)};
  s.x = r.get<double>();
  s.y = r.get<double>();
  s.z = r.get<double>();
  if (!(s.x > 0.0 && s.y > 0.0 && s.z > 0.0)) {
    throw Error(ErrorCode::kParseError, name + ": spacing must be positive");
  }
}

}  // namespace

void write_volume(const std::filesystem::path& path, const Volume& volume) {
  if (volume.intensities.size() != volume.dims.count()) {
    throw Error(ErrorCode::kDimsMismatch, "intensity count does not match dims");
  }
  std::string buf;
  buf.reserve(48 + 4 * volume.intensities.size());
  put_header(buf, kVolumeMagic, volume.dims, volume.spacing);
  for (float v : volume.intensities) put<float>(buf, v);
  write_file(path, buf);
}

Volume read_volume(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes, path.string());
  Volume v;
  read_header(r, kVolumeMagic, v.dims, v.spacing, path.string());
  v.intensities.resize(v.dims.count());
  for (float& x : v.intensities) x = r.get<float>();
  r.finish();
  return v;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask, const Spacing& spacing) {
  if (mask.voxels.size() != mask.dims.count()) {
    throw Error(ErrorCode::kDimsMismatch, "voxel count does not match dims");
  }
  std::string buf;
  put_header(buf, kMaskMagic, mask.dims, spacing);
  std::string packed((mask.voxels.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < mask.voxels.size(); ++i) {
    if (mask.voxels[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
  }
  buf += packed;
  write_file(path, buf);
}

BinaryMask read_mask(const std::filesystem::path& path, Spacing* spacing) {
  const std::string bytes = read_file(path);
  Reader r(bytes, path.string());
  Dims d;
  Spacing s;
  read_header(r, kMaskMagic, d, s, path.string());
  BinaryMask mask(d);
  const std::string_view packed = r.take((d.count() + 7) / 8);
  for (std::size_t i = 0; i < mask.voxels.size(); ++i) {
    mask.voxels[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
  }
  r.finish();
  if (spacing) *spacing = s;
  return mask;
}

}  // namespace prokan
