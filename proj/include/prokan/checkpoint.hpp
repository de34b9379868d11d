#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "prokan/kan.hpp"

namespace prokan {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  ProKanNetwork net;
  int patch_radius = 1;
  int epoch = 0;
  double val_dice = 0.0;
};

// JSON text: topology (dims, per-layer grid size, degree, domain, residual
// flags) plus every coefficient in canonical order. Doubles round-trip exactly.
std::string serialize_checkpoint(const Checkpoint& ckpt);

// Throws parse-error on malformed text and version-mismatch on an unknown
// format_version.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prokan
