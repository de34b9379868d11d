#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "prokan/data.hpp"
#include "prokan/progressive.hpp"
#include "prokan/training.hpp"

namespace prokan {

// Every tunable of a run. Config files are flat JSON objects whose keys are
// exactly these field names; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "prokan_out";
  int patch_radius = 1;

  // synthetic data
  int n_cases = 20;
  int dim_x = 16;
  int dim_y = 16;
  int dim_z = 16;
  double spacing_x = 1.0;
  double spacing_y = 1.0;
  double spacing_z = 1.0;
  int blob_count_min = 1;
  int blob_count_max = 3;
  double radius_min = 2.0;
  double radius_max = 4.0;
  double noise_sigma = 0.1;
  double contrast = 1.0;

  // network
  int hidden_width = 8;
  double init_scale = 0.1;
  double spline_domain_min = -1.0;
  double spline_domain_max = 1.0;

  // loss and optimizer
  double bce_weight = 1.0;
  double dice_weight = 1.0;
  double smooth_eps = 1e-6;
  double momentum = 0.9;
  int batch_size = 64;

  // voxel sampling and splits
  int samples_per_class = 128;
  double val_fraction = 0.2;
  int folds = 10;

  // progressive stacking
  double epsilon = 1e-3;
  int t_plateau = 5;
  int decline_window = 5;
  int cooldown = 5;
  int max_blocks = 4;
  int grid_size = 5;
  int degree = 3;
  double learning_rate = 1e-2;
  double l2_lambda = 1e-4;
  int delta_grid = 3;
  int delta_degree = 0;
  double lr_decay = 0.5;
  double delta_lambda = 1e-4;
  int max_epochs = 200;

  // Throws config-error naming the first violated constraint.
  void validate() const;

  SynthParams synth_params() const;
  StackingPolicy policy() const;
  LossConfig loss() const;
  TrainerSettings trainer() const;

  std::string to_json() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

// Parses a flat JSON object on top of the defaults. Does not validate.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Sets one key from its command-line spelling (e.g. "0.5", "12", "out/dir").
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// Applies PROKAN_SEED when set in the environment.
void apply_environment(RunConfig& cfg);

}  // namespace prokan
