#pragma once

namespace prokan {

// Block-indexed hyperparameters in force after the b-th growth step.
struct HyperParams {
  int block_index = 0;
  int grid_size = 5;
  int degree = 3;
  double learning_rate = 1e-2;
  double l2_lambda = 1e-4;

  bool operator==(const HyperParams&) const = default;
};

}  // namespace prokan
