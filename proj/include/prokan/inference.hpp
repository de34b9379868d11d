#pragma once

#include <string>
#include <vector>

#include "prokan/data.hpp"
#include "prokan/kan.hpp"
#include "prokan/metrics.hpp"

namespace prokan {

// A case prepared for dense per-voxel inference.
struct EvalCase {
  std::string case_id;
  BinaryMask truth;
  Spacing spacing;
  SampleSet voxels;  // one row per voxel, labels = truth
};

EvalCase make_eval_case(const LabeledCase& c, int patch_radius);

inline constexpr double kPredictionThreshold = 0.5;

// Foreground where sigmoid(logit) > 0.5.
BinaryMask predict_mask(const ProKanNetwork& net, const EvalCase& c);

struct EvalSummary {
  std::vector<CaseMetrics> cases;
  double accuracy = 0.0;   // pooled over all voxels
  double mean_dice = 0.0;  // over cases where Dice is defined
  double mean_miou = 0.0;
  double mean_hd = 0.0;    // over cases where HD is defined
  std::size_t dice_cases = 0;
  std::size_t hd_cases = 0;
};

EvalSummary evaluate_cases(const ProKanNetwork& net, const std::vector<EvalCase>& cases);

}  // namespace prokan
