#include "prokan/inference.hpp"

#include "prokan/training.hpp"

namespace prokan {

EvalCase make_eval_case(const LabeledCase& c, int patch_radius) {
  EvalCase e;
  e.case_id = c.case_id;
  e.truth = c.mask;
  e.spacing = c.volume.spacing;
  e.voxels = dense_samples(c.volume, c.mask, patch_radius);
  return e;
}

BinaryMask predict_mask(const ProKanNetwork& net, const EvalCase& c) {
  BinaryMask pred(c.truth.dims);
  for (std::size_t i = 0; i < c.voxels.size(); ++i) {
    pred.voxels[i] = sigmoid(network_logit(net, c.voxels.row(i))) > kPredictionThreshold ? 1 : 0;
  }
  return pred;
}

EvalSummary evaluate_cases(const ProKanNetwork& net, const std::vector<EvalCase>& cases) {
  EvalSummary s;
  std::size_t agree_voxels = 0;
  std::size_t total_voxels = 0;
  for (const auto& c : cases) {
    const BinaryMask pred = predict_mask(net, c);
    CaseMetrics m = evaluate_case(c.case_id, pred, c.truth, c.spacing);
    for (std::size_t i = 0; i < pred.voxels.size(); ++i) agree_voxels += pred.voxels[i] == c.truth.voxels[i];
    total_voxels += pred.voxels.size();
    if (m.dice) {
      s.mean_dice += *m.dice;
      s.mean_miou += *m.miou;
      ++s.dice_cases;
    }
    if (m.hd) {
      s.mean_hd += *m.hd;
      ++s.hd_cases;
    }
    s.cases.push_back(std::move(m));
  }
  if (total_voxels > 0) s.accuracy = static_cast<double>(agree_voxels) / static_cast<double>(total_voxels);
  if (s.dice_cases > 0) {
    s.mean_dice /= static_cast<double>(s.dice_cases);
    s.mean_miou /= static_cast<double>(s.dice_cases);
  }
  if (s.hd_cases > 0) s.mean_hd /= static_cast<double>(s.hd_cases);
  return s;
}

}  // namespace prokan
