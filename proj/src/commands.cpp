#include "prokan/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <nlohmann/json.hpp>

#include "prokan/checkpoint.hpp"
#include "prokan/error.hpp"
#include "prokan/progressive.hpp"
#include "prokan/rng.hpp"

namespace prokan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kDatasetFormat = "prokan-dataset";
constexpr int kDatasetFormatVersion = 1;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "cannot create output directory " + dir.string() +
                                         (ec ? ": " + ec.message() : ""));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json metrics_record(const CaseMetrics& m) {
  ordered_json j{{"case_id", m.case_id},
                 {"dice", optional_number(m.dice)},
                 {"miou", optional_number(m.miou)},
                 {"hd", optional_number(m.hd)},
                 {"accuracy", m.accuracy}};
  if (!m.error.empty()) j["error"] = m.error;
  return j;
}

ordered_json epoch_record(const EpochRecord& r) {
  return ordered_json{{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"val_loss", r.val_loss},
                      {"val_accuracy", r.val_accuracy},
                      {"val_dice", r.val_dice},
                      {"block_count", r.block_count},
                      {"G", r.hp.grid_size},
                      {"k", r.hp.degree},
                      {"eta", r.hp.learning_rate},
                      {"lambda", r.hp.l2_lambda}};
}

ordered_json insertion_record(const InsertionEvent& e) {
  return ordered_json{{"epoch", e.epoch},
                      {"new_block_index", e.new_block_index},
                      {"G_b", e.hp.grid_size},
                      {"k_b", e.hp.degree},
                      {"eta_b", e.hp.learning_rate},
                      {"lambda_b", e.hp.l2_lambda},
                      {"val_loss_before", e.val_loss_before},
                      {"val_loss_after", e.val_loss_after}};
}

TrainingData build_training_data(const std::vector<LabeledCase>& cases,
                                 const std::vector<std::size_t>& train_idx,
                                 const std::vector<std::size_t>& val_idx, const RunConfig& cfg,
                                 std::uint64_t seed) {
  auto rng = make_rng(seed, RngStream::kSampling);
  const auto per_class = static_cast<std::size_t>(cfg.samples_per_class);
  TrainingData data;
  data.train.dim = feature_length(cfg.patch_radius);
  data.val.dim = data.train.dim;
  auto merge = [](SampleSet& into, const SampleSet& from) {
    into.features.insert(into.features.end(), from.features.begin(), from.features.end());
    into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
  };
  for (std::size_t i : train_idx) merge(data.train, balanced_samples(cases[i], cfg.patch_radius, per_class, rng));
  for (std::size_t i : val_idx) {
    merge(data.val, balanced_samples(cases[i], cfg.patch_radius, per_class, rng));
    data.val_cases.push_back(make_eval_case(cases[i], cfg.patch_radius));
  }
  if (data.train.empty() || data.val.empty()) {
    throw Error(ErrorCode::kEmptySplit, "a split has no foreground/background voxel pairs");
  }
  return data;
}

std::vector<std::string> ids_of(const std::vector<LabeledCase>& cases,
                                const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(cases[i].case_id);
  return out;
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

std::optional<Moments> moments(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  Moments m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / files::kManifest;
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::kIoError, "missing dataset manifest " + manifest_path.string());
  }
  const json manifest = read_json(manifest_path);
  Dataset ds;
  try {
    if (manifest.at("format").get<std::string>() != kDatasetFormat) {
      throw Error(ErrorCode::kParseError, "not a proKAN dataset manifest");
    }
    if (manifest.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch, "unsupported dataset manifest version");
    }
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& entry : manifest.at("cases")) {
      LabeledCase c;
      c.case_id = entry.at("case_id").get<std::string>();
      c.volume = read_volume(dir / entry.at("volume").get<std::string>());
      c.mask = read_mask(dir / entry.at("mask").get<std::string>());
      if (!(c.volume.dims == c.mask.dims)) {
        throw Error(ErrorCode::kDimsMismatch, "volume and mask dims differ for " + c.case_id);
      }
      ds.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, manifest_path.string() + ": " + e.what());
  }
  return ds;
}

void cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  const SynthParams params = cfg.synth_params();
  const auto cases = generate_synthetic_cases(params);

  const fs::path dir = cfg.output_dir;
  ensure_dir(dir);
  ordered_json entries = ordered_json::array();
  for (const auto& c : cases) {
    const std::string volume_file = c.case_id + ".pkvl";
    const std::string mask_file = c.case_id + ".pkms";
    write_volume(dir / volume_file, c.volume);
    write_mask(dir / mask_file, c.mask, c.volume.spacing);
    entries.push_back({{"case_id", c.case_id}, {"volume", volume_file}, {"mask", mask_file}});
  }
  ordered_json manifest{
      {"format", kDatasetFormat},
      {"format_version", kDatasetFormatVersion},
      {"seed", params.seed},
      {"n_cases", params.n_cases},
      {"generation",
       {{"dims", {params.dims.nx, params.dims.ny, params.dims.nz}},
        {"spacing", {params.spacing.x, params.spacing.y, params.spacing.z}},
        {"blob_count_range", {params.blob_count_min, params.blob_count_max}},
        {"radius_range", {params.radius_min, params.radius_max}},
        {"noise_sigma", params.noise_sigma},
        {"contrast", params.contrast}}},
      {"cases", std::move(entries)}};
  write_text(dir / files::kManifest, manifest.dump(1) + "\n");
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& dataset_dir, std::ostream* progress) {
  cfg.validate();
  const Dataset ds = load_dataset(dataset_dir);
  const std::size_t n = ds.cases.size();
  if (n < 2) throw Error(ErrorCode::kEmptySplit, "training needs at least 2 cases");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto split_rng = make_rng(cfg.seed, RngStream::kSplit);
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  const TrainingData data = build_training_data(ds.cases, train_idx, val_idx, cfg, cfg.seed);

  const fs::path out = cfg.output_dir;
  ensure_dir(out);
  TrainSummary summary;
  summary.train_cases = ids_of(ds.cases, train_idx);
  summary.val_cases = ids_of(ds.cases, val_idx);
  write_text(out / files::kSplit,
             ordered_json{{"train", summary.train_cases}, {"val", summary.val_cases}}.dump(1) + "\n");

  auto epoch_log = open_out(out / files::kEpochLog);
  auto event_log = open_out(out / files::kEventLog);
  TrainingObserver observer;
  observer.on_epoch = [&](const EpochRecord& r) {
    epoch_log << epoch_record(r).dump() << '\n' << std::flush;
    if (progress) {
      *progress << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss
                << " dice " << r.val_dice << " blocks " << r.block_count << '\n';
    }
  };
  observer.on_insertion = [&](const InsertionEvent& e) {
    event_log << insertion_record(e).dump() << '\n' << std::flush;
    if (progress) *progress << "  inserted block " << e.new_block_index << " at epoch " << e.epoch << '\n';
  };

  const ProgressiveResult result =
      run_progressive_training(data, cfg.policy(), cfg.loss(), cfg.trainer(), cfg.seed, observer);

  const int last_epoch = static_cast<int>(result.history.epochs());
  save_checkpoint(out / files::kFinalCheckpoint,
                  Checkpoint{result.final_net, cfg.patch_radius, last_epoch,
                             result.records.back().val_dice});
  save_checkpoint(out / files::kBestCheckpoint,
                  Checkpoint{result.best_net, cfg.patch_radius, result.best_epoch,
                             result.best_val_dice});

  std::vector<EvalCase> train_cases;
  for (std::size_t i : train_idx) train_cases.push_back(make_eval_case(ds.cases[i], cfg.patch_radius));
  const EvalSummary train_eval = evaluate_cases(result.final_net, train_cases);
  const EvalSummary val_eval = evaluate_cases(result.final_net, data.val_cases);

  summary.epochs_run = last_epoch;
  summary.early_stopped = result.early_stopped;
  summary.insertions = static_cast<int>(result.events.size());
  summary.final_block_count = static_cast<int>(result.final_net.block_count());
  summary.final_parameter_count = count_parameters(result.final_net);
  summary.best_epoch = result.best_epoch;
  summary.best_val_dice = result.best_val_dice;
  summary.final_val_dice = val_eval.mean_dice;
  summary.final_val_accuracy = val_eval.accuracy;
  summary.final_train_dice = train_eval.mean_dice;
  summary.final_train_accuracy = train_eval.accuracy;

  ordered_json doc{{"epochs_run", summary.epochs_run},
                   {"early_stopped", summary.early_stopped},
                   {"insertions", summary.insertions},
                   {"final_block_count", summary.final_block_count},
                   {"final_parameter_count", summary.final_parameter_count},
                   {"best_epoch", summary.best_epoch},
                   {"best_val_dice", summary.best_val_dice},
                   {"final_val_dice", summary.final_val_dice},
                   {"final_val_accuracy", summary.final_val_accuracy},
                   {"final_train_dice", summary.final_train_dice},
                   {"final_train_accuracy", summary.final_train_accuracy}};
  write_text(out / files::kSummary, doc.dump(1) + "\n");
  return summary;
}

CrossvalReport cmd_crossval(const RunConfig& cfg, const fs::path& dataset_dir, int k,
                            std::ostream* progress) {
  cfg.validate();
  if (k < 2) throw Error(ErrorCode::kTooFewCases, "crossval needs k >= 2");
  const Dataset ds = load_dataset(dataset_dir);
  const auto folds = kfold_split(ds.cases.size(), k, cfg.seed);

  const fs::path out = cfg.output_dir;
  ensure_dir(out);
  CrossvalReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::uint64_t fold_seed = cfg.seed + f;
    const TrainingData data = build_training_data(ds.cases, folds[f].train, folds[f].val, cfg, fold_seed);
    const ProgressiveResult result =
        run_progressive_training(data, cfg.policy(), cfg.loss(), cfg.trainer(), fold_seed);
    const EvalSummary eval = evaluate_cases(result.best_net, data.val_cases);

    FoldResult row;
    row.fold = static_cast<int>(f) + 1;
    row.val_case_ids = ids_of(ds.cases, folds[f].val);
    row.accuracy = eval.accuracy;
    row.dice = eval.mean_dice;
    row.miou = eval.mean_miou;
    if (eval.hd_cases > 0) row.hd = eval.mean_hd;
    row.blocks = static_cast<int>(result.best_net.block_count());
    row.insertions = static_cast<int>(result.events.size());
    if (progress) {
      *progress << "fold " << row.fold << " accuracy " << row.accuracy << " dice " << row.dice
                << '\n';
    }
    report.folds.push_back(std::move(row));
  }

  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : report.folds) {
      if (auto x = getter(r)) v.push_back(*x);
    }
    return moments(v);
  };
  const auto acc = collect([](const FoldResult& r) { return std::optional<double>(r.accuracy); });
  const auto dice_m = collect([](const FoldResult& r) { return std::optional<double>(r.dice); });
  const auto miou_m = collect([](const FoldResult& r) { return std::optional<double>(r.miou); });
  const auto hd_m = collect([](const FoldResult& r) { return r.hd; });
  report.mean = {acc->mean, dice_m->mean, miou_m->mean,
                 hd_m ? std::optional<double>(hd_m->mean) : std::nullopt};
  report.stddev = {acc->stddev, dice_m->stddev, miou_m->stddev,
                   hd_m ? std::optional<double>(hd_m->stddev) : std::nullopt};

  auto log = open_out(out / files::kCrossvalReport);
  for (const auto& r : report.folds) {
    log << ordered_json{{"fold", r.fold},
                        {"val_case_ids", r.val_case_ids},
                        {"accuracy", r.accuracy},
                        {"dice", r.dice},
                        {"miou", r.miou},
                        {"hd", optional_number(r.hd)},
                        {"blocks", r.blocks},
                        {"insertions", r.insertions}}
               .dump()
        << '\n';
  }
  for (const auto& [name, agg] : {std::pair{"mean", report.mean}, std::pair{"std", report.stddev}}) {
    log << ordered_json{{"aggregate", name},
                        {"accuracy", agg.accuracy},
                        {"dice", agg.dice},
                        {"miou", agg.miou},
                        {"hd", optional_number(agg.hd)}}
               .dump()
        << '\n';
  }
  return report;
}

EvalSummary cmd_eval(const fs::path& checkpoint, const fs::path& dataset_dir,
                     const fs::path& output_dir, const std::string& split,
                     const fs::path& split_file) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (feature_length(ckpt.patch_radius) != ckpt.net.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "checkpoint patch radius disagrees with input_dim");
  }
  const Dataset ds = load_dataset(dataset_dir);

  std::vector<const LabeledCase*> selected;
  if (split.empty()) {
    for (const auto& c : ds.cases) selected.push_back(&c);
  } else {
    if (split != "train" && split != "val") {
      throw Error(ErrorCode::kConfigError, "split must be 'train' or 'val'");
    }
    const fs::path path = split_file.empty() ? checkpoint.parent_path() / files::kSplit : split_file;
    const json doc = read_json(path);
    if (!doc.contains(split)) throw Error(ErrorCode::kParseError, path.string() + " lacks " + split);
    for (const auto& id : doc.at(split)) {
      const auto it = std::find_if(ds.cases.begin(), ds.cases.end(),
                                   [&](const LabeledCase& c) { return c.case_id == id.get<std::string>(); });
      if (it == ds.cases.end()) {
        throw Error(ErrorCode::kParseError, "split names unknown case " + id.get<std::string>());
      }
      selected.push_back(&*it);
    }
  }

  std::vector<EvalCase> cases;
  for (const LabeledCase* c : selected) cases.push_back(make_eval_case(*c, ckpt.patch_radius));
  const EvalSummary summary = evaluate_cases(ckpt.net, cases);

  ensure_dir(output_dir);
  auto log = open_out(output_dir / files::kEvalReport);
  for (const auto& m : summary.cases) log << metrics_record(m).dump() << '\n';
  log << ordered_json{{"aggregate", "mean"},
                      {"dice", summary.dice_cases ? ordered_json(summary.mean_dice) : ordered_json(nullptr)},
                      {"miou", summary.dice_cases ? ordered_json(summary.mean_miou) : ordered_json(nullptr)},
                      {"hd", summary.hd_cases ? ordered_json(summary.mean_hd) : ordered_json(nullptr)},
                      {"accuracy", summary.accuracy}}
             .dump()
      << '\n';
  return summary;
}

GradcheckAudit cmd_gradcheck(const RunConfig& cfg, bool inject_fault) {
  GradcheckAudit audit;
  const LossConfig loss{};
  constexpr double kLambda = 1e-3;
  int cell_index = 0;
  for (int grid : {3, 5}) {
    for (int degree : {1, 2, 3}) {
      for (int blocks : {1, 3}) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(cell_index++);
        auto rng = make_rng(seed, RngStream::kInit);
        NetworkShape shape;
        shape.input_dim = 4;
        shape.hidden_width = 4;
        shape.init_scale = 0.4;
        const HyperParams hp{0, grid, degree, 1e-2, kLambda};
        ProKanNetwork net = make_network(shape, hp, rng);
        std::uniform_real_distribution<double> coef(-0.3, 0.3);
        while (static_cast<int>(net.block_count()) < blocks) {
          net = insert_block(net, hp, blocks);
          // The new block sits just before the head; give it non-zero weights
          // so its gradients are exercised.
          auto layers = net.layers();
          for (std::size_t l = layers.size() - 3; l + 1 < layers.size(); ++l) {
            for (double& c : layers[l]->coefficients()) c = coef(rng);
          }
        }

        SampleSet samples;
        std::uniform_real_distribution<double> input(-0.95, 0.95);
        for (int i = 0; i < 6; ++i) {
          std::vector<double> x(4);
          for (double& v : x) v = input(rng);
          samples.append(x, static_cast<double>(i % 2));
        }

        GradientFn gradient;
        if (inject_fault) {
          gradient = [](const ProKanNetwork& n, const SampleSet& s, const LossConfig& l, double lambda) {
            GradientSet g = total_loss_gradient(n, s, l, lambda);
            g.layers[0][0] += 1e-3 + 0.1 * std::abs(g.layers[0][0]);
            return g;
          };
        }
        GradcheckCell cell;
        cell.grid_size = grid;
        cell.degree = degree;
        cell.blocks = blocks;
        cell.parameters = count_parameters(net);
        cell.report = gradient_check(net, samples, loss, kLambda, kGradcheckStep,
                                     kGradcheckTolerance, seed, gradient);
        audit.worst_error = std::max(audit.worst_error, cell.report.max_relative_error);
        audit.passed = audit.passed && cell.report.passed;
        audit.cells.push_back(cell);
      }
    }
  }
  return audit;
}

}  // namespace prokan
