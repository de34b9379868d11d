#include "prokan/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <variant>

#include <nlohmann/json.hpp>

#include "prokan/error.hpp"

namespace prokan {

namespace {

using nlohmann::json;
using FieldPtr = std::variant<int RunConfig::*, double RunConfig::*, std::uint64_t RunConfig::*,
                              std::string RunConfig::*>;

struct Field {
  ConfigKey key;
  FieldPtr ptr;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      {{"seed", "run seed (PROKAN_SEED overrides)"}, &RunConfig::seed},
      {{"output_dir", "directory for all artifacts"}, &RunConfig::output_dir},
      {{"patch_radius", "voxel patch radius r; features are (2r+1)^3"}, &RunConfig::patch_radius},
      {{"n_cases", "number of synthetic cases"}, &RunConfig::n_cases},
      {{"dim_x", "volume size along x"}, &RunConfig::dim_x},
      {{"dim_y", "volume size along y"}, &RunConfig::dim_y},
      {{"dim_z", "volume size along z"}, &RunConfig::dim_z},
      {{"spacing_x", "voxel spacing along x (mm)"}, &RunConfig::spacing_x},
      {{"spacing_y", "voxel spacing along y (mm)"}, &RunConfig::spacing_y},
      {{"spacing_z", "voxel spacing along z (mm)"}, &RunConfig::spacing_z},
      {{"blob_count_min", "fewest lesion blobs per case"}, &RunConfig::blob_count_min},
      {{"blob_count_max", "most lesion blobs per case"}, &RunConfig::blob_count_max},
      {{"radius_min", "smallest blob semi-axis (voxels)"}, &RunConfig::radius_min},
      {{"radius_max", "largest blob semi-axis (voxels)"}, &RunConfig::radius_max},
      {{"noise_sigma", "additive Gaussian noise sigma"}, &RunConfig::noise_sigma},
      {{"contrast", "blob intensity over background"}, &RunConfig::contrast},
      {{"hidden_width", "KAN hidden width"}, &RunConfig::hidden_width},
      {{"init_scale", "initial coefficients ~ U[-s, s]"}, &RunConfig::init_scale},
      {{"spline_domain_min", "spline input domain lower end"}, &RunConfig::spline_domain_min},
      {{"spline_domain_max", "spline input domain upper end"}, &RunConfig::spline_domain_max},
      {{"bce_weight", "weight of binary cross-entropy"}, &RunConfig::bce_weight},
      {{"dice_weight", "weight of soft Dice loss"}, &RunConfig::dice_weight},
      {{"smooth_eps", "soft Dice smoothing"}, &RunConfig::smooth_eps},
      {{"momentum", "SGD momentum in [0, 1)"}, &RunConfig::momentum},
      {{"batch_size", "samples per SGD step"}, &RunConfig::batch_size},
      {{"samples_per_class", "max foreground (and background) voxels sampled per case"},
       &RunConfig::samples_per_class},
      {{"val_fraction", "fraction of cases held out by train"}, &RunConfig::val_fraction},
      {{"folds", "default k for crossval"}, &RunConfig::folds},
      {{"epsilon", "validation plateau threshold"}, &RunConfig::epsilon},
      {{"t_plateau", "plateau window (epochs)"}, &RunConfig::t_plateau},
      {{"decline_window", "accuracy-decline window (epochs)"}, &RunConfig::decline_window},
      {{"cooldown", "minimum epochs between insertions"}, &RunConfig::cooldown},
      {{"max_blocks", "maximum number of KAN blocks"}, &RunConfig::max_blocks},
      {{"grid_size", "initial grid size G0"}, &RunConfig::grid_size},
      {{"degree", "initial spline degree k0"}, &RunConfig::degree},
      {{"learning_rate", "initial learning rate eta0"}, &RunConfig::learning_rate},
      {{"l2_lambda", "initial L2 coefficient lambda0"}, &RunConfig::l2_lambda},
      {{"delta_grid", "grid size increment per block"}, &RunConfig::delta_grid},
      {{"delta_degree", "degree increment per block"}, &RunConfig::delta_degree},
      {{"lr_decay", "learning-rate decay alpha"}, &RunConfig::lr_decay},
      {{"delta_lambda", "L2 increment per block"}, &RunConfig::delta_lambda},
      {{"max_epochs", "epoch budget"}, &RunConfig::max_epochs},
  };
  return table;
}

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key.name == key) return f;
  }
  throw Error(ErrorCode::kConfigError, "unknown config key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kConfigError,
                "bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return value;
}

void set_from_json(RunConfig& cfg, const Field& f, const json& v) {
  const std::string name(f.key.name);
  auto bad = [&](const char* want) {
    throw Error(ErrorCode::kConfigError, "key '" + name + "' expects " + want);
  };
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (!v.is_string()) bad("a string");
          cfg.*member = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number()) bad("a number");
          cfg.*member = v.get<double>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (!v.is_number_unsigned()) bad("a non-negative integer");
          cfg.*member = v.get<std::uint64_t>();
        } else {
          if (!v.is_number_integer()) bad("an integer");
          const auto wide = v.get<std::int64_t>();
          if (wide < INT32_MIN || wide > INT32_MAX) bad("a 32-bit integer");
          cfg.*member = static_cast<int>(wide);
        }
      },
      f.ptr);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::kConfigError, message);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kConfigError, "config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) set_from_json(cfg, find_field(key), value);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field& f = find_field(key);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          cfg.*member = std::string(value);
        } else {
          cfg.*member = parse_number<T>(key, value);
        }
      },
      f.ptr);
}

void apply_environment(RunConfig& cfg) {
  if (const char* env = std::getenv("PROKAN_SEED"); env != nullptr && *env != '\0') {
    cfg.seed = parse_number<std::uint64_t>("PROKAN_SEED", env);
  }
}

void RunConfig::validate() const {
  require(!output_dir.empty(), "output_dir must not be empty");
  require(patch_radius >= 0 && patch_radius <= 4, "patch_radius must be in [0, 4]");
  require(val_fraction > 0.0 && val_fraction < 1.0, "val_fraction must be in (0, 1)");
  require(folds >= 2, "folds must be >= 2");
  require(samples_per_class >= 1, "samples_per_class must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(hidden_width >= 1, "hidden_width must be >= 1");
  require(init_scale >= 0.0 && std::isfinite(init_scale), "init_scale must be >= 0");
  require(spline_domain_min < spline_domain_max, "spline_domain_min must be < spline_domain_max");
  loss().validate();
  policy().validate();
  try {
    synth_params().validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
}

SynthParams RunConfig::synth_params() const {
  SynthParams p;
  p.seed = seed;
  p.n_cases = n_cases;
  p.dims = Dims{dim_x, dim_y, dim_z};
  p.spacing = Spacing{spacing_x, spacing_y, spacing_z};
  p.blob_count_min = blob_count_min;
  p.blob_count_max = blob_count_max;
  p.radius_min = radius_min;
  p.radius_max = radius_max;
  p.noise_sigma = noise_sigma;
  p.contrast = contrast;
  return p;
}

StackingPolicy RunConfig::policy() const {
  StackingPolicy p;
  p.epsilon = epsilon;
  p.t_plateau = t_plateau;
  p.decline_window = decline_window;
  p.cooldown = cooldown;
  p.max_blocks = max_blocks;
  p.base = HyperParams{0, grid_size, degree, learning_rate, l2_lambda};
  p.delta_grid = delta_grid;
  p.delta_degree = delta_degree;
  p.lr_decay = lr_decay;
  p.delta_lambda = delta_lambda;
  p.max_epochs = max_epochs;
  return p;
}

LossConfig RunConfig::loss() const { return LossConfig{bce_weight, dice_weight, smooth_eps}; }

TrainerSettings RunConfig::trainer() const {
  TrainerSettings t;
  t.shape.input_dim = feature_length(patch_radius);
  t.shape.hidden_width = hidden_width;
  t.shape.domain_min = spline_domain_min;
  t.shape.domain_max = spline_domain_max;
  t.shape.init_scale = init_scale;
  t.momentum = momentum;
  t.batch_size = batch_size;
  return t;
}

std::string RunConfig::to_json() const {
  json doc = json::object();
  for (const auto& f : fields()) {
    std::visit([&](auto member) { doc[std::string(f.key.name)] = this->*member; }, f.ptr);
  }
  return doc.dump(1) + "\n";
}

}  // namespace prokan
