// prokan: synth | train | crossval | eval | gradcheck
//
// Exit status: 0 success, 1 config/validation error, 2 runtime or data error
// (including a failed gradient audit).

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "prokan/commands.hpp"
#include "prokan/config.hpp"
#include "prokan/error.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

void print_crossval(const prokan::CrossvalReport& r) {
  std::cout << "fold  accuracy  dice    miou    hd\n" << std::fixed << std::setprecision(4);
  for (const auto& f : r.folds) {
    std::cout << std::setw(4) << f.fold << "  " << f.accuracy << "    " << f.dice << "  " << f.miou
              << "  " << fmt_opt(f.hd) << '\n';
  }
  std::cout << "mean  " << r.mean.accuracy << "    " << r.mean.dice << "  " << r.mean.miou << "  "
            << fmt_opt(r.mean.hd) << '\n';
  std::cout << "std   " << r.stddev.accuracy << "    " << r.stddev.dice << "  " << r.stddev.miou
            << "  " << fmt_opt(r.stddev.hd) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proKAN: progressive spline KANs for volumetric segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat JSON config file")->check(CLI::ExistingFile);

  // Every config key is also a flag; flags win over the config file.
  std::map<std::string, std::string> overrides;
  for (const auto& key : prokan::config_keys()) {
    const std::string name(key.name);
    app.add_option_function<std::string>(
           "--" + name, [&overrides, name](const std::string& v) { overrides[name] = v; },
           std::string(key.help))
        ->group("Config overrides");
  }

  std::string dataset;
  int k = 0;
  std::string checkpoint;
  std::string split;
  std::string split_file;
  bool inject_fault = false;
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress per-epoch progress");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset into output_dir");
  auto* train = app.add_subcommand("train", "progressive training on a dataset");
  train->add_option("--dataset", dataset, "dataset directory")->required();
  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation");
  crossval->add_option("--dataset", dataset, "dataset directory")->required();
  crossval->add_option("--k", k, "number of folds (default: folds config key)");
  auto* eval = app.add_subcommand("eval", "dense inference + metrics with a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "dataset directory")->required();
  eval->add_option("--split", split, "restrict to the train or val cases of a split")
      ->check(CLI::IsMember({"train", "val"}));
  eval->add_option("--split-file", split_file, "split.json (default: next to the checkpoint)");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    prokan::RunConfig cfg = config_path.empty() ? prokan::RunConfig{} : prokan::load_config(config_path);
    for (const auto& [key, value] : overrides) prokan::set_config_value(cfg, key, value);
    prokan::apply_environment(cfg);
    cfg.validate();
    std::ostream* progress = quiet ? nullptr : &std::cerr;

    if (*synth) {
      prokan::cmd_synth(cfg);
      std::cout << "wrote " << cfg.n_cases << " cases to " << cfg.output_dir << '\n';
    } else if (*train) {
      const auto s = prokan::cmd_train(cfg, dataset, progress);
      std::cout << "epochs " << s.epochs_run << (s.early_stopped ? " (early stop)" : "")
                << ", insertions " << s.insertions << ", blocks " << s.final_block_count
                << ", parameters " << s.final_parameter_count << '\n'
                << "best val dice " << s.best_val_dice << " at epoch " << s.best_epoch << '\n'
                << "final val dice " << s.final_val_dice << ", final train dice "
                << s.final_train_dice << '\n';
    } else if (*crossval) {
      print_crossval(prokan::cmd_crossval(cfg, dataset, k > 0 ? k : cfg.folds, progress));
    } else if (*eval) {
      const auto s = prokan::cmd_eval(checkpoint, dataset, cfg.output_dir, split, split_file);
      for (const auto& c : s.cases) {
        std::cout << c.case_id << "  dice " << fmt_opt(c.dice) << "  miou " << fmt_opt(c.miou)
                  << "  hd " << fmt_opt(c.hd) << "  acc " << c.accuracy;
        if (!c.error.empty()) std::cout << "  (" << c.error << ")";
        std::cout << '\n';
      }
      std::cout << "mean dice " << s.mean_dice << ", mean miou " << s.mean_miou << ", accuracy "
                << s.accuracy << '\n';
    } else if (*gradcheck) {
      const auto audit = prokan::cmd_gradcheck(cfg, inject_fault);
      std::cout << "G  k  blocks  params  max_rel_error  max_abs_diff  status\n";
      for (const auto& c : audit.cells) {
        std::cout << c.grid_size << "  " << c.degree << "  " << c.blocks << "       "
                  << c.parameters << "  " << std::scientific << std::setprecision(3)
                  << c.report.max_relative_error << "      " << c.report.max_abs_difference
                  << std::defaultfloat << "     "
                  << (c.report.passed ? "ok" : "FAIL") << '\n';
      }
      std::cout << "worst relative error " << std::scientific << audit.worst_error << '\n';
      if (!audit.passed) {
        std::cerr << "gradient audit failed\n";
        return kExitRuntime;
      }
    }
    return 0;
  } catch (const prokan::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == prokan::ErrorCode::kConfigError ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
