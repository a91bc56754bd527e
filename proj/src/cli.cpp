// Copyright 2026 The fseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "fseg/ablation.hpp"
#include "fseg/checkpoint.hpp"
#include "fseg/diagnostics.hpp"
#include "fseg/error.hpp"
#include "fseg/metrics.hpp"
#include "fseg/overlay.hpp"
#include "fseg/pgm.hpp"
#include "fseg/stats.hpp"
#include "fseg/training.hpp"

namespace fs = std::filesystem;

namespace fseg {

std::vector<Sample> load_dataset(const Config& config, const std::string& manifest) {
  const EncoderConfig& e = config.model.encoder;
  if (manifest.empty()) {
    return generate_synthetic(config.data.num_patients, config.data.slices_per_patient,
                              e.image_height, e.image_width, config.data.seed, e.in_channels);
  }
  std::vector<Sample> samples = load_manifest(manifest, e.in_channels);
  for (const Sample& s : samples) {
    if (s.image.dim(1) != e.image_height || s.image.dim(2) != e.image_width) {
      throw ShapeError(manifest + ": patient " + s.patient_id + " image is " +
                       shape_str(s.image.shape()) + ", configuration expects " +
                       std::to_string(e.image_height) + "x" + std::to_string(e.image_width));
    }
  }
  return samples;
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

struct ConfigOptions {
  std::string path;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", path, "configuration file (key = value lines)");
    app->add_option("--set", sets, "override, key=value (repeatable)");
  }

  Config load() const {
    Config base = default_config();
    if (!path.empty()) {
      // An unreadable config file is a usage problem, not a data problem.
      try {
        base = parse_config(path);
      } catch (const IoError& e) {
        throw ConfigError(e.what());
      }
    }
    KeyValues kv;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      auto trim = [](std::string t) {
        t.erase(0, t.find_first_not_of(" \t"));
        t.erase(t.find_last_not_of(" \t") + 1);
        return t;
      };
      kv.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    return apply_overrides(std::move(base), kv);
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

const std::vector<Sample>& pick_split(const DatasetSplits& splits, const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

void print_summary(std::ostream& out, const std::string& label, const MetricSummary& s) {
  out << label << " mean Dice: " << fmt("%.4f", s.mean_dice) << " +/- "
      << fmt("%.4f", s.std_dice) << "  mean IoU: " << fmt("%.4f", s.mean_iou) << " +/- "
      << fmt("%.4f", s.std_iou) << "  (" << s.count << " patients"
      << (s.std_defined ? "" : ", std undefined") << ")\n";
}

int cmd_synth(const ConfigOptions& co, const std::string& out_dir, std::ostream& out) {
  const Config config = co.load();
  const auto samples = load_dataset(config, {});
  const std::string manifest = write_dataset(samples, out_dir);
  out << "wrote " << samples.size() << " slices from " << config.data.num_patients
      << " patients to " << manifest << "\n";
  return kExitOk;
}

int cmd_train(const ConfigOptions& co, const std::string& data, const std::string& out_dir,
              std::ostream& out) {
  const Config config = co.load();
  const DatasetSplits splits = split_patients(load_dataset(config, data), config.data.split);
  out << "split: " << patient_ids(splits.train).size() << " train / "
      << patient_ids(splits.val).size() << " val / " << patient_ids(splits.test).size()
      << " test patients\n";
  SegmentationModel model(config.model, config.train.seed);
  if (!config.encoder_weights.empty()) model.encoder().load_weights(config.encoder_weights);

  const TrainResult result = train(model, splits, config.train, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << "  loss " << fmt("%.5f", r.train_loss) << "  val Dice "
        << fmt("%.4f", r.val_dice) << "  lr " << fmt("%.3e", r.lr) << "\n";
    out.flush();
  });
  ensure_dir(out_dir);
  const std::string ckpt = (fs::path(out_dir) / "model.fseg").string();
  const std::string hist = (fs::path(out_dir) / "history.csv").string();
  save_checkpoint(model, config, {result.best_epoch, result.best_val_dice, config.train.seed}, ckpt);
  std::ofstream h(hist, std::ios::binary);
  if (!h) throw IoError("cannot write '" + hist + "'");
  write_history_csv(result.history, h);
  out << "best epoch " << result.best_epoch << "  val Dice " << fmt("%.4f", result.best_val_dice)
      << "\n";
  print_summary(out, "test", aggregate(evaluate_cases(model, splits.test)));
  out << "checkpoint " << ckpt << "\nhistory " << hist << "\n";
  return kExitOk;
}

std::vector<CaseMetrics> eval_checkpoint(const Checkpoint& ck, const std::string& data,
                                         const std::string& split) {
  const DatasetSplits splits =
      split_patients(load_dataset(ck.config, data), ck.config.data.split);
  return per_patient(evaluate_cases(*ck.model, pick_split(splits, split)));
}

int cmd_eval(const std::string& checkpoint, const std::string& compare, const std::string& data,
             const std::string& split, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto cases = eval_checkpoint(ck, data, split);
  out << "patient,dice,iou\n";
  for (const auto& c : cases) {
    out << c.patient_id << ',' << fmt("%.6f", c.dice) << ',' << fmt("%.6f", c.iou) << '\n';
  }
  print_summary(out, split, aggregate(cases));
  if (!compare.empty()) {
    const Checkpoint other = load_checkpoint(compare);
    const auto other_cases = eval_checkpoint(other, data, split);
    print_summary(out, split + " (compare)", aggregate(other_cases));
    std::vector<double> a, b;
    for (const auto& c : cases) a.push_back(c.dice);
    for (const auto& c : other_cases) b.push_back(c.dice);
    const WelchResult w = welch_t_test(a, b);
    out << "welch t " << fmt("%.6f", w.t) << "  df " << fmt("%.4f", w.df) << "  p "
        << fmt("%.6g", w.p) << "\n";
  }
  return kExitOk;
}

int cmd_ablate(const ConfigOptions& co, const std::string& data, std::size_t num_seeds,
               const std::vector<std::string>& presets, bool learned, const std::string& csv,
               std::ostream& out) {
  const Config config = co.load();
  const DatasetSplits splits = split_patients(load_dataset(config, data), config.data.split);
  auto grid = ablation_grid(presets);
  if (learned) {
    for (const auto& p : presets) {
      grid.push_back({BlockSelection::learned_topk, true, p});
      grid.push_back({BlockSelection::learned_topk, false, p});
    }
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(config.train.seed + i);
  const AblationTable table =
      run_ablation(grid, splits, config.model, config.train, seeds,
                   [&](const AblationConfig& c, std::uint64_t seed, double d) {
                     out << c.label() << " seed " << seed << " test Dice " << fmt("%.4f", d)
                         << "\n";
                     out.flush();
                   });
  out << render_ablation_table(table);
  if (!csv.empty()) {
    std::ofstream f(csv, std::ios::binary);
    if (!f) throw IoError("cannot write '" + csv + "'");
    write_ablation_csv(table, f);
    out << "results " << csv << "\n";
  } else {
    write_ablation_csv(table, out);
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  const auto checks = run_gradcheck_suite(seed);
  out << render_gradcheck_table(checks);
  const bool ok = gradcheck_passed(checks);
  out << (ok ? "all ops within " : "gradient check FAILED, tolerance ")
      << fmt("%.0e", kGradCheckTolerance) << "\n";
  return ok ? kExitOk : kExitNumeric;
}

int cmd_overlay(const std::string& checkpoint, const std::string& data, const std::string& split,
                const std::string& out_dir, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const DatasetSplits splits =
      split_patients(load_dataset(ck.config, data), ck.config.data.split);
  const auto& samples = pick_split(splits, split);
  ensure_dir(out_dir);
  NoGradGuard guard;
  std::map<std::string, std::size_t> slice_of;
  for (const Sample& s : samples) {
    Tensor image = s.image.reshaped({1, s.image.dim(0), s.image.dim(1), s.image.dim(2)});
    const Tensor logits = ck.model->forward(image).decoder.logits.value();
    const Tensor pred = threshold_logits(logits).reshaped(s.mask.shape());
    const std::size_t slice = slice_of[s.patient_id]++;
    const std::string path =
        (fs::path(out_dir) / (s.patient_id + "_" + std::to_string(slice) + ".pgm")).string();
    const double d = emit_overlay(s.image, s.mask, pred, path);
    out << path << "  Dice " << fmt("%.4f", d) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fseg: frozen-encoder block-fusion segmentation"};
  app.require_subcommand(1);

  ConfigOptions synth_co, train_co, ablate_co;
  std::string out_dir = "data", data, checkpoint, compare, split = "test", csv;
  std::uint64_t seed = 0;
  std::size_t num_seeds = 5;
  std::vector<std::string> presets{"base"};
  bool learned = false;

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset and manifest");
  synth_co.attach(synth);
  synth->add_option("-o,--out", out_dir, "output directory");

  auto* train_cmd = app.add_subcommand("train", "train a model; writes checkpoint and history");
  train_co.attach(train_cmd);
  train_cmd->add_option("-d,--data", data, "manifest (default: synthetic data from config)");
  train_cmd->add_option("-o,--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "per-patient Dice/IoU of a checkpoint");
  eval->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--compare", compare, "second checkpoint for a Welch t-test");
  eval->add_option("-d,--data", data, "manifest (default: synthetic data from checkpoint)");
  eval->add_option("-s,--split", split, "train, val or test");

  auto* ablate = app.add_subcommand("ablate", "block-selection x spatial-integration grid");
  ablate_co.attach(ablate);
  ablate->add_option("-d,--data", data, "manifest (default: synthetic data from config)");
  ablate->add_option("--seeds", num_seeds, "number of seeds, starting at train.seed");
  ablate->add_option("--presets", presets, "encoder presets (base, large, giant)");
  ablate->add_flag("--learned", learned, "also run learned top-k rows");
  ablate->add_option("-o,--out", csv, "results CSV (default: stdout)");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op");
  grad->add_option("--seed", seed, "input seed");

  auto* overlay = app.add_subcommand("overlay", "image | gt | prediction triptychs");
  overlay->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  overlay->add_option("-d,--data", data, "manifest (default: synthetic data from checkpoint)");
  overlay->add_option("-s,--split", split, "train, val or test");
  overlay->add_option("-o,--out", out_dir, "output directory")->required();

  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    const auto subs = app.get_subcommands([](CLI::App*) { return true; });
    const bool known = std::any_of(subs.begin(), subs.end(),
                                   [&](const CLI::App* a) { return a->get_name() == args[0]; });
    if (!known) {
      err << "error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
      return kExitUsage;
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_co, out_dir, out);
    if (*train_cmd) return cmd_train(train_co, data, out_dir, out);
    if (*eval) return cmd_eval(checkpoint, compare, data, split, out);
    if (*ablate) return cmd_ablate(ablate_co, data, num_seeds, presets, learned, csv, out);
    if (*grad) return cmd_gradcheck(seed, out);
    if (*overlay) return cmd_overlay(checkpoint, data, split, out_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace fseg
