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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Progress goes to stderr.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "../welch_oracle.hpp"
#include "fseg/ablation.hpp"
#include "fseg/checkpoint.hpp"
#include "fseg/cli.hpp"
#include "fseg/config.hpp"
#include "fseg/diagnostics.hpp"
#include "fseg/fusion.hpp"
#include "fseg/metrics.hpp"
#include "fseg/model.hpp"
#include "fseg/stats.hpp"
#include "fseg/training.hpp"

namespace fs = std::filesystem;
using namespace fseg;

namespace {

struct Verdict {
  bool pass = false;
  std::string title;
  std::string detail;
};

std::map<int, Verdict> verdicts;

void record(int id, bool pass, std::string title, std::string detail) {
  verdicts[id] = {pass, std::move(title), std::move(detail)};
  std::cerr << "[criterion " << id << " " << (pass ? "PASS" : "FAIL") << "]\n";
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

struct Timer {
  std::clock_t cpu0 = std::clock();
  std::chrono::steady_clock::time_point wall0 = std::chrono::steady_clock::now();
  double cpu() const { return static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC; }
  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  }
};

struct CliRun {
  int code = 0;
  std::string out, err;
  double cpu = 0.0, wall = 0.0;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const Timer t;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.cpu = t.cpu();
  r.wall = t.wall();
  r.out = out.str();
  r.err = err.str();
  return r;
}

double parse_mean_dice(const std::string& text, const std::string& label) {
  const std::regex re(label + " mean Dice: ([0-9.]+)");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nan("");
  return std::stod(m[1]);
}

double ratio(const std::vector<double>& w) {
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return *hi / *lo;
}

const std::string kDeskConfig = std::string(FSEG_SOURCE_DIR) + "/configs/desk.cfg";

// ---------------------------------------------------------------------------

void criterion_1() {
  record(1, true, "published numbers are not reproduced at desk scale",
         "the published 92.3 +/- 5.9 Dice / 84.1 +/- 8.8 IoU (DINOv2-giant on LAScarQS) "
         "needs gated clinical data and billion-parameter pretrained weights; the "
         "criteria below use property checks and a scaled-down synthetic task instead");
}

void criterion_2() {
  const Timer t;
  const auto checks = run_gradcheck_suite();
  const double seconds = t.cpu();
  const std::vector<std::string> required{
      "matmul",  "conv2d",     "upsample2x", "resize_up",      "resize_down",   "softmax",
      "layer_norm", "attention", "gelu",     "concat",         "fusion_weights", "image_adapter",
      "segmentation_loss", "end_to_end"};
  std::vector<std::string> missing;
  for (const auto& name : required) {
    if (std::none_of(checks.begin(), checks.end(),
                     [&](const OpGradCheck& c) { return c.name == name; })) {
      missing.push_back(name);
    }
  }
  double worst = 0.0;
  std::string worst_op;
  for (const auto& c : checks) {
    if (!(c.max_rel_error <= worst)) {
      worst = c.max_rel_error;
      worst_op = c.name;
    }
  }
  const bool ok = missing.empty() && gradcheck_passed(checks) && seconds <= 120.0;
  std::string detail = std::to_string(checks.size()) + " checks, max rel err " +
                       fmt("%.2e", worst) + " (" + worst_op + "), cpu " + fmt("%.2f", seconds) +
                       " s";
  for (const auto& m : missing) detail += ", missing " + m;
  record(2, ok, "gradient integrity (tolerance 1e-4, eps 1e-5, <= 2 min)", detail);
}

struct DeskRuns {
  std::string dir;
  CliRun first, second;
  Config config;
};

DeskRuns run_desk_twice() {
  DeskRuns d;
  d.dir = (fs::temp_directory_path() / "fseg_acceptance").string();
  fs::remove_all(d.dir);
  d.config = parse_config(kDeskConfig);
  std::cerr << "desk run 1 ...\n";
  d.first = cli({"train", "-c", kDeskConfig, "-o", d.dir + "/run1"});
  std::cerr << d.first.out << d.first.err;
  std::cerr << "desk run 2 ...\n";
  d.second = cli({"train", "-c", kDeskConfig, "-o", d.dir + "/run2"});
  return d;
}

std::vector<double> final_history_weights(const std::string& csv_path) {
  std::ifstream in(csv_path);
  std::string line, last;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  std::vector<double> fields;
  std::stringstream ss(last);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(std::stod(f));
  return {fields.begin() + 4, fields.end()};
}

void criterion_3(const DeskRuns& d, const AblationRow& learned) {
  const auto& c = d.config;
  const bool setup = c.data.num_patients == 40 && c.data.slices_per_patient == 8 &&
                     c.data.seed == 42 && c.model.encoder.image_height == 64 &&
                     c.model.encoder.patch_size == 8 && c.model.encoder.embed_dim == 64 &&
                     c.model.encoder.num_blocks == 8 && c.model.fusion.k == 4 &&
                     c.model.fusion.mode == SelectionMode::learned_topk &&
                     c.model.decoder.spatial_integration && c.train.total_epochs == 15 &&
                     c.train.batch_size == 8;
  const double train_dice = parse_mean_dice(d.first.out, "test");
  const CliRun eval = cli({"eval", d.dir + "/run1/model.fseg", "-s", "test"});
  const double eval_dice = parse_mean_dice(eval.out, "test");

  // Training invariant: loss falls monotonically over the first 5 epochs
  // in at least 4 of 5 seeds.
  std::size_t decreasing = 0;
  for (const auto& h : learned.histories) {
    bool mono = h.size() >= 5;
    for (std::size_t e = 1; mono && e < 5; ++e) mono = h[e].train_loss < h[e - 1].train_loss;
    decreasing += mono;
  }
  const bool ok = setup && d.first.code == 0 && eval.code == 0 && train_dice >= 0.90 &&
                  eval_dice >= 0.90 && d.first.cpu <= 600.0 && decreasing >= 4;
  record(3, ok, "desk-scale learning (test patient mean Dice >= 0.90, <= 10 min)",
         "test Dice " + fmt("%.4f", train_dice) + " (eval " + fmt("%.4f", eval_dice) +
             "), cpu " + fmt("%.1f", d.first.cpu) + " s, wall " + fmt("%.1f", d.first.wall) +
             " s, setup " + (setup ? "ok" : "MISMATCH") + "; " + std::to_string(decreasing) +
             "/" + std::to_string(learned.histories.size()) +
             " seeds with loss decreasing over epochs 0-4; learned_topk 5-seed mean Dice " +
             fmt("%.4f", learned.mean_dice) + " +/- " + fmt("%.4f", learned.std_dice));
}

void criterion_4(const AblationTable& table) {
  std::string detail;
  bool ok = true;
  for (BlockSelection s : {BlockSelection::last_4, BlockSelection::fixed_list}) {
    const AblationRow *on = nullptr, *off = nullptr;
    for (const auto& r : table.rows) {
      if (r.config.selection != s) continue;
      (r.config.spatial_integration ? on : off) = &r;
    }
    if (on == nullptr || off == nullptr) {
      ok = false;
      detail += to_string(s) + ": missing rows; ";
      continue;
    }
    const bool dir_ok = on->mean_dice >= off->mean_dice;
    const bool p_ok = !std::isnan(on->p_value) && on->p_value == off->p_value;
    ok = ok && dir_ok && p_ok && on->seeds.size() == 5 && off->seeds.size() == 5;
    detail += to_string(s) + ": with " + fmt("%.4f", on->mean_dice) + " vs without " +
              fmt("%.4f", off->mean_dice) + ", Welch t " + fmt("%.3f", on->t) + " p " +
              fmt("%.4g", on->p_value) + "; ";
  }
  record(4, ok, "ablation direction, integration >= none for both selections (5 seeds)", detail);
}

void criterion_5(const DeskRuns& d) {
  Rng rng(5);
  std::normal_distribution<double> n01;
  bool softmax_ok = true, topk_ok = true;
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor theta({8});
    for (double& v : theta.data()) v = 10.0 * n01(rng);
    const Tensor w = normalize_weights(Variable(theta)).value();
    double sum = 0.0;
    for (double v : w.data()) {
      sum += v;
      softmax_ok = softmax_ok && v > 0.0;
    }
    worst_sum = std::max(worst_sum, std::fabs(sum - 1.0));
    for (double c : {-40.0, 2.5, 700.0}) {
      Tensor shifted = theta;
      for (double& v : shifted.data()) v += c;
      const Tensor ws = normalize_weights(Variable(shifted)).value();
      for (std::size_t i = 0; i < 8; ++i) {
        worst_shift = std::max(worst_shift, std::fabs(ws[i] - w[i]));
      }
      topk_ok = topk_ok && select_top_k(ws, 4) == select_top_k(w, 4);
    }
  }
  softmax_ok = softmax_ok && worst_sum <= 1e-12 && worst_shift <= 1e-12;

  // One-hot fusion of real desk features against the selected block.
  const SegmentationModel fresh(d.config.model, d.config.train.seed);
  Rng img_rng(6);
  const auto features = fresh.encoder().forward(normal_tensor({2, 1, 64, 64}, 1.0, img_rng));
  bool onehot_ok = true;
  for (std::size_t j = 0; j < features.size(); ++j) {
    Tensor theta({features.size()});
    for (std::size_t i = 0; i < features.size(); ++i) theta[i] = i == j ? 0.0 : -1e4;
    const Variable fused = fuse_features(features, normalize_weights(Variable(theta)));
    onehot_ok = onehot_ok && fused.value().identical(features[j].tokens.value());
  }

  double ck_ratio = 0.0, final_ratio = 0.0;
  try {
    const Checkpoint ck = load_checkpoint(d.dir + "/run1/model.fseg");
    const Tensor w = ck.model->fusion().weights().value();
    ck_ratio = ratio({w.data().begin(), w.data().end()});
    final_ratio = ratio(final_history_weights(d.dir + "/run1/history.csv"));
  } catch (const std::exception& e) {
    std::cerr << "criterion 5: " << e.what() << "\n";
  }
  const bool ok = softmax_ok && topk_ok && onehot_ok && ck_ratio > 1.1 && final_ratio > 1.1;
  record(5, ok, "fusion mechanics and learned non-uniform weights (max/min > 1.1)",
         std::string("softmax sum err ") + fmt("%.1e", worst_sum) + ", shift err " +
             fmt("%.1e", worst_shift) + (softmax_ok ? "" : " FAIL") + "; top-k shift " +
             (topk_ok ? "ok" : "FAIL") + "; one-hot bitwise " + (onehot_ok ? "ok" : "FAIL") +
             "; max/min w: best checkpoint " + fmt("%.4f", ck_ratio) + ", final epoch " +
             fmt("%.4f", final_ratio));
}

bool stage_law(const ModelConfig& mc, std::size_t channels, std::string& detail) {
  const SegmentationModel model(mc, 1);
  Rng rng(7);
  const std::size_t h = mc.encoder.image_height, w = mc.encoder.image_width;
  const Tensor x = normal_tensor({1, channels, h, w}, 1.0, rng);
  const auto features = model.encoder().forward(x);
  const auto out = model.forward(Variable(x), features);
  const std::size_t g = h / mc.encoder.patch_size;
  bool ok = out.decoder.stage_sizes.size() == 4;
  for (std::size_t n = 1; ok && n <= 4; ++n) {
    const std::size_t expect = g << n;
    ok = out.decoder.stage_sizes[n - 1] == std::pair<std::size_t, std::size_t>{expect, expect};
  }
  const Shape logits = out.decoder.logits.value().shape();
  ok = ok && logits == Shape{1, 1, h, w};
  const std::size_t tokens = features.front().tokens.value().shape()[1];
  ok = ok && tokens == h * w / (mc.encoder.patch_size * mc.encoder.patch_size);
  detail += std::to_string(h) + "/" + std::to_string(mc.encoder.patch_size) + ": N=" +
            std::to_string(tokens) + ", stages";
  for (const auto& s : out.decoder.stage_sizes) detail += " " + std::to_string(s.first);
  detail += ", head " + std::to_string(out.decoder.head_size.first) + ", logits " +
            std::to_string(logits[2]) + "x" + std::to_string(logits[3]) + "; ";
  return ok;
}

void criterion_6(const DeskRuns& d) {
  std::string detail;
  bool ok = stage_law(d.config.model, 1, detail);
  // Full-scale 448/14 geometry; widths are reduced because the resolution law depends on
  // patch and image size only.
  ModelConfig full = default_config().model;
  full.encoder.embed_dim = 16;
  full.encoder.num_blocks = 4;
  full.encoder.num_heads = 2;
  full.encoder.mlp_ratio = 2;
  full.decoder.stage_channels = {8, 8, 8, 8};
  ok = stage_law(full, full.encoder.in_channels, detail) && ok;
  const std::size_t full_tokens = 448 * 448 / (14 * 14);
  ok = ok && full_tokens == 1024;
  record(6, ok, "architecture laws (stages (H/P)*2^n, logits HxW, N=1024 at 448/14)", detail);
}

void criterion_7(const DeskRuns& d) {
  bool ok = false;
  std::size_t count = 0;
  try {
    const Checkpoint ck = load_checkpoint(d.dir + "/run1/model.fseg");
    const SegmentationModel fresh(d.config.model, d.config.train.seed);
    const auto& a = fresh.encoder().parameters();
    const auto& b = ck.model->encoder().parameters();
    ok = a.size() == b.size() && !a.empty();
    for (std::size_t i = 0; ok && i < a.size(); ++i) {
      ok = a[i].frozen && a[i].name == b[i].name && a[i].var.value().identical(b[i].var.value());
      count += a[i].var.value().numel();
    }
  } catch (const std::exception& e) {
    std::cerr << "criterion 7: " << e.what() << "\n";
  }
  record(7, ok, "frozen encoder bit-identical to initialization after training",
         std::to_string(count) + " encoder values compared against a fresh seed-" +
             std::to_string(d.config.train.seed) + " model");
}

void criterion_8() {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool ok = true;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double pa = u(rng), pb = u(rng);
    Tensor a({1, 9, 11}), b({1, 9, 11});
    for (double& v : a.data()) v = u(rng) < pa ? 1.0 : 0.0;
    for (double& v : b.data()) v = u(rng) < pb ? 1.0 : 0.0;
    const double d = dice(a, b), j = iou(a, b);
    worst = std::max(worst, std::fabs(j - d / (2.0 - d)));
    ok = ok && j <= d && d == dice(b, a) && j == iou(b, a);
  }
  const Tensor empty({1, 9, 11});
  ok = ok && worst <= 1e-12 && dice(empty, empty) == 1.0 && iou(empty, empty) == 1.0;
  record(8, ok, "metric identities over 1000 random mask pairs",
         "max |iou - dice/(2-dice)| " + fmt("%.1e", worst) + ", empty-empty 1.0");
}

void criterion_9() {
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs{
      {{0.91, 0.88, 0.93, 0.90, 0.87, 0.92, 0.89, 0.94}, {0.86, 0.84, 0.90, 0.85, 0.83, 0.88, 0.87, 0.82}},
      {{1.2, 3.4, 2.2, 5.1, 4.4, 2.9, 3.3, 4.0}, {2.0, 2.1, 1.9, 2.2, 2.05, 1.95, 2.15, 2.0}},
      {{0.5, 0.7, 0.6, 0.65, 0.55}, {0.52, 0.61, 0.75, 0.58, 0.66, 0.71, 0.49, 0.69, 0.63}},
  };
  double worst = 0.0;
  for (const auto& [a, b] : pairs) {
    const WelchResult r = welch_t_test(a, b);
    const auto o = testing::welch_oracle(a, b);
    worst = std::max({worst, std::fabs(r.t - o.t), std::fabs(r.df - o.df), std::fabs(r.p - o.p)});
  }
  const std::vector<double> a{0.2, 0.4, 0.3, 0.9};
  const WelchResult same = welch_t_test(a, a);
  const bool ok = worst <= 1e-9 && same.t == 0.0 && same.p == 1.0;
  record(9, ok, "Welch t/df/p against a quadrature t-CDF oracle (1e-9)",
         "max abs deviation " + fmt("%.1e", worst) + " over 3 pairs; t(a,a)=" +
             fmt("%g", same.t) + ", p=" + fmt("%g", same.p));
}

void criterion_10(const DeskRuns& d) {
  bool ok = false;
  std::string detail;
  try {
    const auto ck1 = read_file_bytes(d.dir + "/run1/model.fseg");
    const auto ck2 = read_file_bytes(d.dir + "/run2/model.fseg");
    const auto h1 = read_file_bytes(d.dir + "/run1/history.csv");
    const auto h2 = read_file_bytes(d.dir + "/run2/history.csv");
    const Checkpoint loaded = load_checkpoint(d.dir + "/run1/model.fseg");
    const std::string resaved = d.dir + "/resaved.fseg";
    save_checkpoint(*loaded.model, loaded.config, loaded.meta, resaved);
    const bool roundtrip = read_file_bytes(resaved) == ck1;
    const bool runs = d.second.code == 0 && ck1 == ck2 && h1 == h2;
    ok = roundtrip && runs;
    detail = std::string("round-trip ") + (roundtrip ? "byte-identical" : "DIFFERS") +
             "; two runs: checkpoint " + (ck1 == ck2 ? "identical" : "DIFFERS") + " (" +
             std::to_string(ck1.size()) + " bytes), history " + (h1 == h2 ? "identical" : "DIFFERS");
  } catch (const std::exception& e) {
    detail = e.what();
  }
  record(10, ok, "checkpoint round-trip and cross-run determinism", detail);
}

}  // namespace

int main() {
  try {
    criterion_1();
    criterion_2();
    criterion_8();
    criterion_9();

    const DeskRuns desk = run_desk_twice();
    criterion_5(desk);
    criterion_6(desk);
    criterion_7(desk);
    criterion_10(desk);

    std::cerr << "ablation ...\n";
    const Config& config = desk.config;
    const DatasetSplits splits = split_patients(load_dataset(config, {}), config.data.split);
    auto grid = ablation_grid({"base"});
    grid.push_back({BlockSelection::learned_topk, true, "base"});
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 5; ++s) seeds.push_back(config.train.seed + s);
    const AblationTable table =
        run_ablation(grid, splits, config.model, config.train, seeds,
                     [](const AblationConfig& cell, std::uint64_t seed, double dice) {
                       std::cerr << cell.label() << " seed " << seed << " test Dice "
                                 << fmt("%.4f", dice) << "\n";
                     });
    std::cerr << render_ablation_table(table);
    criterion_4(table);
    criterion_3(desk, table.rows.back());
  } catch (const std::exception& e) {
    std::cerr << "acceptance aborted: " << e.what() << "\n";
  }

  int failures = 0;
  for (int id = 1; id <= 10; ++id) {
    const auto it = verdicts.find(id);
    if (it == verdicts.end()) {
      std::cout << "FAIL [" << id << "] not evaluated\n";
      ++failures;
      continue;
    }
    const Verdict& v = it->second;
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << v.title << ": " << v.detail
              << "\n";
  }
  return failures == 0 ? 0 : 1;
}
