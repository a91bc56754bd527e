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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fseg/checkpoint.hpp"
#include "fseg/cli.hpp"
#include "fseg/config.hpp"
#include "fseg/error.hpp"
#include "fseg/overlay.hpp"
#include "test_util.hpp"

namespace fseg {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTinyConfig = R"(# small enough for a unit test
encoder.patch_size = 4
encoder.embed_dim = 16
encoder.num_blocks = 4
encoder.num_heads = 2
encoder.mlp_ratio = 2
encoder.image_size = 16
fusion.k = 2
decoder.stage_channels = 8,4
decoder.image_adapter_channels = 2
train.lr = 5e-3
train.warmup_epochs = 1
train.total_epochs = 2
train.batch_size = 4
data.num_patients = 10
data.slices_per_patient = 2
)";

std::string write_tiny_config(const std::string& dir) {
  const std::string path = dir + "/tiny.cfg";
  std::ofstream(path) << kTinyConfig;
  return path;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Config, EmptyTextGivesDefaults) {
  const Config c = parse_config_text("");
  EXPECT_EQ(config_text(c), config_text(default_config()));
  EXPECT_EQ(c.model.encoder.patch_size, 14u);
  EXPECT_EQ(c.model.encoder.image_height, 448u);
  EXPECT_EQ(c.train.beta2, 0.95);
  EXPECT_EQ(c.train.lr, 5e-5);
}

TEST(Config, OverrideAndRoundTrip) {
  const Config c = parse_config_text("train.beta2 = 0.999\n# comment\n\nencoder.image_size = 28x42\n");
  EXPECT_EQ(c.train.beta2, 0.999);
  EXPECT_EQ(c.model.encoder.image_height, 28u);
  EXPECT_EQ(c.model.encoder.image_width, 42u);
  const Config back = parse_config_text(config_text(c));
  EXPECT_EQ(config_text(back), config_text(c));
}

TEST(Config, DeskPresetAppliesBeforeOtherKeys) {
  const Config c = parse_config_text("decoder.image_adapter_channels = 4\nencoder.preset = desk\n");
  EXPECT_EQ(c.model.encoder.patch_size, 8u);
  EXPECT_EQ(c.model.encoder.embed_dim, 64u);
  EXPECT_EQ(c.model.decoder.stage_channels, (std::vector<std::size_t>{64, 32, 16, 8}));
  EXPECT_EQ(c.model.decoder.image_adapter_channels, 4u);
}

TEST(Config, ErrorsNameLineAndKey) {
  try {
    parse_config_text("train.lr = 1e-3\nencoder.patch_size = 0\n", "x.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("patch_size"), std::string::npos) << e.what();
  }
  try {
    parse_config_text("train.lr = 1e-3\n\ntrain.bogus = 1\n", "x.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("x.cfg:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("train.bogus"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_config_text("train.lr = fast\n"), ConfigError);
  EXPECT_THROW(parse_config_text("no equals sign\n"), ConfigError);
  EXPECT_THROW(apply_overrides(default_config(), {{"encoder.patch_size", "13"}}), ConfigError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = default_config();
    config_.model = testing::tiny_model_config();
    model_ = std::make_unique<SegmentationModel>(config_.model, 5);
    // Move the trainable parameters off their initial values.
    Rng rng(9);
    for (Parameter* p : model_->parameters()) {
      if (!p->frozen) p->var.mutable_value() = normal_tensor(p->var.value().shape(), 0.1, rng);
    }
    dir_ = testing::scratch_dir("checkpoint");
    path_ = dir_ + "/model.fseg";
    save_checkpoint(*model_, config_, {3, 0.75, 5}, path_);
  }
  Config config_;
  std::unique_ptr<SegmentationModel> model_;
  std::string dir_, path_;
};

TEST_F(CheckpointTest, RoundTripIsByteAndForwardIdentical) {
  const Checkpoint ck = load_checkpoint(path_);
  EXPECT_EQ(ck.meta.epoch, 3u);
  EXPECT_EQ(ck.meta.val_dice, 0.75);
  EXPECT_EQ(ck.meta.seed, 5u);
  const std::string again = dir_ + "/again.fseg";
  save_checkpoint(*ck.model, ck.config, ck.meta, again);
  EXPECT_EQ(read_file_bytes(path_), read_file_bytes(again));
  const Tensor x = testing::randn({2, 1, 16, 16}, 4);
  EXPECT_TRUE(model_->forward(x).decoder.logits.value().identical(
      ck.model->forward(x).decoder.logits.value()));
}

TEST_F(CheckpointTest, TruncationReportsExpectedAndActualLength) {
  auto bytes = read_file_bytes(path_);
  const std::size_t full = bytes.size();
  bytes.resize(full - 8);
  try {
    deserialize(bytes);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected length at least " + std::to_string(full)), std::string::npos)
        << msg;
    EXPECT_NE(msg.find("actual length " + std::to_string(full - 8)), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte offset"), std::string::npos) << msg;
  }
}

TEST_F(CheckpointTest, VersionAndMagicAreChecked) {
  auto bytes = read_file_bytes(path_);
  bytes[4] = 2;
  try {
    deserialize(bytes);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
  bytes[4] = 1;
  bytes[0] = 'X';
  EXPECT_THROW(deserialize(bytes), LoadError);
}

TEST_F(CheckpointTest, MissingOrMisshapenTensorsAreRejected) {
  TensorContainer c = make_checkpoint(*model_, config_, {});
  TensorContainer missing = c;
  missing.tensors.pop_back();
  EXPECT_THROW(checkpoint_from_container(missing), LoadError);
  TensorContainer wrong = c;
  wrong.tensors.back().second = Tensor({wrong.tensors.back().second.numel() + 1});
  EXPECT_THROW(checkpoint_from_container(wrong), LoadError);
  TensorContainer extra = c;
  extra.tensors.emplace_back("nonexistent", Tensor({1}));
  EXPECT_THROW(checkpoint_from_container(extra), LoadError);
}

TEST(Overlay, LayoutAndZeroCases) {
  const auto samples = generate_synthetic(1, 1, 12, 10, 3);
  const Sample& s = samples[0];
  const GrayImage same = render_overlay(s.image, s.mask, s.mask);
  EXPECT_EQ(same.width, 3u * 10 + 2);
  EXPECT_EQ(same.height, 12u);
  const std::size_t w = same.width;
  for (std::size_t y = 0; y < 12; ++y) {
    EXPECT_EQ(same.pixels[y * w + 10], 255);
    EXPECT_EQ(same.pixels[y * w + 21], 255);
    for (std::size_t x = 0; x < 10; ++x) {
      EXPECT_EQ(same.pixels[y * w + 11 + x], same.pixels[y * w + 22 + x]);
    }
  }
  const GrayImage empty = render_overlay(s.image, s.mask, Tensor({1, 12, 10}));
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 10; ++x) {
      EXPECT_EQ(empty.pixels[y * w + 22 + x], empty.pixels[y * w + x]);
    }
  }
  const std::string path = testing::scratch_dir("overlay") + "/o.pgm";
  EXPECT_EQ(emit_overlay(s.image, s.mask, s.mask, path), 1.0);
  const GrayImage back = read_pgm(path);
  EXPECT_EQ(back.pixels, same.pixels);
  EXPECT_THROW(render_overlay(s.image, s.mask, Tensor({1, 12, 11})), ShapeError);
}

TEST(Cli, UsageErrorsExitOne) {
  CliResult r = cli({"frobnicate"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("unknown subcommand 'frobnicate'"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("gradcheck"), std::string::npos) << r.err;
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"train"}).code, kExitUsage);  // missing --out
  const std::string dir = testing::scratch_dir("cli_usage");
  EXPECT_EQ(cli({"synth", "--set", "encoder.patch_size=0", "-o", dir}).code, kExitUsage);
  EXPECT_EQ(cli({"synth", "-c", dir + "/absent.cfg", "-o", dir}).code, kExitUsage);
}

TEST(Cli, DataErrorsExitTwo) {
  const std::string dir = testing::scratch_dir("cli_data");
  EXPECT_EQ(cli({"eval", dir + "/absent.fseg"}).code, kExitData);
  std::ofstream(dir + "/junk.fseg") << "not a checkpoint";
  EXPECT_EQ(cli({"eval", dir + "/junk.fseg"}).code, kExitData);
}

TEST(Cli, GradcheckPassesOnFreshBuild) {
  const CliResult r = cli({"gradcheck"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("end_to_end"), std::string::npos);
  EXPECT_NE(r.out.find("attention"), std::string::npos);
}

TEST(Cli, SynthTrainEvalOverlayPipeline) {
  const std::string dir = testing::scratch_dir("cli_pipeline");
  const std::string cfg = write_tiny_config(dir);

  CliResult r = cli({"synth", "-c", cfg, "-o", dir + "/data"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string manifest = dir + "/data/manifest.tsv";
  ASSERT_TRUE(fs::exists(manifest));

  r = cli({"train", "-c", cfg, "-d", manifest, "-o", dir + "/run"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("test mean Dice:"), std::string::npos) << r.out;
  ASSERT_TRUE(fs::exists(dir + "/run/model.fseg"));
  std::ifstream hist(dir + "/run/history.csv");
  std::string header;
  std::getline(hist, header);
  EXPECT_EQ(header.rfind("epoch,train_loss,val_dice,lr,w_0", 0), 0u) << header;

  // Re-running overwrites outputs identically.
  const auto first_ckpt = read_file_bytes(dir + "/run/model.fseg");
  const auto first_hist = read_file_bytes(dir + "/run/history.csv");
  r = cli({"train", "-c", cfg, "-d", manifest, "-o", dir + "/run"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_file_bytes(dir + "/run/model.fseg"), first_ckpt);
  EXPECT_EQ(read_file_bytes(dir + "/run/history.csv"), first_hist);

  r = cli({"eval", dir + "/run/model.fseg", "-d", manifest, "--compare", dir + "/run/model.fseg"});
  ASSERT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("patient,dice,iou"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("welch t 0.000000"), std::string::npos) << r.out;

  r = cli({"overlay", dir + "/run/model.fseg", "-d", manifest, "-s", "test", "-o", dir + "/ov"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::size_t pgms = 0;
  for (const auto& e : fs::directory_iterator(dir + "/ov")) pgms += e.path().extension() == ".pgm";
  EXPECT_EQ(pgms, 4u);  // 2 test patients x 2 slices
}

}  // namespace
}  // namespace fseg
