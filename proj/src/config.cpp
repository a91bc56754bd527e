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

#include "fseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fseg/error.hpp"

namespace fseg {

void Config::validate() const {
  model.validate();
  train.validate();
  data.split.validate();
  if (data.num_patients == 0 || data.slices_per_patient == 0) {
    throw ConfigError("data: num_patients and slices_per_patient must be positive");
  }
}

Config default_config() {
  Config c;
  c.model.encoder = EncoderConfig::preset("vitb14");
  c.model.decoder.stage_channels = {256, 128, 64, 32};
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("cannot parse '" + v + "' as a non-negative integer");
  }
  return out;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("cannot parse '" + v + "' as a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("cannot parse '" + v + "' as a boolean");
}

std::vector<std::size_t> parse_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(trim(item)));
  if (out.empty()) throw ConfigError("cannot parse '" + v + "' as a list");
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
Field uint_field(T Config::*group, std::size_t T::*member) {
  return {[=](Config& c, const std::string& v) { (c.*group).*member = parse_uint(v); },
          [=](const Config& c) { return std::to_string((c.*group).*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    using E = EncoderConfig;
    std::vector<std::pair<std::string, Field>> t;
    auto enc = [](std::size_t E::*m) {
      return Field{[=](Config& c, const std::string& v) { c.model.encoder.*m = parse_uint(v); },
                   [=](const Config& c) { return std::to_string(c.model.encoder.*m); }};
    };
    t.emplace_back("encoder.patch_size", enc(&E::patch_size));
    t.emplace_back("encoder.embed_dim", enc(&E::embed_dim));
    t.emplace_back("encoder.num_blocks", enc(&E::num_blocks));
    t.emplace_back("encoder.num_heads", enc(&E::num_heads));
    t.emplace_back("encoder.mlp_ratio", enc(&E::mlp_ratio));
    t.emplace_back("encoder.image_size",
                   Field{[](Config& c, const std::string& v) {
                           const auto x = v.find('x');
                           if (x == std::string::npos) {
                             c.model.encoder.image_height = c.model.encoder.image_width =
                                 parse_uint(v);
                           } else {
                             c.model.encoder.image_height = parse_uint(trim(v.substr(0, x)));
                             c.model.encoder.image_width = parse_uint(trim(v.substr(x + 1)));
                           }
                         },
                         [](const Config& c) {
                           return std::to_string(c.model.encoder.image_height) + "x" +
                                  std::to_string(c.model.encoder.image_width);
                         }});
    t.emplace_back("encoder.in_channels", enc(&E::in_channels));
    t.emplace_back("encoder.weights",
                   Field{[](Config& c, const std::string& v) { c.encoder_weights = v; },
                         [](const Config& c) { return c.encoder_weights; }});

    t.emplace_back("fusion.k", Field{[](Config& c, const std::string& v) {
                                       c.model.fusion.k = parse_uint(v);
                                     },
                                     [](const Config& c) {
                                       return std::to_string(c.model.fusion.k);
                                     }});
    t.emplace_back("fusion.selection",
                   Field{[](Config& c, const std::string& v) {
                           c.model.fusion.mode = parse_selection_mode(v);
                         },
                         [](const Config& c) { return to_string(c.model.fusion.mode); }});
    t.emplace_back("fusion.fixed_blocks",
                   Field{[](Config& c, const std::string& v) {
                           c.model.fusion.fixed_blocks =
                               v.empty() ? std::vector<std::size_t>{} : parse_list(v);
                         },
                         [](const Config& c) { return fmt_list(c.model.fusion.fixed_blocks); }});

    t.emplace_back("decoder.stage_channels",
                   Field{[](Config& c, const std::string& v) {
                           c.model.decoder.stage_channels = parse_list(v);
                         },
                         [](const Config& c) { return fmt_list(c.model.decoder.stage_channels); }});
    t.emplace_back("decoder.image_adapter_channels",
                   Field{[](Config& c, const std::string& v) {
                           c.model.decoder.image_adapter_channels = parse_uint(v);
                         },
                         [](const Config& c) {
                           return std::to_string(c.model.decoder.image_adapter_channels);
                         }});
    t.emplace_back("decoder.out_classes",
                   Field{[](Config& c, const std::string& v) {
                           c.model.decoder.out_classes = parse_uint(v);
                         },
                         [](const Config& c) { return std::to_string(c.model.decoder.out_classes); }});
    t.emplace_back("decoder.spatial_integration",
                   Field{[](Config& c, const std::string& v) {
                           c.model.decoder.spatial_integration = parse_bool(v);
                         },
                         [](const Config& c) { return fmt_bool(c.model.decoder.spatial_integration); }});
    t.emplace_back("decoder.fused_bottleneck",
                   Field{[](Config& c, const std::string& v) {
                           c.model.decoder.fused_bottleneck = parse_bool(v);
                         },
                         [](const Config& c) { return fmt_bool(c.model.decoder.fused_bottleneck); }});

    auto trd = [](double TrainConfig::*m) {
      return Field{[=](Config& c, const std::string& v) { c.train.*m = parse_double(v); },
                   [=](const Config& c) { return fmt_double(c.train.*m); }};
    };
    t.emplace_back("train.lr", trd(&TrainConfig::lr));
    t.emplace_back("train.beta1", trd(&TrainConfig::beta1));
    t.emplace_back("train.beta2", trd(&TrainConfig::beta2));
    t.emplace_back("train.weight_decay", trd(&TrainConfig::weight_decay));
    t.emplace_back("train.warmup_epochs", uint_field(&Config::train, &TrainConfig::warmup_epochs));
    t.emplace_back("train.total_epochs", uint_field(&Config::train, &TrainConfig::total_epochs));
    t.emplace_back("train.batch_size", uint_field(&Config::train, &TrainConfig::batch_size));
    t.emplace_back("train.seed", Field{[](Config& c, const std::string& v) {
                                         c.train.seed = parse_uint(v);
                                       },
                                       [](const Config& c) { return std::to_string(c.train.seed); }});

    t.emplace_back("data.num_patients", uint_field(&Config::data, &DataConfig::num_patients));
    t.emplace_back("data.slices_per_patient",
                   uint_field(&Config::data, &DataConfig::slices_per_patient));
    t.emplace_back("data.seed", Field{[](Config& c, const std::string& v) {
                                        c.data.seed = parse_uint(v);
                                      },
                                      [](const Config& c) { return std::to_string(c.data.seed); }});
    auto split = [](double SplitSpec::*m) {
      return Field{[=](Config& c, const std::string& v) { c.data.split.*m = parse_double(v); },
                   [=](const Config& c) { return fmt_double(c.data.split.*m); }};
    };
    t.emplace_back("data.train_fraction", split(&SplitSpec::train_fraction));
    t.emplace_back("data.val_fraction", split(&SplitSpec::val_fraction));
    t.emplace_back("data.test_fraction", split(&SplitSpec::test_fraction));
    t.emplace_back("data.split_seed", Field{[](Config& c, const std::string& v) {
                                              c.data.split.seed = parse_uint(v);
                                            },
                                            [](const Config& c) {
                                              return std::to_string(c.data.split.seed);
                                            }});
    return t;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return &f;
  }
  return nullptr;
}

void apply_preset(Config& c, const std::string& name) {
  c.model.encoder = EncoderConfig::preset(name);
  if (c.model.encoder.patch_size == 8) c.model.decoder.stage_channels = {64, 32, 16, 8};
  else c.model.decoder.stage_channels = {256, 128, 64, 32};
}

}  // namespace

void set_config_value(Config& config, const std::string& key, const std::string& value) {
  if (key == "encoder.preset") {
    apply_preset(config, value);
    return;
  }
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + key + "'");
  try {
    f->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

Config parse_config_text(const std::string& text, const std::string& source) {
  struct Line {
    std::size_t number;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    lines.push_back({number, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  Config c = default_config();
  auto apply = [&](const Line& l) {
    try {
      set_config_value(c, l.key, l.value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(l.number) + ": " + e.what());
    }
  };
  for (const Line& l : lines) {
    if (l.key == "encoder.preset") apply(l);
  }
  for (const Line& l : lines) {
    if (l.key != "encoder.preset") apply(l);
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

Config apply_overrides(Config base, const KeyValues& overrides) {
  for (const auto& [k, v] : overrides) {
    if (k == "encoder.preset") set_config_value(base, k, v);
  }
  for (const auto& [k, v] : overrides) {
    if (k != "encoder.preset") set_config_value(base, k, v);
  }
  base.validate();
  return base;
}

KeyValues to_key_values(const Config& config) {
  KeyValues kv;
  for (const auto& [k, f] : fields()) kv.emplace_back(k, f.get(config));
  return kv;
}

Config from_key_values(const KeyValues& kv) {
  Config c = default_config();
  for (const auto& [k, v] : kv) set_config_value(c, k, v);
  c.validate();
  return c;
}

std::string config_text(const Config& config) {
  std::string s;
  for (const auto& [k, v] : to_key_values(config)) s += k + " = " + v + "\n";
  return s;
}

}  // namespace fseg
