/* Copyright 2026 The uqdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line front end: fuse, evaluate, synth, losses-check.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "uqdet/error.h"
#include "uqdet/pipeline.h"

namespace {

std::string FlagName(const std::string& key) {
  std::string flag = "--" + key;
  for (char& c : flag) {
    if (c == '_') c = '-';
  }
  return flag;
}

// One string option per config key; values go through the same parser as the
// config file and are applied after it.
class Overrides {
 public:
  void Register(CLI::App* app, const std::vector<uqdet::ConfigKey>& keys) {
    for (const uqdet::ConfigKey& k : keys) {
      app->add_option(FlagName(k.name), values_[k.name], k.help);
    }
  }

  template <typename Config, typename Setter>
  void Apply(Config& config, Setter set) const {
    for (const auto& [key, value] : values_) {
      if (!value.empty()) set(config, key, value);
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

uqdet::PipelineConfig LoadPipeline(const std::string& path, const Overrides& flags) {
  uqdet::PipelineConfig config;
  if (!path.empty()) {
    for (const auto& [k, v] : uqdet::ReadKeyValueFile(path)) {
      uqdet::SetPipelineOption(config, k, v);
    }
  }
  flags.Apply(config, uqdet::SetPipelineOption);
  uqdet::ValidatePipelineConfig(config);
  return config;
}

uqdet::SynthConfig LoadSynth(const std::string& path, const Overrides& flags) {
  uqdet::SynthConfig config;
  if (!path.empty()) {
    for (const auto& [k, v] : uqdet::ReadKeyValueFile(path)) {
      uqdet::SetSynthOption(config, k, v);
    }
  }
  flags.Apply(config, uqdet::SetSynthOption);
  uqdet::ValidateSynthConfig(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-head 3D detection fusion and uncertainty evaluation"};
  app.require_subcommand(1);

  std::string dets_path, fused_path, gt_path, config_path, out_path, out_dir;
  int check_inputs = 1000;
  uint64_t check_seed = 0;

  CLI::App* fuse = app.add_subcommand("fuse", "NMS, consensus clustering and merging");
  fuse->add_option("--dets", dets_path, "detections JSONL")->required();
  fuse->add_option("--config", config_path, "key = value config file");
  fuse->add_option("--out", out_path, "fused JSONL output")->required();
  Overrides fuse_flags;
  fuse_flags.Register(fuse, uqdet::PipelineConfigKeys());

  CLI::App* evaluate = app.add_subcommand("evaluate", "IoU sweep evaluation report");
  evaluate->add_option("--fused", fused_path, "fused JSONL")->required();
  evaluate->add_option("--gt", gt_path, "ground truth JSONL")->required();
  evaluate->add_option("--config", config_path, "key = value config file");
  evaluate->add_option("--out", out_path, "report JSON output")->required();
  Overrides eval_flags;
  eval_flags.Register(evaluate, uqdet::PipelineConfigKeys());

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", config_path, "key = value config file");
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  Overrides synth_flags;
  synth_flags.Register(synth, uqdet::SynthConfigKeys());

  CLI::App* losses = app.add_subcommand("losses-check", "finite-difference gradient checks");
  losses->add_option("--inputs", check_inputs, "random inputs per loss");
  losses->add_option("--seed", check_seed, "input seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : uqdet::ExitCodeFor(uqdet::ErrorKind::kValidation);
  }

  try {
    if (fuse->parsed()) {
      uqdet::CmdFuse(dets_path, LoadPipeline(config_path, fuse_flags), out_path);
    } else if (evaluate->parsed()) {
      uqdet::CmdEvaluate(fused_path, gt_path, LoadPipeline(config_path, eval_flags),
                         out_path);
    } else if (synth->parsed()) {
      uqdet::CmdSynth(LoadSynth(config_path, synth_flags), out_dir);
    } else if (losses->parsed()) {
      if (!uqdet::CmdLossesCheck(check_inputs, check_seed, std::cout)) {
        return uqdet::ExitCodeFor(uqdet::ErrorKind::kNumerical);
      }
    }
  } catch (const uqdet::Error& e) {
    std::cerr << "uqdet: " << e.what() << "\n";
    return uqdet::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "uqdet: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
