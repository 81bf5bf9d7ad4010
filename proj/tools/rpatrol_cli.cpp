// Copyright 2026 The rpatrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// rpatrol command-line tool. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rpatrol/c_api.h"

namespace {

// Relative output paths go under $RPATROL_OUTPUT_ROOT when it is set.
std::string OutputPath(const std::string& p) {
  const char* root = std::getenv("RPATROL_OUTPUT_ROOT");
  std::filesystem::path path(p);
  if (root == nullptr || *root == '\0' || path.is_absolute()) return p;
  return (std::filesystem::path(root) / path).string();
}

void EnsureParent(const std::string& file) {
  const auto parent = std::filesystem::path(file).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

int Report(const char* stage, rp_status st) {
  if (st == RP_OK) return 0;
  std::fprintf(stderr, "rpatrol %s: %s: %s\n", stage, rp_status_string(st), rp_last_error());
  return 1 + static_cast<int>(st);
}

class ConfigHandle {
 public:
  ~ConfigHandle() { rp_config_free(cfg_); }
  rp_status Open(const std::string& path) {
    return path.empty() ? rp_config_parse("", &cfg_) : rp_config_load(path.c_str(), &cfg_);
  }
  // "key=value" overrides from the command line.
  rp_status Apply(const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "rpatrol: --set expects key=value, got '%s'\n", s.c_str());
        return RP_CONFIG;
      }
      const rp_status st = rp_config_set(cfg_, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str());
      if (st != RP_OK) return st;
    }
    return RP_OK;
  }
  rp_config* get() { return cfg_; }

 private:
  rp_config* cfg_ = nullptr;
};

void OnEpoch(int epoch, double loss, void* every) {
  const int n = *static_cast<int*>(every);
  if (n > 0 && (epoch + 1) % n == 0) std::printf("epoch %d loss %.6f\n", epoch + 1, loss);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rpatrol: robust patrol planning against diffusion-modelled adversaries"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rp_version()));

  std::string config_path;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("-s,--set", sets, "override a config key (key=value)");
  };

  std::string out;
  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  add_common(gen);
  gen->add_option("-o,--out", out, "output directory")->required();

  std::string model_path;
  int log_every = 10;
  auto* train = app.add_subcommand("train", "train the conditional denoiser");
  add_common(train);
  train->add_option("-m,--model", model_path, "checkpoint to write")->required();
  train->add_option("--log-every", log_every, "print the loss every n epochs (0: never)");

  auto* solve = app.add_subcommand("solve", "solve one instance with one method");
  add_common(solve);
  solve->add_option("-o,--out", out, "solution JSON to write")->required();

  std::string solution_path;
  std::vector<double> gamma_test;
  auto* eval = app.add_subcommand("evaluate", "regret of a solution on one instance");
  add_common(eval);
  eval->add_option("--solution", solution_path, "solution JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--gamma-test", gamma_test, "test-time tilts")->default_val(std::vector<double>{0.5, 1.0});

  auto* run = app.add_subcommand("run", "run a full experiment");
  run->add_option("-c,--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out, "output directory (overrides output_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const std::string dir = out.empty() ? "" : OutputPath(out);
      const rp_status st = rp_run_experiment(config_path.c_str(), dir.empty() ? nullptr : dir.c_str());
      if (st == RP_OK) std::printf("experiment finished\n");
      return Report("run", st);
    }

    ConfigHandle cfg;
    rp_status st = cfg.Open(config_path);
    if (st == RP_OK) st = cfg.Apply(sets);
    if (st != RP_OK) return Report("config", st);

    if (*gen) {
      const std::string dir = OutputPath(out);
      st = rp_generate_dataset(cfg.get(), dir.c_str());
      if (st == RP_OK) std::printf("dataset written to %s\n", dir.c_str());
      return Report("generate", st);
    }
    if (*train) {
      const std::string path = OutputPath(model_path);
      EnsureParent(path);
      st = rp_train_denoiser(cfg.get(), path.c_str(), OnEpoch, &log_every);
      if (st == RP_OK) std::printf("model written to %s\n", path.c_str());
      return Report("train", st);
    }
    if (*solve) {
      rp_solution* sol = nullptr;
      st = rp_solve(cfg.get(), &sol);
      if (st != RP_OK) return Report("solve", st);
      const std::string path = OutputPath(out);
      EnsureParent(path);
      st = rp_solution_save_json(sol, path.c_str());
      if (st == RP_OK) {
        std::printf("%zu atoms, value %.6g, written to %s\n", rp_solution_num_atoms(sol),
                    rp_solution_value(sol), path.c_str());
      }
      rp_solution_free(sol);
      return Report("solve", st);
    }
    if (*eval) {
      rp_solution* sol = nullptr;
      st = rp_solution_load_json(solution_path.c_str(), &sol);
      if (st != RP_OK) return Report("evaluate", st);
      std::printf("gamma_test,best,achieved,regret,mc_stderr\n");
      for (double g : gamma_test) {
        rp_regret r{};
        st = rp_evaluate(cfg.get(), sol, g, &r);
        if (st != RP_OK) break;
        std::printf("%.17g,%.17g,%.17g,%.17g,%.17g\n", g, r.best, r.achieved, r.regret, r.mc_stderr);
      }
      rp_solution_free(sol);
      return Report("evaluate", st);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rpatrol: %s\n", e.what());
    return 1;
  }
  return 0;
}
