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

#ifndef RPATROL_HARNESS_HPP_
#define RPATROL_HARNESS_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpatrol/config.hpp"
#include "rpatrol/double_oracle.hpp"
#include "rpatrol/quadrature.hpp"
#include "rpatrol/scenario.hpp"

namespace rpatrol {

enum class Method { kNro, kAor, kDoIs, kDoDps, kDoSmc };

std::string MethodName(Method m);
Method ParseMethod(const std::string& name);
bool IsDoubleOracle(Method m);

enum class Split { kValidation, kTest };

// One planning problem: a context and the model conditioned on it.
struct Instance {
  int id = 0;
  Split split = Split::kTest;
  Context context;
  std::shared_ptr<const ScoreModel> model;
  int graph_id = -1;  // synthetic testbed only
};

// Where instances and their ground-truth adversary laws come from.
class Testbed {
 public:
  virtual ~Testbed() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual const UtilityParams& params() const = 0;
  virtual Instance MakeInstance(Split split, int index, std::uint64_t seed) const = 0;
  // The true adversary law for an instance: the base law tilted with
  // strength gamma_test against the instance's nominal plan (the best
  // response to the untilted law). gamma_test = 0 gives the untilted law.
  // The same for every method, so regrets are comparable across methods.
  virtual ParticleEnsemble TruthLaw(const Instance& inst, double gamma_test) const = 0;
  // True when TruthLaw is a quadrature rule rather than random draws.
  virtual bool exact_truth() const = 0;
  // Human-readable note on how truth is instantiated.
  virtual std::string truth_kind() const = 0;
};

struct AnalyticTestbedConfig {
  double budget = 1.0;
  int steps = 100;
  double beta = 0.5;
  double n0 = 10.0;
  bool clip = true;
  int truth_grid = 200;  // quadrature cells per axis
};

// K = 2 Gaussian mixture whose component means shift with the previous
// period's patrol effort c in [0, B]^2, including a rare high-poaching mode.
// Truth is 2-D quadrature of the mixture density.
std::unique_ptr<Testbed> MakeAnalyticTestbed(const AnalyticTestbedConfig& cfg);
// The testbed's mixture at a context (exposed for independent checks).
GaussianMixtureModel AnalyticTestbedMixture();
QuadratureGrid AnalyticTruthGrid(int cells);

struct SyntheticTestbedConfig {
  std::string dataset_dir;
  std::string model_path;
  double budget = 1.0;
  bool clip = true;
  std::size_t truth_draws = 100000;
};

// Generated dataset plus a trained denoiser. Truth is a large batch of draws
// from the generator's conditional law for the instance's graph, reweighted
// by the test tilt.
std::unique_ptr<Testbed> MakeSyntheticTestbed(const SyntheticTestbedConfig& cfg);

struct ExperimentConfig {
  std::string testbed = "analytic";
  std::vector<Method> methods = {Method::kNro, Method::kAor, Method::kDoIs, Method::kDoDps,
                                 Method::kDoSmc};
  int seeds = 5;
  std::uint64_t base_seed = 2024;
  int test_instances = 10;
  int validation_instances = 3;
  double budget = 1.0;
  std::vector<double> gamma_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  double gamma = 1.0;  // used when gamma selection is off
  bool select_gamma = true;
  std::vector<double> gamma_test = {0.5, 1.0};
  std::size_t samples = 500;
  int restarts = 5;
  int aor_rounds = 30;
  DoubleOracleConfig solver;  // budget/params filled from the testbed
  int threads = 1;
  std::string output_dir = "rpatrol_out";
  // Parameter studies: "none", "gamma" (sweep study_gammas) or "samples".
  std::string study = "none";
  std::vector<double> study_gammas = {0.0, 0.25, 1.0, 4.0, 16.0};
  std::vector<double> study_samples = {500, 2000};
  AnalyticTestbedConfig analytic;
  SyntheticTestbedConfig synthetic;

  static ExperimentConfig FromConfig(const Config& cfg);
  static std::vector<std::string> KnownKeys();
};

// Solves one method on one instance with solver strength gamma and n samples.
struct MethodResult {
  MixedDefenderStrategy pi;
  std::unique_ptr<DefenderSolution> solution;  // double-oracle methods only
};

MethodResult SolveInstance(Method method, const Instance& inst, const ExperimentConfig& cfg,
                           const UtilityParams& params, double gamma, std::size_t samples,
                           std::uint64_t seed);

struct RegretEntry {
  double best = 0.0;      // max_x E_true U(x, z)
  double achieved = 0.0;  // E_pi E_true U(x, z)
  double regret = 0.0;
  double stderr_mc = 0.0;  // Monte Carlo SE of achieved; callers zero it for quadrature truth
};

// Regret of pi against a weighted truth law. best comes from mirror ascent
// (several starts) and, when K <= 2, a budget-line grid search.
// Best achievable expected utility max_x E_truth U(x, z): mirror ascent from
// several starts, plus a golden-section search along the budget line for K = 2
// (the utility is non-decreasing in x, so the line holds a maximizer).
double BestExpectedUtility(const ParticleEnsemble& truth, const UtilityParams& params,
                           double budget, const MirrorAscentConfig& mirror,
                           std::vector<double>* argmax = nullptr);

// best is computed with BestExpectedUtility unless given. stderr_mc is the
// self-normalized Monte Carlo SE of the achieved value.
RegretEntry EvaluateRegret(const MixedDefenderStrategy& pi, const ParticleEnsemble& truth,
                           const UtilityParams& params, double budget,
                           const MirrorAscentConfig& mirror,
                           std::optional<double> best = std::nullopt);

struct RegretRow {
  std::string method;
  int seed = 0;
  int instance = 0;
  double gamma_test = 0.0;
  double gamma = 0.0;
  std::size_t samples = 0;
  RegretEntry entry;
};

struct SummaryRow {
  std::string method;
  std::string statistic;  // "average" or "worst"
  double budget = 0.0;
  double gamma = 0.0;     // parameter-study value, else selected/solver gamma mean
  std::size_t samples = 0;
  double mean = 0.0;
  double stderr_seeds = 0.0;
};

struct ExperimentReport {
  std::vector<RegretRow> rows;
  std::vector<SummaryRow> summary;
  // Per-seed aggregates keyed by (method, seed): average and worst regret.
  struct SeedAggregate {
    std::string method;
    int seed = 0;
    double gamma = 0.0;
    std::size_t samples = 0;
    double average = 0.0;
    double worst = 0.0;
  };
  std::vector<SeedAggregate> per_seed;
  std::string output_dir;
};

// Runs the configured experiment, writing solutions/, regret.csv,
// summary.csv, seeds.csv and manifest.json under the output directory.
// If RPATROL_OUTPUT_ROOT is set, a relative output_dir is placed under it.
ExperimentReport RunExperiment(const ExperimentConfig& cfg);
ExperimentReport RunExperimentFile(const std::string& config_path,
                                   const std::string& output_override = "");

std::unique_ptr<Testbed> MakeTestbed(const ExperimentConfig& cfg);
std::string ResolveOutputDir(const std::string& dir);

}  // namespace rpatrol

#endif  // RPATROL_HARNESS_HPP_
