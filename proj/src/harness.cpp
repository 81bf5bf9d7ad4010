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

#include "rpatrol/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rpatrol/denoiser.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/text.hpp"

namespace rpatrol {

namespace fs = std::filesystem;

std::string MethodName(Method m) {
  switch (m) {
    case Method::kNro: return "nro";
    case Method::kAor: return "aor";
    case Method::kDoIs: return "do_is";
    case Method::kDoDps: return "do_dps";
    case Method::kDoSmc: return "do_smc";
  }
  return "unknown";
}

Method ParseMethod(const std::string& raw) {
  std::string name = raw;
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  if (name == "nro") return Method::kNro;
  if (name == "aor") return Method::kAor;
  if (name == "do_is" || name == "difforacle_is") return Method::kDoIs;
  if (name == "do_dps" || name == "difforacle_dps") return Method::kDoDps;
  if (name == "do_smc" || name == "difforacle_smc" || name == "difforacle") return Method::kDoSmc;
  Fail(ErrorCode::kConfig, "unknown method '" + raw + "'");
}

bool IsDoubleOracle(Method m) {
  return m == Method::kDoIs || m == Method::kDoDps || m == Method::kDoSmc;
}

// ---------------------------------------------------------------------------
// Analytic testbed

GaussianMixtureModel AnalyticTestbedMixture() {
  // Means move down with last period's effort c (row-major 2 x 2 maps).
  std::vector<AffineMap> means = {
      {{-0.6, 0.0, 0.0, -0.6}, {2.0, 2.0}},   // common behaviour
      {{-0.8, 0.0, 0.0, 0.0}, {4.5, 1.0}},    // rare surge in region 1
      {{0.0, 0.0, 0.0, -0.8}, {1.0, 4.0}},    // rarer surge in region 2
  };
  return GaussianMixtureModel({0.7, 0.2, 0.1}, std::move(means), {0.6, 0.5, 0.5});
}

QuadratureGrid AnalyticTruthGrid(int cells) {
  return QuadratureGrid::Cube(2, -2.0, 8.0, cells);
}

namespace {

ParticleEnsemble PrunedEnsemble(const GridLaw& law) {
  // Cells below 1e-16 of the total carry nothing measurable; drop them.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < law.size(); ++i) {
    if (law.log_mass[i] > std::log(1e-16)) keep.push_back(i);
  }
  StateMatrix pts(keep.size(), law.points.dim());
  std::vector<double> logw(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    std::copy_n(law.points.row(keep[r]).begin(), law.points.dim(), pts.row(r).begin());
    logw[r] = law.log_mass[keep[r]];
  }
  return ParticleEnsemble::FromLogWeights(std::move(pts), logw);
}

// Tilt against the best response to the untilted law: the adversary shifts
// away from the plan a non-robust defender would deploy.
TiltSpec NominalTilt(const ParticleEnsemble& base, double gamma, const UtilityParams& params,
                     double budget) {
  std::vector<double> x;
  BestExpectedUtility(base, params, budget, MirrorAscentConfig{}, &x);
  return TiltSpec::ForDefender(gamma, MixedDefenderStrategy::Pure(PatrolStrategy{x, budget}),
                               params);
}

class AnalyticTestbed : public Testbed {
 public:
  explicit AnalyticTestbed(const AnalyticTestbedConfig& cfg)
      : cfg_(cfg),
        mixture_(AnalyticTestbedMixture()),
        model_(std::make_shared<MixtureScoreModel>(
            mixture_, NoiseSchedule::RandomWalk(cfg.steps, cfg.beta))) {
    Require(cfg.budget > 0.0, "analytic testbed: budget must be positive");
    Require(cfg.truth_grid >= 20, "analytic testbed: truth grid too small");
    params_ = UtilityParams::Defaults(2, cfg.clip);
    params_.initial_population.assign(2, cfg.n0);
    params_.Validate();
  }

  std::string name() const override { return "analytic"; }
  std::size_t dim() const override { return 2; }
  const UtilityParams& params() const override { return params_; }
  std::string truth_kind() const override {
    return "quadrature of the analytic mixture tilted against the evaluated strategy";
  }

  Instance MakeInstance(Split split, int index, std::uint64_t seed) const override {
    Rng rng(DeriveSeed(seed, {HashString("instance"), static_cast<std::uint64_t>(split),
                              static_cast<std::uint64_t>(index)}));
    Instance inst;
    inst.id = index;
    inst.split = split;
    inst.context.features = {cfg_.budget * rng.Uniform(), cfg_.budget * rng.Uniform()};
    inst.model = model_;
    return inst;
  }

  bool exact_truth() const override { return true; }

  ParticleEnsemble TruthLaw(const Instance& inst, double gamma_test) const override {
    const GridLaw base = DiscretizeLogDensity(
        [&](std::span<const double> z) { return mixture_.LogDensity(z, inst.context); },
        AnalyticTruthGrid(cfg_.truth_grid));
    ParticleEnsemble nominal = PrunedEnsemble(base);
    if (gamma_test == 0.0) return nominal;
    return PrunedEnsemble(TiltLaw(base, NominalTilt(nominal, gamma_test, params_, cfg_.budget)));
  }

 private:
  AnalyticTestbedConfig cfg_;
  GaussianMixtureModel mixture_;
  std::shared_ptr<const ScoreModel> model_;
  UtilityParams params_;
};

class SyntheticTestbed : public Testbed {
 public:
  explicit SyntheticTestbed(const SyntheticTestbedConfig& cfg)
      : cfg_(cfg), data_(ReadDataset(cfg.dataset_dir)) {
    Require(cfg.truth_draws >= 2, "synthetic testbed: truth_draws must be >= 2");
    Require(!data_.test.empty(), "synthetic testbed: dataset has no test split");
    model_ = std::make_shared<DenoiserNet>(LoadDenoiserFile(cfg.model_path));
    Require(model_->dim() == static_cast<std::size_t>(data_.config.nodes),
            "synthetic testbed: model dimension does not match the dataset");
    params_ = UtilityParams::Defaults(data_.config.nodes, cfg.clip);
  }

  std::string name() const override { return "synthetic"; }
  std::size_t dim() const override { return data_.config.nodes; }
  const UtilityParams& params() const override { return params_; }
  std::string truth_kind() const override {
    return "generator draws (" + std::to_string(cfg_.truth_draws) +
           ") reweighted by the test tilt";
  }

  Instance MakeInstance(Split split, int index, std::uint64_t) const override {
    const auto& records = split == Split::kTest ? data_.test : data_.validation;
    Require(!records.empty(), "synthetic testbed: empty split");
    const DatasetRecord& r = records[static_cast<std::size_t>(index) % records.size()];
    Instance inst;
    inst.id = index;
    inst.split = split;
    inst.context = r.MakeContext();
    inst.model = model_;
    inst.graph_id = r.graph_id;
    return inst;
  }

  bool exact_truth() const override { return false; }

  ParticleEnsemble TruthLaw(const Instance& inst, double gamma_test) const override {
    const DatasetRecord* rec = nullptr;
    for (const auto* split : {&data_.validation, &data_.test}) {
      for (const DatasetRecord& r : *split) {
        if (r.graph_id == inst.graph_id) rec = &r;
      }
    }
    Require(rec != nullptr, "synthetic testbed: unknown graph");
    // Same draws for every method on this graph.
    Rng rng(DeriveSeed(data_.config.seed, {HashString("truth"),
                                           static_cast<std::uint64_t>(rec->graph_id)}));
    const std::size_t k = dim();
    StateMatrix z(cfg_.truth_draws, k);
    for (std::size_t i = 0; i < cfg_.truth_draws; ++i) {
      const Vec d = SamplePoachingCounts(rec->graph, data_.weights, data_.config.c_noise, rng);
      std::copy(d.begin(), d.end(), z.row(i).begin());
    }
    ParticleEnsemble nominal = ParticleEnsemble::Uniform(z);
    if (gamma_test == 0.0) return nominal;
    const TiltSpec tilt = NominalTilt(nominal, gamma_test, params_, cfg_.budget);
    std::vector<double> logw(cfg_.truth_draws);
    for (std::size_t i = 0; i < cfg_.truth_draws; ++i) logw[i] = tilt.LogFactor(z.row(i));
    return ParticleEnsemble::FromLogWeights(std::move(z), logw);
  }

 private:
  SyntheticTestbedConfig cfg_;
  Dataset data_;
  std::shared_ptr<const DenoiserNet> model_;
  UtilityParams params_;
};

}  // namespace

std::unique_ptr<Testbed> MakeAnalyticTestbed(const AnalyticTestbedConfig& cfg) {
  return std::make_unique<AnalyticTestbed>(cfg);
}

std::unique_ptr<Testbed> MakeSyntheticTestbed(const SyntheticTestbedConfig& cfg) {
  return std::make_unique<SyntheticTestbed>(cfg);
}

std::unique_ptr<Testbed> MakeTestbed(const ExperimentConfig& cfg) {
  if (cfg.testbed == "analytic") {
    AnalyticTestbedConfig a = cfg.analytic;
    a.budget = cfg.budget;
    return MakeAnalyticTestbed(a);
  }
  if (cfg.testbed == "synthetic") {
    SyntheticTestbedConfig s = cfg.synthetic;
    s.budget = cfg.budget;
    return MakeSyntheticTestbed(s);
  }
  Fail(ErrorCode::kConfig, "unknown testbed '" + cfg.testbed + "'");
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<std::string> ExperimentConfig::KnownKeys() {
  return {"testbed", "methods", "seeds", "base_seed", "test_instances",
          "validation_instances", "budget", "gamma_grid", "gamma", "select_gamma",
          "gamma_test", "samples", "restarts", "aor_rounds", "do_epsilon", "do_prob",
          "do_max_iters", "schedule", "schedule_c", "schedule_m", "schedule_delta",
          "cache_ensembles", "ma_step", "ma_iters", "threads", "output_dir", "study",
          "study_gammas", "study_samples", "steps", "beta", "n0", "clip", "truth_grid",
          "dataset", "model", "truth_draws", "proposal_factor"};
}

ExperimentConfig ExperimentConfig::FromConfig(const Config& c) {
  c.CheckKnown(KnownKeys());
  ExperimentConfig e;
  e.testbed = c.GetString("testbed", e.testbed);
  if (c.Has("methods")) {
    e.methods.clear();
    for (const std::string& m : c.GetStrings("methods", {})) e.methods.push_back(ParseMethod(m));
  }
  e.seeds = static_cast<int>(c.GetInt("seeds", e.seeds));
  e.base_seed = c.GetUint("base_seed", e.base_seed);
  e.test_instances = static_cast<int>(c.GetInt("test_instances", e.test_instances));
  e.validation_instances =
      static_cast<int>(c.GetInt("validation_instances", e.validation_instances));
  e.budget = c.GetDouble("budget", e.budget);
  e.gamma_grid = c.GetDoubles("gamma_grid", e.gamma_grid);
  e.gamma = c.GetDouble("gamma", e.gamma);
  e.select_gamma = c.GetBool("select_gamma", e.select_gamma);
  e.gamma_test = c.GetDoubles("gamma_test", e.gamma_test);
  e.samples = static_cast<std::size_t>(c.GetInt("samples", static_cast<long>(e.samples)));
  e.restarts = static_cast<int>(c.GetInt("restarts", e.restarts));
  e.aor_rounds = static_cast<int>(c.GetInt("aor_rounds", e.aor_rounds));
  e.solver.epsilon = c.GetDouble("do_epsilon", e.solver.epsilon);
  e.solver.prob = c.GetDouble("do_prob", e.solver.prob);
  e.solver.max_iters = static_cast<int>(c.GetInt("do_max_iters", e.solver.max_iters));
  const std::string sched = c.GetString("schedule", "fixed");
  if (sched == "fixed") {
    e.solver.schedule = SampleSchedule::Fixed(e.samples);
  } else if (sched == "theoretical") {
    e.solver.schedule = SampleSchedule::Theoretical(c.GetDouble("schedule_c", 16.0),
                                                    c.GetDouble("schedule_m", 1.0),
                                                    c.GetDouble("schedule_delta", 1.0));
  } else {
    Fail(ErrorCode::kConfig, "schedule must be 'fixed' or 'theoretical'");
  }
  e.solver.cache_ensembles = c.GetBool("cache_ensembles", true);
  e.solver.mirror.step = c.GetDouble("ma_step", e.solver.mirror.step);
  e.solver.mirror.iterations = static_cast<int>(c.GetInt("ma_iters", e.solver.mirror.iterations));
  e.threads = static_cast<int>(c.GetInt("threads", e.threads));
  e.output_dir = c.GetString("output_dir", e.output_dir);
  e.study = c.GetString("study", e.study);
  e.study_gammas = c.GetDoubles("study_gammas", e.study_gammas);
  e.study_samples = c.GetDoubles("study_samples", e.study_samples);
  e.analytic.steps = static_cast<int>(c.GetInt("steps", e.analytic.steps));
  e.analytic.beta = c.GetDouble("beta", e.analytic.beta);
  e.analytic.n0 = c.GetDouble("n0", e.analytic.n0);
  e.analytic.clip = c.GetBool("clip", e.analytic.clip);
  e.analytic.truth_grid = static_cast<int>(c.GetInt("truth_grid", e.analytic.truth_grid));
  e.synthetic.dataset_dir = c.GetString("dataset", "");
  e.synthetic.model_path = c.GetString("model", "");
  e.synthetic.clip = e.analytic.clip;
  e.synthetic.truth_draws =
      static_cast<std::size_t>(c.GetInt("truth_draws", static_cast<long>(e.synthetic.truth_draws)));
  if (c.Has("proposal_factor")) {
    Fail(ErrorCode::kConfig, "proposal_factor is fixed at 1.5 in the harness");
  }

  if (e.seeds < 1) Fail(ErrorCode::kConfig, "seeds must be >= 1");
  if (e.test_instances < 1) Fail(ErrorCode::kConfig, "test_instances must be >= 1");
  if (e.validation_instances < 1) Fail(ErrorCode::kConfig, "validation_instances must be >= 1");
  if (!(e.budget > 0.0)) Fail(ErrorCode::kConfig, "budget must be positive");
  if (e.samples < 2) Fail(ErrorCode::kConfig, "samples must be >= 2");
  if (e.restarts < 1) Fail(ErrorCode::kConfig, "restarts must be >= 1");
  if (e.aor_rounds < 0) Fail(ErrorCode::kConfig, "aor_rounds must be >= 0");
  if (e.threads < 1) Fail(ErrorCode::kConfig, "threads must be >= 1");
  if (e.methods.empty()) Fail(ErrorCode::kConfig, "no methods selected");
  for (double g : e.gamma_grid) if (g < 0.0) Fail(ErrorCode::kConfig, "gamma_grid values must be >= 0");
  for (double g : e.gamma_test) if (g < 0.0) Fail(ErrorCode::kConfig, "gamma_test values must be >= 0");
  for (double g : e.study_gammas) if (g < 0.0) Fail(ErrorCode::kConfig, "study_gammas must be >= 0");
  if (e.gamma < 0.0) Fail(ErrorCode::kConfig, "gamma must be >= 0");
  if (e.gamma_test.empty()) Fail(ErrorCode::kConfig, "gamma_test must not be empty");
  if (e.study != "none" && e.study != "gamma" && e.study != "samples") {
    Fail(ErrorCode::kConfig, "study must be none, gamma or samples");
  }
  if (e.testbed == "synthetic" && (e.synthetic.dataset_dir.empty() || e.synthetic.model_path.empty())) {
    Fail(ErrorCode::kConfig, "synthetic testbed needs 'dataset' and 'model'");
  }
  return e;
}

std::string ResolveOutputDir(const std::string& dir) {
  const char* root = std::getenv("RPATROL_OUTPUT_ROOT");
  fs::path p(dir);
  if (root != nullptr && *root != '\0' && p.is_relative()) p = fs::path(root) / p;
  return p.string();
}

// ---------------------------------------------------------------------------
// Methods

namespace {

DiffusionTiltSampler MakeSampler(const Instance& inst, SamplerKind kind) {
  return DiffusionTiltSampler(inst.model, inst.context, kind);
}

PatrolStrategy MaxAgainst(const ParticleEnsemble& ens, const UtilityParams& params, double budget,
                          const MirrorAscentConfig& mirror, std::optional<std::vector<double>> start) {
  const double one = 1.0;
  ScenarioObjective obj(std::span<const ParticleEnsemble>(&ens, 1), std::span<const double>(&one, 1),
                        params);
  return MirrorAscent(std::cref(obj), params.dim(), budget, mirror, std::move(start)).x;
}

}  // namespace

MethodResult SolveInstance(Method method, const Instance& inst, const ExperimentConfig& cfg,
                           const UtilityParams& params, double gamma, std::size_t samples,
                           std::uint64_t seed) {
  MethodResult res;
  const double budget = cfg.budget;
  const MirrorAscentConfig& mirror = cfg.solver.mirror;
  if (method == Method::kNro || method == Method::kAor) {
    const DiffusionTiltSampler sampler = MakeSampler(inst, SamplerKind::kTwistedSmc);
    std::vector<PatrolStrategy> atoms;
    for (int r = 0; r < cfg.restarts; ++r) {
      Rng rng(DeriveSeed(seed, {HashString("restart"), static_cast<std::uint64_t>(r)}));
      const std::vector<double> x0 = RandomFeasible(params.dim(), budget, rng);
      const ParticleEnsemble base = sampler.Sample(TiltSpec::Base(), samples, rng);
      PatrolStrategy x = MaxAgainst(base, params, budget, mirror, x0);
      if (method == Method::kAor) {
        for (int round = 0; round < cfg.aor_rounds; ++round) {
          const TiltSpec tilt = TiltSpec::ForDefender(gamma, MixedDefenderStrategy::Pure(x), params);
          const ParticleEnsemble worst = sampler.Sample(tilt, samples, rng);
          x = MaxAgainst(worst, params, budget, mirror, x.x);
        }
      }
      atoms.push_back(std::move(x));
    }
    res.pi = MixedDefenderStrategy::UniformOver(std::move(atoms));
    return res;
  }
  const SamplerKind kind = method == Method::kDoIs    ? SamplerKind::kImportance
                           : method == Method::kDoDps ? SamplerKind::kDps
                                                      : SamplerKind::kTwistedSmc;
  DoubleOracleConfig dc = cfg.solver;
  dc.gamma = gamma;
  dc.budget = budget;
  dc.params = params;
  if (dc.schedule.mode == ScheduleMode::kFixed) dc.schedule.fixed = samples;
  const DiffusionTiltSampler sampler = MakeSampler(inst, kind);
  Rng rng(seed);
  res.solution = std::make_unique<DefenderSolution>(DoubleOracle(sampler, dc, rng));
  res.pi = res.solution->pi;
  return res;
}

double BestExpectedUtility(const ParticleEnsemble& truth, const UtilityParams& params,
                           double budget, const MirrorAscentConfig& mirror,
                           std::vector<double>* argmax) {
  const double one = 1.0;
  ScenarioObjective obj(std::span<const ParticleEnsemble>(&truth, 1),
                        std::span<const double>(&one, 1), params);
  const std::size_t k = params.dim();
  MirrorAscentConfig long_run = mirror;
  long_run.iterations = std::max(mirror.iterations, 300);
  MirrorAscentResult ma = MirrorAscent(std::cref(obj), k, budget, long_run);
  double best = ma.objective;
  std::vector<double> best_x = ma.x.x;
  auto consider = [&](const std::vector<double>& x) {
    const double v = obj.Value(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  };
  if (k == 1) {
    consider({budget});
  } else if (k == 2) {
    // Coarse scan of the budget line, then golden section around the best cell.
    auto on_line = [&](double u) { return std::vector<double>{u, budget - u}; };
    const int cells = 200;
    int arg = 0;
    double top = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= cells; ++i) {
      const double v = obj.Value(on_line(budget * i / cells));
      if (v > top) {
        top = v;
        arg = i;
      }
    }
    consider(on_line(budget * arg / cells));
    double lo = budget * std::max(arg - 1, 0) / cells;
    double hi = budget * std::min(arg + 1, cells) / cells;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    double f1 = obj.Value(on_line(m1)), f2 = obj.Value(on_line(m2));
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        lo = m1;
        m1 = m2;
        f1 = f2;
        m2 = lo + g * (hi - lo);
        f2 = obj.Value(on_line(m2));
      } else {
        hi = m2;
        m2 = m1;
        f2 = f1;
        m1 = hi - g * (hi - lo);
        f1 = obj.Value(on_line(m1));
      }
    }
    consider(on_line(0.5 * (lo + hi)));
  }
  if (argmax != nullptr) *argmax = best_x;
  return best;
}

RegretEntry EvaluateRegret(const MixedDefenderStrategy& pi, const ParticleEnsemble& truth,
                           const UtilityParams& params, double budget,
                           const MirrorAscentConfig& mirror, std::optional<double> best) {
  pi.Validate();
  for (const PatrolStrategy& a : pi.atoms) {
    Require(a.dim() == params.dim(), "evaluate: strategy dimension mismatch");
  }
  RegretEntry e;
  e.best = best ? *best : BestExpectedUtility(truth, params, budget, mirror);
  double var = 0.0;
  std::vector<double> u(truth.size());
  for (std::size_t n = 0; n < truth.size(); ++n) {
    u[n] = MixedUtility(pi, truth.particle(n), params);
    e.achieved += truth.weight(n) * u[n];
  }
  for (std::size_t n = 0; n < truth.size(); ++n) {
    const double w = truth.weight(n);
    var += w * w * (u[n] - e.achieved) * (u[n] - e.achieved);
  }
  e.regret = e.best - e.achieved;
  e.stderr_mc = std::sqrt(var);
  return e;
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

// Runs jobs on a fixed pool; results are written by index, so the output does
// not depend on scheduling. The first failure (lowest index) is rethrown.
void RunJobs(std::vector<std::function<void()>>& jobs, int threads) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Variant {
  double gamma = 0.0;        // study value (gamma study) or fixed gamma
  std::size_t samples = 0;
  bool selected = false;     // gamma chosen on validation
};

std::string Tag(double v) {
  std::string s = FormatDouble(v);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

std::uint64_t JobSeed(std::uint64_t base, Method m, int seed, Split split, int instance,
                      double gamma, std::size_t samples) {
  std::uint64_t gbits = 0;
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::memcpy(&gbits, &gamma, sizeof(gbits));
  return DeriveSeed(base, {HashString(MethodName(m)), static_cast<std::uint64_t>(seed),
                           static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(instance),
                           gbits, samples});
}

[[noreturn]] void Rethrow(const std::string& stage, Method m, int seed, int instance,
                          const std::exception& e) {
  const std::string msg = "stage " + stage + " method=" + MethodName(m) + " seed=" +
                          std::to_string(seed) + " instance=" + std::to_string(instance) +
                          ": " + e.what();
  if (const auto* err = dynamic_cast<const Error*>(&e)) Fail(err->code(), msg);
  Fail(ErrorCode::kInternal, msg);
}

}  // namespace

namespace {

// Truth laws and best values of one (seed, split, instance), shared by all
// methods.
struct InstanceTruth {
  Instance inst;
  std::vector<ParticleEnsemble> laws;  // one per gamma_test
  std::vector<double> best;
};

InstanceTruth BuildTruth(const Testbed& bed, const ExperimentConfig& cfg, Split split,
                         int instance, std::uint64_t seed_stream) {
  InstanceTruth t;
  t.inst = bed.MakeInstance(split, instance, seed_stream);
  for (double gt : cfg.gamma_test) {
    t.laws.push_back(bed.TruthLaw(t.inst, gt));
    t.best.push_back(BestExpectedUtility(t.laws.back(), bed.params(), cfg.budget, cfg.solver.mirror));
  }
  return t;
}

std::vector<RegretEntry> Score(const MixedDefenderStrategy& pi, const InstanceTruth& t,
                               const Testbed& bed, const ExperimentConfig& cfg) {
  std::vector<RegretEntry> out;
  for (std::size_t g = 0; g < t.laws.size(); ++g) {
    RegretEntry e = EvaluateRegret(pi, t.laws[g], bed.params(), cfg.budget, cfg.solver.mirror, t.best[g]);
    if (bed.exact_truth()) e.stderr_mc = 0.0;
    out.push_back(e);
  }
  return out;
}

}  // namespace

ExperimentReport RunExperiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<Testbed> bed = MakeTestbed(cfg);
  const UtilityParams params = bed->params();
  const std::size_t n_methods = cfg.methods.size();

  // Seed k's instances use stream DeriveSeed(base, k).
  auto seed_value = [&](int k) { return DeriveSeed(cfg.base_seed, {static_cast<std::uint64_t>(k)}); };

  std::vector<Variant> variants;
  if (cfg.study == "gamma") {
    for (double g : cfg.study_gammas) variants.push_back({g, cfg.samples, false});
  } else if (cfg.study == "samples") {
    for (double n : cfg.study_samples) {
      Require(n >= 2, "study_samples must be >= 2");
      variants.push_back({cfg.gamma, static_cast<std::size_t>(n), false});
    }
  } else {
    variants.push_back({cfg.gamma, cfg.samples, cfg.select_gamma});
  }

  // Gamma selection on validation instances: (variant, method, seed) -> gamma.
  std::map<std::tuple<std::size_t, int, int>, double> chosen;
  const bool any_selection = std::any_of(variants.begin(), variants.end(),
                                         [](const Variant& v) { return v.selected; });
  if (any_selection) {
    const std::size_t n_grid = cfg.gamma_grid.size();
    // regret[group][(variant * methods + method) * grid + g]
    const int n_groups = cfg.seeds * cfg.validation_instances;
    std::vector<std::vector<double>> regret(n_groups,
                                            std::vector<double>(variants.size() * n_methods * n_grid, 0.0));
    std::vector<std::function<void()>> fns;
    for (int grp = 0; grp < n_groups; ++grp) {
      fns.push_back([&, grp] {
        const int s = grp / cfg.validation_instances, i = grp % cfg.validation_instances;
        Method current = cfg.methods.front();
        try {
          const InstanceTruth truth = BuildTruth(*bed, cfg, Split::kValidation, i, seed_value(s));
          for (std::size_t v = 0; v < variants.size(); ++v) {
            if (!variants[v].selected) continue;
            for (std::size_t m = 0; m < n_methods; ++m) {
              current = cfg.methods[m];
              if (current == Method::kNro) continue;  // no tilt to select
              for (std::size_t g = 0; g < n_grid; ++g) {
                const double gamma = cfg.gamma_grid[g];
                const std::size_t n = variants[v].samples;
                const MethodResult r = SolveInstance(
                    current, truth.inst, cfg, params, gamma, n,
                    JobSeed(cfg.base_seed, current, s, Split::kValidation, i, gamma, n));
                double total = 0.0;
                for (const RegretEntry& e : Score(r.pi, truth, *bed, cfg)) total += e.regret;
                regret[grp][(v * n_methods + m) * n_grid + g] = total / cfg.gamma_test.size();
              }
            }
          }
        } catch (const std::exception& e) {
          Rethrow("validation", current, s, i, e);
        }
      });
    }
    RunJobs(fns, cfg.threads);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (!variants[v].selected) continue;
      for (std::size_t m = 0; m < n_methods; ++m) {
        for (int s = 0; s < cfg.seeds; ++s) {
          double best_g = cfg.gamma, best_r = std::numeric_limits<double>::infinity();
          if (cfg.methods[m] != Method::kNro) {
            for (std::size_t g = 0; g < n_grid; ++g) {
              double r = 0.0;
              for (int i = 0; i < cfg.validation_instances; ++i) {
                r += regret[s * cfg.validation_instances + i][(v * n_methods + m) * n_grid + g];
              }
              if (r < best_r) {
                best_r = r;
                best_g = cfg.gamma_grid[g];
              }
            }
          }
          chosen[{v, static_cast<int>(cfg.methods[m]), s}] = best_g;
        }
      }
    }
  }

  // Test jobs, one slot per (variant, method, seed, instance).
  struct TestJob {
    std::size_t variant = 0;
    Method method = Method::kNro;
    int seed = 0, instance = 0;
    double gamma = 0.0;
    std::size_t samples = 0;
    MixedDefenderStrategy pi;
    std::unique_ptr<DefenderSolution> solution;
    std::vector<RegretEntry> entries;  // one per gamma_test
  };
  std::vector<TestJob> jobs(variants.size() * n_methods * cfg.seeds * cfg.test_instances);
  auto slot = [&](std::size_t v, std::size_t m, int s, int i) {
    return ((v * n_methods + m) * cfg.seeds + s) * cfg.test_instances + i;
  };
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (int s = 0; s < cfg.seeds; ++s) {
        double g = variants[v].gamma;
        if (variants[v].selected) g = chosen[{v, static_cast<int>(cfg.methods[m]), s}];
        for (int i = 0; i < cfg.test_instances; ++i) {
          TestJob& j = jobs[slot(v, m, s, i)];
          j.variant = v;
          j.method = cfg.methods[m];
          j.seed = s;
          j.instance = i;
          j.gamma = g;
          j.samples = variants[v].samples;
        }
      }
    }
  }
  std::vector<std::function<void()>> fns;
  for (int grp = 0; grp < cfg.seeds * cfg.test_instances; ++grp) {
    fns.push_back([&, grp] {
      const int s = grp / cfg.test_instances, i = grp % cfg.test_instances;
      Method current = cfg.methods.front();
      try {
        const InstanceTruth truth = BuildTruth(*bed, cfg, Split::kTest, i, seed_value(s));
        for (std::size_t v = 0; v < variants.size(); ++v) {
          for (std::size_t m = 0; m < n_methods; ++m) {
            TestJob& j = jobs[slot(v, m, s, i)];
            current = j.method;
            MethodResult r = SolveInstance(
                j.method, truth.inst, cfg, params, j.gamma, j.samples,
                JobSeed(cfg.base_seed, j.method, s, Split::kTest, i, j.gamma, j.samples));
            j.entries = Score(r.pi, truth, *bed, cfg);
            j.pi = std::move(r.pi);
            j.solution = std::move(r.solution);
          }
        }
      } catch (const std::exception& e) {
        Rethrow("test", current, s, i, e);
      }
    });
  }
  RunJobs(fns, cfg.threads);

  // Outputs.
  ExperimentReport rep;
  rep.output_dir = ResolveOutputDir(cfg.output_dir);
  const fs::path out(rep.output_dir);
  std::error_code ec;
  fs::create_directories(out / "solutions", ec);
  if (ec) Fail(ErrorCode::kIo, "cannot create output directory '" + rep.output_dir + "'");

  for (const TestJob& j : jobs) {
    for (std::size_t g = 0; g < cfg.gamma_test.size(); ++g) {
      rep.rows.push_back({MethodName(j.method), j.seed, j.instance, cfg.gamma_test[g], j.gamma,
                          j.samples, j.entries[g]});
    }
    const std::string name = MethodName(j.method) + "_g" + Tag(j.gamma) + "_n" +
                             std::to_string(j.samples) + "_s" + std::to_string(j.seed) + "_i" +
                             std::to_string(j.instance) + ".json";
    std::ofstream f(out / "solutions" / name);
    if (!f) Fail(ErrorCode::kIo, "cannot write solution file " + name);
    if (j.solution) {
      WriteSolutionJson(*j.solution, f);
    } else {
      WriteStrategyJson(j.pi, f);
    }
  }

  // Per-seed aggregates in job order.
  std::map<std::tuple<std::size_t, int, int>, std::size_t> agg_index;
  for (const TestJob& j : jobs) {
    const auto key = std::make_tuple(j.variant, static_cast<int>(j.method), j.seed);
    auto it = agg_index.find(key);
    if (it == agg_index.end()) {
      agg_index[key] = rep.per_seed.size();
      rep.per_seed.push_back({MethodName(j.method), j.seed, j.gamma, j.samples, 0.0,
                              -std::numeric_limits<double>::infinity()});
      it = agg_index.find(key);
    }
    ExperimentReport::SeedAggregate& a = rep.per_seed[it->second];
    for (const RegretEntry& e : j.entries) {
      a.average += e.regret / static_cast<double>(cfg.test_instances * cfg.gamma_test.size());
      a.worst = std::max(a.worst, e.regret);
    }
  }

  // Summary over seeds per (variant, method).
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (Method m : cfg.methods) {
      for (const char* stat : {"average", "worst"}) {
        std::vector<double> vals;
        double gsum = 0.0;
        for (int s = 0; s < cfg.seeds; ++s) {
          const auto& a = rep.per_seed[agg_index.at({v, static_cast<int>(m), s})];
          vals.push_back(std::string(stat) == "average" ? a.average : a.worst);
          gsum += a.gamma;
        }
        double mean = 0.0;
        for (double x : vals) mean += x / vals.size();
        double var = 0.0;
        for (double x : vals) var += (x - mean) * (x - mean);
        const double se = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1) / vals.size()) : 0.0;
        rep.summary.push_back({MethodName(m), stat, cfg.budget, gsum / cfg.seeds,
                               variants[v].samples, mean, se});
      }
    }
  }

  {
    std::ofstream f(out / "regret.csv");
    f << "method,seed,instance,gamma_test,gamma,samples,best,achieved,regret,mc_stderr\n";
    for (const RegretRow& r : rep.rows) {
      f << r.method << ',' << r.seed << ',' << r.instance << ',' << FormatDouble(r.gamma_test) << ','
        << FormatDouble(r.gamma) << ',' << r.samples << ',' << FormatDouble(r.entry.best) << ','
        << FormatDouble(r.entry.achieved) << ',' << FormatDouble(r.entry.regret) << ','
        << FormatDouble(r.entry.stderr_mc) << '\n';
    }
    if (!f) Fail(ErrorCode::kIo, "cannot write regret.csv");
  }
  {
    std::ofstream f(out / "seeds.csv");
    f << "method,seed,gamma,samples,average_regret,worst_regret\n";
    for (const auto& a : rep.per_seed) {
      f << a.method << ',' << a.seed << ',' << FormatDouble(a.gamma) << ',' << a.samples << ','
        << FormatDouble(a.average) << ',' << FormatDouble(a.worst) << '\n';
    }
  }
  {
    std::ofstream f(out / "summary.csv");
    f << "method,statistic,budget,gamma,samples,mean,stderr\n";
    for (const SummaryRow& r : rep.summary) {
      f << r.method << ',' << r.statistic << ',' << FormatDouble(r.budget) << ','
        << FormatDouble(r.gamma) << ',' << r.samples << ',' << FormatDouble(r.mean) << ','
        << FormatDouble(r.stderr_seeds) << '\n';
    }
  }
  {
    nlohmann::json m;
    m["tool"] = "rpatrol";
    m["version"] = "0.1.0";
    m["testbed"] = bed->name();
    m["truth"] = bed->truth_kind();
    m["base_seed"] = cfg.base_seed;
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < cfg.seeds; ++s) seeds.push_back(seed_value(s));
    m["seed_streams"] = seeds;
    std::vector<std::string> methods;
    for (Method x : cfg.methods) methods.push_back(MethodName(x));
    m["methods"] = methods;
    m["study"] = cfg.study;
    m["gamma_test"] = cfg.gamma_test;
    m["samples"] = cfg.samples;
    m["threads"] = cfg.threads;
    nlohmann::json sel = nlohmann::json::array();
    for (const auto& [key, g] : chosen) {
      sel.push_back({{"method", MethodName(static_cast<Method>(std::get<1>(key)))},
                     {"seed", std::get<2>(key)},
                     {"gamma", g}});
    }
    m["selected_gamma"] = sel;
    m["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream f(out / "manifest.json");
    f << m.dump(2) << "\n";
  }
  return rep;
}

ExperimentReport RunExperimentFile(const std::string& config_path,
                                   const std::string& output_override) {
  Config c = Config::Load(config_path);
  if (!output_override.empty()) c.Set("output_dir", output_override);
  return RunExperiment(ExperimentConfig::FromConfig(c));
}

}  // namespace rpatrol
