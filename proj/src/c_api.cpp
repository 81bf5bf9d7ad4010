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


#include "rpatrol/c_api.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "rpatrol/config.hpp"
#include "rpatrol/denoiser.hpp"
#include "rpatrol/diffusion.hpp"
#include "rpatrol/double_oracle.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/harness.hpp"
#include "rpatrol/matrix_game.hpp"
#include "rpatrol/scenario.hpp"

struct rp_config {
  rpatrol::Config cfg;
};

struct rp_model {
  std::shared_ptr<const rpatrol::DenoiserNet> net;
};

struct rp_solution {
  rpatrol::MixedDefenderStrategy pi;
  std::unique_ptr<rpatrol::DefenderSolution> full;
};

namespace {

thread_local std::string g_last_error;

rp_status ToStatus(rpatrol::ErrorCode code) {
  return static_cast<rp_status>(static_cast<int>(code));
}

template <typename Fn>
rp_status Guard(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return RP_OK;
  } catch (const rpatrol::Error& e) {
    g_last_error = e.what();
    return ToStatus(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RP_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RP_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return RP_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  rpatrol::Require(p != nullptr, std::string(what) + " must not be NULL");
}

// Keys rp_solve accepts on top of the experiment schema.
const char* const kSolveKeys[] = {"method", "instance", "split", "seed"};

struct SolveSetup {
  rpatrol::ExperimentConfig exp;
  rpatrol::Method method;
  rpatrol::Split split;
  int instance;
  int seed;
};

SolveSetup ReadSolveSetup(const rpatrol::Config& c) {
  rpatrol::Config rest;
  for (const auto& [k, v] : c.values()) {
    bool extra = false;
    for (const char* key : kSolveKeys) extra = extra || k == key;
    if (!extra) rest.Set(k, v);
  }
  SolveSetup s;
  s.method = rpatrol::ParseMethod(c.GetString("method", "do_smc"));
  rest.Set("methods", rpatrol::MethodName(s.method));
  s.exp = rpatrol::ExperimentConfig::FromConfig(rest);
  const std::string split = c.GetString("split", "test");
  if (split == "test") {
    s.split = rpatrol::Split::kTest;
  } else if (split == "validation") {
    s.split = rpatrol::Split::kValidation;
  } else {
    rpatrol::Fail(rpatrol::ErrorCode::kConfig, "split must be 'test' or 'validation'");
  }
  s.instance = static_cast<int>(c.GetInt("instance", 0));
  s.seed = static_cast<int>(c.GetInt("seed", 0));
  if (s.instance < 0 || s.seed < 0) {
    rpatrol::Fail(rpatrol::ErrorCode::kConfig, "instance and seed must be >= 0");
  }
  return s;
}

rpatrol::Instance MakeSolveInstance(const SolveSetup& s, const rpatrol::Testbed& bed) {
  // Matches the experiment runner's per-seed instance stream.
  return bed.MakeInstance(s.split, s.instance,
                          rpatrol::DeriveSeed(s.exp.base_seed, {static_cast<std::uint64_t>(s.seed)}));
}

}  // namespace

extern "C" {

const char* rp_version(void) { return "0.1.0"; }

const char* rp_status_string(rp_status status) {
  switch (status) {
    case RP_OK: return "ok";
    case RP_INVALID_ARGUMENT: return "invalid argument";
    case RP_SCHEDULE: return "invalid noise schedule";
    case RP_NUMERIC: return "numerical failure";
    case RP_DEGENERATE: return "degenerate weights";
    case RP_PRECISION: return "insufficient precision";
    case RP_IO: return "i/o error";
    case RP_TRAINING: return "training diverged";
    case RP_INTERNAL: return "internal error";
    case RP_CONFIG: return "configuration error";
  }
  return "unknown status";
}

const char* rp_last_error(void) { return g_last_error.c_str(); }

rp_status rp_config_load(const char* path, rp_config** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = nullptr;
    auto h = std::make_unique<rp_config>();
    h->cfg = rpatrol::Config::Load(path);
    *out = h.release();
  });
}

rp_status rp_config_parse(const char* text, rp_config** out) {
  return Guard([&] {
    NotNull(text, "text");
    NotNull(out, "out");
    *out = nullptr;
    auto h = std::make_unique<rp_config>();
    h->cfg = rpatrol::Config::Parse(text);
    *out = h.release();
  });
}

rp_status rp_config_set(rp_config* cfg, const char* key, const char* value) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(key, "key");
    NotNull(value, "value");
    cfg->cfg.Set(key, value);
  });
}

rp_status rp_config_get(const rp_config* cfg, const char* key, char* buf, size_t buf_len,
                        size_t* needed) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(key, "key");
    rpatrol::Require(cfg->cfg.Has(key), std::string("missing key '") + key + "'");
    const std::string v = cfg->cfg.GetString(key, "");
    if (needed != nullptr) *needed = v.size() + 1;
    rpatrol::Require(buf != nullptr && buf_len > v.size(), "buffer too small");
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

void rp_config_free(rp_config* cfg) { delete cfg; }

rp_status rp_generate_dataset(const rp_config* cfg, const char* out_dir) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(out_dir, "out_dir");
    const rpatrol::Config& c = cfg->cfg;
    c.CheckKnown({"preset", "train", "validation", "test", "nodes", "edges", "feat_dim",
                  "budget", "c_noise", "seed"});
    const std::string preset = c.GetString("preset", "default");
    rpatrol::DatasetConfig d;
    if (preset == "default") {
      d = rpatrol::DatasetConfig::Default();
    } else if (preset == "desk") {
      d = rpatrol::DatasetConfig::Desk();
    } else {
      rpatrol::Fail(rpatrol::ErrorCode::kConfig, "preset must be 'default' or 'desk'");
    }
    d.train = static_cast<int>(c.GetInt("train", d.train));
    d.validation = static_cast<int>(c.GetInt("validation", d.validation));
    d.test = static_cast<int>(c.GetInt("test", d.test));
    d.nodes = static_cast<int>(c.GetInt("nodes", d.nodes));
    d.edges = static_cast<int>(c.GetInt("edges", d.edges));
    d.feat_dim = static_cast<int>(c.GetInt("feat_dim", d.feat_dim));
    d.budget = c.GetDouble("budget", d.budget);
    d.c_noise = c.GetDouble("c_noise", d.c_noise);
    d.seed = c.GetUint("seed", d.seed);
    try {
      d.Validate();
    } catch (const rpatrol::Error& e) {
      rpatrol::Fail(rpatrol::ErrorCode::kConfig, e.what());
    }
    rpatrol::WriteDataset(rpatrol::BuildDataset(d), out_dir);
  });
}

rp_status rp_train_denoiser(const rp_config* cfg, const char* model_path,
                            rp_epoch_callback on_epoch, void* user) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(model_path, "model_path");
    const rpatrol::Config& c = cfg->cfg;
    c.CheckKnown({"dataset", "epochs", "lr", "batch_size", "hidden", "steps", "beta", "seed"});
    const std::string dir = c.GetString("dataset", "");
    if (dir.empty()) rpatrol::Fail(rpatrol::ErrorCode::kConfig, "missing key 'dataset'");
    const rpatrol::Dataset data = rpatrol::ReadDataset(dir);
    rpatrol::StateMatrix z, ctx;
    rpatrol::SplitMatrices(data.train, z, ctx);

    rpatrol::TrainConfig tc;
    tc.epochs = static_cast<int>(c.GetInt("epochs", tc.epochs));
    tc.learning_rate = c.GetDouble("lr", tc.learning_rate);
    tc.batch_size = static_cast<std::size_t>(c.GetInt("batch_size", static_cast<long>(tc.batch_size)));
    if (c.Has("hidden")) {
      tc.hidden.clear();
      for (double h : c.GetDoubles("hidden", {})) tc.hidden.push_back(static_cast<int>(h));
    }
    const int steps = static_cast<int>(c.GetInt("steps", 100));
    const double beta = c.GetDouble("beta", 0.0);
    rpatrol::NoiseSchedule schedule = rpatrol::NoiseSchedule::RandomWalk(steps, beta);
    if (beta == 0.0) {
      // Largest per-coordinate variance of the training data.
      double var = 0.0;
      for (std::size_t j = 0; j < z.dim(); ++j) {
        double m = 0.0, s = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) m += z.at(i, j) / z.rows();
        for (std::size_t i = 0; i < z.rows(); ++i) s += (z.at(i, j) - m) * (z.at(i, j) - m);
        var = std::max(var, s / std::max<std::size_t>(1, z.rows() - 1));
      }
      schedule = rpatrol::NoiseSchedule::ForDataVariance(steps, std::max(var, 1e-6));
    }
    rpatrol::Rng rng(c.GetUint("seed", 0));
    const rpatrol::TrainResult r = rpatrol::TrainDenoiser(z, ctx, schedule, tc, rng);
    if (on_epoch != nullptr) {
      for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
        on_epoch(static_cast<int>(e), r.epoch_loss[e], user);
      }
    }
    rpatrol::SaveDenoiserFile(r.net, model_path);
  });
}

rp_status rp_model_load(const char* path, rp_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = nullptr;
    auto h = std::make_unique<rp_model>();
    h->net = std::make_shared<rpatrol::DenoiserNet>(rpatrol::LoadDenoiserFile(path));
    *out = h.release();
  });
}

size_t rp_model_dim(const rp_model* model) { return model ? model->net->dim() : 0; }

size_t rp_model_context_dim(const rp_model* model) {
  return model ? model->net->context_dim() : 0;
}

rp_status rp_model_sample(const rp_model* model, const double* context, size_t context_len,
                          size_t n, uint64_t seed, double* out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(out, "out");
    rpatrol::Require(context_len == model->net->context_dim(), "context length mismatch");
    rpatrol::Require(context_len == 0 || context != nullptr, "context must not be NULL");
    rpatrol::Context c;
    c.features.assign(context, context + context_len);
    rpatrol::Rng rng(seed);
    const rpatrol::StateMatrix s = rpatrol::AncestralSample(*model->net, c, n, rng);
    std::copy(s.data().begin(), s.data().end(), out);
  });
}

void rp_model_free(rp_model* model) { delete model; }

rp_status rp_solve(const rp_config* cfg, rp_solution** out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(out, "out");
    *out = nullptr;
    const SolveSetup s = ReadSolveSetup(cfg->cfg);
    const auto bed = rpatrol::MakeTestbed(s.exp);
    const rpatrol::Instance inst = MakeSolveInstance(s, *bed);
    const std::uint64_t job = rpatrol::DeriveSeed(
        s.exp.base_seed, {rpatrol::HashString(rpatrol::MethodName(s.method)),
                          static_cast<std::uint64_t>(s.seed), static_cast<std::uint64_t>(s.split),
                          static_cast<std::uint64_t>(s.instance)});
    rpatrol::MethodResult r = rpatrol::SolveInstance(s.method, inst, s.exp, bed->params(),
                                                     s.exp.gamma, s.exp.samples, job);
    auto h = std::make_unique<rp_solution>();
    h->pi = std::move(r.pi);
    h->full = std::move(r.solution);
    *out = h.release();
  });
}

size_t rp_solution_num_atoms(const rp_solution* sol) { return sol ? sol->pi.size() : 0; }

size_t rp_solution_dim(const rp_solution* sol) {
  return sol && sol->pi.size() > 0 ? sol->pi.atoms[0].x.size() : 0;
}

rp_status rp_solution_atom(const rp_solution* sol, size_t index, double* x_out,
                           double* prob_out) {
  return Guard([&] {
    NotNull(sol, "sol");
    rpatrol::Require(index < sol->pi.size(), "atom index out of range");
    const auto& a = sol->pi.atoms[index];
    if (x_out != nullptr) std::copy(a.x.begin(), a.x.end(), x_out);
    if (prob_out != nullptr) *prob_out = sol->pi.probs[index];
  });
}

double rp_solution_value(const rp_solution* sol) {
  if (sol == nullptr || !sol->full) return std::numeric_limits<double>::quiet_NaN();
  return sol->full->value;
}

rp_status rp_solution_save_json(const rp_solution* sol, const char* path) {
  return Guard([&] {
    NotNull(sol, "sol");
    NotNull(path, "path");
    std::ofstream f(path);
    if (!f) rpatrol::Fail(rpatrol::ErrorCode::kIo, std::string("cannot write '") + path + "'");
    if (sol->full) {
      rpatrol::WriteSolutionJson(*sol->full, f);
    } else {
      rpatrol::WriteStrategyJson(sol->pi, f);
    }
    if (!f) rpatrol::Fail(rpatrol::ErrorCode::kIo, std::string("write failed for '") + path + "'");
  });
}

rp_status rp_solution_load_json(const char* path, rp_solution** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = nullptr;
    std::ifstream f(path);
    if (!f) rpatrol::Fail(rpatrol::ErrorCode::kIo, std::string("cannot read '") + path + "'");
    auto h = std::make_unique<rp_solution>();
    h->pi = rpatrol::ReadStrategyJson(f);
    *out = h.release();
  });
}

void rp_solution_free(rp_solution* sol) { delete sol; }

rp_status rp_evaluate(const rp_config* cfg, const rp_solution* sol, double gamma_test,
                      rp_regret* out) {
  return Guard([&] {
    NotNull(cfg, "cfg");
    NotNull(sol, "sol");
    NotNull(out, "out");
    rpatrol::Require(gamma_test >= 0.0, "gamma_test must be >= 0");
    const SolveSetup s = ReadSolveSetup(cfg->cfg);
    const auto bed = rpatrol::MakeTestbed(s.exp);
    rpatrol::Require(rp_solution_dim(sol) == bed->dim(), "solution dimension does not match testbed");
    const rpatrol::Instance inst = MakeSolveInstance(s, *bed);
    const rpatrol::ParticleEnsemble truth = bed->TruthLaw(inst, gamma_test);
    rpatrol::RegretEntry e =
        rpatrol::EvaluateRegret(sol->pi, truth, bed->params(), s.exp.budget, s.exp.solver.mirror);
    if (bed->exact_truth()) e.stderr_mc = 0.0;
    out->best = e.best;
    out->achieved = e.achieved;
    out->regret = e.regret;
    out->mc_stderr = e.stderr_mc;
  });
}

rp_status rp_run_experiment(const char* config_path, const char* out_dir) {
  return Guard([&] {
    NotNull(config_path, "config_path");
    rpatrol::RunExperimentFile(config_path, out_dir ? out_dir : "");
  });
}

rp_status rp_solve_matrix_game(size_t rows, size_t cols, const double* payoff, double* pi,
                               double* sigma, double* value) {
  return Guard([&] {
    NotNull(payoff, "payoff");
    rpatrol::Require(rows > 0 && cols > 0, "matrix must be non-empty");
    rpatrol::PayoffMatrix a(rows, cols, std::vector<double>(payoff, payoff + rows * cols));
    const rpatrol::SubgameEquilibrium eq = rpatrol::SolveMatrixGame(a);
    if (pi != nullptr) std::copy(eq.pi.begin(), eq.pi.end(), pi);
    if (sigma != nullptr) std::copy(eq.sigma.begin(), eq.sigma.end(), sigma);
    if (value != nullptr) *value = eq.value;
  });
}

}  // extern "C"
