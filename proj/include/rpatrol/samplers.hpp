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

#ifndef RPATROL_SAMPLERS_HPP_
#define RPATROL_SAMPLERS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "rpatrol/diffusion.hpp"
#include "rpatrol/ensemble.hpp"
#include "rpatrol/tilt.hpp"

namespace rpatrol {

enum class ResamplePolicy {
  kEveryStep,     // multinomial resampling before every reverse step
  kEssThreshold,  // only when ESS < ess_threshold * N
};

struct SmcOptions {
  // Proposal variance beta_hat^2 = factor * beta_t^2; factor must exceed 1.
  double proposal_factor = 1.5;
  ResamplePolicy resample = ResamplePolicy::kEveryStep;
  double ess_threshold = 0.5;
  Support support;

  void Validate() const;
};

// Per-step record of a twisted SMC run, for diagnostics and weight checks.
struct SmcStep {
  int t = 0;                  // transition z^t -> z^{t-1}
  StateMatrix from;           // z^t after resampling
  StateMatrix to;             // z^{t-1} before any support clip
  std::vector<double> log_increment;  // log of the incremental weight
  double ess_before = 0.0;    // ESS of the weights entering this step
  bool resampled = false;
};

struct SmcTrace {
  std::vector<double> initial_log_weights;
  std::vector<SmcStep> steps;
};

// Twisted SMC targeting tau(z) ~ p(z | c) exp(-gamma U(z)). Particles start at
// N(0, S_T I) with weights Phi_T, are resampled, propagated with the adjusted
// score s - gamma grad U(z0_hat) under variance beta_hat^2, and reweighted by
// p(z^{t-1}|z^t) Phi_{t-1}(z^{t-1}) / (p_hat(z^{t-1}|z^t) Phi_t(z^t)).
// A trivial tilt proposes from the base transition, giving uniform weights.
ParticleEnsemble TwistedSmc(const ScoreModel& score, const Context& c,
                            const TiltSpec& tilt, std::size_t n, Rng& rng,
                            const SmcOptions& options = {},
                            SmcTrace* trace = nullptr);

// Self-normalized importance sampling with the base model as proposal.
ParticleEnsemble ImportanceSampling(const ScoreModel& score, const Context& c,
                                    const TiltSpec& tilt, std::size_t n, Rng& rng,
                                    const Support& support = Support::None());

// Guided reverse diffusion with the adjusted score and no reweighting. An
// approximation: its law need not equal the tilt.
ParticleEnsemble DpsSample(const ScoreModel& score, const Context& c,
                           const TiltSpec& tilt, std::size_t n, Rng& rng,
                           const Support& support = Support::None());

enum class SamplerKind { kTwistedSmc, kImportance, kDps };

std::string SamplerName(SamplerKind kind);
SamplerKind ParseSamplerKind(const std::string& name);

// Produces an empirical distribution for an adversary tilt.
class TiltSampler {
 public:
  virtual ~TiltSampler() = default;
  virtual std::size_t dim() const = 0;
  virtual ParticleEnsemble Sample(const TiltSpec& tilt, std::size_t n,
                                  Rng& rng) const = 0;
};

// Samples tilts of a diffusion model with one of the three samplers.
class DiffusionTiltSampler : public TiltSampler {
 public:
  DiffusionTiltSampler(std::shared_ptr<const ScoreModel> score, Context context,
                       SamplerKind kind, SmcOptions options = {});

  std::size_t dim() const override { return score_->dim(); }
  ParticleEnsemble Sample(const TiltSpec& tilt, std::size_t n,
                          Rng& rng) const override;

  const ScoreModel& score() const { return *score_; }
  const Context& context() const { return context_; }

 private:
  std::shared_ptr<const ScoreModel> score_;
  Context context_;
  SamplerKind kind_;
  SmcOptions options_;
};

// Exact tilts of a finitely supported base distribution; ignores n and rng.
class DiscreteTiltSampler : public TiltSampler {
 public:
  DiscreteTiltSampler(StateMatrix points, std::vector<double> base_probs);

  std::size_t dim() const override { return points_.dim(); }
  ParticleEnsemble Sample(const TiltSpec& tilt, std::size_t n,
                          Rng& rng) const override;

  const StateMatrix& points() const { return points_; }
  const std::vector<double>& base_probs() const { return base_; }

 private:
  StateMatrix points_;
  std::vector<double> base_;
};

}  // namespace rpatrol

#endif  // RPATROL_SAMPLERS_HPP_
