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

#include "rpatrol/tilt.hpp"

#include <cmath>

#include "rpatrol/diffusion.hpp"
#include "rpatrol/error.hpp"

namespace rpatrol {

DefenderUtilityPotential::DefenderUtilityPotential(MixedDefenderStrategy pi,
                                                   UtilityParams params)
    : pi_(std::move(pi)), params_(std::move(params)) {
  params_.Validate();
  pi_.Validate();
  for (const PatrolStrategy& a : pi_.atoms) {
    Require(a.dim() == params_.dim(), "potential: strategy dimension mismatch");
  }
}

double DefenderUtilityPotential::Value(std::span<const double> z) const {
  return MixedUtility(pi_, z, params_);
}

void DefenderUtilityPotential::AddGradient(std::span<const double> z, double scale,
                                           std::span<double> grad) const {
  if (scale == 1.0) {
    AddMixedUtilityGradZ(pi_, z, params_, grad);
    return;
  }
  Vec g(z.size(), 0.0);
  AddMixedUtilityGradZ(pi_, z, params_, g);
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += scale * g[i];
}

double LinearPotential::Value(std::span<const double> z) const {
  Require(z.size() == coeffs_.size(), "potential: dimension mismatch");
  double v = offset_;
  for (std::size_t i = 0; i < z.size(); ++i) v += coeffs_[i] * z[i];
  return v;
}

void LinearPotential::AddGradient(std::span<const double>, double scale,
                                  std::span<double> grad) const {
  for (std::size_t i = 0; i < coeffs_.size(); ++i) grad[i] += scale * coeffs_[i];
}

TiltSpec TiltSpec::ForDefender(double gamma, MixedDefenderStrategy pi,
                               UtilityParams params) {
  return Make(gamma, std::make_shared<DefenderUtilityPotential>(std::move(pi),
                                                                std::move(params)));
}

TiltSpec TiltSpec::Make(double gamma, std::shared_ptr<const Potential> potential) {
  TiltSpec t;
  t.gamma = gamma;
  t.potential = std::move(potential);
  t.Validate();
  return t;
}

void TiltSpec::Validate() const {
  Require(gamma >= 0.0 && std::isfinite(gamma), "tilt: gamma must be finite and >= 0");
}

double TiltSpec::LogFactor(std::span<const double> z) const {
  if (trivial()) return 0.0;
  const double u = potential->Value(z);
  if (!std::isfinite(u)) Fail(ErrorCode::kNumeric, "tilt: non-finite utility");
  return -gamma * u;
}

void TiltSpec::AddLogFactorGradient(std::span<const double> z,
                                    std::span<double> grad) const {
  if (trivial()) return;
  potential->AddGradient(z, -gamma, grad);
}

const MixedDefenderStrategy* TiltSpec::defender() const {
  auto* p = dynamic_cast<const DefenderUtilityPotential*>(potential.get());
  return p ? &p->strategy() : nullptr;
}

double LogTwistingValue(const TiltSpec& tilt, std::span<const double> z_t, int t,
                        const ScoreModel& score, const Context& c) {
  Require(t >= 0, "twisting: step must be >= 0");
  if (tilt.trivial()) return 0.0;
  if (t == 0) return tilt.LogFactor(z_t);
  const Vec s = score.Score(z_t, t, c);
  const Vec z0 = TweedieDenoise(z_t, t, s, score.schedule());
  return tilt.LogFactor(z0);
}

double TwistingValue(const TiltSpec& tilt, std::span<const double> z_t, int t,
                     const ScoreModel& score, const Context& c) {
  return std::exp(LogTwistingValue(tilt, z_t, t, score, c));
}

}  // namespace rpatrol
