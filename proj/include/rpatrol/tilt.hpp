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

#ifndef RPATROL_TILT_HPP_
#define RPATROL_TILT_HPP_

#include <memory>
#include <span>

#include "rpatrol/score_model.hpp"
#include "rpatrol/utility.hpp"

namespace rpatrol {

// A scalar function of the adversary action whose exponential tilts the
// base model: tau(z) ~ p(z | c) exp(-gamma * potential(z)).
class Potential {
 public:
  virtual ~Potential() = default;
  virtual std::size_t dim() const = 0;
  virtual double Value(std::span<const double> z) const = 0;
  // grad += scale * d potential / dz
  virtual void AddGradient(std::span<const double> z, double scale,
                           std::span<double> grad) const = 0;
};

// U(pi, z) for a defender mixed strategy.
class DefenderUtilityPotential : public Potential {
 public:
  DefenderUtilityPotential(MixedDefenderStrategy pi, UtilityParams params);

  std::size_t dim() const override { return params_.dim(); }
  double Value(std::span<const double> z) const override;
  void AddGradient(std::span<const double> z, double scale,
                   std::span<double> grad) const override;

  const MixedDefenderStrategy& strategy() const { return pi_; }
  const UtilityParams& params() const { return params_; }

 private:
  MixedDefenderStrategy pi_;
  UtilityParams params_;
};

// offset + coeffs . z
class LinearPotential : public Potential {
 public:
  explicit LinearPotential(Vec coeffs, double offset = 0.0)
      : coeffs_(std::move(coeffs)), offset_(offset) {}

  std::size_t dim() const override { return coeffs_.size(); }
  double Value(std::span<const double> z) const override;
  void AddGradient(std::span<const double> z, double scale,
                   std::span<double> grad) const override;

 private:
  Vec coeffs_;
  double offset_;
};

// Adversary pure strategy tau(z) ~ p(z | c) exp(-gamma * potential(z)).
struct TiltSpec {
  double gamma = 0.0;
  std::shared_ptr<const Potential> potential;  // null: the base model itself

  static TiltSpec Base() { return {}; }
  static TiltSpec ForDefender(double gamma, MixedDefenderStrategy pi,
                              UtilityParams params);
  static TiltSpec Make(double gamma, std::shared_ptr<const Potential> potential);

  // True when the tilt is the identity (gamma == 0 or no potential).
  bool trivial() const { return gamma == 0.0 || !potential; }
  // log of the unnormalized tilt factor: -gamma * potential(z).
  double LogFactor(std::span<const double> z) const;
  // grad += d LogFactor / dz
  void AddLogFactorGradient(std::span<const double> z, std::span<double> grad) const;
  // The defender strategy for utility tilts, else nullptr.
  const MixedDefenderStrategy* defender() const;
  void Validate() const;
};

// Phi_t(z^t) = exp(-gamma U(z0_hat)) with z0_hat the Tweedie estimate
// (z0_hat = z^0 at t = 0).
double TwistingValue(const TiltSpec& tilt, std::span<const double> z_t, int t,
                     const ScoreModel& score, const Context& c);
double LogTwistingValue(const TiltSpec& tilt, std::span<const double> z_t, int t,
                        const ScoreModel& score, const Context& c);

}  // namespace rpatrol

#endif  // RPATROL_TILT_HPP_
