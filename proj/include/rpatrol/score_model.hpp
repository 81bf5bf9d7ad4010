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

#ifndef RPATROL_SCORE_MODEL_HPP_
#define RPATROL_SCORE_MODEL_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "rpatrol/rng.hpp"
#include "rpatrol/schedule.hpp"

namespace rpatrol {

using Vec = std::vector<double>;

// Conditioning features (e.g. last period's patrol effort per region).
struct Context {
  Vec features;

  std::size_t size() const { return features.size(); }
};

// A conditional score function s(z^t, t, c) tied to its noise schedule.
// Implementations are immutable after construction and safe for concurrent
// reads.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t context_dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  // Scores for `states.size() / dim()` row-major states at step t >= 1.
  virtual void ScoreBatch(std::span<const double> states, int t,
                          const Context& c, std::span<double> out) const = 0;

  Vec Score(std::span<const double> z, int t, const Context& c) const;
};

// z -> offset + matrix * c, matrix stored row-major (dim x context_dim).
struct AffineMap {
  Vec matrix;
  Vec offset;

  static AffineMap Constant(Vec offset);
  Vec Apply(const Context& c) const;
};

// Isotropic Gaussian mixture whose component means depend affinely on the
// context. Smoothing by t diffusion steps keeps it a mixture with each
// component variance increased by the schedule's cumulative variance.
class GaussianMixtureModel {
 public:
  GaussianMixtureModel(Vec weights, std::vector<AffineMap> means, Vec stddevs);

  std::size_t dim() const { return dim_; }
  std::size_t context_dim() const { return context_dim_; }
  std::size_t components() const { return weights_.size(); }
  const Vec& weights() const { return weights_; }
  const Vec& stddevs() const { return stddevs_; }
  const std::vector<AffineMap>& means() const { return means_; }

  Vec Mean(std::size_t k, const Context& c) const;

  // log of the mixture density with every component variance increased by
  // extra_variance.
  double LogDensity(std::span<const double> z, const Context& c,
                    double extra_variance = 0.0) const;

  // Gradient of LogDensity with respect to z.
  void Score(std::span<const double> z, const Context& c,
             double extra_variance, std::span<double> out) const;

  // Exact draw from the clean (t = 0) mixture.
  Vec Sample(const Context& c, Rng& rng) const;

 private:
  Vec weights_;
  std::vector<AffineMap> means_;
  Vec stddevs_;
  std::size_t dim_ = 0;
  std::size_t context_dim_ = 0;
};

// Exact score of the t-step smoothed mixture at z (t = 0: clean density).
Vec AnalyticScore(const GaussianMixtureModel& model, std::span<const double> z,
                  int t, const Context& c, const NoiseSchedule& schedule);

// ScoreModel backed by the analytic mixture score.
class MixtureScoreModel : public ScoreModel {
 public:
  MixtureScoreModel(GaussianMixtureModel model, NoiseSchedule schedule)
      : model_(std::move(model)), schedule_(std::move(schedule)) {}

  std::size_t dim() const override { return model_.dim(); }
  std::size_t context_dim() const override { return model_.context_dim(); }
  const NoiseSchedule& schedule() const override { return schedule_; }
  void ScoreBatch(std::span<const double> states, int t, const Context& c,
                  std::span<double> out) const override;

  const GaussianMixtureModel& mixture() const { return model_; }

 private:
  GaussianMixtureModel model_;
  NoiseSchedule schedule_;
};

}  // namespace rpatrol

#endif  // RPATROL_SCORE_MODEL_HPP_
