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

#include "rpatrol/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rpatrol/error.hpp"

namespace rpatrol {

Vec ScoreModel::Score(std::span<const double> z, int t, const Context& c) const {
  Require(z.size() == dim(), "score: state dimension mismatch");
  Vec out(dim());
  ScoreBatch(z, t, c, out);
  return out;
}

AffineMap AffineMap::Constant(Vec offset) {
  return AffineMap{{}, std::move(offset)};
}

Vec AffineMap::Apply(const Context& c) const {
  Vec out = offset;
  if (matrix.empty()) return out;
  const std::size_t k = offset.size();
  Require(matrix.size() == k * c.size(), "affine map: context dimension mismatch");
  for (std::size_t i = 0; i < k; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      acc += matrix[i * c.size() + j] * c.features[j];
    }
    out[i] += acc;
  }
  return out;
}

GaussianMixtureModel::GaussianMixtureModel(Vec weights,
                                           std::vector<AffineMap> means,
                                           Vec stddevs)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      stddevs_(std::move(stddevs)) {
  Require(!weights_.empty(), "mixture: at least one component required");
  Require(means_.size() == weights_.size() && stddevs_.size() == weights_.size(),
          "mixture: component arrays differ in length");
  double total = 0.0;
  for (double w : weights_) {
    Require(w >= 0.0 && std::isfinite(w), "mixture: weights must be non-negative");
    total += w;
  }
  Require(std::abs(total - 1.0) <= 1e-12, "mixture: weights must sum to 1");
  for (double s : stddevs_) {
    Require(s > 0.0 && std::isfinite(s), "mixture: stddev must be positive");
  }
  dim_ = means_.front().offset.size();
  Require(dim_ > 0, "mixture: zero-dimensional means");
  context_dim_ = means_.front().matrix.empty() ? 0 : means_.front().matrix.size() / dim_;
  for (const AffineMap& m : means_) {
    Require(m.offset.size() == dim_, "mixture: inconsistent mean dimension");
    Require(m.matrix.empty() || m.matrix.size() == dim_ * context_dim_,
            "mixture: inconsistent context dimension");
    if (context_dim_ > 0 && m.matrix.empty()) {
      Fail(ErrorCode::kInvalidArgument, "mixture: inconsistent context dimension");
    }
  }
}

Vec GaussianMixtureModel::Mean(std::size_t k, const Context& c) const {
  return means_.at(k).Apply(c);
}

namespace {

// Component parameters resolved for one context and smoothing level.
struct Resolved {
  std::vector<Vec> means;
  Vec inv_var;
  Vec log_norm;  // log w_k - (d/2) log(2 pi var_k)
};

Resolved Resolve(const GaussianMixtureModel& m, const Context& c,
                 double extra_variance) {
  const std::size_t n = m.components();
  const double d = static_cast<double>(m.dim());
  Resolved r;
  r.means.resize(n);
  r.inv_var.resize(n);
  r.log_norm.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.means[k] = m.Mean(k, c);
    const double var = m.stddevs()[k] * m.stddevs()[k] + extra_variance;
    r.inv_var[k] = 1.0 / var;
    r.log_norm[k] = (m.weights()[k] > 0.0 ? std::log(m.weights()[k])
                                          : -std::numeric_limits<double>::infinity()) -
                    0.5 * d * std::log(2.0 * std::numbers::pi * var);
  }
  return r;
}

// Fills logs[k] = log w_k N(z; mu_k, var_k I); returns the maximum.
double LogTerms(const Resolved& r, std::span<const double> z, double* logs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < r.means.size(); ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double diff = z[i] - r.means[k][i];
      sq += diff * diff;
    }
    logs[k] = r.log_norm[k] - 0.5 * sq * r.inv_var[k];
    peak = std::max(peak, logs[k]);
  }
  return peak;
}

double LogDensityResolved(const Resolved& r, std::span<const double> z,
                          std::vector<double>& logs) {
  logs.resize(r.means.size());
  const double peak = LogTerms(r, z, logs.data());
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - peak);
  return peak + std::log(acc);
}

void ScoreResolved(const Resolved& r, std::span<const double> z,
                   std::vector<double>& logs, std::span<double> out) {
  logs.resize(r.means.size());
  const double peak = LogTerms(r, z, logs.data());
  double total = 0.0;
  for (double& l : logs) {
    l = std::exp(l - peak);
    total += l;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const double resp = logs[k] / total * r.inv_var[k];
    for (std::size_t i = 0; i < z.size(); ++i) {
      out[i] -= resp * (z[i] - r.means[k][i]);
    }
  }
}

}  // namespace

double GaussianMixtureModel::LogDensity(std::span<const double> z, const Context& c,
                                        double extra_variance) const {
  Require(z.size() == dim_, "mixture: state dimension mismatch");
  std::vector<double> logs;
  return LogDensityResolved(Resolve(*this, c, extra_variance), z, logs);
}

void GaussianMixtureModel::Score(std::span<const double> z, const Context& c,
                                 double extra_variance, std::span<double> out) const {
  Require(z.size() == dim_ && out.size() == dim_, "mixture: state dimension mismatch");
  std::vector<double> logs;
  ScoreResolved(Resolve(*this, c, extra_variance), z, logs, out);
}

Vec GaussianMixtureModel::Sample(const Context& c, Rng& rng) const {
  double u = rng.Uniform();
  std::size_t k = 0;
  for (; k + 1 < weights_.size(); ++k) {
    if (u < weights_[k]) break;
    u -= weights_[k];
  }
  Vec z = Mean(k, c);
  for (double& v : z) v += stddevs_[k] * rng.Normal();
  return z;
}

Vec AnalyticScore(const GaussianMixtureModel& model, std::span<const double> z,
                  int t, const Context& c, const NoiseSchedule& schedule) {
  Require(t >= 0 && t <= schedule.steps(), "analytic score: step out of range");
  Vec out(model.dim());
  model.Score(z, c, schedule.CumulativeVariance(t), out);
  return out;
}

void MixtureScoreModel::ScoreBatch(std::span<const double> states, int t,
                                   const Context& c, std::span<double> out) const {
  const std::size_t k = model_.dim();
  Require(states.size() % k == 0 && out.size() == states.size(),
          "score batch: buffer size mismatch");
  Require(t >= 0 && t <= schedule_.steps(), "score batch: step out of range");
  const Resolved r = Resolve(model_, c, schedule_.CumulativeVariance(t));
  std::vector<double> logs;
  for (std::size_t i = 0; i < states.size() / k; ++i) {
    ScoreResolved(r, states.subspan(i * k, k), logs, out.subspan(i * k, k));
  }
}

}  // namespace rpatrol
