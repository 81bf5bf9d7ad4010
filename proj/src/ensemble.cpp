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

#include "rpatrol/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "rpatrol/error.hpp"
#include "rpatrol/text.hpp"

namespace rpatrol {

ParticleEnsemble::ParticleEnsemble(StateMatrix particles, std::vector<double> weights)
    : particles_(std::move(particles)), weights_(std::move(weights)) {
  Require(particles_.rows() >= 1, "ensemble: at least one particle required");
  Require(weights_.size() == particles_.rows(), "ensemble: weight count mismatch");
  double total = 0.0;
  for (double w : weights_) {
    Require(std::isfinite(w) && w >= 0.0, "ensemble: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) Fail(ErrorCode::kDegenerate, "ensemble: all weights are zero");
  normalized_ = std::abs(total - 1.0) <= 1e-9;
}

ParticleEnsemble ParticleEnsemble::Uniform(StateMatrix particles) {
  const std::size_t n = particles.rows();
  Require(n >= 1, "ensemble: at least one particle required");
  ParticleEnsemble e(std::move(particles), std::vector<double>(n, 1.0 / n));
  e.normalized_ = true;
  return e;
}

ParticleEnsemble ParticleEnsemble::FromLogWeights(StateMatrix particles,
                                                  std::span<const double> log_weights) {
  Require(log_weights.size() == particles.rows(), "ensemble: weight count mismatch");
  double peak = -std::numeric_limits<double>::infinity();
  for (double l : log_weights) {
    if (std::isnan(l)) Fail(ErrorCode::kNumeric, "ensemble: NaN log-weight");
    peak = std::max(peak, l);
  }
  if (!std::isfinite(peak)) {
    Fail(ErrorCode::kDegenerate, "ensemble: no particle has a finite log-weight");
  }
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - peak);
    total += w[i];
  }
  for (double& v : w) v /= total;
  ParticleEnsemble e(std::move(particles), std::move(w));
  e.normalized_ = true;
  return e;
}

ParticleEnsemble ParticleEnsemble::PointMass(std::span<const double> z) {
  StateMatrix m(1, z.size(), std::vector<double>(z.begin(), z.end()));
  return Uniform(std::move(m));
}

void ParticleEnsemble::Normalize() {
  double total = 0.0;
  for (double w : weights_) total += w;
  for (double& w : weights_) w /= total;
  normalized_ = true;
}

double Ess(const ParticleEnsemble& ensemble) {
  Require(ensemble.normalized(), "ess: weights must be normalized");
  double sq = 0.0;
  for (double w : ensemble.weights()) sq += w * w;
  return 1.0 / sq;
}

std::vector<std::size_t> MultinomialIndices(std::span<const double> weights,
                                            std::size_t count, Rng& rng) {
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) Fail(ErrorCode::kDegenerate, "resample: zero total weight");
  std::vector<std::size_t> idx(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double u = rng.Uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t j = static_cast<std::size_t>(it - cdf.begin());
    if (j >= weights.size()) j = weights.size() - 1;
    // upper_bound skips zero-weight entries except at the front.
    while (weights[j] == 0.0 && j + 1 < weights.size()) ++j;
    idx[n] = j;
  }
  return idx;
}

ParticleEnsemble MultinomialResample(const ParticleEnsemble& ensemble, Rng& rng) {
  const std::size_t n = ensemble.size();
  std::vector<std::size_t> idx = MultinomialIndices(ensemble.weights(), n, rng);
  StateMatrix out(n, ensemble.dim());
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> src = ensemble.particle(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return ParticleEnsemble::Uniform(std::move(out));
}

void WriteEnsembleCsv(const ParticleEnsemble& ensemble, std::ostream& out) {
  out << "particle_index,weight";
  for (std::size_t k = 0; k < ensemble.dim(); ++k) out << ",z_" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    out << i << ',' << FormatDouble(ensemble.weight(i));
    for (double v : ensemble.particle(i)) out << ',' << FormatDouble(v);
    out << '\n';
  }
}

ParticleEnsemble ReadEnsembleCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) Fail(ErrorCode::kIo, "ensemble csv: missing header");
  const auto header = SplitFields(Trim(line));
  if (header.size() < 3 || header[0] != "particle_index" || header[1] != "weight") {
    Fail(ErrorCode::kIo, "ensemble csv: unexpected header");
  }
  const std::size_t dim = header.size() - 2;
  std::vector<double> data, weights;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const auto fields = SplitFields(Trim(line));
    if (fields.size() != dim + 2) Fail(ErrorCode::kIo, "ensemble csv: ragged row");
    weights.push_back(ParseDouble(fields[1]));
    for (std::size_t k = 0; k < dim; ++k) data.push_back(ParseDouble(fields[k + 2]));
  }
  const std::size_t n = weights.size();
  return ParticleEnsemble(StateMatrix(n, dim, std::move(data)), std::move(weights));
}

}  // namespace rpatrol
