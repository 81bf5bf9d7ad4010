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

#ifndef RPATROL_ENSEMBLE_HPP_
#define RPATROL_ENSEMBLE_HPP_

#include <iosfwd>
#include <span>
#include <vector>

#include "rpatrol/rng.hpp"
#include "rpatrol/states.hpp"

namespace rpatrol {

// Weighted particles {(w_n, z_n)}: an empirical adversary distribution.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  // Weights must be finite, non-negative, and not all zero. They are stored
  // as given; call Normalize() (or use the factories) for a distribution.
  ParticleEnsemble(StateMatrix particles, std::vector<double> weights);

  static ParticleEnsemble Uniform(StateMatrix particles);
  // Normalizes exp(log_weights) with max-subtraction. Throws kDegenerate when
  // no log-weight is finite.
  static ParticleEnsemble FromLogWeights(StateMatrix particles,
                                         std::span<const double> log_weights);
  static ParticleEnsemble PointMass(std::span<const double> z);

  std::size_t size() const { return particles_.rows(); }
  std::size_t dim() const { return particles_.dim(); }
  std::span<const double> particle(std::size_t i) const { return particles_.row(i); }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }
  const StateMatrix& particles() const { return particles_; }
  bool normalized() const { return normalized_; }

  void Normalize();

  // sum_n w_n f(z_n); requires normalized weights.
  template <typename F>
  double Expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (weights_[i] != 0.0) acc += weights_[i] * f(particle(i));
    }
    return acc;
  }

 private:
  StateMatrix particles_;
  std::vector<double> weights_;
  bool normalized_ = false;
};

// Effective sample size 1 / sum w_n^2 of normalized weights; in [1, N].
double Ess(const ParticleEnsemble& ensemble);

// N i.i.d. draws proportional to the weights; output weights are uniform.
ParticleEnsemble MultinomialResample(const ParticleEnsemble& ensemble, Rng& rng);

// Ancestor indices for one multinomial resampling of normalized weights.
std::vector<std::size_t> MultinomialIndices(std::span<const double> weights,
                                            std::size_t count, Rng& rng);

// CSV with header particle_index,weight,z_1..z_K; doubles in shortest
// round-trip form.
void WriteEnsembleCsv(const ParticleEnsemble& ensemble, std::ostream& out);
ParticleEnsemble ReadEnsembleCsv(std::istream& in);

}  // namespace rpatrol

#endif  // RPATROL_ENSEMBLE_HPP_
