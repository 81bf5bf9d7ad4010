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

#include "rpatrol/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rpatrol/error.hpp"

namespace rpatrol {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

void CheckInputs(const ScoreModel& score, const Context& c, const TiltSpec& tilt,
                 std::size_t n, const char* who) {
  Require(n >= 1, std::string(who) + ": particle count must be >= 1");
  Require(c.size() == score.context_dim(),
          std::string(who) + ": context dimension mismatch");
  tilt.Validate();
  if (tilt.potential) {
    Require(tilt.potential->dim() == score.dim(),
            std::string(who) + ": tilt dimension mismatch");
  }
}

// Normalized weights from log-weights; returns false if none is finite.
bool NormalizeLog(std::span<const double> logw, std::vector<double>& w) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) {
    if (std::isnan(v)) return false;
    mx = std::max(mx, v);
  }
  if (!std::isfinite(mx)) return false;
  double total = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] = std::exp(logw[i] - mx);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return true;
}

double EssOf(std::span<const double> w) {
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

template <typename T>
void Gather(std::vector<T>& v, std::span<const std::size_t> idx, std::size_t stride) {
  std::vector<T> out(idx.size() * stride);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(v.begin() + idx[i] * stride, stride, out.begin() + i * stride);
  }
  v.swap(out);
}

}  // namespace

void SmcOptions::Validate() const {
  Require(std::isfinite(proposal_factor) && proposal_factor > 1.0,
          "smc: proposal variance factor must exceed 1");
  Require(ess_threshold > 0.0 && ess_threshold <= 1.0,
          "smc: ess threshold must be in (0, 1]");
}

ParticleEnsemble TwistedSmc(const ScoreModel& score, const Context& c,
                            const TiltSpec& tilt, std::size_t n, Rng& rng,
                            const SmcOptions& options, SmcTrace* trace) {
  CheckInputs(score, c, tilt, n, "twisted_smc");
  options.Validate();
  const NoiseSchedule& schedule = score.schedule();
  const int T = schedule.steps();
  const std::size_t k = score.dim();
  const bool trivial = tilt.trivial();

  StateMatrix z(n, k);
  const double init_scale = std::sqrt(schedule.CumulativeVariance(T));
  for (double& v : z.data()) v = init_scale * rng.Normal();

  std::vector<double> s(n * k), xhat(n * k), logphi(n, 0.0), logw(n, 0.0);
  std::vector<double> w(n), grad(k);

  auto evaluate = [&](const StateMatrix& states, int t, std::vector<double>& sc,
                      std::vector<double>& xh, std::vector<double>& lp) {
    if (t >= 1) {
      score.ScoreBatch(states.data(), t, c, sc);
      for (double v : sc) {
        if (!std::isfinite(v)) {
          Fail(ErrorCode::kNumeric,
               "twisted_smc: non-finite score at step " + std::to_string(t));
        }
      }
      TweedieDenoiseBatch(states.data(), sc, t, schedule, xh);
    } else {
      xh = states.data();
    }
    if (trivial) return;
    for (std::size_t i = 0; i < n; ++i) {
      lp[i] = tilt.LogFactor(std::span<const double>(xh.data() + i * k, k));
    }
  };

  evaluate(z, T, s, xhat, logphi);
  logw = logphi;
  if (trace) {
    trace->initial_log_weights = logw;
    trace->steps.clear();
  }

  StateMatrix next(n, k);
  std::vector<double> s_next(n * k), xhat_next(n * k), logphi_next(n, 0.0);
  std::vector<double> incr(n, 0.0);

  for (int t = T; t >= 1; --t) {
    // Resampling. Exactly equal weights carry no information, so skip it.
    double ess = static_cast<double>(n);
    bool resampled = false;
    if (!trivial) {
      if (!NormalizeLog(logw, w)) {
        Fail(ErrorCode::kDegenerate,
             "twisted_smc: all weights vanished at step " + std::to_string(t));
      }
      ess = EssOf(w);
      const auto [lo, hi] = std::minmax_element(logw.begin(), logw.end());
      const bool uniform = *lo == *hi;
      const bool wanted = options.resample == ResamplePolicy::kEveryStep ||
                          ess < options.ess_threshold * static_cast<double>(n);
      if (wanted && !uniform) {
        std::vector<std::size_t> idx = MultinomialIndices(w, n, rng);
        Gather(z.data(), idx, k);
        Gather(s, idx, k);
        Gather(xhat, idx, k);
        Gather(logphi, idx, 1);
        std::fill(logw.begin(), logw.end(), 0.0);
        resampled = true;
      }
    }

    const double b = schedule.StepVariance(t);
    const double bh = trivial ? b : options.proposal_factor * b;
    const double sd = std::sqrt(bh);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(grad.begin(), grad.end(), 0.0);
      if (!trivial) {
        tilt.AddLogFactorGradient(std::span<const double>(xhat.data() + i * k, k), grad);
      }
      double log_p = 0.0, log_q = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = i * k + j;
        const double zj = z.data()[idx];
        const double eps = rng.Normal();
        const double zn = zj + (bh * (s[idx] + grad[j]) + sd * eps);
        next.data()[idx] = zn;
        if (!trivial) {
          const double dp = zn - (zj + b * s[idx]);
          log_p += -0.5 * dp * dp / b;
          log_q += -0.5 * eps * eps;
        }
      }
      if (!trivial) {
        // Normalizing constants of the two Gaussians differ by (k/2) log(bh/b).
        incr[i] = log_p - log_q + 0.5 * static_cast<double>(k) * std::log(bh / b);
      }
    }

    StateMatrix unclipped;
    if (t == 1 && options.support.clip) {
      if (trace) unclipped = next;
      for (std::size_t i = 0; i < n; ++i) options.support.Apply(next.row(i));
    }
    evaluate(next, t - 1, s_next, xhat_next, logphi_next);

    if (!trivial) {
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = incr[i] + logphi_next[i] - logphi[i];
        if (std::isnan(delta)) {
          Fail(ErrorCode::kNumeric,
               "twisted_smc: NaN weight at step " + std::to_string(t));
        }
        incr[i] = delta;
        logw[i] += delta;
      }
    }
    if (trace) {
      SmcStep rec;
      rec.t = t;
      rec.from = z;
      rec.to = unclipped.rows() > 0 ? unclipped : next;
      rec.log_increment = incr;
      rec.ess_before = ess;
      rec.resampled = resampled;
      trace->steps.push_back(std::move(rec));
    }
    std::swap(z, next);
    s.swap(s_next);
    xhat.swap(xhat_next);
    logphi.swap(logphi_next);
  }

  try {
    return ParticleEnsemble::FromLogWeights(std::move(z), logw);
  } catch (const Error& e) {
    Fail(e.code(), std::string(e.what()) + " (after step 1)");
  }
}

ParticleEnsemble ImportanceSampling(const ScoreModel& score, const Context& c,
                                    const TiltSpec& tilt, std::size_t n, Rng& rng,
                                    const Support& support) {
  CheckInputs(score, c, tilt, n, "importance_sampling");
  StateMatrix z = AncestralSample(score, c, n, rng, support);
  if (tilt.trivial()) return ParticleEnsemble::Uniform(std::move(z));
  std::vector<double> logw(n);
  for (std::size_t i = 0; i < n; ++i) logw[i] = tilt.LogFactor(z.row(i));
  return ParticleEnsemble::FromLogWeights(std::move(z), logw);
}

ParticleEnsemble DpsSample(const ScoreModel& score, const Context& c,
                           const TiltSpec& tilt, std::size_t n, Rng& rng,
                           const Support& support) {
  CheckInputs(score, c, tilt, n, "dps");
  const NoiseSchedule& schedule = score.schedule();
  const std::size_t k = score.dim();
  const bool trivial = tilt.trivial();
  StateMatrix z(n, k);
  const double init_scale = std::sqrt(schedule.CumulativeVariance(schedule.steps()));
  for (double& v : z.data()) v = init_scale * rng.Normal();

  std::vector<double> s(n * k), xhat(n * k), grad(k);
  for (int t = schedule.steps(); t >= 1; --t) {
    score.ScoreBatch(z.data(), t, c, s);
    for (double v : s) {
      if (!std::isfinite(v)) {
        Fail(ErrorCode::kNumeric, "dps: non-finite score at step " + std::to_string(t));
      }
    }
    if (!trivial) TweedieDenoiseBatch(z.data(), s, t, schedule, xhat);
    const double var = schedule.StepVariance(t);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(grad.begin(), grad.end(), 0.0);
      if (!trivial) {
        tilt.AddLogFactorGradient(std::span<const double>(xhat.data() + i * k, k), grad);
      }
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = i * k + j;
        z.data()[idx] += var * (s[idx] + grad[j]) + sd * rng.Normal();
        if (!std::isfinite(z.data()[idx])) {
          Fail(ErrorCode::kNumeric, "dps: non-finite state at step " + std::to_string(t));
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) support.Apply(z.row(i));
  return ParticleEnsemble::Uniform(std::move(z));
}

std::string SamplerName(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kTwistedSmc: return "smc";
    case SamplerKind::kImportance: return "is";
    case SamplerKind::kDps: return "dps";
  }
  return "unknown";
}

SamplerKind ParseSamplerKind(const std::string& name) {
  if (name == "smc" || name == "twisted_smc") return SamplerKind::kTwistedSmc;
  if (name == "is" || name == "importance") return SamplerKind::kImportance;
  if (name == "dps") return SamplerKind::kDps;
  Fail(ErrorCode::kInvalidArgument, "unknown sampler '" + name + "'");
}

DiffusionTiltSampler::DiffusionTiltSampler(std::shared_ptr<const ScoreModel> score,
                                           Context context, SamplerKind kind,
                                           SmcOptions options)
    : score_(std::move(score)), context_(std::move(context)), kind_(kind),
      options_(options) {
  Require(score_ != nullptr, "tilt sampler: null score model");
  Require(context_.size() == score_->context_dim(),
          "tilt sampler: context dimension mismatch");
  options_.Validate();
}

ParticleEnsemble DiffusionTiltSampler::Sample(const TiltSpec& tilt, std::size_t n,
                                              Rng& rng) const {
  switch (kind_) {
    case SamplerKind::kTwistedSmc:
      return TwistedSmc(*score_, context_, tilt, n, rng, options_);
    case SamplerKind::kImportance:
      return ImportanceSampling(*score_, context_, tilt, n, rng, options_.support);
    case SamplerKind::kDps:
      return DpsSample(*score_, context_, tilt, n, rng, options_.support);
  }
  Fail(ErrorCode::kInternal, "tilt sampler: bad kind");
}

DiscreteTiltSampler::DiscreteTiltSampler(StateMatrix points,
                                         std::vector<double> base_probs)
    : points_(std::move(points)), base_(std::move(base_probs)) {
  Require(points_.rows() >= 1 && points_.rows() == base_.size(),
          "discrete sampler: need one probability per point");
  double total = 0.0;
  for (double p : base_) {
    Require(std::isfinite(p) && p >= 0.0, "discrete sampler: bad probability");
    total += p;
  }
  Require(total > 0.0, "discrete sampler: probabilities sum to zero");
  for (double& p : base_) p /= total;
}

ParticleEnsemble DiscreteTiltSampler::Sample(const TiltSpec& tilt, std::size_t,
                                             Rng&) const {
  const std::size_t m = points_.rows();
  std::vector<double> logw(m);
  for (std::size_t i = 0; i < m; ++i) {
    logw[i] = (base_[i] > 0.0 ? std::log(base_[i])
                              : -std::numeric_limits<double>::infinity()) +
              (tilt.trivial() ? 0.0 : tilt.LogFactor(points_.row(i)));
  }
  return ParticleEnsemble::FromLogWeights(points_, logw);
}

}  // namespace rpatrol
