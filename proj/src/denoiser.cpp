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

#include "rpatrol/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "rpatrol/error.hpp"

namespace rpatrol {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd Silu(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return v * Sigmoid(v); });
}

MatrixXd SiluGrad(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double s = Sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

void CheckScaling(const InputScaling& s, std::size_t dim, std::size_t cdim) {
  Require(s.z_center.size() == dim && s.z_variance.size() == dim,
          "denoiser: z scaling size mismatch");
  Require(s.c_center.size() == cdim && s.c_scale.size() == cdim,
          "denoiser: context scaling size mismatch");
  for (double v : s.z_variance) Require(v >= 0.0, "denoiser: negative variance");
  for (double v : s.c_scale) Require(v > 0.0, "denoiser: context scale must be positive");
}

}  // namespace

DenoiserNet::DenoiserNet(std::size_t dim, std::size_t context_dim, std::vector<int> hidden,
                         NoiseSchedule schedule, InputScaling scaling, Rng& rng)
    : dim_(dim), context_dim_(context_dim), schedule_(std::move(schedule)),
      scaling_(std::move(scaling)) {
  Require(dim >= 1, "denoiser: dimension must be >= 1");
  Require(schedule_.CumulativeVariance(1) > 0.0, "denoiser: schedule must add noise");
  CheckScaling(scaling_, dim_, context_dim_);
  std::vector<int> widths;
  widths.push_back(static_cast<int>(input_dim()));
  for (int h : hidden) {
    Require(h >= 1, "denoiser: hidden widths must be >= 1");
    widths.push_back(h);
  }
  widths.push_back(static_cast<int>(dim_));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    const int in = widths[l], out = widths[l + 1];
    // Glorot-uniform weights, zero biases.
    const double limit = std::sqrt(6.0 / (in + out));
    layer.w.resize(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) layer.w(i, j) = limit * (2.0 * rng.Uniform() - 1.0);
    }
    layer.b = VectorXd::Zero(out);
    layers_.push_back(std::move(layer));
  }
}

DenoiserNet::DenoiserNet(std::size_t dim, std::size_t context_dim, NoiseSchedule schedule,
                         InputScaling scaling, std::vector<Layer> layers)
    : dim_(dim), context_dim_(context_dim), schedule_(std::move(schedule)),
      scaling_(std::move(scaling)), layers_(std::move(layers)) {
  CheckScaling(scaling_, dim_, context_dim_);
  Require(!layers_.empty(), "denoiser: no layers");
  Eigen::Index width = static_cast<Eigen::Index>(input_dim());
  for (const Layer& l : layers_) {
    Require(l.w.cols() == width && l.b.size() == l.w.rows(),
            "denoiser: inconsistent layer shapes");
    width = l.w.rows();
  }
  Require(width == static_cast<Eigen::Index>(dim_), "denoiser: output width must equal K");
}

std::vector<int> DenoiserNet::hidden() const {
  std::vector<int> h;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    h.push_back(static_cast<int>(layers_[l].w.rows()));
  }
  return h;
}

bool DenoiserNet::AllFinite() const {
  for (const Layer& l : layers_) {
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  }
  return true;
}

MatrixXd DenoiserNet::Inputs(std::span<const double> states, std::span<const int> steps,
                             std::span<const double> contexts, std::size_t batch) const {
  const bool shared_context = contexts.size() == context_dim_;
  Require(shared_context || contexts.size() == batch * context_dim_,
          "denoiser: context size mismatch");
  Require(steps.size() == 1 || steps.size() == batch, "denoiser: step count mismatch");
  MatrixXd in(input_dim(), batch);
  const double T = schedule_.steps();
  for (std::size_t b = 0; b < batch; ++b) {
    const int t = steps.size() == 1 ? steps[0] : steps[b];
    const double s_t = schedule_.CumulativeVariance(t);
    for (std::size_t k = 0; k < dim_; ++k) {
      in(k, b) = (states[b * dim_ + k] - scaling_.z_center[k]) /
                 std::sqrt(scaling_.z_variance[k] + s_t);
    }
    in(dim_, b) = t / T;
    const double* c = contexts.data() + (shared_context ? 0 : b * context_dim_);
    for (std::size_t k = 0; k < context_dim_; ++k) {
      in(dim_ + 1 + k, b) = (c[k] - scaling_.c_center[k]) / scaling_.c_scale[k];
    }
  }
  return in;
}

MatrixXd DenoiserNet::Forward(const MatrixXd& input, std::vector<MatrixXd>* activations,
                              std::vector<MatrixXd>* pre) const {
  MatrixXd h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (activations) activations->push_back(h);
    MatrixXd a = layers_[l].w * h;
    a.colwise() += layers_[l].b;
    if (l + 1 == layers_.size()) return a;
    if (pre) pre->push_back(a);
    h = Silu(a);
  }
  return h;
}

void DenoiserNet::ScoreBatch(std::span<const double> states, int t, const Context& c,
                             std::span<double> out) const {
  Require(states.size() % dim_ == 0 && out.size() == states.size(),
          "denoiser: batch size mismatch");
  Require(c.size() == context_dim_, "denoiser: context dimension mismatch");
  if (t < 1) Fail(ErrorCode::kSchedule, "denoiser: step must be >= 1");
  const std::size_t batch = states.size() / dim_;
  const int step[1] = {t};
  const MatrixXd eps = Forward(Inputs(states, step, c.features, batch));
  const double inv = 1.0 / std::sqrt(schedule_.CumulativeVariance(t));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < dim_; ++k) out[b * dim_ + k] = -eps(k, b) * inv;
  }
}

void TrainConfig::Validate() const {
  Require(learning_rate > 0.0, "train: learning rate must be positive");
  Require(epochs >= 0, "train: epochs must be >= 0");
  Require(batch_size >= 1, "train: batch size must be >= 1");
}

TrainResult TrainDenoiser(const StateMatrix& samples, const StateMatrix& contexts,
                          const NoiseSchedule& schedule, const TrainConfig& cfg, Rng& rng) {
  cfg.Validate();
  const std::size_t n = samples.rows();
  const std::size_t k = samples.dim();
  Require(n >= 1 && k >= 1, "train: empty dataset");
  Require(contexts.rows() == n || contexts.dim() == 0, "train: one context per sample");
  const std::size_t cdim = contexts.dim();

  InputScaling scaling;
  scaling.z_center.assign(k, 0.0);
  scaling.z_variance.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) scaling.z_center[j] += samples.at(i, j) / n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = samples.at(i, j) - scaling.z_center[j];
      scaling.z_variance[j] += d * d / n;
    }
  }
  scaling.c_center.assign(cdim, 0.0);
  scaling.c_scale.assign(cdim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cdim; ++j) scaling.c_center[j] += contexts.at(i, j) / n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cdim; ++j) {
      const double d = contexts.at(i, j) - scaling.c_center[j];
      scaling.c_scale[j] += d * d / n;
    }
  }
  for (double& s : scaling.c_scale) s = s > 0.0 ? std::sqrt(s) : 1.0;

  DenoiserNet net(k, cdim, cfg.hidden, schedule, scaling, rng);
  std::vector<DenoiserNet::Layer>& layers = net.mutable_layers();
  const std::size_t nl = layers.size();

  // Adam state.
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  std::vector<MatrixXd> mw(nl), vw(nl);
  std::vector<VectorXd> mb(nl), vb(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    mw[l] = MatrixXd::Zero(layers[l].w.rows(), layers[l].w.cols());
    vw[l] = mw[l];
    mb[l] = VectorXd::Zero(layers[l].b.size());
    vb[l] = mb[l];
  }
  long step_count = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> zt, ctx, eps_target;
  std::vector<int> steps;
  std::vector<double> losses;
  const int T = schedule.steps();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n - start);
      zt.assign(bs * k, 0.0);
      eps_target.assign(bs * k, 0.0);
      ctx.assign(bs * cdim, 0.0);
      steps.assign(bs, 1);
      for (std::size_t b = 0; b < bs; ++b) {
        const std::size_t idx = order[start + b];
        const int t = 1 + static_cast<int>(rng.Index(static_cast<std::size_t>(T)));
        steps[b] = t;
        const double sd = std::sqrt(schedule.CumulativeVariance(t));
        for (std::size_t j = 0; j < k; ++j) {
          const double e = rng.Normal();
          eps_target[b * k + j] = e;
          zt[b * k + j] = samples.at(idx, j) + sd * e;
        }
        for (std::size_t j = 0; j < cdim; ++j) ctx[b * cdim + j] = contexts.at(idx, j);
      }
      const MatrixXd input =
          net.Inputs(zt, steps, cdim == 0 ? std::span<const double>() : std::span<const double>(ctx), bs);
      std::vector<MatrixXd> acts, pre;
      const MatrixXd out = net.Forward(input, &acts, &pre);
      const Eigen::Map<const MatrixXd> target(eps_target.data(), k, bs);
      MatrixXd delta = out - target;
      const double loss = delta.squaredNorm() / static_cast<double>(bs);
      if (!std::isfinite(loss)) {
        Fail(ErrorCode::kTraining, "train: loss diverged at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * bs;
      // d loss / d out = 2 delta / bs
      delta *= 2.0 / static_cast<double>(bs);
      ++step_count;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
      for (std::size_t l = nl; l-- > 0;) {
        const MatrixXd gw = delta * acts[l].transpose();
        const VectorXd gb = delta.rowwise().sum();
        if (l > 0) delta = (layers[l].w.transpose() * delta).cwiseProduct(SiluGrad(pre[l - 1]));
        mw[l] = b1 * mw[l] + (1.0 - b1) * gw;
        vw[l] = b2 * vw[l] + (1.0 - b2) * gw.cwiseProduct(gw);
        mb[l] = b1 * mb[l] + (1.0 - b1) * gb;
        vb[l] = b2 * vb[l] + (1.0 - b2) * gb.cwiseProduct(gb);
        layers[l].w -= (cfg.learning_rate * (mw[l] / c1).array() /
                        ((vw[l] / c2).array().sqrt() + adam_eps)).matrix();
        layers[l].b -= (cfg.learning_rate * (mb[l] / c1).array() /
                        ((vb[l] / c2).array().sqrt() + adam_eps)).matrix();
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss) || !net.AllFinite()) {
      Fail(ErrorCode::kTraining, "train: loss diverged at epoch " + std::to_string(epoch));
    }
    losses.push_back(epoch_loss);
  }
  return TrainResult{std::move(net), std::move(losses)};
}

namespace {

using nlohmann::json;

json ScheduleJson(const NoiseSchedule& s) {
  if (s.variant() == NoiseVariant::kRandomWalk) {
    return {{"variant", "random_walk"}, {"steps", s.steps()}, {"beta", s.beta()}};
  }
  return {{"variant", "linear_variance"},
          {"steps", s.steps()},
          {"first_variance", s.first_variance()},
          {"last_variance", s.last_variance()}};
}

NoiseSchedule ScheduleFromJson(const json& j) {
  const std::string v = j.at("variant").get<std::string>();
  const int steps = j.at("steps").get<int>();
  if (v == "random_walk") return NoiseSchedule::RandomWalk(steps, j.at("beta").get<double>());
  if (v == "linear_variance") {
    return NoiseSchedule::LinearVariance(steps, j.at("first_variance").get<double>(),
                                         j.at("last_variance").get<double>());
  }
  Fail(ErrorCode::kIo, "checkpoint: unknown schedule variant '" + v + "'");
}

}  // namespace

void SaveDenoiser(const DenoiserNet& net, std::ostream& out) {
  json j;
  j["format"] = "rpatrol-denoiser";
  j["version"] = 1;
  j["dim"] = net.dim();
  j["context_dim"] = net.context_dim();
  j["hidden"] = net.hidden();
  j["schedule"] = ScheduleJson(net.schedule());
  const InputScaling& s = net.scaling();
  j["scaling"] = {{"z_center", s.z_center},
                  {"z_variance", s.z_variance},
                  {"c_center", s.c_center},
                  {"c_scale", s.c_scale}};
  json layers = json::array();
  for (const DenoiserNet::Layer& l : net.layers()) {
    std::vector<double> w(l.w.size());
    // Row-major flattening.
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) w[r * l.w.cols() + c] = l.w(r, c);
    }
    layers.push_back({{"rows", l.w.rows()},
                      {"cols", l.w.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  j["layers"] = layers;
  out << j.dump() << "\n";
  if (!out) Fail(ErrorCode::kIo, "checkpoint: write failed");
}

DenoiserNet LoadDenoiser(std::istream& in) {
  json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != "rpatrol-denoiser") {
      Fail(ErrorCode::kIo, "checkpoint: not a denoiser file");
    }
    InputScaling s;
    const json& sj = j.at("scaling");
    s.z_center = sj.at("z_center").get<Vec>();
    s.z_variance = sj.at("z_variance").get<Vec>();
    s.c_center = sj.at("c_center").get<Vec>();
    s.c_scale = sj.at("c_scale").get<Vec>();
    std::vector<DenoiserNet::Layer> layers;
    for (const json& lj : j.at("layers")) {
      DenoiserNet::Layer l;
      const auto rows = lj.at("rows").get<Eigen::Index>();
      const auto cols = lj.at("cols").get<Eigen::Index>();
      const Vec w = lj.at("weights").get<Vec>();
      const Vec b = lj.at("bias").get<Vec>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
          static_cast<Eigen::Index>(b.size()) != rows) {
        Fail(ErrorCode::kIo, "checkpoint: layer size mismatch");
      }
      l.w.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) l.w(r, c) = w[r * cols + c];
      }
      l.b = Eigen::Map<const VectorXd>(b.data(), rows);
      layers.push_back(std::move(l));
    }
    return DenoiserNet(j.at("dim").get<std::size_t>(), j.at("context_dim").get<std::size_t>(),
                       ScheduleFromJson(j.at("schedule")), std::move(s), std::move(layers));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    Fail(ErrorCode::kIo, std::string("checkpoint: ") + e.what());
  } catch (const std::exception& e) {
    Fail(ErrorCode::kIo, std::string("checkpoint: ") + e.what());
  }
}

void SaveDenoiserFile(const DenoiserNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "checkpoint: cannot open '" + path + "' for writing");
  SaveDenoiser(net, out);
}

DenoiserNet LoadDenoiserFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "checkpoint: cannot open '" + path + "'");
  return LoadDenoiser(in);
}

}  // namespace rpatrol
