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

#ifndef RPATROL_DENOISER_HPP_
#define RPATROL_DENOISER_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpatrol/score_model.hpp"
#include "rpatrol/states.hpp"

namespace rpatrol {

// Per-coordinate input standardization, fitted on the training data.
struct InputScaling {
  Vec z_center;
  Vec z_variance;
  Vec c_center;
  Vec c_scale;
};

// Fully connected network (z^t, t/T, c) -> eps_hat with SiLU hidden units.
// The score is read off the noise prediction as s = -eps_hat / sqrt(S_t),
// and the noised input is standardized by sqrt(var(z) + S_t).
class DenoiserNet : public ScoreModel {
 public:
  struct Layer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;
  };

  DenoiserNet(std::size_t dim, std::size_t context_dim, std::vector<int> hidden,
              NoiseSchedule schedule, InputScaling scaling, Rng& rng);
  DenoiserNet(std::size_t dim, std::size_t context_dim, NoiseSchedule schedule,
              InputScaling scaling, std::vector<Layer> layers);

  std::size_t dim() const override { return dim_; }
  std::size_t context_dim() const override { return context_dim_; }
  const NoiseSchedule& schedule() const override { return schedule_; }
  void ScoreBatch(std::span<const double> states, int t, const Context& c,
                  std::span<double> out) const override;

  std::vector<int> hidden() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  const InputScaling& scaling() const { return scaling_; }
  std::size_t input_dim() const { return dim_ + 1 + context_dim_; }
  bool AllFinite() const;

  // Inputs for a batch of (z^t, t, c) rows as columns of an (input_dim x B)
  // matrix; contexts holds one row per column (or a single shared row).
  Eigen::MatrixXd Inputs(std::span<const double> states, std::span<const int> steps,
                         std::span<const double> contexts, std::size_t batch) const;
  // Forward pass; activations[l] is the input of layer l (pre-activation for
  // hidden layers is kept in pre[l]).
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& input,
                          std::vector<Eigen::MatrixXd>* activations = nullptr,
                          std::vector<Eigen::MatrixXd>* pre = nullptr) const;

 private:
  std::size_t dim_;
  std::size_t context_dim_;
  NoiseSchedule schedule_;
  InputScaling scaling_;
  std::vector<Layer> layers_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 200;
  std::size_t batch_size = 128;
  std::vector<int> hidden = {128, 128, 128};

  void Validate() const;
};

struct TrainResult {
  DenoiserNet net;
  std::vector<double> epoch_loss;  // mean noise-prediction loss per epoch
};

// Denoising score matching in the noise-prediction form: for z^t = z^0 +
// sqrt(S_t) eps, minimize |eps - eps_hat|^2, which is S_t |s - target|^2
// with target -(z^t - z^0)/S_t. Adam, uniform t in [1, T]. contexts has one
// row per sample (zero columns when unconditional). NaN loss raises kTraining.
TrainResult TrainDenoiser(const StateMatrix& samples, const StateMatrix& contexts,
                          const NoiseSchedule& schedule, const TrainConfig& cfg,
                          Rng& rng);

// JSON checkpoint with schedule, sizes, scaling and weights; loading restores
// parameters bit-for-bit.
void SaveDenoiser(const DenoiserNet& net, std::ostream& out);
DenoiserNet LoadDenoiser(std::istream& in);
void SaveDenoiserFile(const DenoiserNet& net, const std::string& path);
DenoiserNet LoadDenoiserFile(const std::string& path);

}  // namespace rpatrol

#endif  // RPATROL_DENOISER_HPP_
