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

#ifndef RPATROL_SCENARIO_HPP_
#define RPATROL_SCENARIO_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rpatrol/rng.hpp"
#include "rpatrol/score_model.hpp"
#include "rpatrol/states.hpp"

namespace rpatrol {

struct GraphInstance {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // u < v, sorted
  StateMatrix features;                    // n_nodes x feat_dim

  // Closed neighbourhoods (self first, then neighbours in increasing order).
  std::vector<std::vector<int>> Neighborhoods() const;
};

// Uniform random simple graph with exactly n_edges edges and i.i.d. N(0,1)
// node features.
GraphInstance GenerateGraph(int n_nodes, int n_edges, int feat_dim, Rng& rng);

// One graph-convolution stack: mean aggregation over the closed
// neighbourhood, then affine map; tanh between layers, sigmoid * 20 at the end.
struct GcnStack {
  struct Layer {
    int in = 0, out = 0;
    Vec w;  // row-major out x in
    Vec b;
  };
  std::vector<Layer> layers;

  static GcnStack Random(int feat_dim, std::vector<int> widths, Rng& rng);
  static GcnStack Zero(int feat_dim, std::vector<int> widths);
};

inline constexpr double kGcnScale = 20.0;

// Per-node output in (0, 20].
Vec GcnForward(const GraphInstance& graph, const GcnStack& stack);

struct GeneratorWeights {
  std::array<GcnStack, 2> stacks;
  std::array<double, 2> scales = {1.0, 0.9};

  static GeneratorWeights Random(int feat_dim, Rng& rng);
};

inline constexpr double kCountCap = 40.0;
inline constexpr double kCountScale = 0.2;

// One node's count: Gamma(shape, scale) plus noise eps * c_noise / (1 + count)
// (added before capping), clamped to [0, 40], times 0.2.
double SampleNodeCount(double shape, double scale, double c_noise, Rng& rng);

// Picks a stack per node with probability 1/2 and samples its count.
Vec SamplePoachingCounts(const GraphInstance& graph, const GeneratorWeights& gen,
                         double c_noise, Rng& rng);

struct DatasetConfig {
  int train = 4800;
  int validation = 200;
  int test = 100;
  int nodes = 30;
  int edges = 20;
  int feat_dim = 10;
  double budget = 1.0;  // prior patrol effort ~ U[0, budget]
  double c_noise = 2.0;
  std::uint64_t seed = 0;

  static DatasetConfig Default();
  static DatasetConfig Desk();  // 480 / 20 / 10
  int total() const { return train + validation + test; }
  void Validate() const;
};

struct DatasetRecord {
  int graph_id = 0;
  GraphInstance graph;
  Vec z;             // per-node counts, in [0, 8]
  Vec prior_patrol;  // per-node effort of the previous period

  // features flattened row-major, then prior patrol effort.
  Context MakeContext() const;
};

struct Dataset {
  DatasetConfig config;
  GeneratorWeights weights;
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> validation;
  std::vector<DatasetRecord> test;
};

// Graph g draws from the stream DeriveSeed(config.seed, {g}), so the result
// does not depend on generation order.
Dataset BuildDataset(const DatasetConfig& config);

// Directory layout: manifest.json, {train,validation,test}.csv with columns
// graph_id,node_id,f_1..f_F,z,prior_patrol, and edges.csv (graph_id,u,v).
void WriteDataset(const Dataset& data, const std::string& dir);
Dataset ReadDataset(const std::string& dir);

// (z, context) rows of a split, for training the conditional denoiser.
void SplitMatrices(const std::vector<DatasetRecord>& split, StateMatrix& z,
                   StateMatrix& contexts);

}  // namespace rpatrol

#endif  // RPATROL_SCENARIO_HPP_
