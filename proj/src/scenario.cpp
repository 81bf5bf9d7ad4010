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

#include "rpatrol/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/text.hpp"

namespace rpatrol {

std::vector<std::vector<int>> GraphInstance::Neighborhoods() const {
  std::vector<std::vector<int>> nb(n_nodes);
  for (int v = 0; v < n_nodes; ++v) nb[v].push_back(v);
  for (const auto& [u, v] : edges) {
    nb[u].push_back(v);
    nb[v].push_back(u);
  }
  for (auto& list : nb) std::sort(list.begin() + 1, list.end());
  return nb;
}

GraphInstance GenerateGraph(int n_nodes, int n_edges, int feat_dim, Rng& rng) {
  Require(n_nodes >= 1 && feat_dim >= 1, "graph: need nodes and features");
  const long max_edges = static_cast<long>(n_nodes) * (n_nodes - 1) / 2;
  Require(n_edges >= 0 && n_edges <= max_edges, "graph: infeasible edge count");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(max_edges);
  for (int u = 0; u < n_nodes; ++u) {
    for (int v = u + 1; v < n_nodes; ++v) pairs.emplace_back(u, v);
  }
  // Partial Fisher-Yates: the first n_edges entries are a uniform subset.
  for (int i = 0; i < n_edges; ++i) {
    const std::size_t j = i + rng.Index(pairs.size() - i);
    std::swap(pairs[i], pairs[j]);
  }
  GraphInstance g;
  g.n_nodes = n_nodes;
  g.edges.assign(pairs.begin(), pairs.begin() + n_edges);
  std::sort(g.edges.begin(), g.edges.end());
  g.features = StateMatrix(n_nodes, feat_dim);
  for (double& v : g.features.data()) v = rng.Normal();
  return g;
}

namespace {

GcnStack MakeStack(int feat_dim, const std::vector<int>& widths, Rng* rng) {
  GcnStack s;
  int in = feat_dim;
  std::vector<int> all = widths;
  all.push_back(1);
  for (int out : all) {
    GcnStack::Layer l;
    l.in = in;
    l.out = out;
    l.w.assign(static_cast<std::size_t>(in) * out, 0.0);
    l.b.assign(out, 0.0);
    if (rng) {
      const double sd = 1.0 / std::sqrt(static_cast<double>(in));
      for (double& v : l.w) v = sd * rng->Normal();
      for (double& v : l.b) v = 0.1 * rng->Normal();
    }
    s.layers.push_back(std::move(l));
    in = out;
  }
  return s;
}

}  // namespace

GcnStack GcnStack::Random(int feat_dim, std::vector<int> widths, Rng& rng) {
  return MakeStack(feat_dim, widths, &rng);
}

GcnStack GcnStack::Zero(int feat_dim, std::vector<int> widths) {
  return MakeStack(feat_dim, widths, nullptr);
}

Vec GcnForward(const GraphInstance& graph, const GcnStack& stack) {
  Require(!stack.layers.empty(), "gcn: empty stack");
  Require(static_cast<int>(graph.features.dim()) == stack.layers.front().in,
          "gcn: feature dimension mismatch");
  const int n = graph.n_nodes;
  const auto nb = graph.Neighborhoods();
  std::vector<double> h = graph.features.data();
  int width = stack.layers.front().in;
  for (std::size_t li = 0; li < stack.layers.size(); ++li) {
    const GcnStack::Layer& l = stack.layers[li];
    std::vector<double> agg(static_cast<std::size_t>(n) * width, 0.0);
    for (int v = 0; v < n; ++v) {
      const double inv = 1.0 / nb[v].size();
      for (int u : nb[v]) {
        for (int k = 0; k < width; ++k) agg[v * width + k] += inv * h[u * width + k];
      }
    }
    std::vector<double> next(static_cast<std::size_t>(n) * l.out);
    const bool last = li + 1 == stack.layers.size();
    for (int v = 0; v < n; ++v) {
      for (int o = 0; o < l.out; ++o) {
        double a = l.b[o];
        for (int k = 0; k < width; ++k) a += l.w[o * width + k] * agg[v * width + k];
        next[v * l.out + o] = last ? a : std::tanh(a);
      }
    }
    h.swap(next);
    width = l.out;
  }
  Vec out(n);
  for (int v = 0; v < n; ++v) {
    // Squash into (0, 1]; the floor keeps Gamma shapes strictly positive.
    const double s = 1.0 / (1.0 + std::exp(-h[v]));
    out[v] = kGcnScale * std::max(s, 1e-12);
  }
  return out;
}

GeneratorWeights GeneratorWeights::Random(int feat_dim, Rng& rng) {
  GeneratorWeights g;
  for (auto& s : g.stacks) s = GcnStack::Random(feat_dim, {16, 16}, rng);
  return g;
}

double SampleNodeCount(double shape, double scale, double c_noise, Rng& rng) {
  Require(shape > 0.0 && scale > 0.0, "counts: Gamma parameters must be positive");
  const double count = rng.Gamma(shape, scale);
  const double eps = rng.Normal();
  const double noisy = count + eps * c_noise / (1.0 + count);
  return kCountScale * std::clamp(noisy, 0.0, kCountCap);
}

Vec SamplePoachingCounts(const GraphInstance& graph, const GeneratorWeights& gen,
                         double c_noise, Rng& rng) {
  const Vec shape0 = GcnForward(graph, gen.stacks[0]);
  const Vec shape1 = GcnForward(graph, gen.stacks[1]);
  Vec z(graph.n_nodes);
  for (int v = 0; v < graph.n_nodes; ++v) {
    const int pick = rng.Bernoulli(0.5) ? 1 : 0;
    const double shape = pick == 0 ? shape0[v] : shape1[v];
    z[v] = SampleNodeCount(shape, gen.scales[pick], c_noise, rng);
  }
  return z;
}

DatasetConfig DatasetConfig::Default() { return {}; }

DatasetConfig DatasetConfig::Desk() {
  DatasetConfig c;
  c.train = 480;
  c.validation = 20;
  c.test = 10;
  return c;
}

void DatasetConfig::Validate() const {
  Require(train >= 0 && validation >= 0 && test >= 0 && total() >= 1,
          "dataset: split sizes must be non-negative and not all zero");
  Require(nodes >= 1 && feat_dim >= 1, "dataset: need nodes and features");
  Require(edges >= 0 && static_cast<long>(edges) <= static_cast<long>(nodes) * (nodes - 1) / 2,
          "dataset: infeasible edge count");
  Require(budget > 0.0, "dataset: budget must be positive");
  Require(c_noise >= 0.0, "dataset: noise constant must be >= 0");
}

Context DatasetRecord::MakeContext() const {
  Context c;
  c.features = graph.features.data();
  c.features.insert(c.features.end(), prior_patrol.begin(), prior_patrol.end());
  return c;
}

Dataset BuildDataset(const DatasetConfig& config) {
  config.Validate();
  Dataset d;
  d.config = config;
  Rng wrng(DeriveSeed(config.seed, {HashString("generator-weights")}));
  d.weights = GeneratorWeights::Random(config.feat_dim, wrng);
  for (int g = 0; g < config.total(); ++g) {
    Rng rng(DeriveSeed(config.seed, {static_cast<std::uint64_t>(g)}));
    DatasetRecord r;
    r.graph_id = g;
    r.graph = GenerateGraph(config.nodes, config.edges, config.feat_dim, rng);
    r.z = SamplePoachingCounts(r.graph, d.weights, config.c_noise, rng);
    r.prior_patrol.resize(config.nodes);
    for (double& v : r.prior_patrol) v = config.budget * rng.Uniform();
    if (g < config.train) {
      d.train.push_back(std::move(r));
    } else if (g < config.train + config.validation) {
      d.validation.push_back(std::move(r));
    } else {
      d.test.push_back(std::move(r));
    }
  }
  return d;
}

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json StackJson(const GcnStack& s) {
  json layers = json::array();
  for (const auto& l : s.layers) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}});
  }
  return layers;
}

GcnStack StackFromJson(const json& j) {
  GcnStack s;
  for (const json& lj : j) {
    GcnStack::Layer l;
    l.in = lj.at("in").get<int>();
    l.out = lj.at("out").get<int>();
    l.w = lj.at("w").get<Vec>();
    l.b = lj.at("b").get<Vec>();
    if (l.w.size() != static_cast<std::size_t>(l.in) * l.out ||
        l.b.size() != static_cast<std::size_t>(l.out)) {
      Fail(ErrorCode::kIo, "dataset: malformed generator layer");
    }
    s.layers.push_back(std::move(l));
  }
  return s;
}

void WriteSplit(const std::vector<DatasetRecord>& split, int feat_dim, const fs::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "dataset: cannot write '" + path.string() + "'");
  out << "graph_id,node_id";
  for (int f = 1; f <= feat_dim; ++f) out << ",f_" << f;
  out << ",z,prior_patrol\n";
  for (const DatasetRecord& r : split) {
    for (int v = 0; v < r.graph.n_nodes; ++v) {
      out << r.graph_id << ',' << v;
      for (int f = 0; f < feat_dim; ++f) out << ',' << FormatDouble(r.graph.features.at(v, f));
      out << ',' << FormatDouble(r.z[v]) << ',' << FormatDouble(r.prior_patrol[v]) << '\n';
    }
  }
  if (!out) Fail(ErrorCode::kIo, "dataset: write failed for '" + path.string() + "'");
}

std::vector<DatasetRecord> ReadSplit(const fs::path& path, const DatasetConfig& cfg,
                                     const std::map<int, std::vector<std::pair<int, int>>>& edges) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "dataset: cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const std::size_t expect = 2 + cfg.feat_dim + 2;
  std::vector<DatasetRecord> out;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const auto fields = SplitFields(Trim(line));
    if (fields.size() != expect) Fail(ErrorCode::kIo, "dataset: bad row in " + path.string());
    const int gid = static_cast<int>(ParseDouble(fields[0]));
    const int node = static_cast<int>(ParseDouble(fields[1]));
    if (out.empty() || out.back().graph_id != gid) {
      DatasetRecord r;
      r.graph_id = gid;
      r.graph.n_nodes = cfg.nodes;
      r.graph.features = StateMatrix(cfg.nodes, cfg.feat_dim);
      r.z.assign(cfg.nodes, 0.0);
      r.prior_patrol.assign(cfg.nodes, 0.0);
      auto it = edges.find(gid);
      if (it != edges.end()) r.graph.edges = it->second;
      out.push_back(std::move(r));
    }
    DatasetRecord& r = out.back();
    if (node < 0 || node >= cfg.nodes) Fail(ErrorCode::kIo, "dataset: node id out of range");
    for (int f = 0; f < cfg.feat_dim; ++f) r.graph.features.at(node, f) = ParseDouble(fields[2 + f]);
    r.z[node] = ParseDouble(fields[2 + cfg.feat_dim]);
    r.prior_patrol[node] = ParseDouble(fields[3 + cfg.feat_dim]);
  }
  return out;
}

}  // namespace

void WriteDataset(const Dataset& data, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIo, "dataset: cannot create '" + dir + "': " + ec.message());
  const DatasetConfig& c = data.config;
  json m;
  m["format"] = "rpatrol-dataset";
  m["version"] = 1;
  m["seed"] = c.seed;
  m["sizes"] = {{"train", c.train}, {"validation", c.validation}, {"test", c.test}};
  m["nodes"] = c.nodes;
  m["edges"] = c.edges;
  m["feat_dim"] = c.feat_dim;
  m["budget"] = c.budget;
  m["c_noise"] = c.c_noise;
  m["generator"] = {{"stacks", {StackJson(data.weights.stacks[0]), StackJson(data.weights.stacks[1])}},
                    {"scales", data.weights.scales}};
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) Fail(ErrorCode::kIo, "dataset: cannot write manifest in '" + dir + "'");
    out << m.dump(2) << "\n";
  }
  WriteSplit(data.train, c.feat_dim, fs::path(dir) / "train.csv");
  WriteSplit(data.validation, c.feat_dim, fs::path(dir) / "validation.csv");
  WriteSplit(data.test, c.feat_dim, fs::path(dir) / "test.csv");
  std::ofstream out(fs::path(dir) / "edges.csv");
  if (!out) Fail(ErrorCode::kIo, "dataset: cannot write edges in '" + dir + "'");
  out << "graph_id,u,v\n";
  for (const auto* split : {&data.train, &data.validation, &data.test}) {
    for (const DatasetRecord& r : *split) {
      for (const auto& [u, v] : r.graph.edges) out << r.graph_id << ',' << u << ',' << v << '\n';
    }
  }
  if (!out) Fail(ErrorCode::kIo, "dataset: write failed for edges");
}

Dataset ReadDataset(const std::string& dir) {
  Dataset d;
  json m;
  {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) Fail(ErrorCode::kIo, "dataset: no manifest in '" + dir + "'");
    try {
      in >> m;
    } catch (const std::exception& e) {
      Fail(ErrorCode::kIo, std::string("dataset: bad manifest: ") + e.what());
    }
  }
  try {
    DatasetConfig& c = d.config;
    c.seed = m.at("seed").get<std::uint64_t>();
    c.train = m.at("sizes").at("train").get<int>();
    c.validation = m.at("sizes").at("validation").get<int>();
    c.test = m.at("sizes").at("test").get<int>();
    c.nodes = m.at("nodes").get<int>();
    c.edges = m.at("edges").get<int>();
    c.feat_dim = m.at("feat_dim").get<int>();
    c.budget = m.at("budget").get<double>();
    c.c_noise = m.at("c_noise").get<double>();
    const json& g = m.at("generator");
    d.weights.stacks[0] = StackFromJson(g.at("stacks").at(0));
    d.weights.stacks[1] = StackFromJson(g.at("stacks").at(1));
    const auto scales = g.at("scales").get<std::vector<double>>();
    if (scales.size() != 2) Fail(ErrorCode::kIo, "dataset: expected two scales");
    d.weights.scales = {scales[0], scales[1]};
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    Fail(ErrorCode::kIo, std::string("dataset: bad manifest: ") + e.what());
  }

  std::map<int, std::vector<std::pair<int, int>>> edges;
  {
    std::ifstream in(fs::path(dir) / "edges.csv");
    if (!in) Fail(ErrorCode::kIo, "dataset: no edges.csv in '" + dir + "'");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (Trim(line).empty()) continue;
      const auto f = SplitFields(Trim(line));
      if (f.size() != 3) Fail(ErrorCode::kIo, "dataset: bad edge row");
      edges[static_cast<int>(ParseDouble(f[0]))].emplace_back(
          static_cast<int>(ParseDouble(f[1])), static_cast<int>(ParseDouble(f[2])));
    }
  }
  d.train = ReadSplit(fs::path(dir) / "train.csv", d.config, edges);
  d.validation = ReadSplit(fs::path(dir) / "validation.csv", d.config, edges);
  d.test = ReadSplit(fs::path(dir) / "test.csv", d.config, edges);
  if (static_cast<int>(d.train.size()) != d.config.train ||
      static_cast<int>(d.validation.size()) != d.config.validation ||
      static_cast<int>(d.test.size()) != d.config.test) {
    Fail(ErrorCode::kIo, "dataset: split sizes disagree with manifest");
  }
  return d;
}

void SplitMatrices(const std::vector<DatasetRecord>& split, StateMatrix& z,
                   StateMatrix& contexts) {
  Require(!split.empty(), "dataset: empty split");
  const std::size_t k = split.front().z.size();
  const std::size_t cdim = split.front().MakeContext().size();
  z = StateMatrix(split.size(), k);
  contexts = StateMatrix(split.size(), cdim);
  for (std::size_t i = 0; i < split.size(); ++i) {
    std::copy(split[i].z.begin(), split[i].z.end(), z.row(i).begin());
    const Context c = split[i].MakeContext();
    std::copy(c.features.begin(), c.features.end(), contexts.row(i).begin());
  }
}

}  // namespace rpatrol
