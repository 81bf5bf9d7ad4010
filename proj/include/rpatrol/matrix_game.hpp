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

#ifndef RPATROL_MATRIX_GAME_HPP_
#define RPATROL_MATRIX_GAME_HPP_

#include <cstddef>
#include <vector>

namespace rpatrol {

// Payoffs to the maximizing row player (the defender), row-major.
class PayoffMatrix {
 public:
  PayoffMatrix() = default;
  PayoffMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  PayoffMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct SubgameEquilibrium {
  std::vector<double> pi;     // row player's mixed strategy
  std::vector<double> sigma;  // column player's mixed strategy
  double value = 0.0;

  // min_j (pi^T A)_j and max_i (A sigma)_i.
  double RowGuarantee(const PayoffMatrix& a) const;
  double ColumnGuarantee(const PayoffMatrix& a) const;
};

// Solves max_pi min_sigma pi^T A sigma with a dense tableau simplex using
// Bland's rule, so ties resolve deterministically. The result is checked
// against both equilibrium certificates (tolerance 1e-7, scaled by the payoff
// range); a failed check raises kNumeric.
SubgameEquilibrium SolveMatrixGame(const PayoffMatrix& a);

}  // namespace rpatrol

#endif  // RPATROL_MATRIX_GAME_HPP_
