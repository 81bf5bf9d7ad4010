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

#ifndef RPATROL_ERROR_HPP_
#define RPATROL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace rpatrol {

// Error categories. The numeric values are mirrored by rp_status in the C API.
enum class ErrorCode {
  kInvalidArgument = 1,
  kSchedule = 2,
  kNumeric = 3,
  kDegenerate = 4,
  kPrecision = 5,
  kIo = 6,
  kTraining = 7,
  kInternal = 8,
  kConfig = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, const std::string& message) {
  if (!condition) Fail(ErrorCode::kInvalidArgument, message);
}

}  // namespace rpatrol

#endif  // RPATROL_ERROR_HPP_
