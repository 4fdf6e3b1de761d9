/*
 * Copyright 2026 The pimflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pimflow {

enum class ErrorCode {
  // pattern algebra
  GroupNotDivisible,
  WindowTooLarge,
  RoleViolation,
  // pipeline construction / lifecycle
  InvalidChain,
  LengthMismatch,
  UnknownBuffer,
  AlreadyExecuted,
  NotExecuted,
  NotFetched,
  MissingOverlapVector,
  // planner
  WramTooSmall,
  MramTooSmall,
  // device
  AlignmentViolation,
  OutOfMram,
  OutOfWram,
  MemoryViolation,
  KernelFault,
  DeviceError,
  // host runtime
  CountOverflow,
  // bench / config
  VectorTooLargeForWram,
  ConfigError,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// True for the planner failures surfaced by execute() as "plan infeasible".
constexpr bool is_plan_infeasible(ErrorCode code) {
  return code == ErrorCode::WramTooSmall || code == ErrorCode::MramTooSmall;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by argument-role validation; carries the offending argument index
/// (absent when the violation is not attributable to a single argument).
class RoleViolation : public Error {
 public:
  RoleViolation(std::optional<std::size_t> arg_index, const std::string& what);

  std::optional<std::size_t> arg_index() const { return arg_index_; }

 private:
  std::optional<std::size_t> arg_index_;
};

/// A buffer produced by a filter/reduce stage feeds a stage that cannot run in
/// the same device program. Use PipelineFull for such chains.
class InvalidChain : public Error {
 public:
  InvalidChain(std::uint64_t buffer_id, std::size_t producer_stage, std::string consumer_kind);

  std::uint64_t buffer_id() const { return buffer_id_; }
  std::size_t producer_stage() const { return producer_stage_; }
  const std::string& consumer_kind() const { return consumer_kind_; }

 private:
  std::uint64_t buffer_id_;
  std::size_t producer_stage_;
  std::string consumer_kind_;
};

}  // namespace pimflow
