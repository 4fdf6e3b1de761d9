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

#include <pimflow/errors.hpp>

namespace pimflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::GroupNotDivisible: return "GroupNotDivisible";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::RoleViolation: return "RoleViolation";
    case ErrorCode::InvalidChain: return "InvalidChain";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownBuffer: return "UnknownBuffer";
    case ErrorCode::AlreadyExecuted: return "AlreadyExecuted";
    case ErrorCode::NotExecuted: return "NotExecuted";
    case ErrorCode::NotFetched: return "NotFetched";
    case ErrorCode::MissingOverlapVector: return "MissingOverlapVector";
    case ErrorCode::WramTooSmall: return "WramTooSmall";
    case ErrorCode::MramTooSmall: return "MramTooSmall";
    case ErrorCode::AlignmentViolation: return "AlignmentViolation";
    case ErrorCode::OutOfMram: return "OutOfMram";
    case ErrorCode::OutOfWram: return "OutOfWram";
    case ErrorCode::MemoryViolation: return "MemoryViolation";
    case ErrorCode::KernelFault: return "KernelFault";
    case ErrorCode::DeviceError: return "DeviceError";
    case ErrorCode::CountOverflow: return "CountOverflow";
    case ErrorCode::VectorTooLargeForWram: return "VectorTooLargeForWram";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

RoleViolation::RoleViolation(std::optional<std::size_t> arg_index, const std::string& what)
    : Error(ErrorCode::RoleViolation,
            arg_index ? "argument " + std::to_string(*arg_index) + ": " + what : what),
      arg_index_(arg_index) {}

InvalidChain::InvalidChain(std::uint64_t buffer_id, std::size_t producer_stage, std::string consumer_kind)
    : Error(ErrorCode::InvalidChain,
            "buffer " + std::to_string(buffer_id) + " produced by stage " + std::to_string(producer_stage) +
                " cannot be consumed by a " + consumer_kind + " stage in the same Pipeline; use PipelineFull"),
      buffer_id_(buffer_id),
      producer_stage_(producer_stage),
      consumer_kind_(std::move(consumer_kind)) {}

}  // namespace pimflow
