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

#include <pimflow/patterns.hpp>

#include <map>
#include <optional>
#include <vector>

namespace pimflow {

struct StageOptions {
  std::optional<std::uint32_t> window;
  std::optional<std::uint32_t> group;
  // One padding buffer per Input argument, in argument order. Empty means the
  // window shrinks its output instead of preserving the length.
  std::vector<BufferHandle> overlap;
};

struct StageSpec {
  std::size_t index = 0;
  PatternKind kind = PatternKind::Map;
  KernelSpec kernel;
  std::vector<ArgSpec> args;
  std::optional<std::uint32_t> window;
  std::optional<std::uint32_t> group;
  std::vector<BufferHandle> overlap;  // aligned with args; null where absent

  bool has_overlap() const;
  PatternParams params() const;
  std::uint32_t lookahead() const { return pimflow::lookahead(kind, window.value_or(1)); }
  std::uint32_t group_size() const { return has_group(kind) ? group.value_or(1) : 1; }
  const ArgSpec* output_arg() const;
};

/// Builds and validates a stage: argument roles, window/group parameters and
/// overlap vectors.
StageSpec make_stage(PatternKind kind, KernelSpec kernel, std::vector<ArgSpec> args, StageOptions opts = {});

/// Buffers written by a stage (Output, InOut, ReduceOut).
std::vector<BufferId> written_buffers(const StageSpec& s);

/// True when `consumer` cannot share a device program with `producer`
/// because it reads something only the host can materialise: a reduce
/// result, a filtered vector outside a pure filter/reduce continuation, or
/// any produced buffer used as a broadcast scalar.
bool needs_cut(const StageSpec& producer, const StageSpec& consumer);

/// Initial accumulator of a ReduceOut argument: the buffer contents, or zeros
/// when the buffer is empty. Any other length is a LengthMismatch.
ByteVec reduce_initial(const ArgSpec& arg, const ByteVec& contents);

/// Buffer contents keyed by id; the host reference state.
using HostState = std::map<BufferId, ByteVec>;

HostState snapshot(std::span<const StageSpec> stages);

/// Applies the stages in order with apply_pattern_host.
void run_host_stages(std::span<const StageSpec> stages, HostState& state);

}  // namespace pimflow
