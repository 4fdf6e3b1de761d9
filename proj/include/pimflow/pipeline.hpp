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

/**
 * @file pipeline.hpp
 * @brief The dataflow API. A Pipeline is a fixed-length sequence of pattern
 *        stages that runs as one device program; PipelineFull accepts any
 *        chain and splits it where the host has to step in.
 *
 *   Pipeline p(n);
 *   p.add_stage(make_stage(PatternKind::Map, add, {input<u32>(a), input<u32>(b), output<u32>(c)}));
 *   p.add_stage(make_stage(PatternKind::Reduce, sum, {reduce_out<u32>(s), input<u32>(c)}));
 *   p.fetch(s);
 *   p.execute(device);
 */

#pragma once

#include <pimflow/exec.hpp>
#include <pimflow/stage.hpp>

#include <map>
#include <vector>

namespace pimflow {

class Device;

using StageList = std::vector<StageSpec>;

class Pipeline {
 public:
  explicit Pipeline(std::uint64_t length);

  /// Throws RoleViolation, InvalidChain or LengthMismatch; the pipeline is
  /// unchanged on failure.
  void add_stage(StageSpec stage);

  /// Marks a produced buffer for gathering. UnknownBuffer, AlreadyExecuted.
  void fetch(const BufferHandle& buffer);

  ExecReport execute(Device& device, const ExecOptions& opts = {});

  std::uint64_t get_length(const BufferHandle& buffer) const;

  std::uint64_t length() const { return length_; }
  const StageList& stages() const { return stages_; }
  const std::vector<BufferHandle>& fetch_set() const { return fetch_; }
  bool executed() const { return executed_; }
  bool is_fetched(BufferId id) const;

 private:
  std::uint64_t length_;
  StageList stages_;
  std::vector<BufferHandle> fetch_;
  std::map<BufferId, std::uint64_t> lengths_;
  bool executed_ = false;
};

/// Cuts right after the latest producer a stage cannot follow on the device,
/// then continues from there. Chains Pipeline accepts come back whole.
std::vector<StageList> split_into_subpipelines(std::span<const StageSpec> stages);

class PipelineFull {
 public:
  explicit PipelineFull(std::uint64_t length);

  /// Role checks only; chaining is resolved by splitting at execute().
  void add_stage(StageSpec stage);
  void fetch(const BufferHandle& buffer);
  ExecReport execute(Device& device, const ExecOptions& opts = {});
  std::uint64_t get_length(const BufferHandle& buffer) const;

  std::uint64_t length() const { return length_; }
  const StageList& stages() const { return stages_; }
  std::vector<StageList> subpipelines() const { return split_into_subpipelines(stages_); }
  bool executed() const { return executed_; }

 private:
  std::uint64_t length_;
  StageList stages_;
  std::vector<BufferHandle> fetch_;
  std::map<BufferId, std::uint64_t> lengths_;
  bool executed_ = false;
};

}  // namespace pimflow
