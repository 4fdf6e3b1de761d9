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
 * @file codegen.hpp
 * @brief Template instantiation of the device program.
 *
 * T1 collects the global stage and argument lists and reduces argument types
 * to (size, name). T2 lays the data out in MRAM and WRAM. T3 carves off the
 * host leftover task. T4 lists the host post-processing. The result is a
 * DeviceProgram, printable as canonical text and parseable back.
 */

#pragma once

#include <pimflow/config.hpp>
#include <pimflow/pipeline.hpp>
#include <pimflow/planner.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace pimflow {

struct KernelRecord {
  std::string kernel_id;
  std::string signature;
  std::size_t stage = 0;

  bool operator==(const KernelRecord&) const = default;
};

struct GlobalLists {
  StageList stages;
  LayoutModel model;                  // stage and buffer descriptors
  std::vector<BufferHandle> handles;  // aligned with model.buffers
  std::vector<bool> uploaded;         // host contents read on the device
  std::vector<bool> fetched;
  std::vector<KernelRecord> kernels;

  std::size_t index_of(BufferId id) const;  // kNoIndex when absent
};

/// Builds the global lists and checks the length algebra of the chain.
/// Throws LengthMismatch, GroupNotDivisible, WindowTooLarge, RoleViolation.
GlobalLists t1_extract(std::span<const StageSpec> stages, std::span<const BufferHandle> fetch, std::uint64_t length);
GlobalLists t1_extract(const Pipeline& p);

LayoutPlan t2_memory_params(const GlobalLists& lists, const DeviceConfig& device, double cpu_ratio = 0.0);

struct LeftoverTask {
  std::uint64_t begin = 0;  // first domain element handled on the host
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
};

LeftoverTask t3_cpu_leftover(const LayoutPlan& plan, const GlobalLists& lists);

struct Directive {
  enum class Kind { Compact, Combine };
  Kind kind = Kind::Compact;
  std::size_t buffer = 0;

  bool operator==(const Directive&) const = default;
};

std::vector<Directive> t4_postprocessing(const GlobalLists& lists);

struct ProgramBuffer {
  BufferKind kind = BufferKind::Vector;
  ElemType elem;
  std::uint64_t length = 0;
  std::uint64_t divisor = 1;
  std::uint64_t halo = 0;
  std::uint64_t mram = 0;
  std::uint64_t bytes = 0;
  std::optional<std::uint64_t> header;
  bool upload = false;
  bool fetch = false;

  bool operator==(const ProgramBuffer&) const = default;
};

struct ProgramArg {
  ArgRole role = ArgRole::Input;
  ElemType elem;
  std::uint64_t mram = 0;
  std::uint64_t wram = 0;
  std::uint64_t wram_bytes = 0;
  std::uint64_t count = 0;
  std::size_t buffer = kNoIndex;
  std::size_t overlap = kNoIndex;

  bool operator==(const ProgramArg&) const = default;
};

struct ProgramStage {
  PatternKind kind = PatternKind::Map;
  std::string kernel_id;
  std::string signature;
  std::uint32_t window = 1;
  std::uint32_t group = 1;
  std::uint32_t lookahead = 0;
  std::uint64_t block = 0;
  std::uint64_t unit = 1;
  std::uint64_t halo = 0;
  bool compact_input = false;
  std::uint32_t cycles = kDefaultCostHint;
  std::vector<ProgramArg> args;

  bool operator==(const ProgramStage&) const = default;
};

struct DeviceProgram {
  std::uint32_t tasklets = 1;
  std::uint32_t n_dpus = 1;
  std::uint64_t wram_budget = 0;
  std::uint64_t mram_used = 0;
  std::uint64_t total_length = 0;
  std::uint64_t per_dpu = 0;
  std::uint64_t per_round = 0;
  std::uint64_t rounds = 0;
  std::uint64_t leftover = 0;
  std::uint64_t quantum = 1;
  std::vector<ProgramBuffer> buffers;
  std::vector<ProgramStage> stages;
  std::vector<Directive> directives;

  bool operator==(const DeviceProgram&) const = default;
};

DeviceProgram build_program(const GlobalLists& lists, const LayoutPlan& plan, const std::vector<Directive>& directives,
                            const DeviceConfig& device, const CostModel& cost);

struct CompiledPipeline {
  GlobalLists lists;
  LayoutPlan plan;
  LeftoverTask leftover;
  std::vector<Directive> directives;
  DeviceProgram program;
};

/// T1..T4 in order.
CompiledPipeline compile_pipeline(std::span<const StageSpec> stages, std::span<const BufferHandle> fetch,
                                  std::uint64_t length, const SystemConfig& cfg, double cpu_ratio = 0.0);

std::string emit_program_text(const DeviceProgram& dp);
DeviceProgram parse_program_text(std::string_view text);  // ParseError

}  // namespace pimflow
