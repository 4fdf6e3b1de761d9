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
 * @file planner.hpp
 * @brief MRAM/WRAM layout: per-stage WRAM cache sizing, pipeline-wide MRAM
 *        regions, rounds and CPU leftover. Every offset and padded size is a
 *        multiple of 8 bytes.
 */

#pragma once

#include <pimflow/patterns.hpp>

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace pimflow {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

constexpr std::uint64_t pad8(std::uint64_t bytes) { return (bytes + 7) / 8 * 8; }

/// Elements of `elem_size` bytes needed so that a run of them is 8-byte sized.
constexpr std::uint64_t align_elems(std::uint64_t elem_size) { return 8 / std::gcd<std::uint64_t>(8, elem_size); }

struct ElementCount {
  std::uint64_t count = 0;
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint64_t> padded;
  std::uint64_t total_bytes = 0;
};

/// Largest count such that the 8-byte padded per-argument regions fit the
/// budget. Starts from floor(budget / sum(sizes)) and steps down.
ElementCount wram_element_count(std::span<const std::uint32_t> sizes, std::uint64_t budget_bytes);

/// Same, over the per-element arguments of a stage (Scalars, ReduceOut and
/// Combine excluded). Entries stay aligned with `args`; excluded ones get
/// zero padded bytes.
ElementCount wram_element_count(std::span<const ArgSpec> args, std::uint64_t budget_bytes);

/// MRAM flavour: the same search against budget - header; offsets start after
/// the header block.
ElementCount mram_capacity(std::span<const std::uint32_t> sizes, std::uint64_t budget_bytes,
                           std::uint64_t header_bytes);

struct RoundSplit {
  std::uint64_t elements_per_round = 0;
  std::uint64_t nr_rounds = 0;
  std::uint64_t cpu_leftover = 0;
};

RoundSplit rounds_and_leftover(std::uint64_t total_length, std::uint64_t per_round_capacity_all_dpus,
                               std::uint64_t n_dpus, std::uint64_t align_elems);

/// Per-DPU read extent of a windowed input.
struct DpuExtent {
  std::uint64_t begin = 0;         // first global element
  std::uint64_t elements = 0;      // core + lookahead
  std::uint64_t from_overlap = 0;  // trailing elements taken from the overlap vector
  std::uint64_t padded_bytes = 0;
};

std::vector<DpuExtent> window_overlap_plan(std::uint32_t lookahead, std::uint64_t n_dpus,
                                           std::uint64_t elems_per_dpu, std::uint32_t elem_size,
                                           std::uint64_t length, bool overlap_provided,
                                           std::uint64_t first_element = 0);

struct FilterWrite {
  std::uint64_t kept = 0;
  std::uint64_t carry_bytes = 0;   // bytes of the previous tail replayed at the block start
  std::uint64_t write_offset = 0;  // relative to the output base, multiple of 8
  std::uint64_t write_bytes = 0;   // multiple of 8; zero when nothing is pending
  std::uint64_t valid_bytes = 0;   // contiguous prefix after this write
};

/// Appends kept elements to a contiguous MRAM prefix with aligned writes.
/// The WRAM cache is laid out as [8-byte carry word][block]; kept elements
/// are packed right after the carry bytes.
class FilterAppender {
 public:
  explicit FilterAppender(std::uint32_t elem_size) : elem_size_(elem_size) {}

  std::uint64_t carry_bytes() const { return valid_ % 8; }
  std::uint64_t valid_bytes() const { return valid_; }
  std::uint64_t valid_elements() const { return valid_ / elem_size_; }

  FilterWrite append(std::uint64_t kept);

  /// WRAM offset (within the cache) where the new carry bytes sit after
  /// `w`; they must be moved to offset 0 before the next block.
  static std::uint64_t next_carry_source(const FilterWrite& w) {
    return w.write_bytes ? w.valid_bytes / 8 * 8 - w.write_offset : 0;
  }

 private:
  std::uint32_t elem_size_;
  std::uint64_t valid_ = 0;
};

std::vector<FilterWrite> filter_output_plan(std::uint32_t elem_size, std::uint64_t block_capacity,
                                            std::span<const std::uint64_t> keep_counts);

// ---------------------------------------------------------------------------
// Whole-pipeline layout

enum class BufferKind { Vector, Filtered, Scalar, Reduce, Overlap };

std::string_view to_string(BufferKind kind);
BufferKind parse_buffer_kind(std::string_view name);

struct BufferDesc {
  ElemType elem;
  BufferKind kind = BufferKind::Vector;
  std::uint64_t length = 0;   // elements; upper bound when Filtered, width when Reduce
  std::uint64_t divisor = 1;  // domain elements per element (Vector/Filtered)
  std::uint64_t halo = 0;     // elements kept past the per-DPU core slice

  bool is_vector() const { return kind == BufferKind::Vector || kind == BufferKind::Filtered; }
  bool operator==(const BufferDesc&) const = default;
};

struct StageArgDesc {
  ArgRole role = ArgRole::Input;
  std::size_t buffer = kNoIndex;
  std::size_t overlap = kNoIndex;

  bool operator==(const StageArgDesc&) const = default;
};

struct StageDesc {
  PatternKind kind = PatternKind::Map;
  std::uint32_t window = 1;
  std::uint32_t group = 1;
  std::uint32_t lookahead = 0;
  std::uint64_t halo = 0;       // invocations computed past the core slice
  bool compact_input = false;   // reads a filtered vector
  std::vector<StageArgDesc> args;

  bool operator==(const StageDesc&) const = default;
};

struct LayoutModel {
  std::vector<BufferDesc> buffers;
  std::vector<StageDesc> stages;
  std::uint64_t total_length = 0;  // domain length N
};

struct PlanTarget {
  std::uint64_t n_dpus = 1;
  std::uint64_t tasklets = 1;
  std::uint64_t mram_bytes = 0;
  std::uint64_t wram_budget = 0;  // per tasklet
};

struct WramArgPlan {
  std::uint64_t offset = 0;
  std::uint64_t padded_bytes = 0;
  std::uint64_t count = 0;

  bool operator==(const WramArgPlan&) const = default;
};

struct WramStagePlan {
  std::size_t stage = 0;
  std::uint64_t elems_per_block = 0;  // invocations per block
  std::uint64_t unit = 1;             // block granularity keeping every DMA 8-byte aligned
  std::vector<WramArgPlan> args;
  std::uint64_t used_bytes = 0;
};

struct MramRegion {
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
  std::optional<std::uint64_t> header;  // count slot, Filtered and Reduce buffers
};

struct MramPlan {
  std::uint64_t elems_per_dpu_per_round = 0;
  std::vector<MramRegion> regions;  // aligned with LayoutModel::buffers
  std::uint64_t header_bytes = 0;
  std::uint64_t used_bytes = 0;
};

struct LayoutPlan {
  std::vector<WramStagePlan> wram;
  MramPlan mram;
  std::uint64_t elements_per_round = 0;
  std::uint64_t nr_rounds = 0;
  std::uint64_t cpu_leftover = 0;
  std::uint64_t quantum = 1;
  std::uint64_t total_length = 0;
  std::uint64_t n_dpus = 1;
  std::uint64_t tasklets = 1;
  std::uint64_t wram_budget = 0;

  std::uint64_t device_length() const { return elements_per_round * nr_rounds; }
};

/// lcm over vector buffers of divisor * align_elems(size): the domain step that
/// keeps every per-DPU and per-tasklet slice of every buffer 8-byte aligned.
std::uint64_t domain_quantum(const LayoutModel& model);

std::uint64_t stage_unit(const LayoutModel& model, std::size_t stage);

WramStagePlan plan_stage_wram(const LayoutModel& model, std::size_t stage, std::uint64_t budget);

/// Bytes of MRAM the model needs per DPU for a per-round share of k.
MramPlan layout_mram(const LayoutModel& model, std::uint64_t k);

/// Full plan; `cpu_ratio` in [0,1] moves ceil(ratio * N) elements to the host.
LayoutPlan plan_layout(const LayoutModel& model, const PlanTarget& target, double cpu_ratio = 0.0);

}  // namespace pimflow
