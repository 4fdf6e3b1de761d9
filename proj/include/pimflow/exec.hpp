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

#include <cstdint>
#include <map>

namespace pimflow {

enum class GatherMode { Serial, Parallel };

std::string_view to_string(GatherMode mode);

struct ExecOptions {
  GatherMode gather = GatherMode::Parallel;
  double cpu_ratio = 0.0;     // share of the domain forced onto the host
  bool parallel_sim = false;  // simulate DPUs on worker threads
};

/// Modeled time per phase. total_ns() covers the four phases; the fixed
/// codegen/allocation overheads are reported separately.
struct TimingBreakdown {
  double cpu_to_dpu_ns = 0;
  double kernel_ns = 0;
  double dpu_to_cpu_ns = 0;
  double host_post_ns = 0;
  double overhead_ns = 0;

  double total_ns() const { return cpu_to_dpu_ns + kernel_ns + dpu_to_cpu_ns + host_post_ns; }

  TimingBreakdown& operator+=(const TimingBreakdown& o) {
    cpu_to_dpu_ns += o.cpu_to_dpu_ns;
    kernel_ns += o.kernel_ns;
    dpu_to_cpu_ns += o.dpu_to_cpu_ns;
    host_post_ns += o.host_post_ns;
    overhead_ns += o.overhead_ns;
    return *this;
  }
};

struct ExecReport {
  std::map<BufferId, std::uint64_t> fetched_lengths;
  TimingBreakdown timing;
  std::uint64_t rounds = 0;
  std::uint64_t cpu_leftover = 0;
  std::size_t subpipelines = 1;
  double device_kernel_ns = 0;  // before the overlap with host leftover work
  double leftover_host_ns = 0;
};

}  // namespace pimflow
