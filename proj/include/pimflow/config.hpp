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
#include <string>

namespace pimflow {

struct DmaLimits {
  std::uint32_t min_bytes = 8;
  std::uint32_t max_bytes = 2048;
  std::uint32_t align_bytes = 8;
};

struct DeviceConfig {
  std::uint32_t n_dpus = 16;
  std::uint64_t mram_bytes = 64ull << 20;
  std::uint64_t wram_bytes = 64ull << 10;
  std::uint64_t wram_reserved_bytes = 16ull << 10;
  std::uint32_t max_tasklets = 24;
  std::uint32_t tasklets = 11;
  std::uint64_t freq_hz = 450'000'000;
  DmaLimits dma;

  /// floor((wram - reserved) / tasklets), rounded down to 8 bytes.
  std::uint64_t wram_budget_per_tasklet() const;
  void validate() const;  // ConfigError
};

struct LinkCost {
  double latency_ns = 0;
  double bytes_per_ns = 1;
};

struct ParallelLinkCost {
  double latency_ns = 20'000;
  double bytes_per_ns = 0.6;
  std::uint32_t lanes = 40;
};

struct HostCost {
  double bytes_per_ns = 10.0;      // host memcpy rate for compaction
  double ns_per_invocation = 5.0;  // leftover kernels and partial combines
};

struct CostModel {
  LinkCost serial_xfer{2'000, 0.6};
  ParallelLinkCost parallel_xfer{};
  LinkCost broadcast_xfer{20'000, 0.6};
  LinkCost dma{1'000, 1.0};
  std::uint32_t cycles_per_invocation_default = 20;
  double fixed_codegen_overhead_ns = 151e6;
  double fixed_alloc_overhead_ns = 1200e6;
  HostCost host{};

  void validate() const;  // ConfigError
};

struct SystemConfig {
  DeviceConfig device;
  CostModel cost;
};

/// Parses {"device": {...}, "cost": {...}}. Missing fields keep their
/// defaults; unknown fields are a ConfigError.
SystemConfig parse_system_config(const std::string& json_text);
SystemConfig load_system_config(const std::string& path);
std::string dump_system_config(const SystemConfig& cfg);

}  // namespace pimflow
