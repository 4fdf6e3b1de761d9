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
 * @file simdev.hpp
 * @brief Simulated processing-near-memory device: per-DPU MRAM and WRAM
 *        stores, DMA rules, stage execution of a DeviceProgram and the
 *        transfer/compute timing model.
 */

#pragma once

#include <pimflow/codegen.hpp>
#include <pimflow/config.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace pimflow {

enum class TransferMode { Serial, Parallel, Broadcast };

std::string_view to_string(TransferMode mode);

/// Byte array with declared regions. Any access that does not fall inside a
/// single region raises MemoryViolation.
class ByteStore {
 public:
  ByteStore() = default;
  explicit ByteStore(std::uint64_t size) : bytes_(size) {}

  void declare(std::uint64_t offset, std::uint64_t size);
  std::span<std::byte> at(std::uint64_t offset, std::uint64_t size);
  std::span<const std::byte> at(std::uint64_t offset, std::uint64_t size) const;

  std::uint64_t size() const { return bytes_.size(); }
  const ByteVec& raw() const { return bytes_; }

 private:
  void check(std::uint64_t offset, std::uint64_t size) const;

  ByteVec bytes_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> regions_;  // sorted [begin, end)
};

struct DpuState {
  ByteStore mram;
  ByteVec wram;  // tasklets x per-tasklet budget
};

struct DpuPayload {
  std::uint32_t dpu = 0;
  std::uint64_t mram_offset = 0;
  ByteVec bytes;
};

struct DpuRequest {
  std::uint32_t dpu = 0;
  std::uint64_t mram_offset = 0;
  std::uint64_t bytes = 0;
};

/// Host<->device transfer time. `per_dpu_bytes` holds one entry per DPU taking
/// part; Broadcast expects a single entry (the replicated payload).
double transfer_time(TransferMode mode, const CostModel& cost, std::span<const std::uint64_t> per_dpu_bytes);

double dma_chunk_time(const CostModel& cost, std::uint64_t bytes);

struct RoundStats {
  std::vector<double> dpu_ns;
  std::vector<std::uint64_t> invocations;
  std::vector<std::uint64_t> dma_chunks;
  double kernel_ns = 0;
};

class Device {
 public:
  explicit Device(SystemConfig cfg = {});

  const DeviceConfig& config() const { return cfg_.device; }
  const CostModel& cost() const { return cfg_.cost; }
  const SystemConfig& system() const { return cfg_; }

  void set_parallel_sim(bool on) { parallel_sim_ = on; }
  bool parallel_sim() const { return parallel_sim_; }

  /// Binds a program and its kernels; allocates and zeroes every DPU's MRAM
  /// up to the program's footprint. OutOfMram, DeviceError.
  void load(const DeviceProgram& program, std::span<const StageSpec> stages);

  double upload(TransferMode mode, std::span<const DpuPayload> payloads);
  double broadcast(std::uint64_t mram_offset, std::span<const std::byte> bytes);

  /// Executes every stage on every DPU for one round; returns the modeled
  /// kernel time (slowest DPU).
  double run_round(std::uint64_t round);

  struct Gathered {
    std::vector<ByteVec> data;  // aligned with the requests
    double time_ns = 0;
  };
  Gathered download(TransferMode mode, std::span<const DpuRequest> requests);

  const DpuState& dpu(std::uint32_t d) const { return dpus_.at(d); }
  const RoundStats& last_round() const { return last_round_; }
  const DeviceProgram& program() const { return program_; }

 private:
  void check_host_access(std::uint32_t dpu, std::uint64_t offset, std::uint64_t bytes) const;

  SystemConfig cfg_;
  bool parallel_sim_ = false;
  DeviceProgram program_;
  std::vector<StageSpec> stages_;
  std::vector<DpuState> dpus_;
  RoundStats last_round_;
};

}  // namespace pimflow
