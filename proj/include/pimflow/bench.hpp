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
 * @file bench.hpp
 * @brief The six benchmark workloads as pipelines, their host oracles, and
 *        the report written by the bench tool.
 */

#pragma once

#include <pimflow/config.hpp>
#include <pimflow/exec.hpp>
#include <pimflow/pipeline.hpp>

#include <map>
#include <string>
#include <vector>

namespace pimflow::bench {

enum class Workload { VA, SEL, UNI, RED, GEMV, HSTS };

inline constexpr Workload kAllWorkloads[] = {Workload::VA,  Workload::SEL,  Workload::UNI,
                                             Workload::RED, Workload::GEMV, Workload::HSTS};

std::string_view to_string(Workload w);
Workload parse_workload(std::string_view name);  // ConfigError

struct WorkloadSpec {
  Workload workload = Workload::VA;
  std::uint32_t n_dpus = 16;
  std::uint64_t elems_per_dpu = 64 * 1024;
  std::uint32_t gemv_rows_per_dpu = 256;
  std::uint32_t gemv_cols = 64;
  std::uint32_t bins = 256;
  std::uint64_t seed = 1;
};

/// A workload ready to run: stages, fetch set, domain length and the
/// expected contents of every fetched buffer.
struct BuiltWorkload {
  StageList stages;
  std::vector<BufferHandle> fetch;
  std::uint64_t length = 0;
  std::vector<ByteVec> expected;  // aligned with fetch

  Pipeline pipeline() const;
  bool matches() const;  // fetched buffers bit-equal the oracle
};

/// Throws VectorTooLargeForWram when the GEMV vector exceeds the per-tasklet
/// WRAM budget of `device`.
BuiltWorkload build_workload(const WorkloadSpec& spec, const DeviceConfig& device);

struct StrategyResult {
  GatherMode gather = GatherMode::Parallel;
  bool pass = false;
  TimingBreakdown timing;
  std::uint64_t rounds = 0;
  std::uint64_t cpu_leftover = 0;
};

inline constexpr int kReportVersion = 1;

struct BenchReport {
  int version = kReportVersion;
  WorkloadSpec spec;
  SystemConfig config;
  std::vector<StrategyResult> strategies;

  bool pass() const;
};

struct BenchOptions {
  std::vector<GatherMode> strategies{GatherMode::Serial, GatherMode::Parallel};
  bool parallel_sim = false;
};

/// Builds, executes and checks the workload once per strategy.
BenchReport run_bench(const WorkloadSpec& spec, const SystemConfig& cfg, const BenchOptions& opts = {});

std::string report_to_json(const BenchReport& r);
BenchReport parse_report(const std::string& json_text);  // ParseError

/// Device program text of a workload under `cfg`.
std::string workload_program_text(const WorkloadSpec& spec, const SystemConfig& cfg);

struct LocEntry {
  Workload workload = Workload::VA;
  std::size_t stages = 0;
  std::size_t fetches = 0;
  std::size_t calls = 0;  // stages + fetches + execute
  unsigned listing_loc = 0;  // host lines of the reference listing
};

std::vector<LocEntry> loc_report();
std::string loc_report_text(const std::vector<LocEntry>& entries);

}  // namespace pimflow::bench
