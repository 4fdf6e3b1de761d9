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

// bench: runs one workload on the simulated device and checks it against
// the host oracle. Exit status 0 pass, 1 oracle mismatch, 2 bad configuration.

#include <pimflow/bench.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace pimflow;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitConfig = 2;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run a PIM workload on the simulated device"};
  std::string workload;
  std::uint32_t dpus = 16;
  std::uint64_t elems_per_dpu = 64 * 1024;
  std::uint32_t tasklets = 11;
  std::string device_config;
  std::string strategy = "both";
  std::uint64_t seed = 1;
  std::string report;
  std::string emit_program;
  bool loc = false;
  bool parallel_sim = false;
  std::uint32_t gemv_rows = 256;
  std::uint32_t gemv_cols = 64;
  std::uint32_t bins = 256;

  app.add_option("--workload", workload, "VA, SEL, UNI, RED, GEMV or HST-S");
  app.add_option("--dpus", dpus, "number of DPUs")->check(CLI::PositiveNumber);
  app.add_option("--elems-per-dpu", elems_per_dpu, "u32 elements per DPU");
  app.add_option("--tasklets", tasklets, "tasklets per DPU")->check(CLI::PositiveNumber);
  app.add_option("--device-config", device_config, "device/cost JSON")->check(CLI::ExistingFile);
  app.add_option("--strategy", strategy, "gather strategy")->check(CLI::IsMember({"serial", "parallel", "both"}));
  app.add_option("--seed", seed, "data seed");
  app.add_option("--report", report, "write the JSON report here");
  app.add_option("--gemv-rows", gemv_rows, "GEMV rows per DPU");
  app.add_option("--gemv-cols", gemv_cols, "GEMV columns");
  app.add_option("--bins", bins, "HST-S bins");
  app.add_option("--emit-program", emit_program, "write the device program text here ('-' for stdout) and exit");
  app.add_flag("--loc-report", loc, "print framework-call counts per workload and exit");
  app.add_flag("--parallel-sim", parallel_sim, "simulate DPUs on worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (loc) {
    std::cout << bench::loc_report_text(bench::loc_report());
    return kExitPass;
  }
  if (workload.empty()) {
    std::cerr << "bench: --workload is required\n";
    return kExitConfig;
  }

  try {
    SystemConfig cfg = device_config.empty() ? SystemConfig{} : load_system_config(device_config);
    cfg.device.n_dpus = dpus;
    cfg.device.tasklets = tasklets;
    cfg.device.validate();

    bench::WorkloadSpec spec;
    spec.workload = bench::parse_workload(workload);
    spec.n_dpus = dpus;
    spec.elems_per_dpu = elems_per_dpu;
    spec.gemv_rows_per_dpu = gemv_rows;
    spec.gemv_cols = gemv_cols;
    spec.bins = bins;
    spec.seed = seed;

    if (!emit_program.empty()) {
      const std::string text = bench::workload_program_text(spec, cfg);
      if (emit_program == "-") {
        std::cout << text;
      } else {
        write_file(emit_program, text);
      }
      return kExitPass;
    }

    bench::BenchOptions opts;
    opts.parallel_sim = parallel_sim;
    if (strategy == "serial") opts.strategies = {GatherMode::Serial};
    if (strategy == "parallel") opts.strategies = {GatherMode::Parallel};

    const bench::BenchReport r = bench::run_bench(spec, cfg, opts);
    const std::string json = bench::report_to_json(r);
    if (!report.empty()) write_file(report, json);

    for (const bench::StrategyResult& s : r.strategies) {
      std::printf("%s %s %s total_ns=%.0f cpu_to_dpu_ns=%.0f kernel_ns=%.0f dpu_to_cpu_ns=%.0f host_post_ns=%.0f rounds=%llu\n",
                  std::string(bench::to_string(spec.workload)).c_str(), std::string(to_string(s.gather)).c_str(),
                  s.pass ? "pass" : "FAIL", s.timing.total_ns(), s.timing.cpu_to_dpu_ns, s.timing.kernel_ns,
                  s.timing.dpu_to_cpu_ns, s.timing.host_post_ns, static_cast<unsigned long long>(s.rounds));
    }
    return r.pass() ? kExitPass : kExitMismatch;
  } catch (const Error& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return kExitConfig;
  }
}
