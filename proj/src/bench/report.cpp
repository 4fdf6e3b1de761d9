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

#include <pimflow/bench.hpp>

#include <json.hpp>

namespace pimflow::bench {

using nlohmann::ordered_json;

namespace {

ordered_json timing_json(const TimingBreakdown& t) {
  return ordered_json{{"cpu_to_dpu_ns", t.cpu_to_dpu_ns},
                      {"kernel_ns", t.kernel_ns},
                      {"dpu_to_cpu_ns", t.dpu_to_cpu_ns},
                      {"host_post_ns", t.host_post_ns},
                      {"total_ns", t.total_ns()}};
}

GatherMode parse_gather(const std::string& s) {
  if (s == "serial") return GatherMode::Serial;
  if (s == "parallel") return GatherMode::Parallel;
  throw Error(ErrorCode::ParseError, "unknown strategy '" + s + "'");
}

}  // namespace

std::string report_to_json(const BenchReport& r) {
  ordered_json j;
  j["version"] = r.version;
  j["workload"] = std::string(to_string(r.spec.workload));
  j["config"] = ordered_json{{"dpus", r.spec.n_dpus},
                             {"elems_per_dpu", r.spec.elems_per_dpu},
                             {"tasklets", r.config.device.tasklets},
                             {"seed", r.spec.seed},
                             {"gemv_rows_per_dpu", r.spec.gemv_rows_per_dpu},
                             {"gemv_cols", r.spec.gemv_cols},
                             {"bins", r.spec.bins},
                             {"system", ordered_json::parse(dump_system_config(r.config))}};
  j["verdict"] = r.pass() ? "pass" : "fail";
  ordered_json timings = ordered_json::object();
  ordered_json runs = ordered_json::object();
  for (const StrategyResult& s : r.strategies) {
    const std::string name(to_string(s.gather));
    timings[name] = timing_json(s.timing);
    runs[name] = ordered_json{{"verdict", s.pass ? "pass" : "fail"},
                              {"rounds", s.rounds},
                              {"cpu_leftover", s.cpu_leftover},
                              {"overhead_ns", s.timing.overhead_ns}};
  }
  j["timings"] = timings;
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

BenchReport parse_report(const std::string& json_text) {
  try {
    const ordered_json j = ordered_json::parse(json_text);
    BenchReport r;
    r.version = j.at("version").get<int>();
    if (r.version != kReportVersion)
      throw Error(ErrorCode::ParseError, "unsupported report version " + std::to_string(r.version));
    r.spec.workload = parse_workload(j.at("workload").get<std::string>());
    const ordered_json& c = j.at("config");
    r.spec.n_dpus = c.at("dpus").get<std::uint32_t>();
    r.spec.elems_per_dpu = c.at("elems_per_dpu").get<std::uint64_t>();
    r.spec.seed = c.at("seed").get<std::uint64_t>();
    r.spec.gemv_rows_per_dpu = c.at("gemv_rows_per_dpu").get<std::uint32_t>();
    r.spec.gemv_cols = c.at("gemv_cols").get<std::uint32_t>();
    r.spec.bins = c.at("bins").get<std::uint32_t>();
    r.config = parse_system_config(c.at("system").dump());
    const ordered_json& runs = j.at("runs");
    for (auto it = j.at("timings").begin(); it != j.at("timings").end(); ++it) {
      StrategyResult s;
      s.gather = parse_gather(it.key());
      const ordered_json& t = it.value();
      s.timing.cpu_to_dpu_ns = t.at("cpu_to_dpu_ns").get<double>();
      s.timing.kernel_ns = t.at("kernel_ns").get<double>();
      s.timing.dpu_to_cpu_ns = t.at("dpu_to_cpu_ns").get<double>();
      s.timing.host_post_ns = t.at("host_post_ns").get<double>();
      const ordered_json& run = runs.at(it.key());
      s.pass = run.at("verdict").get<std::string>() == "pass";
      s.rounds = run.at("rounds").get<std::uint64_t>();
      s.cpu_leftover = run.at("cpu_leftover").get<std::uint64_t>();
      s.timing.overhead_ns = run.at("overhead_ns").get<double>();
      r.strategies.push_back(s);
    }
    if ((j.at("verdict").get<std::string>() == "pass") != r.pass())
      throw Error(ErrorCode::ParseError, "verdict disagrees with the per-strategy results");
    return r;
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad report: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, std::string("bad report: ") + e.what());
  }
}

}  // namespace pimflow::bench
