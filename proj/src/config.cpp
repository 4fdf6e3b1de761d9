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

#include <pimflow/config.hpp>
#include <pimflow/errors.hpp>

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace pimflow {

using nlohmann::json;

std::uint64_t DeviceConfig::wram_budget_per_tasklet() const {
  if (tasklets == 0 || wram_bytes <= wram_reserved_bytes) return 0;
  return (wram_bytes - wram_reserved_bytes) / tasklets / 8 * 8;
}

void DeviceConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (n_dpus == 0) fail("n_dpus must be >= 1");
  if (tasklets == 0 || tasklets > max_tasklets) fail("tasklets must be in [1, max_tasklets]");
  if (mram_bytes % 8 || wram_bytes % 8 || wram_reserved_bytes % 8) fail("memory sizes must be multiples of 8");
  if (wram_reserved_bytes >= wram_bytes) fail("wram_reserved_bytes must be below wram_bytes");
  if (freq_hz == 0) fail("freq_hz must be positive");
  if (dma.align_bytes != 8) fail("dma.align_bytes must be 8");
  if (dma.min_bytes == 0 || dma.min_bytes > dma.max_bytes) fail("dma.min_bytes must be in [1, dma.max_bytes]");
  if (dma.min_bytes % 8 || dma.max_bytes % 8) fail("dma limits must be multiples of 8");
}

void CostModel::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  for (const LinkCost* l : {&serial_xfer, &broadcast_xfer, &dma}) {
    if (!(l->bytes_per_ns > 0) || !(l->latency_ns >= 0)) fail("link rates must be > 0 and latencies >= 0");
  }
  if (!(parallel_xfer.bytes_per_ns > 0) || !(parallel_xfer.latency_ns >= 0) || parallel_xfer.lanes == 0)
    fail("parallel_xfer needs positive rate and lanes");
  if (cycles_per_invocation_default == 0) fail("cycles_per_invocation_default must be > 0");
  if (!(fixed_codegen_overhead_ns >= 0) || !(fixed_alloc_overhead_ns >= 0)) fail("overheads must be >= 0");
  if (!(host.bytes_per_ns > 0) || !(host.ns_per_invocation >= 0)) fail("host rates must be positive");
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw Error(ErrorCode::ConfigError, where(key) + " must be a non-negative integer");
      } else {
        if (!it->is_number()) throw Error(ErrorCode::ConfigError, where(key) + " must be a number");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, where(key) + ": " + e.what());
    }
  }

  Reader sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Reader(it == j_.end() ? empty : *it, where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw Error(ErrorCode::ConfigError, "unknown field " + where(it.key()));
    }
  }

 private:
  std::string where(const std::string& key) const { return path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_link(Reader r, LinkCost& l) {
  r.get("latency_ns", l.latency_ns);
  r.get("bytes_per_ns", l.bytes_per_ns);
  r.finish();
}

}  // namespace

SystemConfig parse_system_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed config: ") + e.what());
  }
  SystemConfig cfg;
  Reader root(j, "config");

  Reader d = root.sub("device");
  DeviceConfig& dc = cfg.device;
  d.get("n_dpus", dc.n_dpus);
  d.get("mram_bytes", dc.mram_bytes);
  d.get("wram_bytes", dc.wram_bytes);
  d.get("wram_reserved_bytes", dc.wram_reserved_bytes);
  d.get("max_tasklets", dc.max_tasklets);
  d.get("tasklets", dc.tasklets);
  d.get("freq_hz", dc.freq_hz);
  {
    Reader dma = d.sub("dma");
    dma.get("min_bytes", dc.dma.min_bytes);
    dma.get("max_bytes", dc.dma.max_bytes);
    dma.get("align_bytes", dc.dma.align_bytes);
    dma.finish();
  }
  d.finish();

  Reader c = root.sub("cost");
  CostModel& cm = cfg.cost;
  read_link(c.sub("serial_xfer"), cm.serial_xfer);
  {
    Reader p = c.sub("parallel_xfer");
    p.get("latency_ns", cm.parallel_xfer.latency_ns);
    p.get("bytes_per_ns", cm.parallel_xfer.bytes_per_ns);
    p.get("lanes", cm.parallel_xfer.lanes);
    p.finish();
  }
  read_link(c.sub("broadcast_xfer"), cm.broadcast_xfer);
  read_link(c.sub("dma"), cm.dma);
  c.get("cycles_per_invocation_default", cm.cycles_per_invocation_default);
  c.get("fixed_codegen_overhead_ns", cm.fixed_codegen_overhead_ns);
  c.get("fixed_alloc_overhead_ns", cm.fixed_alloc_overhead_ns);
  {
    Reader h = c.sub("host");
    h.get("bytes_per_ns", cm.host.bytes_per_ns);
    h.get("ns_per_invocation", cm.host.ns_per_invocation);
    h.finish();
  }
  c.finish();
  root.finish();

  cfg.device.validate();
  cfg.cost.validate();
  return cfg;
}

SystemConfig load_system_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_system_config(ss.str());
}

std::string dump_system_config(const SystemConfig& cfg) {
  const DeviceConfig& d = cfg.device;
  const CostModel& c = cfg.cost;
  auto link = [](const LinkCost& l) { return json{{"latency_ns", l.latency_ns}, {"bytes_per_ns", l.bytes_per_ns}}; };
  json j = {
      {"device",
       {{"n_dpus", d.n_dpus},
        {"mram_bytes", d.mram_bytes},
        {"wram_bytes", d.wram_bytes},
        {"wram_reserved_bytes", d.wram_reserved_bytes},
        {"max_tasklets", d.max_tasklets},
        {"tasklets", d.tasklets},
        {"freq_hz", d.freq_hz},
        {"dma", {{"min_bytes", d.dma.min_bytes}, {"max_bytes", d.dma.max_bytes}, {"align_bytes", d.dma.align_bytes}}}}},
      {"cost",
       {{"serial_xfer", link(c.serial_xfer)},
        {"parallel_xfer",
         {{"latency_ns", c.parallel_xfer.latency_ns},
          {"bytes_per_ns", c.parallel_xfer.bytes_per_ns},
          {"lanes", c.parallel_xfer.lanes}}},
        {"broadcast_xfer", link(c.broadcast_xfer)},
        {"dma", link(c.dma)},
        {"cycles_per_invocation_default", c.cycles_per_invocation_default},
        {"fixed_codegen_overhead_ns", c.fixed_codegen_overhead_ns},
        {"fixed_alloc_overhead_ns", c.fixed_alloc_overhead_ns},
        {"host", {{"bytes_per_ns", c.host.bytes_per_ns}, {"ns_per_invocation", c.host.ns_per_invocation}}}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace pimflow
