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

#include <pimflow/codegen.hpp>
#include <pimflow/simdev.hpp>

#include <cstring>
#include <limits>
#include <random>

namespace pimflow::bench {

namespace {

using u32 = std::uint32_t;

std::vector<u32> random_u32(std::mt19937_64& rng, std::uint64_t n) {
  std::vector<u32> v(n);
  for (u32& x : v) x = static_cast<u32>(rng());
  return v;
}

template <typename T>
ByteVec to_bytes(const std::vector<T>& v) {
  ByteVec b(v.size() * sizeof(T));
  if (!v.empty()) std::memcpy(b.data(), v.data(), b.size());
  return b;
}

// Oracles: plain loops over the host data.

std::vector<u32> oracle_va(const std::vector<u32>& a, const std::vector<u32>& b) {
  std::vector<u32> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

std::vector<u32> oracle_sel(const std::vector<u32>& a) {
  std::vector<u32> out;
  for (u32 x : a) {
    if (x % 2 == 0) out.push_back(x);
  }
  return out;
}

std::vector<u32> oracle_uni(const std::vector<u32>& a) {
  std::vector<u32> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i + 1 == a.size() || a[i] != a[i + 1]) out.push_back(a[i]);
  }
  return out;
}

u32 oracle_red(const std::vector<u32>& a) {
  u32 s = 0;
  for (u32 x : a) s += x;
  return s;
}

std::vector<u32> oracle_gemv(const std::vector<u32>& m, const std::vector<u32>& v, std::uint64_t rows) {
  const std::size_t cols = v.size();
  std::vector<u32> y(rows, 0);
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r] += m[r * cols + c] * v[c];
  }
  return y;
}

std::vector<u32> oracle_hist(const std::vector<u32>& a, u32 bins) {
  std::vector<u32> h(bins, 0);
  for (u32 x : a) ++h[x % bins];
  return h;
}

}  // namespace

std::string_view to_string(Workload w) {
  switch (w) {
    case Workload::VA: return "VA";
    case Workload::SEL: return "SEL";
    case Workload::UNI: return "UNI";
    case Workload::RED: return "RED";
    case Workload::GEMV: return "GEMV";
    case Workload::HSTS: return "HST-S";
  }
  return "?";
}

Workload parse_workload(std::string_view name) {
  for (Workload w : kAllWorkloads) {
    if (to_string(w) == name) return w;
  }
  throw Error(ErrorCode::ConfigError, "unknown workload '" + std::string(name) + "'");
}

Pipeline BuiltWorkload::pipeline() const {
  Pipeline p(length);
  for (const StageSpec& s : stages) p.add_stage(s);
  for (const BufferHandle& f : fetch) p.fetch(f);
  return p;
}

bool BuiltWorkload::matches() const {
  for (std::size_t i = 0; i < fetch.size(); ++i) {
    auto got = fetch[i]->bytes();
    if (got.size() != expected[i].size() || !std::equal(got.begin(), got.end(), expected[i].begin())) return false;
  }
  return true;
}

BuiltWorkload build_workload(const WorkloadSpec& spec, const DeviceConfig& device) {
  std::mt19937_64 rng(spec.seed);
  BuiltWorkload w;
  const std::uint64_t n = spec.elems_per_dpu * spec.n_dpus;

  switch (spec.workload) {
    case Workload::VA: {
      auto a = random_u32(rng, n);
      auto b = random_u32(rng, n);
      auto A = make_buffer(a, "a");
      auto B = make_buffer(b, "b");
      auto C = make_buffer<u32>({}, "c");
      KernelSpec add{"va_add", [](KernelArgs& k) { k.set<u32>(2, k.get<u32>(0) + k.get<u32>(1)); }, {}, {}};
      w.stages.push_back(make_stage(PatternKind::Map, add, {input<u32>(A), input<u32>(B), output<u32>(C)}));
      w.fetch = {C};
      w.expected = {to_bytes(oracle_va(a, b))};
      w.length = n;
      break;
    }
    case Workload::SEL: {
      auto a = random_u32(rng, n);
      auto A = make_buffer(a, "in");
      auto O = make_buffer<u32>({}, "out");
      KernelSpec even{"sel_even", {}, [](const KernelArgs& k) { return k.get<u32>(0) % 2 == 0; }, {}};
      w.stages.push_back(make_stage(PatternKind::Filter, even, {input<u32>(A), output<u32>(O)}));
      w.fetch = {O};
      w.expected = {to_bytes(oracle_sel(a))};
      w.length = n;
      break;
    }
    case Workload::UNI: {
      std::vector<u32> a(n);
      u32 x = static_cast<u32>(rng() % 16);
      for (std::uint64_t i = 0; i < n; ++i) {
        if (i > 0 && (rng() & 1) == 0) x += 1 + static_cast<u32>(rng() % 4);
        a[i] = x;
      }
      auto A = make_buffer(a, "in");
      auto O = make_buffer<u32>({}, "out");
      auto pad = make_buffer<u32>({std::numeric_limits<u32>::max()}, "pad");
      KernelSpec differs{"uni_last", {}, [](const KernelArgs& k) { return k.get<u32>(0, 0) != k.get<u32>(0, 1); }, {}};
      w.stages.push_back(make_stage(PatternKind::WindowFilter, differs, {input<u32>(A), output<u32>(O)},
                                    StageOptions{.window = 2, .group = {}, .overlap = {pad}}));
      w.fetch = {O};
      w.expected = {to_bytes(oracle_uni(a))};
      w.length = n;
      break;
    }
    case Workload::RED: {
      auto a = random_u32(rng, n);
      auto A = make_buffer(a, "in");
      auto S = make_buffer<u32>({}, "sum");
      KernelSpec sum{"red_sum", [](KernelArgs& k) { k.set<u32>(0, k.get<u32>(0) + k.get<u32>(1)); }, {}, {}};
      w.stages.push_back(make_stage(PatternKind::Reduce, sum, {reduce_out<u32>(S), input<u32>(A)}));
      w.fetch = {S};
      w.expected = {to_bytes(std::vector<u32>{oracle_red(a)})};
      w.length = n;
      break;
    }
    case Workload::GEMV: {
      const std::uint64_t cols = spec.gemv_cols;
      if (cols == 0) throw Error(ErrorCode::ConfigError, "GEMV needs at least one column");
      if (cols * sizeof(u32) > device.wram_budget_per_tasklet())
        throw Error(ErrorCode::VectorTooLargeForWram,
                    "GEMV vector of " + std::to_string(cols * sizeof(u32)) + " bytes exceeds the " +
                        std::to_string(device.wram_budget_per_tasklet()) + "-byte WRAM budget per tasklet");
      const std::uint64_t rows = std::uint64_t{spec.gemv_rows_per_dpu} * spec.n_dpus;
      auto m = random_u32(rng, rows * cols);
      auto v = random_u32(rng, cols);
      auto M = make_buffer(m, "matrix");
      auto V = make_buffer(v, "vector");
      auto Y = make_buffer<u32>({}, "y");
      KernelSpec row{"gemv_row",
                     [](KernelArgs& k) {
                       u32 acc = 0;
                       for (std::size_t c = 0; c < k.count(1); ++c) acc += k.get<u32>(0, c) * k.get<u32>(1, c);
                       k.set<u32>(2, acc);
                     },
                     {},
                     {}};
      w.stages.push_back(make_stage(PatternKind::Group, row, {input<u32>(M), scalar<u32>(V), output<u32>(Y)},
                                    StageOptions{.window = {}, .group = static_cast<u32>(cols), .overlap = {}}));
      w.fetch = {Y};
      w.expected = {to_bytes(oracle_gemv(m, v, rows))};
      w.length = rows * cols;
      break;
    }
    case Workload::HSTS: {
      if (spec.bins == 0) throw Error(ErrorCode::ConfigError, "HST-S needs at least one bin");
      const u32 bins = spec.bins;
      auto a = random_u32(rng, n);
      auto A = make_buffer(a, "in");
      auto H = make_buffer<u32>({}, "hist");
      KernelSpec count{"hst_count",
                       [bins](KernelArgs& k) {
                         const std::size_t b = k.get<u32>(1) % bins;
                         k.set<u32>(0, k.get<u32>(0, b) + 1, b);
                       },
                       {},
                       {}};
      w.stages.push_back(make_stage(PatternKind::Reduce, count,
                                    {reduce_out<u32>(H, bins), input<u32>(A),
                                     combine<u32>([](u32 x, u32 y) { return x + y; })}));
      w.fetch = {H};
      w.expected = {to_bytes(oracle_hist(a, bins))};
      w.length = n;
      break;
    }
  }
  return w;
}

bool BenchReport::pass() const {
  for (const StrategyResult& s : strategies) {
    if (!s.pass) return false;
  }
  return !strategies.empty();
}

BenchReport run_bench(const WorkloadSpec& spec, const SystemConfig& cfg, const BenchOptions& opts) {
  BenchReport r;
  r.spec = spec;
  r.config = cfg;
  r.config.device.n_dpus = spec.n_dpus;
  r.config.device.validate();
  for (GatherMode mode : opts.strategies) {
    BuiltWorkload w = build_workload(spec, r.config.device);
    Pipeline p = w.pipeline();
    Device dev(r.config);
    ExecOptions eo;
    eo.gather = mode;
    eo.parallel_sim = opts.parallel_sim;
    const ExecReport er = p.execute(dev, eo);
    StrategyResult s;
    s.gather = mode;
    s.pass = w.matches();
    s.timing = er.timing;
    s.rounds = er.rounds;
    s.cpu_leftover = er.cpu_leftover;
    r.strategies.push_back(s);
  }
  return r;
}

std::string workload_program_text(const WorkloadSpec& spec, const SystemConfig& cfg) {
  SystemConfig c = cfg;
  c.device.n_dpus = spec.n_dpus;
  BuiltWorkload w = build_workload(spec, c.device);
  return emit_program_text(compile_pipeline(w.stages, w.fetch, w.length, c).program);
}

std::vector<LocEntry> loc_report() {
  static constexpr unsigned kListingLoc[] = {6, 6, 6, 6, 9, 8};
  std::vector<LocEntry> out;
  std::size_t i = 0;
  for (Workload wl : kAllWorkloads) {
    WorkloadSpec s;
    s.workload = wl;
    s.n_dpus = 1;
    s.elems_per_dpu = 16;
    s.gemv_rows_per_dpu = 2;
    s.gemv_cols = 2;
    s.bins = 4;
    const BuiltWorkload w = build_workload(s, DeviceConfig{});
    LocEntry e;
    e.workload = wl;
    e.stages = w.stages.size();
    e.fetches = w.fetch.size();
    e.calls = e.stages + e.fetches + 1;
    e.listing_loc = kListingLoc[i++];
    out.push_back(e);
  }
  return out;
}

std::string loc_report_text(const std::vector<LocEntry>& entries) {
  std::string out = "workload  stages  fetches  calls  listing_loc\n";
  for (const LocEntry& e : entries) {
    std::string name(to_string(e.workload));
    name.resize(10, ' ');
    std::string line = name + std::to_string(e.stages);
    line.resize(18, ' ');
    line += std::to_string(e.fetches);
    line.resize(27, ' ');
    line += std::to_string(e.calls);
    line.resize(34, ' ');
    line += std::to_string(e.listing_loc);
    out += line + "\n";
  }
  return out;
}

}  // namespace pimflow::bench
