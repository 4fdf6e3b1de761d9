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

// Helpers shared by the unit suites and the acceptance binary: independent
// oracles and random pipeline builders.

#pragma once

#include <pimflow/pipeline.hpp>
#include <pimflow/planner.hpp>
#include <pimflow/simdev.hpp>

#include <cstring>
#include <random>
#include <span>
#include <vector>

namespace pimflow::testing {

using u32 = std::uint32_t;

inline std::vector<u32> random_u32(std::mt19937_64& rng, std::size_t n, u32 mod = 0) {
  std::vector<u32> v(n);
  for (u32& x : v) x = mod ? static_cast<u32>(rng() % mod) : static_cast<u32>(rng());
  return v;
}

inline std::uint64_t uniform(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + rng() % (hi - lo + 1);
}

inline std::vector<u32> as_u32(std::span<const std::byte> b) {
  std::vector<u32> v(b.size() / 4);
  if (!v.empty()) std::memcpy(v.data(), b.data(), v.size() * 4);
  return v;
}

// Exhaustive downward search: the largest count whose padded regions fit.
struct OracleCount {
  bool feasible = false;
  std::uint64_t count = 0;
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint64_t> padded;
};

inline OracleCount oracle_element_count(std::span<const std::uint32_t> sizes, std::uint64_t budget,
                                        std::uint64_t base = 0) {
  OracleCount o;
  for (std::uint64_t c = budget; c >= 1; --c) {
    std::uint64_t need = 0;
    for (std::uint32_t s : sizes) need += (c * s + 7) / 8 * 8;
    if (need <= budget) {
      o.feasible = true;
      o.count = c;
      std::uint64_t off = base;
      for (std::uint32_t s : sizes) {
        o.offsets.push_back(off);
        o.padded.push_back((c * s + 7) / 8 * 8);
        off += o.padded.back();
      }
      return o;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// Random chains: stage i reads the previous stage's result.

enum class KeepMode { All, None, Some };

struct Chain {
  std::vector<PatternKind> kinds;
  StageList stages;
  std::vector<BufferHandle> produced;  // every buffer a stage writes
  std::uint64_t length = 0;
};

inline KernelSpec keep_kernel(const std::string& id, ApplyFn apply, KeepMode mode, std::size_t probe) {
  PredicateFn pred;
  switch (mode) {
    case KeepMode::All: pred = [](const KernelArgs&) { return true; }; break;
    case KeepMode::None: pred = [](const KernelArgs&) { return false; }; break;
    case KeepMode::Some: pred = [probe](const KernelArgs& k) { return k.get<u32>(probe) % 3 != 0; }; break;
  }
  return KernelSpec{id, std::move(apply), std::move(pred), {}};
}

/// One stage of `kind` reading `in`. Filters keep all or nothing when a
/// group-bearing stage comes later, so every length stays divisible.
inline StageSpec chain_stage(PatternKind kind, const BufferHandle& in, BufferHandle& out, std::mt19937_64& rng,
                             bool group_later, bool may_shrink, std::size_t idx) {
  const std::string id = "k" + std::to_string(idx);
  const KeepMode mode = group_later ? (rng() & 1 ? KeepMode::All : KeepMode::None)
                                    : static_cast<KeepMode>(rng() % 3);
  auto fresh = [&] { return make_buffer<u32>({}, "b" + std::to_string(idx)); };
  auto pad = [&](std::size_t n) { return make_buffer(random_u32(rng, n, 1000), "pad" + std::to_string(idx)); };
  switch (kind) {
    case PatternKind::Map: {
      auto s = make_buffer<u32>({3u, static_cast<u32>(rng() % 100)}, "s" + std::to_string(idx));
      if (rng() & 1) {
        out = in;
        KernelSpec k{id, [](KernelArgs& a) { a.set<u32>(0, a.get<u32>(0) * a.get<u32>(1, 0) + a.get<u32>(1, 1)); }, {}, {}};
        return make_stage(kind, k, {inout<u32>(in), scalar<u32>(s)});
      }
      out = fresh();
      KernelSpec k{id, [](KernelArgs& a) { a.set<u32>(2, a.get<u32>(0) * a.get<u32>(1, 0) + a.get<u32>(1, 1)); }, {}, {}};
      return make_stage(kind, k, {input<u32>(in), scalar<u32>(s), output<u32>(out)});
    }
    case PatternKind::Reduce: {
      out = make_buffer(random_u32(rng, 16, 100), "r" + std::to_string(idx));
      KernelSpec k{id,
                   [](KernelArgs& a) {
                     const u32 x = a.get<u32>(1);
                     a.set<u32>(0, a.get<u32>(0, x % 16) + x, x % 16);
                   },
                   {},
                   {}};
      return make_stage(kind, k,
                        {reduce_out<u32>(out, 16), input<u32>(in), combine<u32>([](u32 x, u32 y) { return x + y; })});
    }
    case PatternKind::Filter: {
      if (rng() & 1) {
        out = in;
        KernelSpec k = keep_kernel(id, [](KernelArgs& a) { a.set<u32>(0, a.get<u32>(0) + 1); }, mode, 0);
        return make_stage(kind, k, {inout<u32>(in)});
      }
      out = fresh();
      ApplyFn apply;
      if (rng() & 1) apply = [](KernelArgs& a) { a.set<u32>(1, a.get<u32>(0) ^ 0x55u); };
      return make_stage(kind, keep_kernel(id, apply, mode, 1), {input<u32>(in), output<u32>(out)});
    }
    case PatternKind::Window: {
      out = fresh();
      KernelSpec k{id,
                   [](KernelArgs& a) { a.set<u32>(1, a.get<u32>(0, 0) + 2 * a.get<u32>(0, 1) + 3 * a.get<u32>(0, 2)); },
                   {},
                   {}};
      StageOptions o{.window = 3, .group = {}, .overlap = {}};
      if (!(may_shrink && (rng() & 1))) o.overlap = {pad(2)};
      return make_stage(kind, k, {input<u32>(in), output<u32>(out)}, o);
    }
    case PatternKind::Group: {
      out = fresh();
      KernelSpec k{id, [](KernelArgs& a) { a.set<u32>(1, a.get<u32>(0, 0) * 5 ^ a.get<u32>(0, 1)); }, {}, {}};
      return make_stage(kind, k, {input<u32>(in), output<u32>(out)}, StageOptions{.window = {}, .group = 2, .overlap = {}});
    }
    case PatternKind::WindowGroup: {
      out = fresh();
      KernelSpec k{id,
                   [](KernelArgs& a) {
                     a.set<u32>(1, a.get<u32>(0, 0) + a.get<u32>(0, 1) * a.get<u32>(0, 2) + a.get<u32>(0, 3));
                   },
                   {},
                   {}};
      return make_stage(kind, k, {input<u32>(in), output<u32>(out)}, StageOptions{.window = 2, .group = 2, .overlap = {pad(2)}});
    }
    case PatternKind::WindowFilter: {
      out = fresh();
      KernelSpec k = keep_kernel(id, {}, mode, 1);
      if (mode == KeepMode::Some) k.predicate = [](const KernelArgs& a) { return a.get<u32>(0, 0) <= a.get<u32>(0, 1); };
      StageOptions o{.window = 2, .group = {}, .overlap = {}};
      if (!(may_shrink && (rng() & 1))) o.overlap = {pad(1)};
      return make_stage(kind, k, {input<u32>(in), output<u32>(out)}, o);
    }
    case PatternKind::GroupFilter: {
      out = fresh();
      KernelSpec k =
          keep_kernel(id, [](KernelArgs& a) { a.set<u32>(1, a.get<u32>(0, 0) + a.get<u32>(0, 1)); }, mode, 1);
      return make_stage(kind, k, {input<u32>(in), output<u32>(out)}, StageOptions{.window = {}, .group = 2, .overlap = {}});
    }
    case PatternKind::WindowGroupFilter: {
      out = fresh();
      KernelSpec k =
          keep_kernel(id, [](KernelArgs& a) { a.set<u32>(1, a.get<u32>(0, 0) ^ a.get<u32>(0, 3)); }, mode, 1);
      return make_stage(kind, k, {input<u32>(in), output<u32>(out)}, StageOptions{.window = 2, .group = 2, .overlap = {pad(2)}});
    }
  }
  throw Error(ErrorCode::RoleViolation, "unknown kind");
}

/// `n` must be a multiple of 2^(number of group-bearing kinds).
inline Chain build_chain(std::span<const PatternKind> kinds, std::uint64_t n, std::mt19937_64& rng) {
  Chain c;
  c.kinds.assign(kinds.begin(), kinds.end());
  c.length = n;
  BufferHandle cur = make_buffer(random_u32(rng, n, 1u << 20), "input");
  bool cut_before = false;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    bool group_later = false;
    for (std::size_t j = i + 1; j < kinds.size(); ++j) group_later |= has_group(kinds[j]);
    BufferHandle out;
    c.stages.push_back(chain_stage(kinds[i], cur, out, rng, group_later, !group_later && !cut_before, i));
    if (std::none_of(c.produced.begin(), c.produced.end(), [&](const BufferHandle& h) { return h == out; }))
      c.produced.push_back(out);
    cut_before |= has_filter(kinds[i]) || is_reduce(kinds[i]);
    cur = out;
  }
  return c;
}

/// Small random device; sizes chosen so chains over N <= 1024 always plan.
inline SystemConfig random_small_device(std::mt19937_64& rng) {
  SystemConfig cfg;
  cfg.device.n_dpus = static_cast<std::uint32_t>(uniform(rng, 1, 8));
  cfg.device.tasklets = static_cast<std::uint32_t>(uniform(rng, 1, 12));
  const std::uint64_t budget = uniform(rng, 32, 128) * 8;
  cfg.device.wram_bytes = cfg.device.wram_reserved_bytes + budget * cfg.device.tasklets;
  const std::uint64_t mram[] = {4096, 16384, 1u << 20};
  cfg.device.mram_bytes = mram[rng() % 3];
  return cfg;
}

// ---------------------------------------------------------------------------
// vecdot: c = a * b element-wise, s = sum(c).

struct Vecdot {
  BufferHandle a, b, c, s;
  StageList stages;
};

inline Vecdot vecdot(std::uint64_t n) {
  Vecdot v;
  std::vector<u32> x(n), y(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    x[i] = static_cast<u32>(i);
    y[i] = static_cast<u32>(2 * i + 1);
  }
  v.a = make_buffer(x, "a");
  v.b = make_buffer(y, "b");
  v.c = make_buffer<u32>({}, "c");
  v.s = make_buffer<u32>({}, "s");
  KernelSpec mul{"mul", [](KernelArgs& k) { k.set<u32>(2, k.get<u32>(0) * k.get<u32>(1)); }, {}, {}};
  KernelSpec add{"add", [](KernelArgs& k) { k.set<u32>(0, k.get<u32>(0) + k.get<u32>(1)); }, {}, {}};
  v.stages.push_back(make_stage(PatternKind::Map, mul, {input<u32>(v.a), input<u32>(v.b), output<u32>(v.c)}));
  v.stages.push_back(make_stage(PatternKind::Reduce, add, {reduce_out<u32>(v.s), input<u32>(v.c)}));
  v.stages[1].index = 1;
  return v;
}

/// Device with `dpus` DPUs and exactly `budget` WRAM bytes per tasklet.
inline SystemConfig budget_device(std::uint32_t dpus, std::uint32_t tasklets, std::uint64_t budget,
                                  std::uint64_t mram = 64ull << 20) {
  SystemConfig cfg;
  cfg.device.n_dpus = dpus;
  cfg.device.tasklets = tasklets;
  cfg.device.mram_bytes = mram;
  cfg.device.wram_bytes = cfg.device.wram_reserved_bytes + budget * tasklets;
  return cfg;
}

}  // namespace pimflow::testing
