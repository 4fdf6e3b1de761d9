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

#include "support.hpp"

#include <pimflow/codegen.hpp>

#include <gtest/gtest.h>

#include <algorithm>

namespace pimflow {
namespace {

using testing::uniform;
using u32 = std::uint32_t;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::DeviceError;
}

using testing::vecdot;

SystemConfig tiny(std::uint32_t dpus, std::uint64_t mram, std::uint64_t budget, std::uint32_t tasklets = 1) {
  SystemConfig cfg;
  cfg.device.n_dpus = dpus;
  cfg.device.tasklets = tasklets;
  cfg.device.mram_bytes = mram;
  cfg.device.wram_bytes = cfg.device.wram_reserved_bytes + budget * tasklets;
  return cfg;
}

TEST(T1Extract, DeduplicatesBuffers) {
  auto a = make_buffer<u32>({1, 2, 3, 4}), c = make_buffer<u32>();
  KernelSpec inc{"inc", [](KernelArgs& k) { k.set<u32>(1, k.get<u32>(0) + 1); }, {}, {}};
  KernelSpec dbl{"dbl", [](KernelArgs& k) { k.set<u32>(0, k.get<u32>(0) * 2); }, {}, {}};
  StageList st{make_stage(PatternKind::Map, inc, {input<u32>(a), output<u32>(c)}),
               make_stage(PatternKind::Map, dbl, {inout<u32>(c)})};
  st[1].index = 1;
  const std::vector<BufferHandle> fetch{c};
  const GlobalLists g = t1_extract(st, fetch, 4);
  EXPECT_EQ(g.model.buffers.size(), 2u);
  EXPECT_EQ(g.handles.size(), 2u);
  EXPECT_EQ(g.index_of(c->id()), 1u);
  EXPECT_EQ(g.index_of(12345678), kNoIndex);
  EXPECT_TRUE(g.uploaded[0]);
  EXPECT_FALSE(g.uploaded[1]);
  EXPECT_TRUE(g.fetched[1]);
  ASSERT_EQ(g.kernels.size(), 2u);
  EXPECT_EQ(g.kernels[1].kernel_id, "dbl");
}

TEST(T1Extract, LengthAlgebra) {
  auto a = make_buffer<u32>({1, 2, 3}), c = make_buffer<u32>();
  KernelSpec k{"k", [](KernelArgs&) {}, {}, {}};
  StageList grp{make_stage(PatternKind::Group, k, {input<u32>(a), output<u32>(c)}, {.window = {}, .group = 2, .overlap = {}})};
  EXPECT_EQ(code_of([&] { t1_extract(grp, {}, 3); }), ErrorCode::GroupNotDivisible);
  StageList map{make_stage(PatternKind::Map, k, {input<u32>(a), output<u32>(c)})};
  EXPECT_EQ(code_of([&] { t1_extract(map, {}, 4); }), ErrorCode::LengthMismatch);
  StageList win{make_stage(PatternKind::Window, k, {input<u32>(a), output<u32>(c)}, {.window = 3, .group = {}, .overlap = {}})};
  EXPECT_EQ(t1_extract(win, {}, 3).model.buffers[1].length, 1u);
  auto tiny_in = make_buffer<u32>({1});
  StageList win2{make_stage(PatternKind::Window, k, {input<u32>(tiny_in), output<u32>(c)}, {.window = 3, .group = {}, .overlap = {}})};
  EXPECT_EQ(code_of([&] { t1_extract(win2, {}, 1); }), ErrorCode::WindowTooLarge);
}

TEST(T2MemoryParams, VecdotOneDpu) {
  testing::Vecdot v = vecdot(1000);
  const GlobalLists g = t1_extract(v.stages, std::vector{v.s}, 1000);
  const SystemConfig cfg = tiny(1, 4096, 64);
  const LayoutPlan p = t2_memory_params(g, cfg.device);
  ASSERT_EQ(p.mram.regions.size(), 4u);
  int headers = 0;
  for (const auto& r : p.mram.regions) headers += r.header.has_value();
  EXPECT_EQ(headers, 1);
  EXPECT_EQ(p.wram[0].elems_per_block, 4u);
  EXPECT_LE(p.mram.used_bytes, 4096u);
}

TEST(T3Leftover, CpuRatio) {
  testing::Vecdot v = vecdot(1000);
  const GlobalLists g = t1_extract(v.stages, std::vector{v.s}, 1000);
  const LayoutPlan p = t2_memory_params(g, SystemConfig{}.device, 0.25);
  const LeftoverTask t = t3_cpu_leftover(p, g);
  EXPECT_GE(t.size(), 250u);
  EXPECT_EQ(t.end, 1000u);
  EXPECT_EQ(t.begin, p.device_length());
}

TEST(T4Postprocessing, Directives) {
  testing::Vecdot v = vecdot(64);
  const GlobalLists g = t1_extract(v.stages, std::vector{v.s}, 64);
  const auto d = t4_postprocessing(g);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].kind, Directive::Kind::Combine);
  EXPECT_EQ(d[0].buffer, g.index_of(v.s->id()));

  auto a = make_buffer<u32>({1, 2}), f = make_buffer<u32>();
  KernelSpec keep{"keep", {}, [](const KernelArgs&) { return true; }, {}};
  StageList st{make_stage(PatternKind::Filter, keep, {input<u32>(a), output<u32>(f)})};
  const GlobalLists gf = t1_extract(st, std::vector{f}, 2);
  const auto df = t4_postprocessing(gf);
  ASSERT_EQ(df.size(), 1u);
  EXPECT_EQ(df[0].kind, Directive::Kind::Compact);
}

TEST(ProgramText, RoundTripAndDeterminism) {
  testing::Vecdot v = vecdot(1000);
  const auto c1 = compile_pipeline(v.stages, std::vector{v.s}, 1000, tiny(1, 4096, 96));
  const auto c2 = compile_pipeline(v.stages, std::vector{v.s}, 1000, tiny(1, 4096, 96));
  const std::string t = emit_program_text(c1.program);
  EXPECT_EQ(t, emit_program_text(c2.program));
  EXPECT_EQ(parse_program_text(t), c1.program);
  EXPECT_EQ(emit_program_text(parse_program_text(t)), t);
  EXPECT_EQ(code_of([&] { parse_program_text("not a program"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] { parse_program_text(t.substr(0, t.size() / 2)); }), ErrorCode::ParseError);
}

TEST(BuildProgram, CopiesPlanFacts) {
  testing::Vecdot v = vecdot(1000);
  const auto c = compile_pipeline(v.stages, std::vector{v.s}, 1000, tiny(2, 4096, 64, 3));
  const DeviceProgram& p = c.program;
  EXPECT_EQ(p.n_dpus, 2u);
  EXPECT_EQ(p.tasklets, 3u);
  EXPECT_EQ(p.rounds, c.plan.nr_rounds);
  EXPECT_EQ(p.per_round, c.plan.elements_per_round);
  EXPECT_EQ(p.leftover, c.leftover.size());
  EXPECT_EQ(p.per_round * p.rounds + p.leftover, 1000u);
  ASSERT_EQ(p.stages.size(), 2u);
  EXPECT_EQ(p.stages[0].kernel_id, "mul");
  for (const auto& s : p.stages)
    for (const auto& a : s.args) {
      EXPECT_EQ(a.mram % 8, 0u);
      EXPECT_EQ(a.wram % 8, 0u);
    }
  EXPECT_TRUE(p.buffers[0].upload);
  EXPECT_TRUE(p.buffers[3].fetch);
}

// Independent byte count of one stage's WRAM cache for a block of m
// invocations.
std::uint64_t oracle_stage_bytes(const LayoutModel& model, const StageDesc& s, std::uint64_t m) {
  std::uint64_t t = 0;
  for (const StageArgDesc& a : s.args) {
    if (a.role == ArgRole::Combine) continue;
    const BufferDesc& b = model.buffers[a.buffer];
    const std::uint64_t size = b.elem.size_bytes;
    std::uint64_t n = 0;
    switch (a.role) {
      case ArgRole::Input: n = s.compact_input ? m : m * s.group + s.lookahead; break;
      case ArgRole::Output:
      case ArgRole::InOut: n = m; break;
      default: n = b.length; break;
    }
    t += pad8(n * size);
    if (a.role == ArgRole::Input && a.overlap != kNoIndex) t += pad8(s.lookahead * size);
    if (has_filter(s.kind) && (a.role == ArgRole::Output || a.role == ArgRole::InOut)) t += 8;
  }
  return t;
}

TEST(PlanStageWram, MaximalBlock) {
  std::mt19937_64 rng(5);
  int planned = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<PatternKind> kinds(uniform(rng, 1, 3));
    for (auto& k : kinds) k = kAllPatternKinds[rng() % 9];
    std::sort(kinds.begin(), kinds.end(), [](PatternKind x, PatternKind y) {
      return (has_filter(x) || is_reduce(x)) < (has_filter(y) || is_reduce(y));
    });
    const testing::Chain ch = testing::build_chain(kinds, 64, rng);
    GlobalLists g;
    try {
      g = t1_extract(ch.stages, {}, 64);
    } catch (const Error&) {
      continue;
    }
    const std::uint64_t budget = uniform(rng, 2, 64) * 8;
    for (std::size_t st = 0; st < g.model.stages.size(); ++st) {
      const StageDesc& sd = g.model.stages[st];
      const std::uint64_t unit = stage_unit(g.model, st);
      std::uint64_t best = 0;
      for (std::uint64_t m = unit; m <= budget; m += unit)
        if (oracle_stage_bytes(g.model, sd, m) <= budget) best = m;
      if (best == 0) {
        EXPECT_EQ(code_of([&] { plan_stage_wram(g.model, st, budget); }), ErrorCode::WramTooSmall);
        continue;
      }
      const WramStagePlan p = plan_stage_wram(g.model, st, budget);
      ++planned;
      EXPECT_EQ(p.elems_per_block, best);
      EXPECT_EQ(p.used_bytes, oracle_stage_bytes(g.model, sd, best));
      for (const auto& a : p.args) EXPECT_EQ(a.offset % 8, 0u);
    }
  }
  EXPECT_GT(planned, 200);
}

TEST(CompilePipeline, WramTooSmallSurfaces) {
  testing::Vecdot v = vecdot(100);
  EXPECT_EQ(code_of([&] { compile_pipeline(v.stages, std::vector{v.s}, 100, tiny(1, 4096, 16)); }), ErrorCode::WramTooSmall);
  EXPECT_EQ(code_of([&] { compile_pipeline(v.stages, std::vector{v.s}, 100, tiny(1, 32, 64)); }), ErrorCode::MramTooSmall);
}

}  // namespace
}  // namespace pimflow
