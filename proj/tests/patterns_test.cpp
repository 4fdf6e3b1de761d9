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

#include <pimflow/stage.hpp>

#include <gtest/gtest.h>

#include <limits>

namespace pimflow {
namespace {

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

KernelSpec apply_only(ApplyFn f) { return KernelSpec{"k", std::move(f), {}, {}}; }

ByteVec bytes_of(const std::vector<u32>& v) {
  ByteVec b(v.size() * 4);
  if (!v.empty()) std::memcpy(b.data(), v.data(), b.size());
  return b;
}

std::vector<u32> u32_of(const ByteVec& b) {
  std::vector<u32> v(b.size() / 4);
  if (!v.empty()) std::memcpy(v.data(), b.data(), b.size());
  return v;
}

TEST(OutputLength, Examples) {
  EXPECT_EQ(output_length(PatternKind::Map, 10, {}, {}, false).elements, 10u);
  EXPECT_EQ(output_length(PatternKind::Group, 12, {}, 3, false).elements, 4u);
  EXPECT_EQ(output_length(PatternKind::Window, 10, 2, {}, true).elements, 10u);
  EXPECT_EQ(output_length(PatternKind::Window, 10, 3, {}, false).elements, 8u);
  EXPECT_EQ(output_length(PatternKind::Reduce, 10, {}, {}, false).elements, 1u);
  EXPECT_TRUE(output_length(PatternKind::Filter, 10, {}, {}, false).data_dependent);
  EXPECT_FALSE(output_length(PatternKind::Map, 10, {}, {}, false).data_dependent);
}

TEST(OutputLength, Errors) {
  EXPECT_EQ(code_of([] { output_length(PatternKind::Group, 10, {}, 3, false); }), ErrorCode::GroupNotDivisible);
  EXPECT_EQ(code_of([] { output_length(PatternKind::Window, 2, 3, {}, false); }), ErrorCode::WindowTooLarge);
  EXPECT_EQ(output_length(PatternKind::Window, 3, 3, {}, false).elements, 1u);
}

TEST(Lookahead, PerKind) {
  EXPECT_EQ(lookahead(PatternKind::Map, 1), 0u);
  EXPECT_EQ(lookahead(PatternKind::Window, 3), 2u);
  EXPECT_EQ(lookahead(PatternKind::WindowFilter, 2), 1u);
  EXPECT_EQ(lookahead(PatternKind::WindowGroup, 2), 2u);
  EXPECT_EQ(lookahead(PatternKind::WindowGroupFilter, 3), 3u);
  EXPECT_EQ(lookahead(PatternKind::Group, 5), 0u);
}

TEST(PatternKindNames, RoundTrip) {
  for (PatternKind k : kAllPatternKinds) EXPECT_EQ(parse_pattern_kind(to_string(k)), k);
  EXPECT_THROW(parse_pattern_kind("nope"), Error);
}

TEST(ValidateArgs, Examples) {
  auto a = make_buffer<u32>({1}), b = make_buffer<u32>({1}), c = make_buffer<u32>();
  auto add = apply_only([](KernelArgs&) {});
  EXPECT_NO_THROW(validate_stage_args(PatternKind::Map, std::vector{input<u32>(a), input<u32>(b), output<u32>(c)}, add));
  EXPECT_NO_THROW(validate_stage_args(PatternKind::Reduce, std::vector{reduce_out<u32>(c), input<u32>(a)}, add));
  try {
    validate_stage_args(PatternKind::Map, std::vector{input<u32>(a)}, add);
    FAIL();
  } catch (const RoleViolation& e) {
    EXPECT_EQ(e.code(), ErrorCode::RoleViolation);
  }
}

TEST(ValidateArgs, RoleRules) {
  auto a = make_buffer<u32>({1}), c = make_buffer<u32>();
  auto s = make_buffer<std::uint64_t>();
  auto k = apply_only([](KernelArgs&) {});
  KernelSpec pred{"p", {}, [](const KernelArgs&) { return true; }, {}};
  // InOut only for map and filter.
  EXPECT_THROW(validate_stage_args(PatternKind::Window, std::vector{inout<u32>(a)}, k), RoleViolation);
  EXPECT_NO_THROW(validate_stage_args(PatternKind::Filter, std::vector{inout<u32>(a)}, pred));
  // Two outputs.
  EXPECT_THROW(validate_stage_args(PatternKind::Map, std::vector{input<u32>(a), output<u32>(c), output<u32>(c)}, k),
               RoleViolation);
  // Filter needs a predicate; apply optional only for plain and window filters.
  EXPECT_THROW(validate_stage_args(PatternKind::Filter, std::vector{input<u32>(a), output<u32>(c)}, k), RoleViolation);
  EXPECT_NO_THROW(validate_stage_args(PatternKind::Filter, std::vector{input<u32>(a), output<u32>(c)}, pred));
  EXPECT_THROW(validate_stage_args(PatternKind::GroupFilter, std::vector{input<u32>(a), output<u32>(c)}, pred),
               RoleViolation);
  // Reduce: width > 1 needs a combiner; without one the types must agree.
  EXPECT_THROW(validate_stage_args(PatternKind::Reduce, std::vector{reduce_out<u32>(c, 4), input<u32>(a)}, k),
               RoleViolation);
  EXPECT_THROW(validate_stage_args(PatternKind::Reduce, std::vector{reduce_out<std::uint64_t>(s), input<u32>(a)}, k),
               RoleViolation);
  EXPECT_NO_THROW(validate_stage_args(
      PatternKind::Reduce,
      std::vector{reduce_out<std::uint64_t>(s), input<u32>(a), combine<std::uint64_t>([](auto x, auto y) { return x + y; })},
      k));
  EXPECT_THROW(validate_stage_args(PatternKind::Reduce,
                                   std::vector{reduce_out<std::uint64_t>(s), input<u32>(a),
                                               combine<u32>([](u32 x, u32 y) { return x + y; })},
                                   k),
               RoleViolation);
  // Output in a reduce.
  EXPECT_THROW(validate_stage_args(PatternKind::Reduce, std::vector{reduce_out<u32>(c), input<u32>(a), output<u32>(c)}, k),
               RoleViolation);
}

TEST(ValidateArgs, ReduceWithoutCombineTakesOneInput) {
  auto a = make_buffer<u32>({1}), b = make_buffer<u32>({1}), c = make_buffer<u32>();
  auto k = apply_only([](KernelArgs&) {});
  EXPECT_THROW(validate_stage_args(PatternKind::Reduce, std::vector{reduce_out<u32>(c), input<u32>(a), input<u32>(b)}, k),
               RoleViolation);
}

TEST(HostReference, MapPlusOne) {
  auto a = make_buffer<u32>({1, 2, 3}), c = make_buffer<u32>();
  std::vector args{input<u32>(a), output<u32>(c)};
  auto out = apply_pattern_host(PatternKind::Map, apply_only([](KernelArgs& k) { k.set<u32>(1, k.get<u32>(0) + 1); }),
                                args, {}, std::vector{bytes_of({1, 2, 3}), ByteVec{}});
  EXPECT_EQ(u32_of(out[1]), (std::vector<u32>{2, 3, 4}));
}

TEST(HostReference, UniqueWindowFilter) {
  const u32 max = std::numeric_limits<u32>::max();
  auto a = make_buffer<u32>({1, 1, 2, 3, 3}), c = make_buffer<u32>();
  std::vector args{input<u32>(a), output<u32>(c)};
  KernelSpec k{"uni", {}, [](const KernelArgs& x) { return x.get<u32>(0, 0) != x.get<u32>(0, 1); }, {}};
  auto out = apply_pattern_host(PatternKind::WindowFilter, k, args, {2, 1, true},
                                std::vector{bytes_of({1, 1, 2, 3, 3}), ByteVec{}}, std::vector{bytes_of({max}), ByteVec{}});
  EXPECT_EQ(u32_of(out[1]), (std::vector<u32>{1, 2, 3}));
}

TEST(HostReference, ReduceSum) {
  auto a = make_buffer<u32>(), s = make_buffer<u32>();
  std::vector args{reduce_out<u32>(s), input<u32>(a)};
  auto out = apply_pattern_host(PatternKind::Reduce,
                                apply_only([](KernelArgs& k) { k.set<u32>(0, k.get<u32>(0) + k.get<u32>(1)); }), args, {},
                                std::vector{bytes_of({0}), bytes_of({1, 2, 3, 4, 5, 6, 7, 8})});
  EXPECT_EQ(u32_of(out[0]), (std::vector<u32>{36}));
}

TEST(HostReference, WindowShrinksWithoutOverlap) {
  auto a = make_buffer<u32>(), c = make_buffer<u32>();
  std::vector args{input<u32>(a), output<u32>(c)};
  auto sum3 = apply_only([](KernelArgs& k) { k.set<u32>(1, k.get<u32>(0, 0) + k.get<u32>(0, 1) + k.get<u32>(0, 2)); });
  auto out = apply_pattern_host(PatternKind::Window, sum3, args, {3, 1, false}, std::vector{bytes_of({1, 2, 3, 4, 5}), ByteVec{}});
  EXPECT_EQ(u32_of(out[1]), (std::vector<u32>{6, 9, 12}));
  auto padded = apply_pattern_host(PatternKind::Window, sum3, args, {3, 1, true},
                                   std::vector{bytes_of({1, 2, 3, 4, 5}), ByteVec{}},
                                   std::vector{bytes_of({10, 20}), ByteVec{}});
  EXPECT_EQ(u32_of(padded[1]), (std::vector<u32>{6, 9, 12, 19, 35}));
}

TEST(HostReference, GroupAndWindowGroup) {
  auto a = make_buffer<u32>(), c = make_buffer<u32>();
  std::vector args{input<u32>(a), output<u32>(c)};
  auto sum_slot = apply_only([](KernelArgs& k) {
    u32 s = 0;
    for (std::size_t i = 0; i < k.count(0); ++i) s += k.get<u32>(0, i);
    k.set<u32>(1, s);
  });
  auto g = apply_pattern_host(PatternKind::Group, sum_slot, args, {1, 2, false}, std::vector{bytes_of({1, 2, 3, 4, 5, 6}), ByteVec{}});
  EXPECT_EQ(u32_of(g[1]), (std::vector<u32>{3, 7, 11}));
  // Window+group reads G + W elements starting at n*G.
  auto wg = apply_pattern_host(PatternKind::WindowGroup, sum_slot, args, {2, 2, true},
                               std::vector{bytes_of({1, 2, 3, 4}), ByteVec{}}, std::vector{bytes_of({100, 200}), ByteVec{}});
  EXPECT_EQ(u32_of(wg[1]), (std::vector<u32>{1 + 2 + 3 + 4, 3 + 4 + 100 + 200}));
  EXPECT_EQ(code_of([&] { apply_pattern_host(PatternKind::WindowGroup, sum_slot, args, {2, 2, false},
                                             std::vector{bytes_of({1, 2, 3, 4}), ByteVec{}}); }),
            ErrorCode::MissingOverlapVector);
}

TEST(HostReference, FilterDefaultAndInPlace) {
  auto a = make_buffer<u32>(), c = make_buffer<u32>();
  KernelSpec even{"even", {}, [](const KernelArgs& k) { return k.get<u32>(0) % 2 == 0; }, {}};
  auto out = apply_pattern_host(PatternKind::Filter, even, std::vector{input<u32>(a), output<u32>(c)}, {},
                                std::vector{bytes_of({1, 2, 3, 4, 5, 6}), ByteVec{}});
  EXPECT_EQ(u32_of(out[1]), (std::vector<u32>{2, 4, 6}));
  KernelSpec inc_keep_odd{"p", [](KernelArgs& k) { k.set<u32>(0, k.get<u32>(0) + 1); },
                          [](const KernelArgs& k) { return k.get<u32>(0) % 2 == 1; }, {}};
  auto inplace = apply_pattern_host(PatternKind::Filter, inc_keep_odd, std::vector{inout<u32>(a)}, {},
                                    std::vector<ByteVec>{bytes_of({1, 2, 3, 4})});
  EXPECT_EQ(u32_of(inplace[0]), (std::vector<u32>{3, 5}));
}

TEST(HostReference, HistogramReduce) {
  auto a = make_buffer<u32>(), h = make_buffer<u32>();
  KernelSpec count{"h", [](KernelArgs& k) {
                     const u32 b = k.get<u32>(1) % 4;
                     k.set<u32>(0, k.get<u32>(0, b) + 1, b);
                   }, {}, {}};
  std::vector args{reduce_out<u32>(h, 4), input<u32>(a), combine<u32>([](u32 x, u32 y) { return x + y; })};
  auto out = apply_pattern_host(PatternKind::Reduce, count, args, {}, std::vector{ByteVec(16), bytes_of({0, 1, 1, 3}), ByteVec{}});
  EXPECT_EQ(u32_of(out[0]), (std::vector<u32>{1, 2, 0, 1}));
}

TEST(HostReference, InputLengthsMustAgree) {
  auto a = make_buffer<u32>(), b = make_buffer<u32>(), c = make_buffer<u32>();
  EXPECT_EQ(code_of([&] {
              apply_pattern_host(PatternKind::Map, apply_only([](KernelArgs&) {}),
                                 std::vector{input<u32>(a), input<u32>(b), output<u32>(c)}, {},
                                 std::vector{bytes_of({1, 2}), bytes_of({1}), ByteVec{}});
            }),
            ErrorCode::LengthMismatch);
}

TEST(KernelArgs, Faults) {
  ByteVec buf(8);
  KernelArgs k(1);
  k.slot(0) = {buf.data(), 2, 4, false};
  EXPECT_EQ(k.get<u32>(0, 1), 0u);
  EXPECT_EQ(code_of([&] { k.set<u32>(0, 1); }), ErrorCode::KernelFault);
  EXPECT_EQ(code_of([&] { (void)k.get<u32>(0, 2); }), ErrorCode::KernelFault);
  EXPECT_EQ(code_of([&] { (void)k.get<std::uint64_t>(0); }), ErrorCode::KernelFault);
  EXPECT_EQ(code_of([&] { (void)k.slot(3); }), ErrorCode::KernelFault);
}

TEST(HostBuffer, TypedAccess) {
  auto b = make_buffer<std::uint16_t>({1, 2, 3}, "x");
  EXPECT_EQ(b->size(), 3u);
  EXPECT_EQ(b->elem().name, "u16");
  EXPECT_EQ(b->values<std::uint16_t>(), (std::vector<std::uint16_t>{1, 2, 3}));
  EXPECT_THROW(b->values<u32>(), Error);
  EXPECT_THROW(b->assign_bytes(ByteVec(3)), Error);
  EXPECT_NE(make_buffer<u32>()->id(), make_buffer<u32>()->id());
  EXPECT_THROW(make_elem_type(3, "odd"), Error);
}

TEST(MakeStage, OverlapRules) {
  auto a = make_buffer<u32>({1, 2}), c = make_buffer<u32>();
  auto k = apply_only([](KernelArgs&) {});
  EXPECT_EQ(code_of([&] {
              make_stage(PatternKind::WindowGroup, k, {input<u32>(a), output<u32>(c)}, {.window = 2, .group = 2, .overlap = {}});
            }),
            ErrorCode::MissingOverlapVector);
  EXPECT_EQ(code_of([&] {
              make_stage(PatternKind::Window, k, {input<u32>(a), output<u32>(c)},
                         {.window = 3, .group = {}, .overlap = {make_buffer<u32>({1})}});
            }),
            ErrorCode::MissingOverlapVector);
  EXPECT_THROW(make_stage(PatternKind::Window, k, {input<u32>(a), output<u32>(c)}), RoleViolation);
  EXPECT_THROW(make_stage(PatternKind::Map, k, {input<u32>(a), output<u32>(c)}, {.window = 2, .group = {}, .overlap = {}}),
               RoleViolation);
  EXPECT_THROW(make_stage(PatternKind::Window, k, {input<u32>(a), output<u32>(c)},
                          {.window = 2, .group = {}, .overlap = {make_buffer<std::uint16_t>({1})}}),
               RoleViolation);
  const StageSpec s = make_stage(PatternKind::Window, k, {input<u32>(a), output<u32>(c)},
                                 {.window = 2, .group = {}, .overlap = {make_buffer<u32>({9})}});
  EXPECT_TRUE(s.has_overlap());
  EXPECT_EQ(s.lookahead(), 1u);
}

TEST(CutRule, ProducerConsumerPairs) {
  auto a = make_buffer<u32>({1, 2}), f = make_buffer<u32>(), g = make_buffer<u32>(), s = make_buffer<u32>();
  auto k = apply_only([](KernelArgs&) {});
  KernelSpec p{"p", {}, [](const KernelArgs&) { return true; }, {}};
  const StageSpec filter = make_stage(PatternKind::Filter, p, {input<u32>(a), output<u32>(f)});
  const StageSpec map_f = make_stage(PatternKind::Map, k, {input<u32>(f), output<u32>(g)});
  const StageSpec filter_f = make_stage(PatternKind::Filter, p, {input<u32>(f), output<u32>(g)});
  const StageSpec reduce_f = make_stage(PatternKind::Reduce, k, {reduce_out<u32>(s), input<u32>(f)});
  const StageSpec map_s = make_stage(PatternKind::Map, k, {input<u32>(a), scalar<u32>(s), output<u32>(g)});
  EXPECT_TRUE(needs_cut(filter, map_f));
  EXPECT_FALSE(needs_cut(filter, filter_f));
  EXPECT_FALSE(needs_cut(filter, reduce_f));
  EXPECT_TRUE(needs_cut(reduce_f, map_s));
  // A filter continuation that also reads an unfiltered vector needs the host.
  const StageSpec mixed = make_stage(PatternKind::Filter, p, {input<u32>(f), input<u32>(a), output<u32>(g)});
  EXPECT_TRUE(needs_cut(filter, mixed));
}

}  // namespace
}  // namespace pimflow
