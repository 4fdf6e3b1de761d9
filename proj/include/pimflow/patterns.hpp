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
 * @file patterns.hpp
 * @brief Data-parallel pattern kinds, argument roles and the host reference
 *        semantics every other layer is checked against.
 *
 * A pattern stage is described by its kind, a kernel (a pure host callback),
 * and an ordered argument list. The kernel sees one invocation at a time
 * through KernelArgs: per argument, a small window of element slots.
 *
 *   Input    : 1 element (map/filter/reduce), W (window), G (group),
 *              G + W (window+group)
 *   Output   : 1 element
 *   InOut    : 1 element, read then written (map and filter only)
 *   Scalar   : the whole broadcast buffer
 *   ReduceOut: the reduction accumulator (reduce_width elements)
 *   Combine  : no slot; carries the element-wise partial combiner
 */

#pragma once

#include <pimflow/errors.hpp>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace pimflow {

using ByteVec = std::vector<std::byte>;
using BufferId = std::uint64_t;

enum class PatternKind {
  Map,
  Reduce,
  Filter,
  Window,
  Group,
  WindowGroup,
  WindowFilter,
  GroupFilter,
  WindowGroupFilter,
};

inline constexpr PatternKind kAllPatternKinds[] = {
    PatternKind::Map,         PatternKind::Reduce,       PatternKind::Filter,
    PatternKind::Window,      PatternKind::Group,        PatternKind::WindowGroup,
    PatternKind::WindowFilter, PatternKind::GroupFilter, PatternKind::WindowGroupFilter,
};

constexpr bool has_window(PatternKind k) {
  return k == PatternKind::Window || k == PatternKind::WindowGroup || k == PatternKind::WindowFilter ||
         k == PatternKind::WindowGroupFilter;
}
constexpr bool has_group(PatternKind k) {
  return k == PatternKind::Group || k == PatternKind::WindowGroup || k == PatternKind::GroupFilter ||
         k == PatternKind::WindowGroupFilter;
}
constexpr bool has_filter(PatternKind k) {
  return k == PatternKind::Filter || k == PatternKind::WindowFilter || k == PatternKind::GroupFilter ||
         k == PatternKind::WindowGroupFilter;
}
constexpr bool is_reduce(PatternKind k) { return k == PatternKind::Reduce; }

std::string_view to_string(PatternKind kind);
PatternKind parse_pattern_kind(std::string_view name);

/// Number of elements an invocation reads past its own position. A window of
/// extent W looks W - 1 elements ahead; window+group reads up to x_{nG+W},
/// i.e. W elements past its group.
std::uint32_t lookahead(PatternKind kind, std::uint32_t window);

struct ElemType {
  std::uint32_t size_bytes = 0;
  std::string name;

  bool operator==(const ElemType&) const = default;
};

/// Rejects sizes outside {1,2,4,8} and empty names.
ElemType make_elem_type(std::uint32_t size_bytes, std::string name);

template <typename T>
ElemType elem_type_of() {
  static_assert(std::is_integral_v<T> && !std::is_same_v<T, bool>, "integer element types only");
  constexpr auto n = sizeof(T);
  static_assert(n == 1 || n == 2 || n == 4 || n == 8);
  std::string name = std::is_signed_v<T> ? "i" : "u";
  name += std::to_string(n * 8);
  return ElemType{static_cast<std::uint32_t>(n), std::move(name)};
}

enum class ArgRole { Input, Output, InOut, Scalar, ReduceOut, Combine };

std::string_view to_string(ArgRole role);
ArgRole parse_arg_role(std::string_view name);

/// Host memory bound to a pipeline argument. Typed by ElemType only; the
/// framework never needs the C++ type after binding.
class HostBuffer {
 public:
  HostBuffer(ElemType elem, ByteVec bytes, std::string name = {});

  BufferId id() const { return id_; }
  const ElemType& elem() const { return elem_; }
  const std::string& name() const { return name_; }
  std::uint64_t size() const { return bytes_.size() / elem_.size_bytes; }
  std::span<const std::byte> bytes() const { return bytes_; }

  void assign_bytes(ByteVec bytes);

  template <typename T>
  std::vector<T> values() const {
    check_type(sizeof(T));
    std::vector<T> out(size());
    if (!out.empty()) std::memcpy(out.data(), bytes_.data(), bytes_.size());
    return out;
  }

  template <typename T>
  void assign(const std::vector<T>& values) {
    check_type(sizeof(T));
    ByteVec bytes(values.size() * sizeof(T));
    if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
    bytes_ = std::move(bytes);
  }

 private:
  void check_type(std::size_t size) const;

  BufferId id_;
  ElemType elem_;
  ByteVec bytes_;
  std::string name_;
};

using BufferHandle = std::shared_ptr<HostBuffer>;

template <typename T>
BufferHandle make_buffer(const std::vector<T>& values = {}, std::string name = {}) {
  ByteVec bytes(values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return std::make_shared<HostBuffer>(elem_type_of<T>(), std::move(bytes), std::move(name));
}

/// Element-wise partial combiner: acc <- acc (+) partial, one element each.
using CombineFn = std::function<void(std::byte* acc, const std::byte* partial)>;

struct ArgSpec {
  ArgRole role = ArgRole::Input;
  ElemType elem;
  BufferHandle buffer;             // null for Combine
  std::uint32_t reduce_width = 0;  // ReduceOut only
  CombineFn combine;               // Combine only
  ByteVec reduce_identity;         // ReduceOut only; one element, zero when empty

  BufferId buffer_id() const { return buffer ? buffer->id() : 0; }
  bool per_element() const {
    return role == ArgRole::Input || role == ArgRole::Output || role == ArgRole::InOut;
  }
};

template <typename T>
ArgSpec input(BufferHandle buffer) {
  return ArgSpec{ArgRole::Input, elem_type_of<T>(), std::move(buffer), 0, {}, {}};
}
template <typename T>
ArgSpec output(BufferHandle buffer) {
  return ArgSpec{ArgRole::Output, elem_type_of<T>(), std::move(buffer), 0, {}, {}};
}
template <typename T>
ArgSpec inout(BufferHandle buffer) {
  return ArgSpec{ArgRole::InOut, elem_type_of<T>(), std::move(buffer), 0, {}, {}};
}
template <typename T>
ArgSpec scalar(BufferHandle buffer) {
  return ArgSpec{ArgRole::Scalar, elem_type_of<T>(), std::move(buffer), 0, {}, {}};
}

/// The buffer holds the initial value; it is folded in exactly once. Every
/// per-tasklet partial starts from `identity`.
template <typename T>
ArgSpec reduce_out(BufferHandle buffer, std::uint32_t width = 1, T identity = T{}) {
  ArgSpec a{ArgRole::ReduceOut, elem_type_of<T>(), std::move(buffer), width, {}, ByteVec(sizeof(T))};
  std::memcpy(a.reduce_identity.data(), &identity, sizeof(T));
  return a;
}

template <typename T, typename F>
ArgSpec combine(F fn) {
  ArgSpec a{ArgRole::Combine, elem_type_of<T>(), nullptr, 0, {}, {}};
  a.combine = [fn](std::byte* acc, const std::byte* partial) {
    T x;
    T y;
    std::memcpy(&x, acc, sizeof(T));
    std::memcpy(&y, partial, sizeof(T));
    T r = fn(x, y);
    std::memcpy(acc, &r, sizeof(T));
  };
  return a;
}

/// Per-invocation view of the argument slots handed to a kernel.
class KernelArgs {
 public:
  struct Slot {
    std::byte* data = nullptr;
    std::uint32_t count = 0;
    std::uint32_t elem_size = 0;
    bool writable = false;
  };

  KernelArgs() = default;
  explicit KernelArgs(std::size_t n) : slots_(n) {}

  std::size_t size() const { return slots_.size(); }
  std::size_t count(std::size_t arg) const { return slot(arg).count; }

  template <typename T>
  T get(std::size_t arg, std::size_t i = 0) const {
    const Slot& s = checked(arg, i, sizeof(T));
    T v;
    std::memcpy(&v, s.data + i * sizeof(T), sizeof(T));
    return v;
  }

  template <typename T>
  void set(std::size_t arg, T value, std::size_t i = 0) {
    const Slot& s = checked(arg, i, sizeof(T));
    if (!s.writable) fault("write to read-only argument " + std::to_string(arg));
    std::memcpy(s.data + i * sizeof(T), &value, sizeof(T));
  }

  std::span<std::byte> bytes(std::size_t arg) {
    Slot& s = slots_.at(arg);
    return {s.data, std::size_t{s.count} * s.elem_size};
  }

  Slot& slot(std::size_t arg) {
    if (arg >= slots_.size()) fault("argument index out of range");
    return slots_[arg];
  }
  const Slot& slot(std::size_t arg) const {
    if (arg >= slots_.size()) fault("argument index out of range");
    return slots_[arg];
  }

 private:
  const Slot& checked(std::size_t arg, std::size_t i, std::size_t size) const {
    const Slot& s = slot(arg);
    if (i >= s.count) fault("slot index " + std::to_string(i) + " out of range for argument " + std::to_string(arg));
    if (size != s.elem_size) fault("element size mismatch on argument " + std::to_string(arg));
    return s;
  }
  [[noreturn]] static void fault(const std::string& what);

  std::vector<Slot> slots_;
};

using ApplyFn = std::function<void(KernelArgs&)>;
using PredicateFn = std::function<bool(const KernelArgs&)>;

inline constexpr std::uint32_t kDefaultCostHint = 20;

struct KernelSpec {
  std::string id;
  ApplyFn apply;          // may be empty for Filter/WindowFilter: copies the first input element
  PredicateFn predicate;  // filter-bearing kinds only
  std::optional<std::uint32_t> cost_hint;
};

struct PatternParams {
  std::uint32_t window = 1;
  std::uint32_t group = 1;
  bool overlap_provided = false;
};

struct OutputLength {
  std::uint64_t elements = 0;   // exact, or an upper bound when data_dependent
  bool data_dependent = false;  // filter-bearing kinds
};

/// Length algebra of a single stage. Reduce yields one logical result (of
/// reduce_width elements).
OutputLength output_length(PatternKind kind, std::uint64_t n, std::optional<std::uint32_t> w,
                           std::optional<std::uint32_t> g, bool overlap_provided);

/// Role rules for a stage; throws RoleViolation.
void validate_stage_args(PatternKind kind, std::span<const ArgSpec> args, const KernelSpec& kernel);

/// Bit-exact host reference for one stage.
///
/// `values[j]` holds the current contents of argument j (ignored for Output,
/// initial value for ReduceOut). `overlap[j]` holds the lookahead padding for
/// window inputs; it may be empty when no padding is supplied. Returns the
/// argument contents after the stage.
std::vector<ByteVec> apply_pattern_host(PatternKind kind, const KernelSpec& kernel, std::span<const ArgSpec> args,
                                        const PatternParams& params, std::span<const ByteVec> values,
                                        std::span<const ByteVec> overlap = {});

/// Applies the reduce combiner of a stage to one element: the Combine argument
/// when present, otherwise the stage kernel folded with the partial standing in
/// for its first input.
void combine_element(const KernelSpec& kernel, std::span<const ArgSpec> args, std::span<const ByteVec> scalar_values,
                     std::byte* acc, const std::byte* partial);

}  // namespace pimflow
