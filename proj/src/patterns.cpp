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

#include <pimflow/patterns.hpp>

#include <algorithm>

namespace pimflow {

namespace {

std::atomic<BufferId> g_next_buffer_id{1};

std::size_t elem_count(const ByteVec& v, const ElemType& t) { return v.size() / t.size_bytes; }

}  // namespace

std::string_view to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::Map: return "map";
    case PatternKind::Reduce: return "reduce";
    case PatternKind::Filter: return "filter";
    case PatternKind::Window: return "window";
    case PatternKind::Group: return "group";
    case PatternKind::WindowGroup: return "window_group";
    case PatternKind::WindowFilter: return "window_filter";
    case PatternKind::GroupFilter: return "group_filter";
    case PatternKind::WindowGroupFilter: return "window_group_filter";
  }
  return "?";
}

PatternKind parse_pattern_kind(std::string_view name) {
  for (PatternKind k : kAllPatternKinds) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::ParseError, "unknown pattern kind '" + std::string(name) + "'");
}

std::uint32_t lookahead(PatternKind kind, std::uint32_t window) {
  if (!has_window(kind)) return 0;
  if (window == 0) throw RoleViolation(std::nullopt, "window extent must be >= 1");
  return has_group(kind) ? window : window - 1;
}

ElemType make_elem_type(std::uint32_t size_bytes, std::string name) {
  if (size_bytes != 1 && size_bytes != 2 && size_bytes != 4 && size_bytes != 8)
    throw Error(ErrorCode::RoleViolation, "element size must be 1, 2, 4 or 8 bytes");
  if (name.empty()) throw Error(ErrorCode::RoleViolation, "element type name must be non-empty");
  return ElemType{size_bytes, std::move(name)};
}

std::string_view to_string(ArgRole role) {
  switch (role) {
    case ArgRole::Input: return "input";
    case ArgRole::Output: return "output";
    case ArgRole::InOut: return "inout";
    case ArgRole::Scalar: return "scalar";
    case ArgRole::ReduceOut: return "reduce_out";
    case ArgRole::Combine: return "combine";
  }
  return "?";
}

ArgRole parse_arg_role(std::string_view name) {
  for (ArgRole r : {ArgRole::Input, ArgRole::Output, ArgRole::InOut, ArgRole::Scalar, ArgRole::ReduceOut,
                    ArgRole::Combine}) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorCode::ParseError, "unknown argument role '" + std::string(name) + "'");
}

HostBuffer::HostBuffer(ElemType elem, ByteVec bytes, std::string name)
    : id_(g_next_buffer_id.fetch_add(1)), elem_(make_elem_type(elem.size_bytes, elem.name)),
      bytes_(std::move(bytes)), name_(std::move(name)) {
  if (bytes_.size() % elem_.size_bytes != 0)
    throw Error(ErrorCode::LengthMismatch, "buffer byte size is not a multiple of the element size");
}

void HostBuffer::assign_bytes(ByteVec bytes) {
  if (bytes.size() % elem_.size_bytes != 0)
    throw Error(ErrorCode::LengthMismatch, "buffer byte size is not a multiple of the element size");
  bytes_ = std::move(bytes);
}

void HostBuffer::check_type(std::size_t size) const {
  if (size != elem_.size_bytes)
    throw Error(ErrorCode::LengthMismatch, "buffer '" + name_ + "' holds " + elem_.name + " elements");
}

void KernelArgs::fault(const std::string& what) { throw Error(ErrorCode::KernelFault, what); }

OutputLength output_length(PatternKind kind, std::uint64_t n, std::optional<std::uint32_t> w,
                           std::optional<std::uint32_t> g, bool overlap_provided) {
  if (is_reduce(kind)) return {1, false};
  std::uint64_t len = n;
  if (has_group(kind)) {
    if (!g || *g == 0) throw RoleViolation(std::nullopt, "group size must be >= 1");
    if (n % *g != 0)
      throw Error(ErrorCode::GroupNotDivisible,
                  "group size " + std::to_string(*g) + " does not divide " + std::to_string(n));
    len = n / *g;
  } else if (has_window(kind)) {
    if (!w || *w == 0) throw RoleViolation(std::nullopt, "window extent must be >= 1");
    if (!overlap_provided) {
      if (*w > n)
        throw Error(ErrorCode::WindowTooLarge,
                    "window " + std::to_string(*w) + " exceeds length " + std::to_string(n));
      len = n - (*w - 1);
    }
  }
  return {len, has_filter(kind)};
}

void validate_stage_args(PatternKind kind, std::span<const ArgSpec> args, const KernelSpec& kernel) {
  if (args.empty()) throw RoleViolation(std::nullopt, "stage has no arguments");

  std::optional<std::size_t> first_input;
  std::size_t outputs = 0;
  std::size_t reduce_outs = 0;
  std::size_t combines = 0;
  std::optional<std::size_t> reduce_out_index;
  bool has_combine = false;

  for (std::size_t j = 0; j < args.size(); ++j) {
    const ArgSpec& a = args[j];
    if (a.role != ArgRole::Combine && !a.buffer) throw RoleViolation(j, "argument has no buffer bound");
    if (a.buffer && !(a.buffer->elem() == a.elem))
      throw RoleViolation(j, "argument type " + a.elem.name + " does not match buffer type " +
                                 a.buffer->elem().name);
    switch (a.role) {
      case ArgRole::Input:
        if (!first_input) first_input = j;
        break;
      case ArgRole::InOut:
        if (!first_input) first_input = j;
        if (kind != PatternKind::Map && kind != PatternKind::Filter)
          throw RoleViolation(j, "inout arguments are only supported by map and filter stages");
        ++outputs;
        break;
      case ArgRole::Output:
        if (is_reduce(kind)) throw RoleViolation(j, "reduce stages write through a reduce_out argument");
        ++outputs;
        break;
      case ArgRole::Scalar:
        break;
      case ArgRole::ReduceOut:
        if (!is_reduce(kind)) throw RoleViolation(j, "reduce_out is only legal on reduce stages");
        if (a.reduce_width == 0) throw RoleViolation(j, "reduce_out width must be >= 1");
        if (!a.reduce_identity.empty() && a.reduce_identity.size() != a.elem.size_bytes)
          throw RoleViolation(j, "reduce identity must be exactly one element");
        ++reduce_outs;
        reduce_out_index = j;
        break;
      case ArgRole::Combine:
        if (!is_reduce(kind)) throw RoleViolation(j, "combine is only legal on reduce stages");
        if (!a.combine) throw RoleViolation(j, "combine argument carries no function");
        has_combine = true;
        ++combines;
        if (combines > 1) throw RoleViolation(j, "at most one combine argument");
        break;
    }
    if (outputs > 1 && (a.role == ArgRole::Output || a.role == ArgRole::InOut))
      throw RoleViolation(j, "a stage produces a single output vector");
  }

  if (!first_input) throw RoleViolation(std::nullopt, "stage needs at least one input or inout argument");

  if (is_reduce(kind)) {
    if (reduce_outs != 1) throw RoleViolation(std::nullopt, "reduce stages need exactly one reduce_out");
    const ArgSpec& ro = args[*reduce_out_index];
    if (!has_combine) {
      const ArgSpec& in = args[*first_input];
      if (ro.reduce_width != 1 || !(in.elem == ro.elem))
        throw RoleViolation(*reduce_out_index,
                            "without a combine argument the kernel itself folds partials, which needs a "
                            "width-1 accumulator of the input element type");
      const auto inputs = std::count_if(args.begin(), args.end(), [](const ArgSpec& a) { return a.role == ArgRole::Input; });
      if (inputs != 1)
        throw RoleViolation(std::nullopt, "without a combine argument a reduce reads exactly one input vector");
    }
    for (std::size_t j = 0; j < args.size(); ++j) {
      if (args[j].role == ArgRole::Combine && !(args[j].elem == ro.elem))
        throw RoleViolation(j, "combine element type must match reduce_out");
    }
    if (!kernel.apply) throw RoleViolation(std::nullopt, "reduce stages need a kernel");
    return;
  }

  if (outputs != 1) throw RoleViolation(std::nullopt, "stage needs an output or inout argument");
  if (has_filter(kind) && !kernel.predicate)
    throw RoleViolation(std::nullopt, "filter-bearing stages need a predicate");

  const bool apply_optional = kind == PatternKind::Filter || kind == PatternKind::WindowFilter;
  if (!kernel.apply && !apply_optional) throw RoleViolation(std::nullopt, "stage needs a kernel");
  if (!kernel.apply) {
    for (std::size_t j = 0; j < args.size(); ++j) {
      if (args[j].role == ArgRole::Output && !(args[j].elem == args[*first_input].elem))
        throw RoleViolation(j, "a filter without kernel copies its input, so output type must match");
    }
  }
}

void combine_element(const KernelSpec& kernel, std::span<const ArgSpec> args, std::span<const ByteVec> scalar_values,
                     std::byte* acc, const std::byte* partial) {
  for (const ArgSpec& a : args) {
    if (a.role == ArgRole::Combine) {
      a.combine(acc, partial);
      return;
    }
  }
  KernelArgs k(args.size());
  bool input_bound = false;
  for (std::size_t j = 0; j < args.size(); ++j) {
    const ArgSpec& a = args[j];
    auto& s = k.slot(j);
    s.elem_size = a.elem.size_bytes;
    if (a.role == ArgRole::ReduceOut) {
      s = {acc, 1, a.elem.size_bytes, true};
    } else if (a.role == ArgRole::Input && !input_bound) {
      s = {const_cast<std::byte*>(partial), 1, a.elem.size_bytes, false};
      input_bound = true;
    } else if (a.role == ArgRole::Scalar && j < scalar_values.size()) {
      const ByteVec& v = scalar_values[j];
      s = {const_cast<std::byte*>(v.data()), static_cast<std::uint32_t>(v.size() / a.elem.size_bytes),
           a.elem.size_bytes, false};
    }
  }
  kernel.apply(k);
}

std::vector<ByteVec> apply_pattern_host(PatternKind kind, const KernelSpec& kernel, std::span<const ArgSpec> args,
                                        const PatternParams& params, std::span<const ByteVec> values,
                                        std::span<const ByteVec> overlap) {
  validate_stage_args(kind, args, kernel);
  if (values.size() != args.size()) throw Error(ErrorCode::LengthMismatch, "one value per argument expected");

  std::optional<std::uint64_t> n;
  for (std::size_t j = 0; j < args.size(); ++j) {
    if (args[j].role != ArgRole::Input && args[j].role != ArgRole::InOut) continue;
    const std::uint64_t len = elem_count(values[j], args[j].elem);
    if (n && *n != len)
      throw Error(ErrorCode::LengthMismatch, "input lengths differ (" + std::to_string(*n) + " vs " +
                                                 std::to_string(len) + ")");
    n = len;
  }

  const std::uint32_t la = lookahead(kind, params.window);
  const std::uint32_t g = has_group(kind) ? params.group : 1;
  const bool padded = has_window(kind) && params.overlap_provided;
  if (has_window(kind) && has_group(kind) && !padded)
    throw Error(ErrorCode::MissingOverlapVector, "window+group stages read past their last group");

  std::vector<ByteVec> result(values.begin(), values.end());

  // Inputs extended by their overlap padding.
  std::vector<ByteVec> ext(args.size());
  for (std::size_t j = 0; j < args.size(); ++j) {
    if (args[j].role != ArgRole::Input) continue;
    ext[j] = values[j];
    if (padded) {
      if (j >= overlap.size() || overlap[j].size() != std::size_t{la} * args[j].elem.size_bytes)
        throw Error(ErrorCode::MissingOverlapVector,
                    "argument " + std::to_string(j) + " needs " + std::to_string(la) + " overlap elements");
      ext[j].insert(ext[j].end(), overlap[j].begin(), overlap[j].end());
    }
  }

  KernelArgs k(args.size());
  for (std::size_t j = 0; j < args.size(); ++j) {
    const ArgSpec& a = args[j];
    auto& s = k.slot(j);
    s.elem_size = a.elem.size_bytes;
    if (a.role == ArgRole::Scalar) {
      s.data = const_cast<std::byte*>(values[j].data());
      s.count = static_cast<std::uint32_t>(elem_count(values[j], a.elem));
    }
  }

  if (is_reduce(kind)) {
    std::size_t ro = 0;
    while (args[ro].role != ArgRole::ReduceOut) ++ro;
    ByteVec acc = values[ro];
    acc.resize(std::size_t{args[ro].reduce_width} * args[ro].elem.size_bytes);
    k.slot(ro) = {acc.data(), args[ro].reduce_width, args[ro].elem.size_bytes, true};
    for (std::uint64_t i = 0; i < n.value_or(0); ++i) {
      for (std::size_t j = 0; j < args.size(); ++j) {
        if (args[j].role == ArgRole::Input)
          k.slot(j) = {ext[j].data() + i * args[j].elem.size_bytes, 1, args[j].elem.size_bytes, false};
      }
      kernel.apply(k);
    }
    result[ro] = std::move(acc);
    return result;
  }

  const OutputLength ol = output_length(kind, n.value_or(0), params.window, params.group, padded);
  const std::uint64_t invocations = ol.elements;

  std::size_t out = 0;
  while (args[out].role != ArgRole::Output && args[out].role != ArgRole::InOut) ++out;
  const ArgSpec& oa = args[out];
  const std::uint32_t osize = oa.elem.size_bytes;
  const bool in_place = oa.role == ArgRole::InOut;
  std::size_t first_in = 0;
  while (args[first_in].role != ArgRole::Input && args[first_in].role != ArgRole::InOut) ++first_in;

  ByteVec produced;
  produced.reserve(invocations * osize);
  ByteVec slot(osize);
  for (std::uint64_t i = 0; i < invocations; ++i) {
    for (std::size_t j = 0; j < args.size(); ++j) {
      if (args[j].role == ArgRole::Input) {
        const std::uint32_t sz = args[j].elem.size_bytes;
        k.slot(j) = {ext[j].data() + i * g * sz, g + la, sz, false};
      }
    }
    if (in_place) {
      std::memcpy(slot.data(), values[out].data() + i * osize, osize);
    } else {
      std::fill(slot.begin(), slot.end(), std::byte{0});
    }
    k.slot(out) = {slot.data(), 1, osize, true};
    if (kernel.apply) {
      kernel.apply(k);
    } else if (!in_place) {
      std::memcpy(slot.data(), ext[first_in].data() + i * g * osize, osize);
    }
    if (has_filter(kind)) {
      k.slot(out).writable = false;
      if (!kernel.predicate(k)) continue;
    }
    produced.insert(produced.end(), slot.begin(), slot.end());
  }
  result[out] = std::move(produced);
  return result;
}

}  // namespace pimflow
