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

#include <pimflow/planner.hpp>

#include <algorithm>
#include <cmath>

namespace pimflow {

namespace {

std::uint64_t padded_sum(std::span<const std::uint32_t> sizes, std::uint64_t count) {
  std::uint64_t total = 0;
  for (std::uint32_t s : sizes) total += pad8(count * s);
  return total;
}

ElementCount count_elements(std::span<const std::uint32_t> sizes, std::uint64_t budget, std::uint64_t base,
                            ErrorCode failure, const char* what) {
  std::uint64_t sum = 0;
  for (std::uint32_t s : sizes) sum += s;
  if (sum == 0) throw Error(failure, std::string(what) + ": no per-element arguments");
  std::uint64_t count = budget / sum;
  while (count > 0 && padded_sum(sizes, count) > budget) --count;
  if (count == 0)
    throw Error(failure, std::string(what) + ": " + std::to_string(budget) + " bytes hold no element of every argument");

  ElementCount out;
  out.count = count;
  std::uint64_t off = base;
  for (std::uint32_t s : sizes) {
    out.offsets.push_back(off);
    out.padded.push_back(pad8(count * s));
    off += out.padded.back();
  }
  out.total_bytes = off - base;
  return out;
}

std::uint64_t lcm64(std::uint64_t a, std::uint64_t b) { return std::lcm(a, b); }

}  // namespace

ElementCount wram_element_count(std::span<const std::uint32_t> sizes, std::uint64_t budget_bytes) {
  return count_elements(sizes, budget_bytes, 0, ErrorCode::WramTooSmall, "WRAM");
}

ElementCount wram_element_count(std::span<const ArgSpec> args, std::uint64_t budget_bytes) {
  std::vector<std::uint32_t> sizes;
  for (const ArgSpec& a : args) {
    if (a.per_element()) sizes.push_back(a.elem.size_bytes);
  }
  ElementCount packed = wram_element_count(sizes, budget_bytes);
  ElementCount out;
  out.count = packed.count;
  out.total_bytes = packed.total_bytes;
  std::size_t k = 0;
  std::uint64_t running = 0;
  for (const ArgSpec& a : args) {
    if (a.per_element()) {
      out.offsets.push_back(packed.offsets[k]);
      out.padded.push_back(packed.padded[k]);
      running = packed.offsets[k] + packed.padded[k];
      ++k;
    } else {
      out.offsets.push_back(running);
      out.padded.push_back(0);
    }
  }
  return out;
}

ElementCount mram_capacity(std::span<const std::uint32_t> sizes, std::uint64_t budget_bytes,
                           std::uint64_t header_bytes) {
  if (budget_bytes <= header_bytes)
    throw Error(ErrorCode::MramTooSmall, "MRAM budget does not exceed the count-header reservation");
  return count_elements(sizes, budget_bytes - header_bytes, header_bytes, ErrorCode::MramTooSmall, "MRAM");
}

RoundSplit rounds_and_leftover(std::uint64_t total_length, std::uint64_t capacity, std::uint64_t n_dpus,
                               std::uint64_t align) {
  RoundSplit r;
  const std::uint64_t step = std::max<std::uint64_t>(1, n_dpus) * std::max<std::uint64_t>(1, align);
  std::uint64_t per_round = capacity / step * step;
  if (per_round == 0) {
    r.cpu_leftover = total_length;
    return r;
  }
  if (total_length < per_round) {
    per_round = total_length / step * step;
    r.nr_rounds = per_round ? 1 : 0;
  } else {
    r.nr_rounds = total_length / per_round;
  }
  r.elements_per_round = per_round;
  r.cpu_leftover = total_length - per_round * r.nr_rounds;
  return r;
}

std::vector<DpuExtent> window_overlap_plan(std::uint32_t lookahead, std::uint64_t n_dpus, std::uint64_t elems_per_dpu,
                                           std::uint32_t elem_size, std::uint64_t length, bool overlap_provided,
                                           std::uint64_t first_element) {
  if (lookahead > 0 && !overlap_provided)
    throw Error(ErrorCode::MissingOverlapVector, "length-preserving window needs an overlap vector");
  std::vector<DpuExtent> out;
  for (std::uint64_t d = 0; d < n_dpus; ++d) {
    DpuExtent e;
    e.begin = first_element + d * elems_per_dpu;
    e.elements = elems_per_dpu + lookahead;
    const std::uint64_t end = e.begin + e.elements;
    e.from_overlap = end > length ? std::min<std::uint64_t>(end - std::max(length, e.begin), lookahead) : 0;
    e.padded_bytes = pad8(e.elements * elem_size);
    out.push_back(e);
  }
  return out;
}

FilterWrite FilterAppender::append(std::uint64_t kept) {
  FilterWrite w;
  w.kept = kept;
  w.carry_bytes = valid_ % 8;
  w.write_offset = valid_ / 8 * 8;
  w.write_bytes = pad8(w.carry_bytes + kept * elem_size_);
  valid_ += kept * elem_size_;
  w.valid_bytes = valid_;
  return w;
}

std::vector<FilterWrite> filter_output_plan(std::uint32_t elem_size, std::uint64_t block_capacity,
                                            std::span<const std::uint64_t> keep_counts) {
  FilterAppender app(elem_size);
  std::vector<FilterWrite> out;
  for (std::uint64_t k : keep_counts) {
    if (k > block_capacity) throw Error(ErrorCode::CountOverflow, "block keeps more elements than it holds");
    out.push_back(app.append(k));
  }
  return out;
}

std::string_view to_string(BufferKind kind) {
  switch (kind) {
    case BufferKind::Vector: return "vector";
    case BufferKind::Filtered: return "filtered";
    case BufferKind::Scalar: return "scalar";
    case BufferKind::Reduce: return "reduce";
    case BufferKind::Overlap: return "overlap";
  }
  return "?";
}

BufferKind parse_buffer_kind(std::string_view name) {
  for (BufferKind k :
       {BufferKind::Vector, BufferKind::Filtered, BufferKind::Scalar, BufferKind::Reduce, BufferKind::Overlap}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::ParseError, "unknown buffer kind '" + std::string(name) + "'");
}

std::uint64_t domain_quantum(const LayoutModel& model) {
  std::uint64_t q = 1;
  for (const BufferDesc& b : model.buffers) {
    if (b.is_vector()) q = lcm64(q, b.divisor * align_elems(b.elem.size_bytes));
  }
  return q;
}

std::uint64_t stage_unit(const LayoutModel& model, std::size_t stage) {
  const StageDesc& s = model.stages.at(stage);
  std::uint64_t u = 1;
  for (const StageArgDesc& a : s.args) {
    if (a.buffer == kNoIndex) continue;
    const std::uint64_t size = model.buffers[a.buffer].elem.size_bytes;
    switch (a.role) {
      case ArgRole::Input:
        u = lcm64(u, align_elems(s.compact_input ? size : size * s.group));
        break;
      case ArgRole::InOut:
      case ArgRole::Output:
        u = lcm64(u, align_elems(size));
        break;
      default:
        break;
    }
  }
  return u;
}

WramStagePlan plan_stage_wram(const LayoutModel& model, std::size_t stage, std::uint64_t budget) {
  const StageDesc& s = model.stages.at(stage);
  const bool filter = has_filter(s.kind);
  WramStagePlan plan;
  plan.stage = stage;
  plan.unit = stage_unit(model, stage);

  auto arg_count = [&](const StageArgDesc& a, std::uint64_t m) -> std::uint64_t {
    const BufferDesc& b = model.buffers[a.buffer];
    switch (a.role) {
      case ArgRole::Input: return s.compact_input ? m : m * s.group + s.lookahead;
      case ArgRole::InOut:
      case ArgRole::Output: return m;
      case ArgRole::Scalar:
      case ArgRole::ReduceOut: return b.length;
      case ArgRole::Combine: return 0;
    }
    return 0;
  };
  auto arg_bytes = [&](const StageArgDesc& a, std::uint64_t m) -> std::uint64_t {
    if (a.role == ArgRole::Combine) return 0;
    const std::uint64_t size = model.buffers[a.buffer].elem.size_bytes;
    std::uint64_t bytes = pad8(arg_count(a, m) * size);
    if (a.role == ArgRole::Input && a.overlap != kNoIndex) bytes += pad8(std::uint64_t{s.lookahead} * size);
    if (filter && (a.role == ArgRole::Output || a.role == ArgRole::InOut)) bytes += 8;
    return bytes;
  };
  auto total = [&](std::uint64_t m) {
    std::uint64_t t = 0;
    for (const StageArgDesc& a : s.args) t += arg_bytes(a, m);
    return t;
  };

  const std::uint64_t fixed = total(0);
  std::uint64_t per_inv = 0;  // unpadded bytes one more invocation needs
  for (const StageArgDesc& a : s.args) {
    if (a.role == ArgRole::Combine) continue;
    per_inv += (arg_count(a, 1) - arg_count(a, 0)) * model.buffers[a.buffer].elem.size_bytes;
  }
  std::uint64_t m = 0;
  if (fixed < budget && per_inv > 0) m = (budget - fixed) / per_inv / plan.unit * plan.unit;
  while (m >= plan.unit && total(m) > budget) m -= plan.unit;
  if (m < plan.unit || m == 0)
    throw Error(ErrorCode::WramTooSmall, "stage " + std::to_string(stage) + " (" + std::string(to_string(s.kind)) +
                                             "): " + std::to_string(budget) + " WRAM bytes per tasklet hold no block of " +
                                             std::to_string(plan.unit) + " invocations");

  plan.elems_per_block = m;
  std::uint64_t off = 0;
  for (const StageArgDesc& a : s.args) {
    WramArgPlan ap;
    ap.offset = off;
    ap.count = a.role == ArgRole::Combine ? 0 : arg_count(a, m);
    ap.padded_bytes = arg_bytes(a, m);
    off += ap.padded_bytes;
    plan.args.push_back(ap);
  }
  plan.used_bytes = off;
  return plan;
}

MramPlan layout_mram(const LayoutModel& model, std::uint64_t k) {
  MramPlan p;
  p.elems_per_dpu_per_round = k;
  for (const BufferDesc& b : model.buffers) {
    if (b.kind == BufferKind::Filtered || b.kind == BufferKind::Reduce) p.header_bytes += 8;
  }
  std::uint64_t hdr = 0;
  std::uint64_t off = p.header_bytes;
  for (const BufferDesc& b : model.buffers) {
    MramRegion r;
    std::uint64_t elems = b.length;
    if (b.is_vector()) elems = k / b.divisor + b.halo;
    r.offset = off;
    r.bytes = pad8(elems * b.elem.size_bytes);
    if (b.kind == BufferKind::Filtered || b.kind == BufferKind::Reduce) {
      r.header = hdr;
      hdr += 8;
    }
    off += r.bytes;
    p.regions.push_back(r);
  }
  p.used_bytes = off;
  return p;
}

LayoutPlan plan_layout(const LayoutModel& model, const PlanTarget& target, double cpu_ratio) {
  LayoutPlan plan;
  plan.total_length = model.total_length;
  plan.n_dpus = std::max<std::uint64_t>(1, target.n_dpus);
  plan.tasklets = std::max<std::uint64_t>(1, target.tasklets);
  plan.wram_budget = target.wram_budget;
  plan.quantum = domain_quantum(model);

  for (std::size_t s = 0; s < model.stages.size(); ++s) plan.wram.push_back(plan_stage_wram(model, s, target.wram_budget));

  const std::uint64_t q = plan.quantum;
  auto fits = [&](std::uint64_t units) { return layout_mram(model, units * q).used_bytes <= target.mram_bytes; };
  if (!fits(1))
    throw Error(ErrorCode::MramTooSmall, std::to_string(target.mram_bytes) + " MRAM bytes per DPU hold no slice of " +
                                             std::to_string(q) + " elements");

  cpu_ratio = std::clamp(cpu_ratio, 0.0, 1.0);
  const std::uint64_t forced =
      std::min<std::uint64_t>(model.total_length, static_cast<std::uint64_t>(std::ceil(cpu_ratio * model.total_length)));
  const std::uint64_t device_total = model.total_length - forced;

  // Largest per-DPU share, never beyond what the data needs.
  const std::uint64_t step = plan.n_dpus * q;
  const std::uint64_t max_units = std::max<std::uint64_t>(1, (device_total + step - 1) / step);
  std::uint64_t lo = 1;
  std::uint64_t hi = max_units;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo + 1) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }

  const RoundSplit rs = rounds_and_leftover(device_total, lo * q * plan.n_dpus, plan.n_dpus, q);
  plan.elements_per_round = rs.elements_per_round;
  plan.nr_rounds = rs.nr_rounds;
  plan.cpu_leftover = model.total_length - rs.elements_per_round * rs.nr_rounds;
  plan.mram = layout_mram(model, rs.elements_per_round / plan.n_dpus);
  return plan;
}

}  // namespace pimflow
