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

#include <pimflow/hostrt.hpp>

#include <algorithm>
#include <cstring>
#include <set>

namespace pimflow {

ByteVec compact_filter_output(std::span<const ByteVec> regions, std::span<const std::uint64_t> counts,
                              std::uint32_t elem_size) {
  if (regions.size() != counts.size()) throw Error(ErrorCode::DeviceError, "one count per filtered region expected");
  ByteVec out;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::uint64_t bytes = counts[i] * elem_size;
    if (bytes > regions[i].size())
      throw Error(ErrorCode::CountOverflow, "region " + std::to_string(i) + " reports " + std::to_string(counts[i]) +
                                                " elements but holds " + std::to_string(regions[i].size() / elem_size));
    out.insert(out.end(), regions[i].begin(), regions[i].begin() + static_cast<std::ptrdiff_t>(bytes));
  }
  return out;
}

ByteVec combine_reduce_partials(const StageSpec& stage, std::size_t reduce_arg, const ByteVec& initial,
                                std::span<const ByteVec> partials, std::span<const ByteVec> scalar_values) {
  const ArgSpec& ra = stage.args.at(reduce_arg);
  const std::size_t size = ra.elem.size_bytes;
  const std::size_t width = ra.reduce_width;
  std::vector<ByteVec> scal(scalar_values.begin(), scalar_values.end());
  scal.resize(stage.args.size());
  auto fold_into = [&](ByteVec& acc, const ByteVec& part) {
    if (acc.size() != width * size || part.size() != width * size)
      throw Error(ErrorCode::LengthMismatch, "reduce partial has the wrong width");
    for (std::size_t e = 0; e < width; ++e)
      combine_element(stage.kernel, stage.args, scal, acc.data() + e * size, part.data() + e * size);
  };

  std::vector<ByteVec> level(partials.begin(), partials.end());
  while (level.size() > 1) {
    std::vector<ByteVec> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      if (i + 1 < level.size()) fold_into(level[i], level[i + 1]);
      next.push_back(std::move(level[i]));
    }
    level = std::move(next);
  }
  ByteVec result = initial;
  if (!level.empty()) fold_into(result, level.front());
  return result;
}

namespace {

ByteVec replicate(const ByteVec& one, std::size_t size, std::size_t count) {
  ByteVec out(size * count);
  if (one.empty()) return out;
  for (std::size_t e = 0; e < count; ++e) std::memcpy(out.data() + e * size, one.data(), size);
  return out;
}

std::size_t reduce_arg_of(const StageSpec& s) {
  for (std::size_t j = 0; j < s.args.size(); ++j) {
    if (s.args[j].role == ArgRole::ReduceOut) return j;
  }
  return kNoIndex;
}

struct LeftoverResult {
  HostState state;
  std::uint64_t invocations = 0;
};

// Runs the stages over the domain suffix [begin, N). Host inputs are sliced
// at their own coordinate; reduce accumulators start from the identity.
LeftoverResult run_leftover(const CompiledPipeline& c, const HostState& initial, std::uint64_t begin) {
  LeftoverResult r;
  const GlobalLists& g = c.lists;
  for (std::size_t i = 0; i < g.handles.size(); ++i) {
    const BufferDesc& b = g.model.buffers[i];
    const ByteVec& full = initial.at(g.handles[i]->id());
    if (b.is_vector() && g.uploaded[i]) {
      const std::uint64_t from = std::min<std::uint64_t>(begin / b.divisor * b.elem.size_bytes, full.size());
      r.state[g.handles[i]->id()] = ByteVec(full.begin() + static_cast<std::ptrdiff_t>(from), full.end());
    } else {
      r.state[g.handles[i]->id()] = full;
    }
  }
  for (const StageSpec& s : g.stages) {
    const std::size_t ro = reduce_arg_of(s);
    if (ro != kNoIndex) {
      const ArgSpec& a = s.args[ro];
      r.state[a.buffer_id()] = replicate(a.reduce_identity, a.elem.size_bytes, a.reduce_width);
    }
  }

  for (const StageSpec& s : g.stages) {
    std::vector<ByteVec> values(s.args.size());
    std::vector<ByteVec> overlap(s.args.size());
    std::uint64_t n_in = 0;
    bool have_in = false;
    for (std::size_t j = 0; j < s.args.size(); ++j) {
      const ArgSpec& a = s.args[j];
      if (!a.buffer || a.role == ArgRole::Output) continue;
      values[j] = r.state.at(a.buffer_id());
      if (s.overlap[j]) overlap[j] = r.state.at(s.overlap[j]->id());
      if (!have_in && (a.role == ArgRole::Input || a.role == ArgRole::InOut)) {
        n_in = values[j].size() / a.elem.size_bytes;
        have_in = true;
      }
    }
    std::vector<ByteVec> out;
    if (has_window(s.kind) && !s.has_overlap() && n_in < s.window.value_or(1)) {
      // The device already produced every output this window can have.
      out = values;
      for (std::size_t j = 0; j < s.args.size(); ++j) {
        if (s.args[j].role == ArgRole::Output || s.args[j].role == ArgRole::InOut) out[j].clear();
      }
    } else {
      out = apply_pattern_host(s.kind, s.kernel, s.args, s.params(), values, overlap);
      r.invocations += is_reduce(s.kind) ? n_in : output_length(s.kind, n_in, s.window, s.group, s.has_overlap()).elements;
    }
    for (std::size_t j = 0; j < s.args.size(); ++j) {
      const ArgRole role = s.args[j].role;
      if (role == ArgRole::Output || role == ArgRole::InOut || role == ArgRole::ReduceOut)
        r.state[s.args[j].buffer_id()] = std::move(out[j]);
    }
  }
  return r;
}

// Device-side pieces of one fetched buffer, in round-major DPU-minor order.
struct Gathered {
  std::vector<ByteVec> pieces;  // Vector: core slices; Filtered: compacted; Reduce: partials
  std::uint64_t kept_bytes = 0;
};

}  // namespace

ExecReport execute_pipeline(std::span<const StageSpec> stages, std::span<const BufferHandle> fetch,
                            std::uint64_t length, Device& device, const ExecOptions& opts) {
  const SystemConfig& sys = device.system();
  const CostModel& cost = sys.cost;
  CompiledPipeline c = compile_pipeline(stages, fetch, length, sys, opts.cpu_ratio);
  const GlobalLists& g = c.lists;
  const DeviceProgram& dp = c.program;
  const HostState initial = snapshot(g.stages);

  ExecReport rep;
  rep.rounds = dp.rounds;
  rep.cpu_leftover = c.leftover.size();
  rep.timing.overhead_ns = cost.fixed_codegen_overhead_ns;

  std::set<BufferId> written;
  for (const StageSpec& s : g.stages) {
    for (BufferId id : written_buffers(s)) written.insert(id);
  }
  std::vector<std::size_t> gathered_ids;
  for (std::size_t i = 0; i < g.handles.size(); ++i) {
    if (g.fetched[i] && written.count(g.handles[i]->id())) gathered_ids.push_back(i);
  }
  std::vector<Gathered> gathered(g.handles.size());

  const std::uint64_t n_dpus = dp.n_dpus;
  const std::uint64_t k = dp.per_dpu;
  const TransferMode gmode = opts.gather == GatherMode::Serial ? TransferMode::Serial : TransferMode::Parallel;

  if (dp.rounds > 0) {
    device.set_parallel_sim(opts.parallel_sim);
    device.load(dp, g.stages);

    for (std::size_t i = 0; i < dp.buffers.size(); ++i) {
      const ProgramBuffer& b = dp.buffers[i];
      if (b.kind != BufferKind::Scalar && b.kind != BufferKind::Overlap) continue;
      ByteVec bytes = initial.at(g.handles[i]->id());
      bytes.resize(b.bytes);
      rep.timing.cpu_to_dpu_ns += device.broadcast(b.mram, bytes);
    }

    for (std::uint64_t r = 0; r < dp.rounds; ++r) {
      std::vector<DpuPayload> up;
      for (std::size_t i = 0; i < dp.buffers.size(); ++i) {
        const ProgramBuffer& b = dp.buffers[i];
        if (!b.upload || !(b.kind == BufferKind::Vector || b.kind == BufferKind::Filtered)) continue;
        const ByteVec& host = initial.at(g.handles[i]->id());
        const std::uint64_t size = b.elem.size_bytes;
        for (std::uint64_t d = 0; d < n_dpus; ++d) {
          const std::uint64_t e0 = (r * dp.per_round + d * k) / b.divisor;
          DpuPayload p{static_cast<std::uint32_t>(d), b.mram, ByteVec(b.bytes)};
          const std::uint64_t from = std::min<std::uint64_t>(e0 * size, host.size());
          const std::uint64_t to = std::min<std::uint64_t>(from + b.bytes, host.size());
          std::copy(host.begin() + static_cast<std::ptrdiff_t>(from), host.begin() + static_cast<std::ptrdiff_t>(to),
                    p.bytes.begin());
          up.push_back(std::move(p));
        }
      }
      rep.timing.cpu_to_dpu_ns += device.upload(TransferMode::Parallel, up);

      rep.device_kernel_ns += device.run_round(r);

      for (std::size_t i : gathered_ids) {
        const ProgramBuffer& b = dp.buffers[i];
        const std::uint64_t size = b.elem.size_bytes;
        Gathered& out = gathered[i];
        if (b.kind == BufferKind::Vector) {
          std::vector<DpuRequest> req;
          std::vector<std::uint64_t> keep;
          for (std::uint64_t d = 0; d < n_dpus; ++d) {
            const std::uint64_t e0 = (r * dp.per_round + d * k) / b.divisor;
            const std::uint64_t n = e0 < b.length ? std::min(k / b.divisor, b.length - e0) : 0;
            req.push_back({static_cast<std::uint32_t>(d), b.mram, pad8(k / b.divisor * size)});
            keep.push_back(n * size);
          }
          Device::Gathered got = device.download(gmode, req);
          rep.timing.dpu_to_cpu_ns += got.time_ns;
          for (std::size_t d = 0; d < got.data.size(); ++d) {
            got.data[d].resize(keep[d]);
            out.pieces.push_back(std::move(got.data[d]));
          }
        } else if (b.kind == BufferKind::Filtered) {
          std::vector<DpuRequest> hdr;
          for (std::uint64_t d = 0; d < n_dpus; ++d) hdr.push_back({static_cast<std::uint32_t>(d), *b.header, 8});
          std::vector<std::uint64_t> counts(n_dpus);
          std::vector<ByteVec> regions;
          if (gmode == TransferMode::Serial) {
            // Counts first, then each DPU's exact kept prefix.
            Device::Gathered h = device.download(TransferMode::Parallel, hdr);
            rep.timing.dpu_to_cpu_ns += h.time_ns;
            std::vector<DpuRequest> req;
            for (std::uint64_t d = 0; d < n_dpus; ++d) {
              std::memcpy(&counts[d], h.data[d].data(), 8);
              if (counts[d] * size > b.bytes)
                throw Error(ErrorCode::CountOverflow, "DPU " + std::to_string(d) + " reports " +
                                                          std::to_string(counts[d]) + " kept elements");
              if (counts[d]) req.push_back({static_cast<std::uint32_t>(d), b.mram, pad8(counts[d] * size)});
            }
            Device::Gathered got = device.download(TransferMode::Serial, req);
            rep.timing.dpu_to_cpu_ns += got.time_ns;
            std::size_t next = 0;
            for (std::uint64_t d = 0; d < n_dpus; ++d)
              regions.push_back(counts[d] ? std::move(got.data[next++]) : ByteVec{});
          } else {
            // Same amount from every DPU: header plus the whole region.
            std::vector<DpuRequest> req;
            for (std::uint64_t d = 0; d < n_dpus; ++d) {
              req.push_back(hdr[d]);
              req.push_back({static_cast<std::uint32_t>(d), b.mram, b.bytes});
            }
            Device::Gathered got = device.download(TransferMode::Parallel, req);
            rep.timing.dpu_to_cpu_ns += got.time_ns;
            for (std::uint64_t d = 0; d < n_dpus; ++d) {
              std::memcpy(&counts[d], got.data[2 * d].data(), 8);
              regions.push_back(std::move(got.data[2 * d + 1]));
            }
          }
          ByteVec packed = compact_filter_output(regions, counts, static_cast<std::uint32_t>(size));
          out.kept_bytes += packed.size();
          out.pieces.push_back(std::move(packed));
        } else if (b.kind == BufferKind::Reduce) {
          std::vector<DpuRequest> req;
          for (std::uint64_t d = 0; d < n_dpus; ++d) req.push_back({static_cast<std::uint32_t>(d), b.mram, b.bytes});
          Device::Gathered got = device.download(gmode, req);
          rep.timing.dpu_to_cpu_ns += got.time_ns;
          for (ByteVec& p : got.data) {
            p.resize(b.length * size);
            out.pieces.push_back(std::move(p));
          }
        }
      }
    }
  }

  // Host leftover over [device_length, N).
  const std::uint64_t begin = c.plan.device_length();
  LeftoverResult left;
  if (!c.leftover.empty() || dp.rounds == 0) {
    left = run_leftover(c, initial, begin);
    rep.leftover_host_ns = static_cast<double>(left.invocations) * cost.host.ns_per_invocation;
  }
  rep.timing.kernel_ns = std::max(rep.device_kernel_ns, rep.leftover_host_ns);
  const bool have_left = !left.state.empty();

  // Post-processing and write-back.
  for (std::size_t i = 0; i < g.handles.size(); ++i) {
    if (!g.fetched[i]) continue;
    const BufferHandle& h = g.handles[i];
    const BufferDesc& b = g.model.buffers[i];
    const std::uint64_t size = b.elem.size_bytes;
    if (!written.count(h->id())) {
      rep.fetched_lengths[h->id()] = h->size();
      continue;
    }
    const ByteVec* tail = have_left ? &left.state.at(h->id()) : nullptr;
    if (b.kind == BufferKind::Vector) {
      ByteVec full;
      full.reserve(b.length * size);
      for (const ByteVec& p : gathered[i].pieces) full.insert(full.end(), p.begin(), p.end());
      full.resize(std::min<std::uint64_t>(full.size(), b.length * size));
      if (tail) full.insert(full.end(), tail->begin(), tail->end());
      if (full.size() != b.length * size)
        throw Error(ErrorCode::DeviceError, "gathered " + std::to_string(full.size() / size) + " elements of '" +
                                                h->name() + "', expected " + std::to_string(b.length));
      h->assign_bytes(std::move(full));
    } else if (b.kind == BufferKind::Filtered) {
      ByteVec full;
      for (const ByteVec& p : gathered[i].pieces) full.insert(full.end(), p.begin(), p.end());
      if (opts.gather == GatherMode::Parallel)
        rep.timing.host_post_ns += static_cast<double>(gathered[i].kept_bytes) / cost.host.bytes_per_ns;
      if (tail) full.insert(full.end(), tail->begin(), tail->end());
      h->assign_bytes(std::move(full));
    } else if (b.kind == BufferKind::Reduce) {
      const StageSpec* owner = nullptr;
      std::size_t ro = kNoIndex;
      for (const StageSpec& s : g.stages) {
        const std::size_t j = reduce_arg_of(s);
        if (j != kNoIndex && s.args[j].buffer_id() == h->id()) {
          owner = &s;
          ro = j;
        }
      }
      std::vector<ByteVec> partials = std::move(gathered[i].pieces);
      if (tail) partials.push_back(*tail);
      std::vector<ByteVec> scal(owner->args.size());
      for (std::size_t j = 0; j < owner->args.size(); ++j) {
        if (owner->args[j].role == ArgRole::Scalar) scal[j] = initial.at(owner->args[j].buffer_id());
      }
      const ByteVec init = reduce_initial(owner->args[ro], initial.at(h->id()));
      h->assign_bytes(combine_reduce_partials(*owner, ro, init, partials, scal));
      rep.timing.host_post_ns +=
          cost.host.ns_per_invocation * static_cast<double>(partials.size()) * static_cast<double>(b.length);
    }
    rep.fetched_lengths[h->id()] = h->size();
  }
  return rep;
}

ExecReport run_subpipeline_chain(std::span<const StageList> subs, std::span<const BufferHandle> fetch,
                                 std::uint64_t length, Device& device, const ExecOptions& opts) {
  ExecReport total;
  total.rounds = 0;
  total.subpipelines = subs.size();
  auto referenced = [](const StageList& sub, BufferId id) {
    for (const StageSpec& s : sub) {
      for (const ArgSpec& a : s.args) {
        if (a.buffer && a.buffer_id() == id) return true;
      }
      for (const BufferHandle& ov : s.overlap) {
        if (ov && ov->id() == id) return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < subs.size(); ++i) {
    const StageList& sub = subs[i];
    std::vector<BufferHandle> f;
    auto add = [&](const BufferHandle& h) {
      if (std::none_of(f.begin(), f.end(), [&](const BufferHandle& x) { return x->id() == h->id(); })) f.push_back(h);
    };
    for (const BufferHandle& h : fetch) {
      if (referenced(sub, h->id())) add(h);
    }
    for (const StageSpec& s : sub) {
      for (const ArgSpec& a : s.args) {
        if (a.role != ArgRole::Output && a.role != ArgRole::InOut && a.role != ArgRole::ReduceOut) continue;
        for (std::size_t later = i + 1; later < subs.size(); ++later) {
          if (referenced(subs[later], a.buffer_id())) add(a.buffer);
        }
      }
    }

    std::uint64_t n = length;
    if (i > 0) {
      for (const ArgSpec& a : sub.front().args) {
        if (a.role == ArgRole::Input || a.role == ArgRole::InOut) {
          n = a.buffer->size();
          break;
        }
      }
    }
    ExecReport r = execute_pipeline(sub, f, n, device, opts);
    total.timing += r.timing;
    total.rounds += r.rounds;
    total.cpu_leftover += r.cpu_leftover;
    total.device_kernel_ns += r.device_kernel_ns;
    total.leftover_host_ns += r.leftover_host_ns;
    for (const BufferHandle& h : fetch) {
      auto it = r.fetched_lengths.find(h->id());
      if (it != r.fetched_lengths.end()) total.fetched_lengths[h->id()] = it->second;
    }
  }
  return total;
}

}  // namespace pimflow
