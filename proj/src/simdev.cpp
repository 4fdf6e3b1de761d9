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

#include <pimflow/simdev.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <future>

namespace pimflow {

std::string_view to_string(TransferMode mode) {
  switch (mode) {
    case TransferMode::Serial: return "serial";
    case TransferMode::Parallel: return "parallel";
    case TransferMode::Broadcast: return "broadcast";
  }
  return "?";
}

void ByteStore::declare(std::uint64_t offset, std::uint64_t size) {
  if (size == 0) return;
  if (offset + size > bytes_.size())
    throw Error(ErrorCode::OutOfMram, "region [" + std::to_string(offset) + ", " + std::to_string(offset + size) +
                                          ") exceeds the store");
  auto it = std::lower_bound(regions_.begin(), regions_.end(), std::make_pair(offset, std::uint64_t{0}));
  regions_.insert(it, {offset, offset + size});
}

void ByteStore::check(std::uint64_t offset, std::uint64_t size) const {
  if (size == 0) return;
  auto it = std::upper_bound(regions_.begin(), regions_.end(), std::make_pair(offset, ~std::uint64_t{0}));
  if (it == regions_.begin() || std::prev(it)->second < offset + size)
    throw Error(ErrorCode::MemoryViolation, "access [" + std::to_string(offset) + ", " + std::to_string(offset + size) +
                                                ") is outside every declared region");
}

std::span<std::byte> ByteStore::at(std::uint64_t offset, std::uint64_t size) {
  check(offset, size);
  return {bytes_.data() + offset, size};
}

std::span<const std::byte> ByteStore::at(std::uint64_t offset, std::uint64_t size) const {
  check(offset, size);
  return {bytes_.data() + offset, size};
}

double transfer_time(TransferMode mode, const CostModel& cost, std::span<const std::uint64_t> per_dpu_bytes) {
  std::uint64_t active = 0;
  std::uint64_t max_b = 0;
  double serial = 0;
  for (std::uint64_t b : per_dpu_bytes) {
    if (b == 0) continue;
    ++active;
    max_b = std::max(max_b, b);
    serial += cost.serial_xfer.latency_ns + static_cast<double>(b) / cost.serial_xfer.bytes_per_ns;
  }
  if (active == 0) return 0;
  switch (mode) {
    case TransferMode::Serial:
      return serial;
    case TransferMode::Parallel: {
      const std::uint64_t lanes = cost.parallel_xfer.lanes;
      const double waves = static_cast<double>((active + lanes - 1) / lanes);
      return cost.parallel_xfer.latency_ns + waves * static_cast<double>(max_b) / cost.parallel_xfer.bytes_per_ns;
    }
    case TransferMode::Broadcast:
      return cost.broadcast_xfer.latency_ns + static_cast<double>(max_b) / cost.broadcast_xfer.bytes_per_ns;
  }
  return 0;
}

double dma_chunk_time(const CostModel& cost, std::uint64_t bytes) {
  return cost.dma.latency_ns + static_cast<double>(bytes) / cost.dma.bytes_per_ns;
}

namespace {

std::uint64_t read_u64(std::span<const std::byte> s) {
  std::uint64_t v = 0;
  std::memcpy(&v, s.data(), sizeof v);
  return v;
}

class DpuExec {
 public:
  DpuExec(const DeviceProgram& dp, std::span<const StageSpec> stages, const SystemConfig& cfg, DpuState& st,
          std::uint32_t dpu, std::uint64_t round)
      : dp_(dp), stages_(stages), cfg_(cfg), st_(st), dpu_(dpu), round_(round) {}

  void run() {
    for (std::size_t s = 0; s < dp_.stages.size(); ++s) run_stage(s);
  }

  double time_ns() const {
    const double lanes = std::min<double>(dp_.tasklets, 11.0);
    return static_cast<double>(cycles_) * 1e9 / static_cast<double>(cfg_.device.freq_hz) / lanes + dma_ns_;
  }

  std::uint64_t invocations() const { return invocations_; }
  std::uint64_t chunks() const { return chunks_; }

 private:
  std::byte* wram(std::uint64_t off) { return st_.wram.data() + off; }

  void dma_read(unsigned tasklet, std::uint64_t mram, std::uint64_t wram_off, std::uint64_t bytes) {
    dma(tasklet, mram, wram_off, bytes, true);
  }
  void dma_write(unsigned tasklet, std::uint64_t wram_off, std::uint64_t mram, std::uint64_t bytes) {
    dma(tasklet, mram, wram_off, bytes, false);
  }

  void dma(unsigned tasklet, std::uint64_t mram, std::uint64_t wram_off, std::uint64_t bytes, bool to_wram) {
    if (bytes == 0) return;
    const DmaLimits& lim = cfg_.device.dma;
    if (mram % lim.align_bytes || wram_off % lim.align_bytes || bytes % lim.align_bytes)
      throw Error(ErrorCode::AlignmentViolation, "DMA of " + std::to_string(bytes) + " bytes at MRAM " +
                                                     std::to_string(mram) + " / WRAM " + std::to_string(wram_off) +
                                                     " is not 8-byte aligned");
    const std::uint64_t lo = std::uint64_t{tasklet} * dp_.wram_budget;
    if (wram_off < lo || wram_off + bytes > lo + dp_.wram_budget)
      throw Error(ErrorCode::OutOfWram, "DMA touches WRAM outside tasklet " + std::to_string(tasklet) + "'s budget");
    for (std::uint64_t done = 0; done < bytes;) {
      const std::uint64_t n = std::min<std::uint64_t>(lim.max_bytes, bytes - done);
      if (n < lim.min_bytes) throw Error(ErrorCode::AlignmentViolation, "DMA chunk below the minimum size");
      auto m = st_.mram.at(mram + done, n);
      if (to_wram) {
        std::memcpy(wram(wram_off + done), m.data(), n);
      } else {
        std::memcpy(m.data(), wram(wram_off + done), n);
      }
      dma_ns_ += dma_chunk_time(cfg_.cost, n);
      ++chunks_;
      done += n;
    }
  }

  void run_stage(std::size_t si);

  const DeviceProgram& dp_;
  std::span<const StageSpec> stages_;
  const SystemConfig& cfg_;
  DpuState& st_;
  std::uint32_t dpu_;
  std::uint64_t round_;
  std::uint64_t cycles_ = 0;
  std::uint64_t invocations_ = 0;
  std::uint64_t chunks_ = 0;
  double dma_ns_ = 0;
};

void DpuExec::run_stage(std::size_t si) {
  const ProgramStage& P = dp_.stages[si];
  const StageSpec& S = stages_[si];
  const std::uint64_t T = dp_.tasklets;
  const std::uint64_t B = dp_.wram_budget;
  const std::uint64_t k = dp_.per_dpu;
  const std::uint64_t c0 = round_ * dp_.per_round + std::uint64_t{dpu_} * k;
  const bool filter = has_filter(P.kind);
  const bool reduce = is_reduce(P.kind);
  const std::uint64_t G = P.group;
  const std::uint64_t la = P.lookahead;
  const std::uint64_t m = P.block;
  const std::size_t nargs = P.args.size();

  std::size_t in_arg = kNoIndex;
  std::size_t out_arg = kNoIndex;
  std::size_t red_arg = kNoIndex;
  for (std::size_t j = 0; j < nargs; ++j) {
    const ArgRole r = P.args[j].role;
    if ((r == ArgRole::Input || r == ArgRole::InOut) && in_arg == kNoIndex) in_arg = j;
    if (r == ArgRole::Output || r == ArgRole::InOut) out_arg = j;
    if (r == ArgRole::ReduceOut) red_arg = j;
  }
  const ProgramBuffer& inb = dp_.buffers.at(P.args.at(in_arg).buffer);
  const ProgramBuffer* outb = out_arg == kNoIndex ? nullptr : &dp_.buffers[P.args[out_arg].buffer];
  const std::uint64_t osize = outb ? outb->elem.size_bytes : 0;
  const bool inout_out = out_arg != kNoIndex && P.args[out_arg].role == ArgRole::InOut;

  // Invocation ranges per tasklet, local to this DPU's slice.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges(T);
  auto split = [&](std::uint64_t units, std::uint64_t unit_elems) {
    const std::uint64_t base = units / T;
    const std::uint64_t rem = units % T;
    for (std::uint64_t t = 0; t < T; ++t) {
      const std::uint64_t a = t * base + std::min(t, rem);
      const std::uint64_t b = a + base + (t < rem ? 1 : 0);
      ranges[t] = {a * unit_elems, b * unit_elems};
    }
  };
  std::uint64_t limit = 0;
  if (P.compact_input) {
    limit = read_u64(st_.mram.at(*inb.header, 8));
    dma_ns_ += dma_chunk_time(cfg_.cost, 8);
    ++chunks_;
    split((limit + P.unit - 1) / P.unit, P.unit);
  } else {
    const std::uint64_t d_out = outb ? outb->divisor : inb.divisor;
    const std::uint64_t ut = dp_.quantum / d_out;
    split(k / dp_.quantum, ut);
    ranges[T - 1].second += P.halo;
    const std::uint64_t base_out = c0 / d_out;
    const std::uint64_t len = outb ? outb->length : inb.length;
    limit = len > base_out ? len - base_out : 0;
  }
  for (auto& r : ranges) {
    r.first = std::min(r.first, limit);
    r.second = std::min(r.second, limit);
  }

  // Scalar contents, for the partial combiner.
  std::vector<ByteVec> scalar_values(nargs);
  for (std::size_t j = 0; j < nargs; ++j) {
    if (P.args[j].role != ArgRole::Scalar) continue;
    const ProgramBuffer& b = dp_.buffers[P.args[j].buffer];
    auto s = st_.mram.at(b.mram, b.bytes);
    scalar_values[j].assign(s.begin(), s.begin() + b.length * b.elem.size_bytes);
  }

  // Reduce partials start from the identity in every tasklet.
  if (reduce) {
    const ProgramArg& ra = P.args[red_arg];
    const ByteVec& id = S.args[red_arg].reduce_identity;
    for (std::uint64_t t = 0; t < T; ++t) {
      std::byte* p = wram(t * B + ra.wram);
      for (std::uint64_t e = 0; e < ra.count; ++e) {
        if (id.empty()) {
          std::memset(p + e * ra.elem.size_bytes, 0, ra.elem.size_bytes);
        } else {
          std::memcpy(p + e * ra.elem.size_bytes, id.data(), ra.elem.size_bytes);
        }
      }
    }
  }

  std::vector<FilterAppender> apps(T, FilterAppender(static_cast<std::uint32_t>(std::max<std::uint64_t>(osize, 1))));
  std::vector<std::uint64_t> out_base(T, 0);
  std::uint64_t folds = 0;

  for (std::uint64_t t = 0; t < T; ++t) {
    const std::uint64_t W0 = t * B;
    const auto [a, b] = ranges[t];
    if (outb) out_base[t] = outb->mram + a * osize;
    if (a >= b) continue;

    KernelArgs ka(nargs);
    for (std::size_t j = 0; j < nargs; ++j) {
      const ProgramArg& pa = P.args[j];
      auto& sl = ka.slot(j);
      sl.elem_size = pa.elem.size_bytes;
      if (pa.role == ArgRole::Scalar) {
        const ProgramBuffer& sb = dp_.buffers[pa.buffer];
        dma_read(static_cast<unsigned>(t), sb.mram, W0 + pa.wram, sb.bytes);
        sl.data = wram(W0 + pa.wram);
        sl.count = static_cast<std::uint32_t>(sb.length);
      } else if (pa.role == ArgRole::ReduceOut) {
        sl = {wram(W0 + pa.wram), static_cast<std::uint32_t>(pa.count), pa.elem.size_bytes, true};
      } else if (pa.role == ArgRole::Input && pa.overlap != kNoIndex) {
        const ProgramBuffer& ob = dp_.buffers[pa.overlap];
        dma_read(static_cast<unsigned>(t), ob.mram, W0 + pa.wram + pad8(pa.count * pa.elem.size_bytes), ob.bytes);
      }
    }

    std::byte* out_cache = out_arg == kNoIndex ? nullptr : wram(W0 + P.args[out_arg].wram);
    FilterAppender& app = apps[t];

    for (std::uint64_t i0 = a; i0 < b; i0 += m) {
      const std::uint64_t bm = std::min(m, b - i0);

      for (std::size_t j = 0; j < nargs; ++j) {
        const ProgramArg& pa = P.args[j];
        const std::uint64_t size = pa.elem.size_bytes;
        if (pa.role == ArgRole::Input) {
          const ProgramBuffer& buf = dp_.buffers[pa.buffer];
          const std::uint64_t start = P.compact_input ? i0 : i0 * G;
          const std::uint64_t cnt = P.compact_input ? bm : bm * G + la;
          dma_read(static_cast<unsigned>(t), buf.mram + start * size, W0 + pa.wram, pad8(cnt * size));
          if (pa.overlap != kNoIndex) {
            const std::uint64_t gbase = c0 / buf.divisor + start;
            const std::byte* ov = wram(W0 + pa.wram + pad8(pa.count * size));
            std::byte* cache = wram(W0 + pa.wram);
            for (std::uint64_t e = 0; e < cnt; ++e) {
              const std::uint64_t g = gbase + e;
              if (g >= buf.length && g - buf.length < la) std::memcpy(cache + e * size, ov + (g - buf.length) * size, size);
            }
          }
        } else if (pa.role == ArgRole::InOut) {
          const ProgramBuffer& buf = dp_.buffers[pa.buffer];
          dma_read(static_cast<unsigned>(t), buf.mram + i0 * size, W0 + pa.wram + (filter ? 8 : 0), pad8(bm * size));
        }
      }

      std::uint64_t kept = 0;
      const std::uint64_t carry = app.carry_bytes();
      for (std::uint64_t i = 0; i < bm; ++i) {
        for (std::size_t j = 0; j < nargs; ++j) {
          const ProgramArg& pa = P.args[j];
          if (pa.role != ArgRole::Input) continue;
          const std::uint64_t size = pa.elem.size_bytes;
          auto& sl = ka.slot(j);
          if (P.compact_input) {
            sl = {wram(W0 + pa.wram + i * size), 1, static_cast<std::uint32_t>(size), false};
          } else {
            sl = {wram(W0 + pa.wram + i * G * size), static_cast<std::uint32_t>(G + la), static_cast<std::uint32_t>(size),
                  false};
          }
        }
        std::byte* slot = nullptr;
        if (out_arg != kNoIndex) {
          if (inout_out) {
            slot = out_cache + (filter ? 8 : 0) + i * osize;
          } else {
            slot = filter ? out_cache + carry + kept * osize : out_cache + i * osize;
            std::memset(slot, 0, osize);
          }
          ka.slot(out_arg) = {slot, 1, static_cast<std::uint32_t>(osize), true};
        }
        if (S.kernel.apply) {
          S.kernel.apply(ka);
        } else if (!inout_out) {
          std::memcpy(slot, ka.slot(in_arg).data, osize);
        }
        if (filter) {
          ka.slot(out_arg).writable = false;
          const bool keep = S.kernel.predicate(ka);
          ka.slot(out_arg).writable = true;
          if (keep) {
            if (inout_out) std::memmove(out_cache + carry + kept * osize, slot, osize);
            ++kept;
          }
        }
      }
      invocations_ += bm;
      cycles_ += bm * P.cycles;
      folds += reduce ? bm : 0;

      if (out_arg != kNoIndex && !filter) {
        dma_write(static_cast<unsigned>(t), W0 + P.args[out_arg].wram, outb->mram + i0 * osize, pad8(bm * osize));
      } else if (filter) {
        const FilterWrite w = app.append(kept);
        dma_write(static_cast<unsigned>(t), W0 + P.args[out_arg].wram, out_base[t] + w.write_offset, w.write_bytes);
        std::memmove(out_cache, out_cache + FilterAppender::next_carry_source(w), w.valid_bytes % 8);
      }
    }
  }

  if (filter) {
    // Tasklet 0 pulls the later tasklets' prefixes behind its own.
    const ProgramArg& oa = P.args[out_arg];
    std::byte* cache0 = wram(oa.wram);
    FilterAppender& app0 = apps[0];
    for (std::uint64_t t = 1; t < T; ++t) {
      const std::uint64_t n = apps[t].valid_elements();
      for (std::uint64_t off = 0; off < n; off += m) {
        const std::uint64_t cnt = std::min(m, n - off);
        dma_read(0, out_base[t] + off * osize, oa.wram + 8, pad8(cnt * osize));
        std::memmove(cache0 + app0.carry_bytes(), cache0 + 8, cnt * osize);
        const FilterWrite w = app0.append(cnt);
        dma_write(0, oa.wram, out_base[0] + w.write_offset, w.write_bytes);
        std::memmove(cache0, cache0 + FilterAppender::next_carry_source(w), w.valid_bytes % 8);
        cycles_ += cnt;
      }
    }
    const std::uint64_t count = app0.valid_elements();
    std::memcpy(cache0, &count, 8);
    dma_write(0, oa.wram, *outb->header, 8);
  }

  if (reduce) {
    const ProgramArg& ra = P.args[red_arg];
    const ProgramBuffer& rb = dp_.buffers[ra.buffer];
    const std::uint64_t size = ra.elem.size_bytes;
    for (std::uint64_t step = 1; step < T; step <<= 1) {
      for (std::uint64_t t = 0; t + step < T; t += 2 * step) {
        std::byte* acc = wram(t * B + ra.wram);
        const std::byte* part = wram((t + step) * B + ra.wram);
        for (std::uint64_t e = 0; e < ra.count; ++e)
          combine_element(S.kernel, S.args, scalar_values, acc + e * size, part + e * size);
        cycles_ += ra.count * P.cycles;
      }
    }
    dma_write(0, ra.wram, rb.mram, pad8(ra.count * size));
    std::byte* scratch = wram(ra.wram);
    ByteVec keep(scratch, scratch + 8);
    std::memcpy(scratch, &folds, 8);
    dma_write(0, ra.wram, *rb.header, 8);
    std::memcpy(scratch, keep.data(), 8);
  }
}

}  // namespace

Device::Device(SystemConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.device.validate();
  cfg_.cost.validate();
}

void Device::load(const DeviceProgram& program, std::span<const StageSpec> stages) {
  if (program.stages.size() != stages.size()) throw Error(ErrorCode::DeviceError, "one kernel binding per stage expected");
  if (program.n_dpus != cfg_.device.n_dpus || program.tasklets != cfg_.device.tasklets)
    throw Error(ErrorCode::DeviceError, "program was generated for a different device geometry");
  if (program.wram_budget > cfg_.device.wram_budget_per_tasklet())
    throw Error(ErrorCode::OutOfWram, "program WRAM budget exceeds the device");
  if (program.mram_used > cfg_.device.mram_bytes)
    throw Error(ErrorCode::OutOfMram, "program needs " + std::to_string(program.mram_used) + " MRAM bytes per DPU");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::string id = stages[s].kernel.id.empty() ? "stage" + std::to_string(s) : stages[s].kernel.id;
    if (id != program.stages[s].kernel_id)
      throw Error(ErrorCode::DeviceError, "kernel '" + id + "' bound to stage " + std::to_string(s) + " expecting '" +
                                              program.stages[s].kernel_id + "'");
  }
  program_ = program;
  stages_.assign(stages.begin(), stages.end());
  dpus_.clear();
  dpus_.resize(program.n_dpus);
  std::uint64_t header_bytes = 0;
  for (const ProgramBuffer& b : program.buffers) {
    if (b.header) header_bytes = std::max(header_bytes, *b.header + 8);
  }
  for (DpuState& d : dpus_) {
    d.mram = ByteStore(program.mram_used);
    for (const ProgramBuffer& b : program.buffers) {
      d.mram.declare(b.mram, b.bytes);
      if (b.header) d.mram.declare(*b.header, 8);
    }
    d.wram.assign(std::uint64_t{program.tasklets} * program.wram_budget, std::byte{0});
  }
}

void Device::check_host_access(std::uint32_t dpu, std::uint64_t offset, std::uint64_t bytes) const {
  if (dpu >= dpus_.size()) throw Error(ErrorCode::DeviceError, "no DPU " + std::to_string(dpu));
  if (offset % 8 || bytes % 8)
    throw Error(ErrorCode::AlignmentViolation, "host transfer of " + std::to_string(bytes) + " bytes at " +
                                                   std::to_string(offset) + " is not 8-byte aligned");
  if (offset + bytes > cfg_.device.mram_bytes || offset + bytes > dpus_[dpu].mram.size())
    throw Error(ErrorCode::OutOfMram, "host transfer past the end of MRAM");
}

double Device::upload(TransferMode mode, std::span<const DpuPayload> payloads) {
  if (mode == TransferMode::Broadcast) throw Error(ErrorCode::DeviceError, "use broadcast() for replicated payloads");
  std::vector<std::uint64_t> per(dpus_.size(), 0);
  for (const DpuPayload& p : payloads) {
    check_host_access(p.dpu, p.mram_offset, p.bytes.size());
    auto dst = dpus_[p.dpu].mram.at(p.mram_offset, p.bytes.size());
    if (!p.bytes.empty()) std::memcpy(dst.data(), p.bytes.data(), p.bytes.size());
    per[p.dpu] += p.bytes.size();
  }
  return transfer_time(mode, cfg_.cost, per);
}

double Device::broadcast(std::uint64_t mram_offset, std::span<const std::byte> bytes) {
  for (std::uint32_t d = 0; d < dpus_.size(); ++d) {
    check_host_access(d, mram_offset, bytes.size());
    auto dst = dpus_[d].mram.at(mram_offset, bytes.size());
    if (!bytes.empty()) std::memcpy(dst.data(), bytes.data(), bytes.size());
  }
  const std::uint64_t b = bytes.size();
  return transfer_time(TransferMode::Broadcast, cfg_.cost, std::span<const std::uint64_t>(&b, 1));
}

double Device::run_round(std::uint64_t round) {
  if (round >= program_.rounds) throw Error(ErrorCode::DeviceError, "round " + std::to_string(round) + " out of range");
  const std::size_t n = dpus_.size();
  RoundStats stats;
  stats.dpu_ns.assign(n, 0);
  stats.invocations.assign(n, 0);
  stats.dma_chunks.assign(n, 0);

  auto one = [&](std::uint32_t d) {
    DpuExec ex(program_, stages_, cfg_, dpus_[d], d, round);
    ex.run();
    stats.dpu_ns[d] = ex.time_ns();
    stats.invocations[d] = ex.invocations();
    stats.dma_chunks[d] = ex.chunks();
  };

  if (parallel_sim_ && n > 1) {
    std::vector<std::future<void>> fs;
    fs.reserve(n);
    for (std::uint32_t d = 0; d < n; ++d) fs.push_back(std::async(std::launch::async, one, d));
    std::exception_ptr first;
    for (auto& f : fs) {
      try {
        f.get();
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
  } else {
    for (std::uint32_t d = 0; d < n; ++d) one(d);
  }
  stats.kernel_ns = n ? *std::max_element(stats.dpu_ns.begin(), stats.dpu_ns.end()) : 0;
  last_round_ = stats;
  return stats.kernel_ns;
}

Device::Gathered Device::download(TransferMode mode, std::span<const DpuRequest> requests) {
  if (mode == TransferMode::Broadcast) throw Error(ErrorCode::DeviceError, "broadcast is host-to-device only");
  Gathered g;
  std::vector<std::uint64_t> per(dpus_.size(), 0);
  for (const DpuRequest& r : requests) {
    check_host_access(r.dpu, r.mram_offset, r.bytes);
    auto src = dpus_[r.dpu].mram.at(r.mram_offset, r.bytes);
    g.data.emplace_back(src.begin(), src.end());
    per[r.dpu] += r.bytes;
  }
  g.time_ns = transfer_time(mode, cfg_.cost, per);
  return g;
}

}  // namespace pimflow
