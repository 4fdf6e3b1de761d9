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

#include <pimflow/codegen.hpp>

#include <algorithm>

namespace pimflow {

namespace {

struct VecInfo {
  std::uint64_t divisor = 1;
  std::uint64_t length = 0;
};

std::string signature_of(const StageSpec& s) {
  std::string out;
  for (const ArgSpec& a : s.args) {
    if (!out.empty()) out += ", ";
    out += to_string(a.role);
    out += ' ';
    out += a.elem.name;
    if (a.role == ArgRole::ReduceOut) out += "[" + std::to_string(a.reduce_width) + "]";
  }
  return out;
}

class Extractor {
 public:
  Extractor(GlobalLists& out, std::uint64_t length) : out_(out), length_(length) {}

  std::size_t intern(const BufferHandle& h, BufferKind kind) {
    const std::size_t at = out_.index_of(h->id());
    if (at != kNoIndex) {
      BufferDesc& d = out_.model.buffers[at];
      const bool both_vec = d.is_vector() && (kind == BufferKind::Vector || kind == BufferKind::Filtered);
      if (!both_vec && d.kind != kind)
        throw RoleViolation(std::nullopt, "buffer '" + h->name() + "' is used both as " +
                                              std::string(to_string(d.kind)) + " and " + std::string(to_string(kind)));
      if (kind == BufferKind::Filtered) d.kind = kind;
      return at;
    }
    BufferDesc d;
    d.elem = h->elem();
    d.kind = kind;
    d.length = h->size();
    out_.model.buffers.push_back(d);
    out_.handles.push_back(h);
    out_.uploaded.push_back(false);
    out_.fetched.push_back(false);
    return out_.model.buffers.size() - 1;
  }

  void stage(std::size_t si, const StageSpec& s) {
    validate_stage_args(s.kind, s.args, s.kernel);
    if (s.overlap.size() != s.args.size() && !s.overlap.empty())
      throw RoleViolation(std::nullopt, "overlap list must align with the argument list");
    StageDesc sd;
    sd.kind = s.kind;
    sd.window = s.window.value_or(1);
    sd.group = s.group_size();
    sd.lookahead = s.lookahead();

    // Input coordinate space: from produced reads, else the pipeline domain.
    std::optional<VecInfo> in;
    bool compact = false;
    for (const ArgSpec& a : s.args) {
      if (a.role != ArgRole::Input && a.role != ArgRole::InOut) continue;
      auto it = produced_.find(a.buffer_id());
      if (it == produced_.end()) continue;
      const std::size_t bi = out_.index_of(a.buffer_id());
      if (out_.model.buffers[bi].kind == BufferKind::Filtered) compact = true;
      if (in && (in->divisor != it->second.divisor || in->length != it->second.length))
        throw Error(ErrorCode::LengthMismatch, "stage " + std::to_string(si) + " reads vectors of different lengths (" +
                                                   std::to_string(in->length) + " vs " +
                                                   std::to_string(it->second.length) + ")");
      in = it->second;
    }
    if (!in) in = VecInfo{1, length_};
    sd.compact_input = compact;

    for (std::size_t j = 0; j < s.args.size(); ++j) {
      const ArgSpec& a = s.args[j];
      StageArgDesc ad;
      ad.role = a.role;
      switch (a.role) {
        case ArgRole::Input:
        case ArgRole::InOut: {
          const bool host = !produced_.count(a.buffer_id());
          ad.buffer = intern(a.buffer, BufferKind::Vector);
          if (host) {
            if (a.buffer->size() != in->length)
              throw Error(ErrorCode::LengthMismatch, "stage " + std::to_string(si) + " argument " + std::to_string(j) +
                                                         ": buffer holds " + std::to_string(a.buffer->size()) +
                                                         " elements, expected " + std::to_string(in->length));
            bind_divisor(ad.buffer, in->divisor, si);
            out_.uploaded[ad.buffer] = true;
          }
          if (s.overlap.size() == s.args.size() && s.overlap[j]) {
            ad.overlap = intern(s.overlap[j], BufferKind::Overlap);
          }
          break;
        }
        case ArgRole::Scalar:
          if (produced_.count(a.buffer_id()))
            throw RoleViolation(j, "a buffer produced on the device cannot be broadcast as a scalar here");
          ad.buffer = intern(a.buffer, BufferKind::Scalar);
          break;
        case ArgRole::ReduceOut: {
          ad.buffer = intern(a.buffer, BufferKind::Reduce);
          ByteVec contents(a.buffer->bytes().begin(), a.buffer->bytes().end());
          reduce_initial(a, contents);
          out_.model.buffers[ad.buffer].length = a.reduce_width;
          break;
        }
        case ArgRole::Output:
        case ArgRole::Combine:
          break;
      }
      sd.args.push_back(ad);
    }

    // Output.
    for (std::size_t j = 0; j < s.args.size(); ++j) {
      const ArgSpec& a = s.args[j];
      if (a.role != ArgRole::Output && a.role != ArgRole::InOut) continue;
      const OutputLength ol = output_length(s.kind, in->length, sd.window, sd.group, s.has_overlap());
      const BufferKind kind = has_filter(s.kind) ? BufferKind::Filtered : BufferKind::Vector;
      const std::size_t bi = intern(a.buffer, kind);
      const std::uint64_t div = in->divisor * sd.group;
      bind_divisor(bi, div, si);
      out_.model.buffers[bi].length = ol.elements;
      produced_[a.buffer_id()] = VecInfo{div, ol.elements};
      sd.args[j].buffer = bi;
    }
    for (const ArgSpec& a : s.args) {
      if (a.role == ArgRole::ReduceOut) produced_[a.buffer_id()] = VecInfo{0, a.reduce_width};
    }

    KernelRecord kr;
    kr.kernel_id = s.kernel.id.empty() ? "stage" + std::to_string(si) : s.kernel.id;
    if (kr.kernel_id.find_first_of(" \t\r\n") != std::string::npos)
      throw RoleViolation(std::nullopt, "kernel id '" + kr.kernel_id + "' contains whitespace");
    kr.signature = signature_of(s);
    kr.stage = si;
    out_.kernels.push_back(kr);
    out_.model.stages.push_back(std::move(sd));
  }

 private:
  void bind_divisor(std::size_t bi, std::uint64_t div, std::size_t si) {
    auto it = divisor_.find(bi);
    if (it != divisor_.end() && it->second != div)
      throw Error(ErrorCode::LengthMismatch, "stage " + std::to_string(si) + " indexes buffer '" +
                                                 out_.handles[bi]->name() + "' in a different domain");
    divisor_[bi] = div;
    out_.model.buffers[bi].divisor = div;
  }

  GlobalLists& out_;
  std::uint64_t length_;
  std::map<BufferId, VecInfo> produced_;
  std::map<std::size_t, std::uint64_t> divisor_;
};

void compute_halos(GlobalLists& g) {
  LayoutModel& m = g.model;
  const std::size_t n = m.stages.size();
  // For every read: which stage wrote the version it sees (kNoIndex: host).
  struct Read {
    std::size_t writer;
    std::size_t reader;
    std::size_t buffer;
  };
  std::vector<Read> reads;
  std::map<std::size_t, std::size_t> last_writer;
  for (std::size_t s = 0; s < n; ++s) {
    for (const StageArgDesc& a : m.stages[s].args) {
      if (a.role != ArgRole::Input && a.role != ArgRole::InOut) continue;
      auto it = last_writer.find(a.buffer);
      reads.push_back({it == last_writer.end() ? kNoIndex : it->second, s, a.buffer});
    }
    for (const StageArgDesc& a : m.stages[s].args) {
      if (a.role == ArgRole::Output || a.role == ArgRole::InOut || a.role == ArgRole::ReduceOut)
        last_writer[a.buffer] = s;
    }
  }
  auto need = [&](std::size_t r) -> std::uint64_t {
    const StageDesc& sd = m.stages[r];
    if (sd.compact_input) return 0;
    return sd.halo * sd.group + sd.lookahead;
  };
  for (std::size_t s = n; s-- > 0;) {
    std::uint64_t h = 0;
    for (const Read& rd : reads) {
      if (rd.writer == s) h = std::max(h, need(rd.reader));
    }
    if (is_reduce(m.stages[s].kind) || has_filter(m.stages[s].kind)) h = 0;
    m.stages[s].halo = h;
  }
  for (const Read& rd : reads) {
    BufferDesc& b = m.buffers[rd.buffer];
    if (b.is_vector()) b.halo = std::max(b.halo, need(rd.reader));
  }
}

}  // namespace

std::size_t GlobalLists::index_of(BufferId id) const {
  for (std::size_t i = 0; i < handles.size(); ++i) {
    if (handles[i]->id() == id) return i;
  }
  return kNoIndex;
}

GlobalLists t1_extract(std::span<const StageSpec> stages, std::span<const BufferHandle> fetch, std::uint64_t length) {
  GlobalLists g;
  g.stages.assign(stages.begin(), stages.end());
  g.model.total_length = length;
  for (std::size_t c = 0; c < stages.size(); ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      if (!needs_cut(stages[p], stages[c])) continue;
      const std::vector<BufferId> w = written_buffers(stages[p]);
      BufferId hit = 0;
      for (const ArgSpec& a : stages[c].args) {
        if (a.buffer && std::find(w.begin(), w.end(), a.buffer_id()) != w.end()) hit = a.buffer_id();
      }
      throw InvalidChain(hit, p, std::string(to_string(stages[c].kind)));
    }
  }
  Extractor ex(g, length);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    g.stages[s].index = s;
    ex.stage(s, stages[s]);
  }
  compute_halos(g);
  for (const BufferHandle& f : fetch) {
    const std::size_t i = g.index_of(f->id());
    if (i == kNoIndex) throw Error(ErrorCode::UnknownBuffer, "fetched buffer is not part of the pipeline");
    g.fetched[i] = true;
  }
  return g;
}

GlobalLists t1_extract(const Pipeline& p) { return t1_extract(p.stages(), p.fetch_set(), p.length()); }

LayoutPlan t2_memory_params(const GlobalLists& lists, const DeviceConfig& device, double cpu_ratio) {
  PlanTarget t;
  t.n_dpus = device.n_dpus;
  t.tasklets = device.tasklets;
  t.mram_bytes = device.mram_bytes;
  t.wram_budget = device.wram_budget_per_tasklet();
  if (lists.model.stages.empty()) {
    LayoutPlan p;
    p.total_length = lists.model.total_length;
    p.cpu_leftover = p.total_length;
    p.n_dpus = t.n_dpus;
    p.tasklets = t.tasklets;
    p.wram_budget = t.wram_budget;
    return p;
  }
  return plan_layout(lists.model, t, cpu_ratio);
}

LeftoverTask t3_cpu_leftover(const LayoutPlan& plan, const GlobalLists& lists) {
  LeftoverTask t;
  t.begin = plan.device_length();
  t.end = lists.model.total_length;
  return t;
}

std::vector<Directive> t4_postprocessing(const GlobalLists& lists) {
  std::vector<Directive> out;
  for (std::size_t i = 0; i < lists.model.buffers.size(); ++i) {
    if (!lists.fetched[i]) continue;
    const BufferKind k = lists.model.buffers[i].kind;
    if (k == BufferKind::Filtered) out.push_back({Directive::Kind::Compact, i});
    if (k == BufferKind::Reduce) out.push_back({Directive::Kind::Combine, i});
  }
  return out;
}

DeviceProgram build_program(const GlobalLists& lists, const LayoutPlan& plan, const std::vector<Directive>& directives,
                            const DeviceConfig& device, const CostModel& cost) {
  DeviceProgram dp;
  dp.tasklets = device.tasklets;
  dp.n_dpus = device.n_dpus;
  dp.wram_budget = plan.wram_budget;
  dp.mram_used = plan.mram.used_bytes;
  dp.total_length = plan.total_length;
  dp.per_dpu = plan.mram.elems_per_dpu_per_round;
  dp.per_round = plan.elements_per_round;
  dp.rounds = plan.nr_rounds;
  dp.leftover = plan.cpu_leftover;
  dp.quantum = plan.quantum;

  for (std::size_t i = 0; i < lists.model.buffers.size(); ++i) {
    const BufferDesc& b = lists.model.buffers[i];
    ProgramBuffer pb;
    pb.kind = b.kind;
    pb.elem = b.elem;
    pb.length = b.length;
    pb.divisor = b.divisor;
    pb.halo = b.halo;
    if (i < plan.mram.regions.size()) {
      pb.mram = plan.mram.regions[i].offset;
      pb.bytes = plan.mram.regions[i].bytes;
      pb.header = plan.mram.regions[i].header;
    }
    pb.upload = lists.uploaded[i];
    pb.fetch = lists.fetched[i];
    dp.buffers.push_back(pb);
  }

  for (std::size_t s = 0; s < lists.model.stages.size(); ++s) {
    const StageDesc& sd = lists.model.stages[s];
    const WramStagePlan& wp = plan.wram.at(s);
    const StageSpec& spec = lists.stages[s];
    ProgramStage ps;
    ps.kind = sd.kind;
    ps.kernel_id = lists.kernels[s].kernel_id;
    ps.signature = lists.kernels[s].signature;
    ps.window = sd.window;
    ps.group = sd.group;
    ps.lookahead = sd.lookahead;
    ps.block = wp.elems_per_block;
    ps.unit = wp.unit;
    ps.halo = sd.halo;
    ps.compact_input = sd.compact_input;
    ps.cycles = spec.kernel.cost_hint.value_or(cost.cycles_per_invocation_default);
    for (std::size_t j = 0; j < sd.args.size(); ++j) {
      const StageArgDesc& ad = sd.args[j];
      ProgramArg pa;
      pa.role = ad.role;
      pa.elem = spec.args[j].elem;
      pa.buffer = ad.buffer;
      pa.overlap = ad.overlap;
      pa.mram = ad.buffer == kNoIndex ? 0 : plan.mram.regions[ad.buffer].offset;
      pa.wram = wp.args[j].offset;
      pa.wram_bytes = wp.args[j].padded_bytes;
      pa.count = wp.args[j].count;
      ps.args.push_back(pa);
    }
    dp.stages.push_back(std::move(ps));
  }
  dp.directives = directives;
  return dp;
}

CompiledPipeline compile_pipeline(std::span<const StageSpec> stages, std::span<const BufferHandle> fetch,
                                  std::uint64_t length, const SystemConfig& cfg, double cpu_ratio) {
  CompiledPipeline c;
  c.lists = t1_extract(stages, fetch, length);
  c.plan = t2_memory_params(c.lists, cfg.device, cpu_ratio);
  c.leftover = t3_cpu_leftover(c.plan, c.lists);
  c.directives = t4_postprocessing(c.lists);
  c.program = build_program(c.lists, c.plan, c.directives, cfg.device, cfg.cost);
  return c;
}

}  // namespace pimflow
