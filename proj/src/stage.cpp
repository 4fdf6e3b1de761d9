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

#include <algorithm>
#include <set>

namespace pimflow {

bool StageSpec::has_overlap() const {
  return std::any_of(overlap.begin(), overlap.end(), [](const BufferHandle& b) { return b != nullptr; });
}

PatternParams StageSpec::params() const {
  return PatternParams{window.value_or(1), group.value_or(1), has_overlap()};
}

const ArgSpec* StageSpec::output_arg() const {
  for (const ArgSpec& a : args) {
    if (a.role == ArgRole::Output || a.role == ArgRole::InOut || a.role == ArgRole::ReduceOut) return &a;
  }
  return nullptr;
}

StageSpec make_stage(PatternKind kind, KernelSpec kernel, std::vector<ArgSpec> args, StageOptions opts) {
  validate_stage_args(kind, args, kernel);

  if (has_window(kind)) {
    if (!opts.window || *opts.window == 0) throw RoleViolation(std::nullopt, "window stages need a window extent >= 1");
  } else if (opts.window) {
    throw RoleViolation(std::nullopt, std::string(to_string(kind)) + " stages take no window extent");
  }
  if (has_group(kind)) {
    if (!opts.group || *opts.group == 0) throw RoleViolation(std::nullopt, "group stages need a group size >= 1");
  } else if (opts.group) {
    throw RoleViolation(std::nullopt, std::string(to_string(kind)) + " stages take no group size");
  }

  StageSpec s;
  s.kind = kind;
  s.kernel = std::move(kernel);
  s.window = opts.window;
  s.group = opts.group;
  s.overlap.assign(args.size(), nullptr);

  const std::uint32_t la = pimflow::lookahead(kind, opts.window.value_or(1));
  if (!opts.overlap.empty()) {
    if (!has_window(kind)) throw RoleViolation(std::nullopt, "overlap vectors only apply to window stages");
    std::size_t next = 0;
    for (std::size_t j = 0; j < args.size(); ++j) {
      if (args[j].role != ArgRole::Input) continue;
      if (next >= opts.overlap.size())
        throw Error(ErrorCode::MissingOverlapVector, "one overlap vector per input argument is required");
      const BufferHandle& ov = opts.overlap[next++];
      if (!ov) throw Error(ErrorCode::MissingOverlapVector, "null overlap vector for argument " + std::to_string(j));
      if (!(ov->elem() == args[j].elem)) throw RoleViolation(j, "overlap vector type differs from the input");
      if (ov->size() != la)
        throw Error(ErrorCode::MissingOverlapVector, "argument " + std::to_string(j) + " needs exactly " +
                                                         std::to_string(la) + " overlap elements, got " +
                                                         std::to_string(ov->size()));
      s.overlap[j] = ov;
    }
    if (next != opts.overlap.size()) throw RoleViolation(std::nullopt, "more overlap vectors than input arguments");
  } else if (has_window(kind) && has_group(kind)) {
    throw Error(ErrorCode::MissingOverlapVector, "window+group stages read past their last group");
  }

  s.args = std::move(args);
  return s;
}

std::vector<BufferId> written_buffers(const StageSpec& s) {
  std::vector<BufferId> out;
  for (const ArgSpec& a : s.args) {
    if (a.role == ArgRole::Output || a.role == ArgRole::InOut || a.role == ArgRole::ReduceOut)
      out.push_back(a.buffer_id());
  }
  return out;
}

bool needs_cut(const StageSpec& producer, const StageSpec& consumer) {
  const std::vector<BufferId> written = written_buffers(producer);
  auto produced = [&](BufferId id) { return std::find(written.begin(), written.end(), id) != written.end(); };

  for (const ArgSpec& a : consumer.args) {
    if (!a.buffer || !produced(a.buffer_id())) continue;
    if (a.role == ArgRole::Scalar) return true;
    if (is_reduce(producer.kind)) return true;
    if (!has_filter(producer.kind)) continue;
    // A filtered vector may only continue into a pure filter or reduce that
    // reads nothing else per element.
    const bool pure = consumer.kind == PatternKind::Filter || consumer.kind == PatternKind::Reduce;
    if (!pure || (a.role != ArgRole::Input && a.role != ArgRole::InOut)) return true;
    for (const ArgSpec& other : consumer.args) {
      if ((other.role == ArgRole::Input || other.role == ArgRole::InOut) && other.buffer_id() != a.buffer_id())
        return true;
    }
  }
  return false;
}

ByteVec reduce_initial(const ArgSpec& arg, const ByteVec& contents) {
  const std::size_t want = std::size_t{arg.reduce_width} * arg.elem.size_bytes;
  if (contents.empty()) return ByteVec(want);
  if (contents.size() != want)
    throw Error(ErrorCode::LengthMismatch, "reduce_out buffer holds " +
                                               std::to_string(contents.size() / arg.elem.size_bytes) +
                                               " elements, width is " + std::to_string(arg.reduce_width));
  return contents;
}

HostState snapshot(std::span<const StageSpec> stages) {
  HostState st;
  for (const StageSpec& s : stages) {
    for (const ArgSpec& a : s.args) {
      if (a.buffer) st.emplace(a.buffer_id(), ByteVec(a.buffer->bytes().begin(), a.buffer->bytes().end()));
    }
    for (const BufferHandle& ov : s.overlap) {
      if (ov) st.emplace(ov->id(), ByteVec(ov->bytes().begin(), ov->bytes().end()));
    }
  }
  return st;
}

void run_host_stages(std::span<const StageSpec> stages, HostState& state) {
  for (const StageSpec& s : stages) {
    std::vector<ByteVec> values(s.args.size());
    std::vector<ByteVec> overlap(s.args.size());
    for (std::size_t j = 0; j < s.args.size(); ++j) {
      const ArgSpec& a = s.args[j];
      if (!a.buffer) continue;
      if (a.role == ArgRole::Output) continue;
      const ByteVec& cur = state.at(a.buffer_id());
      values[j] = a.role == ArgRole::ReduceOut ? reduce_initial(a, cur) : cur;
      if (s.overlap[j]) overlap[j] = state.at(s.overlap[j]->id());
    }
    std::vector<ByteVec> out = apply_pattern_host(s.kind, s.kernel, s.args, s.params(), values, overlap);
    for (std::size_t j = 0; j < s.args.size(); ++j) {
      const ArgRole r = s.args[j].role;
      if (r == ArgRole::Output || r == ArgRole::InOut || r == ArgRole::ReduceOut)
        state[s.args[j].buffer_id()] = std::move(out[j]);
    }
  }
}

}  // namespace pimflow
