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

#include <pimflow/pipeline.hpp>

#include <pimflow/codegen.hpp>
#include <pimflow/hostrt.hpp>

#include <algorithm>

namespace pimflow {

std::string_view to_string(GatherMode mode) { return mode == GatherMode::Serial ? "serial" : "parallel"; }

namespace {

bool produced(const StageList& stages, BufferId id) {
  for (const StageSpec& s : stages) {
    for (BufferId w : written_buffers(s)) {
      if (w == id) return true;
    }
  }
  return false;
}

void add_fetch(std::vector<BufferHandle>& fetch, const StageList& stages, const BufferHandle& buffer, bool executed) {
  if (executed) throw Error(ErrorCode::AlreadyExecuted, "fetch after execute");
  if (!buffer || !produced(stages, buffer->id()))
    throw Error(ErrorCode::UnknownBuffer, "buffer '" + (buffer ? buffer->name() : std::string("null")) +
                                              "' is not written by any stage");
  if (std::none_of(fetch.begin(), fetch.end(), [&](const BufferHandle& h) { return h->id() == buffer->id(); }))
    fetch.push_back(buffer);
}

std::uint64_t lookup_length(const std::map<BufferId, std::uint64_t>& lengths, const BufferHandle& buffer,
                            bool executed) {
  if (!executed) throw Error(ErrorCode::NotExecuted, "get_length before execute");
  auto it = buffer ? lengths.find(buffer->id()) : lengths.end();
  if (it == lengths.end()) throw Error(ErrorCode::NotFetched, "buffer was not fetched");
  return it->second;
}

}  // namespace

Pipeline::Pipeline(std::uint64_t length) : length_(length) {}

void Pipeline::add_stage(StageSpec stage) {
  if (executed_) throw Error(ErrorCode::AlreadyExecuted, "add_stage after execute");
  validate_stage_args(stage.kind, stage.args, stage.kernel);
  StageList next = stages_;
  next.push_back(std::move(stage));
  next.back().index = next.size() - 1;
  // Chain and length rules; t1 throws without touching this pipeline.
  t1_extract(next, {}, length_);
  stages_ = std::move(next);
}

void Pipeline::fetch(const BufferHandle& buffer) { add_fetch(fetch_, stages_, buffer, executed_); }

ExecReport Pipeline::execute(Device& device, const ExecOptions& opts) {
  if (executed_) throw Error(ErrorCode::AlreadyExecuted, "a pipeline executes once");
  ExecReport r = execute_pipeline(stages_, fetch_, length_, device, opts);
  r.timing.overhead_ns += device.cost().fixed_alloc_overhead_ns;
  lengths_ = r.fetched_lengths;
  executed_ = true;
  return r;
}

std::uint64_t Pipeline::get_length(const BufferHandle& buffer) const {
  return lookup_length(lengths_, buffer, executed_);
}

bool Pipeline::is_fetched(BufferId id) const {
  return std::any_of(fetch_.begin(), fetch_.end(), [&](const BufferHandle& h) { return h->id() == id; });
}

std::vector<StageList> split_into_subpipelines(std::span<const StageSpec> stages) {
  std::vector<StageList> out;
  std::size_t start = 0;
  for (std::size_t c = 0; c < stages.size(); ++c) {
    for (;;) {
      std::size_t cut = kNoIndex;
      for (std::size_t p = start; p < c; ++p) {
        if (needs_cut(stages[p], stages[c])) cut = p;
      }
      if (cut == kNoIndex) break;
      out.emplace_back(stages.begin() + static_cast<std::ptrdiff_t>(start),
                       stages.begin() + static_cast<std::ptrdiff_t>(cut + 1));
      start = cut + 1;
    }
  }
  if (start < stages.size() || out.empty())
    out.emplace_back(stages.begin() + static_cast<std::ptrdiff_t>(start), stages.end());
  for (StageList& sub : out) {
    for (std::size_t i = 0; i < sub.size(); ++i) sub[i].index = i;
  }
  return out;
}

PipelineFull::PipelineFull(std::uint64_t length) : length_(length) {}

void PipelineFull::add_stage(StageSpec stage) {
  if (executed_) throw Error(ErrorCode::AlreadyExecuted, "add_stage after execute");
  validate_stage_args(stage.kind, stage.args, stage.kernel);
  stage.index = stages_.size();
  stages_.push_back(std::move(stage));
}

void PipelineFull::fetch(const BufferHandle& buffer) { add_fetch(fetch_, stages_, buffer, executed_); }

ExecReport PipelineFull::execute(Device& device, const ExecOptions& opts) {
  if (executed_) throw Error(ErrorCode::AlreadyExecuted, "a pipeline executes once");
  const std::vector<StageList> subs = split_into_subpipelines(stages_);
  ExecReport r = run_subpipeline_chain(subs, fetch_, length_, device, opts);
  r.timing.overhead_ns += device.cost().fixed_alloc_overhead_ns;
  lengths_ = r.fetched_lengths;
  executed_ = true;
  return r;
}

std::uint64_t PipelineFull::get_length(const BufferHandle& buffer) const {
  return lookup_length(lengths_, buffer, executed_);
}

}  // namespace pimflow
