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
 * @file hostrt.hpp
 * @brief Host side of an execution: broadcast, per-round uploads, kernel
 *        launches, gathers in the selected strategy, the host leftover task
 *        and the post-processing directives.
 */

#pragma once

#include <pimflow/codegen.hpp>
#include <pimflow/exec.hpp>
#include <pimflow/simdev.hpp>

#include <span>
#include <vector>

namespace pimflow {

/// Concatenates the first counts[i] elements of every region, in order.
/// A count beyond its region is a CountOverflow.
ByteVec compact_filter_output(std::span<const ByteVec> regions, std::span<const std::uint64_t> counts,
                              std::uint32_t elem_size);

/// initial (+) fold(partials), folding pairwise in stride-doubling order.
/// Uses the stage's Combine argument, or its kernel when there is none.
ByteVec combine_reduce_partials(const StageSpec& stage, std::size_t reduce_arg, const ByteVec& initial,
                                std::span<const ByteVec> partials, std::span<const ByteVec> scalar_values = {});

/// Runs the stages as one device program plus host leftover; writes the
/// fetched buffers back to their handles. Charges the codegen overhead only.
ExecReport execute_pipeline(std::span<const StageSpec> stages, std::span<const BufferHandle> fetch,
                            std::uint64_t length, Device& device, const ExecOptions& opts);

/// Runs sub-pipelines back to back with host round-trips in between.
/// Each sub gets the fetched buffers it produces plus whatever later subs
/// read. Codegen overhead is charged per sub.
ExecReport run_subpipeline_chain(std::span<const StageList> subs, std::span<const BufferHandle> fetch,
                                 std::uint64_t length, Device& device, const ExecOptions& opts);

}  // namespace pimflow
