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

#include <charconv>
#include <map>

namespace pimflow {

namespace {

std::string idx(std::size_t i) { return i == kNoIndex ? "-" : std::to_string(i); }

std::string opt(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : "-"; }

std::string_view to_string(Directive::Kind k) { return k == Directive::Kind::Compact ? "compact" : "combine"; }

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t lineno) : line_(line), lineno_(lineno) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      const std::size_t b = i;
      while (i < line.size() && line[i] != ' ') ++i;
      if (i > b) words_.push_back(line.substr(b, i - b));
    }
    for (std::size_t w = 0; w < words_.size(); ++w) {
      const auto eq = words_[w].find('=');
      if (eq != std::string_view::npos) kv_[std::string(words_[w].substr(0, eq))] = words_[w].substr(eq + 1);
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno_) + ": " + what + " in '" + std::string(line_) + "'");
  }

  std::string_view word(std::size_t i) const {
    if (i >= words_.size()) fail("missing field " + std::to_string(i));
    return words_[i];
  }

  std::uint64_t number(std::string_view s) const {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail("bad number '" + std::string(s) + "'");
    return v;
  }

  std::string_view text(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) fail("missing key '" + key + "'");
    return it->second;
  }
  std::uint64_t num(const std::string& key) const { return number(text(key)); }
  std::size_t index(const std::string& key) const {
    const std::string_view t = text(key);
    return t == "-" ? kNoIndex : static_cast<std::size_t>(number(t));
  }
  std::optional<std::uint64_t> optional(const std::string& key) const {
    const std::string_view t = text(key);
    if (t == "-") return std::nullopt;
    return number(t);
  }
  bool flag(const std::string& key) const {
    const std::uint64_t v = num(key);
    if (v > 1) fail("flag '" + key + "' must be 0 or 1");
    return v == 1;
  }

 private:
  std::string_view line_;
  std::size_t lineno_;
  std::vector<std::string_view> words_;
  std::map<std::string, std::string_view> kv_;
};

template <typename F>
auto guarded(const LineParser& lp, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    lp.fail(e.what());
  }
}

}  // namespace

std::string emit_program_text(const DeviceProgram& dp) {
  std::string o;
  auto line = [&o](const std::string& s) {
    o += s;
    o += '\n';
  };
  line("DPU-PROGRAM v1");
  line("TASKLETS " + std::to_string(dp.tasklets));
  line("DPUS " + std::to_string(dp.n_dpus));
  line("WRAM budget=" + std::to_string(dp.wram_budget));
  line("MRAM used=" + std::to_string(dp.mram_used));
  line("ROUNDS total=" + std::to_string(dp.total_length) + " per_dpu=" + std::to_string(dp.per_dpu) +
       " per_round=" + std::to_string(dp.per_round) + " count=" + std::to_string(dp.rounds) +
       " leftover=" + std::to_string(dp.leftover) + " quantum=" + std::to_string(dp.quantum));
  for (std::size_t i = 0; i < dp.buffers.size(); ++i) {
    const ProgramBuffer& b = dp.buffers[i];
    line("BUFFER " + std::to_string(i) + " kind=" + std::string(to_string(b.kind)) + " type=" + b.elem.name +
         " size=" + std::to_string(b.elem.size_bytes) + " length=" + std::to_string(b.length) +
         " divisor=" + std::to_string(b.divisor) + " halo=" + std::to_string(b.halo) + " mram=" + std::to_string(b.mram) +
         " bytes=" + std::to_string(b.bytes) + " header=" + opt(b.header) + " upload=" + (b.upload ? "1" : "0") +
         " fetch=" + (b.fetch ? "1" : "0"));
  }
  for (std::size_t s = 0; s < dp.stages.size(); ++s) {
    const ProgramStage& st = dp.stages[s];
    line("STAGE " + std::to_string(s) + " KIND " + std::string(to_string(st.kind)) + " KERNEL " + st.kernel_id);
    line("SIGNATURE " + st.signature);
    line("PARAMS window=" + std::to_string(st.window) + " group=" + std::to_string(st.group) +
         " lookahead=" + std::to_string(st.lookahead) + " block=" + std::to_string(st.block) +
         " unit=" + std::to_string(st.unit) + " halo=" + std::to_string(st.halo) +
         " input=" + (st.compact_input ? "compact" : "dense") + " cycles=" + std::to_string(st.cycles));
    for (std::size_t j = 0; j < st.args.size(); ++j) {
      const ProgramArg& a = st.args[j];
      line("ARG " + std::to_string(j) + " role=" + std::string(to_string(a.role)) + " type=" + a.elem.name +
           " size=" + std::to_string(a.elem.size_bytes) + " mram=" + std::to_string(a.mram) +
           " wram=" + std::to_string(a.wram) + " count=" + std::to_string(a.count));
      line("BIND " + std::to_string(j) + " buf=" + idx(a.buffer) + " overlap=" + idx(a.overlap) +
           " wram_bytes=" + std::to_string(a.wram_bytes));
    }
  }
  for (const Directive& d : dp.directives) {
    line("DIRECTIVE " + std::string(to_string(d.kind)) + " buf=" + std::to_string(d.buffer));
  }
  line("END");
  return o;
}

DeviceProgram parse_program_text(std::string_view text) {
  DeviceProgram dp;
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw Error(ErrorCode::ParseError, "program text must end with a newline");
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty() || lines.front() != "DPU-PROGRAM v1")
    throw Error(ErrorCode::ParseError, "missing 'DPU-PROGRAM v1' header");

  bool ended = false;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const std::string_view ln = lines[n];
    LineParser lp(ln, n + 1);
    if (ended) lp.fail("content after END");
    const std::string_view tag = lp.word(0);
    auto expect_index = [&](std::size_t have) {
      if (lp.number(lp.word(1)) != have) lp.fail("out-of-order index");
    };
    if (tag == "TASKLETS") {
      dp.tasklets = static_cast<std::uint32_t>(lp.number(lp.word(1)));
    } else if (tag == "DPUS") {
      dp.n_dpus = static_cast<std::uint32_t>(lp.number(lp.word(1)));
    } else if (tag == "WRAM") {
      dp.wram_budget = lp.num("budget");
    } else if (tag == "MRAM") {
      dp.mram_used = lp.num("used");
    } else if (tag == "ROUNDS") {
      dp.total_length = lp.num("total");
      dp.per_dpu = lp.num("per_dpu");
      dp.per_round = lp.num("per_round");
      dp.rounds = lp.num("count");
      dp.leftover = lp.num("leftover");
      dp.quantum = lp.num("quantum");
    } else if (tag == "BUFFER") {
      expect_index(dp.buffers.size());
      ProgramBuffer b;
      guarded(lp, [&] {
        b.kind = parse_buffer_kind(lp.text("kind"));
        b.elem = make_elem_type(static_cast<std::uint32_t>(lp.num("size")), std::string(lp.text("type")));
        return 0;
      });
      b.length = lp.num("length");
      b.divisor = lp.num("divisor");
      b.halo = lp.num("halo");
      b.mram = lp.num("mram");
      b.bytes = lp.num("bytes");
      b.header = lp.optional("header");
      b.upload = lp.flag("upload");
      b.fetch = lp.flag("fetch");
      dp.buffers.push_back(b);
    } else if (tag == "STAGE") {
      expect_index(dp.stages.size());
      if (lp.word(2) != "KIND" || lp.word(4) != "KERNEL") lp.fail("malformed STAGE line");
      ProgramStage st;
      st.kind = guarded(lp, [&] { return parse_pattern_kind(lp.word(3)); });
      st.kernel_id = std::string(lp.word(5));
      dp.stages.push_back(std::move(st));
    } else if (tag == "SIGNATURE") {
      if (dp.stages.empty()) lp.fail("SIGNATURE before STAGE");
      dp.stages.back().signature = std::string(ln.substr(ln.find(' ') == std::string_view::npos ? ln.size() : ln.find(' ') + 1));
    } else if (tag == "PARAMS") {
      if (dp.stages.empty()) lp.fail("PARAMS before STAGE");
      ProgramStage& st = dp.stages.back();
      st.window = static_cast<std::uint32_t>(lp.num("window"));
      st.group = static_cast<std::uint32_t>(lp.num("group"));
      st.lookahead = static_cast<std::uint32_t>(lp.num("lookahead"));
      st.block = lp.num("block");
      st.unit = lp.num("unit");
      st.halo = lp.num("halo");
      const std::string_view in = lp.text("input");
      if (in != "compact" && in != "dense") lp.fail("input must be compact or dense");
      st.compact_input = in == "compact";
      st.cycles = static_cast<std::uint32_t>(lp.num("cycles"));
    } else if (tag == "ARG") {
      if (dp.stages.empty()) lp.fail("ARG before STAGE");
      ProgramStage& st = dp.stages.back();
      expect_index(st.args.size());
      ProgramArg a;
      guarded(lp, [&] {
        a.role = parse_arg_role(lp.text("role"));
        a.elem = make_elem_type(static_cast<std::uint32_t>(lp.num("size")), std::string(lp.text("type")));
        return 0;
      });
      a.mram = lp.num("mram");
      a.wram = lp.num("wram");
      a.count = lp.num("count");
      st.args.push_back(a);
    } else if (tag == "BIND") {
      if (dp.stages.empty() || dp.stages.back().args.empty()) lp.fail("BIND before ARG");
      ProgramArg& a = dp.stages.back().args.back();
      if (lp.number(lp.word(1)) + 1 != dp.stages.back().args.size()) lp.fail("BIND does not follow its ARG");
      a.buffer = lp.index("buf");
      a.overlap = lp.index("overlap");
      a.wram_bytes = lp.num("wram_bytes");
    } else if (tag == "DIRECTIVE") {
      Directive d;
      const std::string_view k = lp.word(1);
      if (k == "compact") {
        d.kind = Directive::Kind::Compact;
      } else if (k == "combine") {
        d.kind = Directive::Kind::Combine;
      } else {
        lp.fail("unknown directive");
      }
      d.buffer = static_cast<std::size_t>(lp.num("buf"));
      dp.directives.push_back(d);
    } else if (tag == "END") {
      ended = true;
    } else {
      lp.fail("unknown section '" + std::string(tag) + "'");
    }
  }
  if (!ended) throw Error(ErrorCode::ParseError, "missing END");
  return dp;
}

}  // namespace pimflow
