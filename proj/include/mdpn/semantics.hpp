#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mdpn/bitset.hpp"
#include "mdpn/dpn.hpp"
#include "mdpn/error.hpp"

namespace mdpn {

/// Spawn path from the root thread; the empty path is the root.
struct ThreadId {
  std::vector<std::uint32_t> path;

  ThreadId child(std::uint32_t n) const {
    ThreadId c = *this;
    c.path.push_back(n);
    return c;
  }

  bool is_root() const { return path.empty(); }

  std::string str() const {
    std::string out = "0";
    for (auto n : path) out += "." + std::to_string(n);
    return out;
  }

  static ThreadId parse(std::string_view text) {
    ThreadId t;
    if (text.empty() || text[0] != '0') throw Error(ErrorCode::Syntax, "bad thread id '" + std::string(text) + "'");
    std::size_t i = 1;
    while (i < text.size()) {
      if (text[i] != '.') throw Error(ErrorCode::Syntax, "bad thread id '" + std::string(text) + "'");
      ++i;
      std::size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j == i) throw Error(ErrorCode::Syntax, "bad thread id '" + std::string(text) + "'");
      t.path.push_back(static_cast<std::uint32_t>(std::stoul(std::string(text.substr(i, j - i)))));
      i = j;
    }
    return t;
  }

  friend bool operator==(const ThreadId&, const ThreadId&) = default;
  friend auto operator<=>(const ThreadId& a, const ThreadId& b) { return a.path <=> b.path; }
};

/// Stack frame; lock == kNone stands for the no-lock annotation.
struct Frame {
  SymbolId g = kNone;
  SymbolId lock = kNone;

  friend bool operator==(const Frame&, const Frame&) = default;
  friend auto operator<=>(const Frame&, const Frame&) = default;
};

/// Control state plus stack. stack.back() is the top of stack.
struct ThreadConfig {
  SymbolId control = kNone;
  std::vector<Frame> stack;

  const Frame& top() const { return stack.back(); }

  bool holds(SymbolId lock) const {
    for (const auto& f : stack) {
      if (f.lock == lock) return true;
    }
    return false;
  }

  friend bool operator==(const ThreadConfig&, const ThreadConfig&) = default;
  friend auto operator<=>(const ThreadConfig&, const ThreadConfig&) = default;
};

struct Configuration {
  std::map<ThreadId, ThreadConfig> threads;

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration&, const Configuration&) = default;
};

struct ExecStep {
  ThreadId tid;
  RuleIndex rule = 0;

  friend bool operator==(const ExecStep&, const ExecStep&) = default;
};

using Execution = std::vector<ExecStep>;

inline Configuration initial_configuration(const MonitorDpn& dpn) {
  Configuration c;
  c.threads[ThreadId{}] = ThreadConfig{dpn.init_control(), {Frame{dpn.init_stack(), kNone}}};
  return c;
}

inline LockSet held_locks(const Configuration& conf) {
  LockSet out;
  for (const auto& [tid, tc] : conf.threads) {
    for (const auto& f : tc.stack) {
      if (f.lock != kNone) out.insert(f.lock);
    }
  }
  return out;
}

/// Whether `tid` may execute `rule` in `conf`. Under the lock-sensitive
/// semantics a monitor rule needs its lock free, or already held by the acting
/// thread itself (reentrance).
inline bool can_step(const MonitorDpn& dpn, const Configuration& conf, const ThreadId& tid, RuleIndex rule,
                     bool sensitive) {
  auto it = conf.threads.find(tid);
  if (it == conf.threads.end() || rule >= dpn.num_rules()) return false;
  const ThreadConfig& tc = it->second;
  const Rule& r = dpn.rule(rule);
  if (tc.stack.empty() || tc.control != r.p || tc.top().g != r.g) return false;
  if (sensitive && r.kind == RuleKind::Monitor && !tc.holds(r.lock)) {
    for (const auto& [other, oc] : conf.threads) {
      if (other != tid && oc.holds(r.lock)) return false;
    }
  }
  return true;
}

inline std::vector<ExecStep> enabled(const MonitorDpn& dpn, const Configuration& conf, bool sensitive) {
  std::vector<ExecStep> out;
  for (const auto& [tid, tc] : conf.threads) {
    if (tc.stack.empty()) continue;
    for (RuleIndex r : dpn.rules_from(tc.control, tc.top().g)) {
      if (can_step(dpn, conf, tid, r, sensitive)) out.push_back({tid, r});
    }
  }
  return out;
}

inline std::uint32_t next_child_index(const Configuration& conf, const ThreadId& tid) {
  std::uint32_t max_child = 0;
  for (auto it = conf.threads.upper_bound(tid); it != conf.threads.end(); ++it) {
    const auto& p = it->first.path;
    if (p.size() < tid.path.size() || !std::equal(tid.path.begin(), tid.path.end(), p.begin())) break;
    if (p.size() == tid.path.size() + 1) max_child = std::max(max_child, p.back());
  }
  return max_child + 1;
}

/// Applies one transition in place. Throws NotEnabled when the step is not enabled.
inline void apply_step(const MonitorDpn& dpn, Configuration& conf, const ThreadId& tid, RuleIndex rule,
                       bool sensitive) {
  if (!can_step(dpn, conf, tid, rule, sensitive)) {
    throw Error(ErrorCode::NotEnabled, "rule " + (rule < dpn.num_rules() ? dpn.rule_name(rule) : std::to_string(rule)) +
                                           " not enabled for thread " + tid.str());
  }
  const Rule& r = dpn.rule(rule);
  ThreadConfig& tc = conf.threads.at(tid);
  switch (r.kind) {
    case RuleKind::Base:
      tc.control = r.p2;
      tc.stack.back().g = r.g2;
      break;
    case RuleKind::Return:
      tc.control = r.p2;
      tc.stack.pop_back();
      break;
    case RuleKind::Call:
    case RuleKind::Monitor:
      tc.control = r.p2;
      tc.stack.back().g = r.g_ret;
      tc.stack.push_back(Frame{r.g2, r.kind == RuleKind::Monitor ? r.lock : kNone});
      break;
    case RuleKind::Spawn: {
      tc.control = r.p2;
      tc.stack.back().g = r.g2;
      const auto n = next_child_index(conf, tid);
      conf.threads[tid.child(n)] = ThreadConfig{r.spawn_p, {Frame{r.spawn_g, kNone}}};
      break;
    }
  }
}

inline Configuration step(const MonitorDpn& dpn, const Configuration& conf, const ThreadId& tid, RuleIndex rule,
                          bool sensitive) {
  Configuration next = conf;
  apply_step(dpn, next, tid, rule, sensitive);
  return next;
}

/// Folds step over `exec` from `start`; any failing step raises Replay.
inline Configuration replay(const MonitorDpn& dpn, const Execution& exec, bool sensitive,
                            const Configuration& start) {
  Configuration c = start;
  for (std::size_t i = 0; i < exec.size(); ++i) {
    try {
      apply_step(dpn, c, exec[i].tid, exec[i].rule, sensitive);
    } catch (const Error& e) {
      throw Error(ErrorCode::Replay, "step " + std::to_string(i) + ": " + e.what());
    }
  }
  return c;
}

inline Configuration replay(const MonitorDpn& dpn, const Execution& exec, bool sensitive) {
  return replay(dpn, exec, sensitive, initial_configuration(dpn));
}

inline std::string format_configuration(const MonitorDpn& dpn, const Configuration& conf) {
  std::ostringstream os;
  bool first = true;
  os << '{';
  for (const auto& [tid, tc] : conf.threads) {
    if (!first) os << ", ";
    first = false;
    os << tid.str() << ": " << dpn.controls().name(tc.control) << " [";
    // topmost first
    for (std::size_t i = tc.stack.size(); i-- > 0;) {
      const auto& f = tc.stack[i];
      os << dpn.stack_symbols().name(f.g);
      if (f.lock != kNone) os << '@' << dpn.locks().name(f.lock);
      if (i > 0) os << ' ';
    }
    os << ']';
  }
  os << '}';
  return os.str();
}

inline std::string format_execution(const MonitorDpn& dpn, const Execution& exec) {
  std::ostringstream os;
  for (const auto& s : exec) os << "step " << s.tid.str() << ' ' << dpn.rule_name(s.rule) << '\n';
  return os.str();
}

/// Reads `step <tid> <rule-id>` lines; blank lines and '#' comments are ignored.
inline Execution parse_execution(const MonitorDpn& dpn, std::istream& in) {
  Execution out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 3 || toks[0].text != "step") {
      throw Error(ErrorCode::Syntax, "expected 'step <tid> <rule>'", line_no, toks[0].column);
    }
    ExecStep s;
    try {
      s.tid = ThreadId::parse(toks[1].text);
    } catch (const Error&) {
      throw Error(ErrorCode::Syntax, "bad thread id '" + toks[1].text + "'", line_no, toks[1].column);
    }
    auto id = dpn.rule_names().find(toks[2].text);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown rule '" + toks[2].text + "'", line_no, toks[2].column);
    s.rule = *id;
    out.push_back(s);
  }
  return out;
}

}  // namespace mdpn
