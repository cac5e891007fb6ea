#pragma once

#include <cctype>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mdpn/error.hpp"

namespace mdpn {

using SymbolId = std::uint32_t;
using RuleIndex = std::uint32_t;

inline constexpr SymbolId kNone = std::numeric_limits<SymbolId>::max();

/// Bijective interning of identifier strings to dense indices.
class SymbolTable {
 public:
  SymbolId intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<SymbolId>(names_.size());
    names_.emplace_back(name);
    index_.emplace(std::string(name), id);
    return id;
  }

  std::optional<SymbolId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(SymbolId id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, SymbolId> index_;
};

enum class RuleKind { Base, Call, Return, Spawn, Monitor };

inline const char* rule_kind_name(RuleKind k) {
  switch (k) {
    case RuleKind::Base: return "base";
    case RuleKind::Call: return "call";
    case RuleKind::Return: return "ret";
    case RuleKind::Spawn: return "spawn";
    case RuleKind::Monitor: return "mon";
  }
  return "?";
}

/// One transition rule. Fields not demanded by the kind hold kNone.
///   Base    p g -> p2 g2
///   Call    p g -> p2 g2 g_ret
///   Return  p g -> p2
///   Spawn   p g -> [spawn_p spawn_g] p2 g2
///   Monitor p g -> p2 g2 g_ret   (pushes g2 annotated with lock)
struct Rule {
  RuleIndex index = 0;
  RuleKind kind = RuleKind::Base;
  SymbolId p = kNone;
  SymbolId g = kNone;
  SymbolId p2 = kNone;
  SymbolId g2 = kNone;
  SymbolId g_ret = kNone;
  SymbolId spawn_p = kNone;
  SymbolId spawn_g = kNone;
  SymbolId lock = kNone;
  SymbolId action = kNone;

  bool pushes() const { return kind == RuleKind::Call || kind == RuleKind::Monitor; }
};

class MonitorDpn;
MonitorDpn parse_dpn(std::istream& in);

/// Immutable Monitor-DPN. Copies share the underlying data.
class MonitorDpn {
 public:
  const SymbolTable& controls() const { return d_->controls; }
  const SymbolTable& stack_symbols() const { return d_->stack; }
  const SymbolTable& locks() const { return d_->locks; }
  const SymbolTable& actions() const { return d_->actions; }
  const SymbolTable& rule_names() const { return d_->rule_names; }

  const std::vector<Rule>& rules() const { return d_->rules; }
  const Rule& rule(RuleIndex i) const { return d_->rules.at(i); }
  std::size_t num_rules() const { return d_->rules.size(); }
  std::size_t num_controls() const { return d_->controls.size(); }
  std::size_t num_stack_symbols() const { return d_->stack.size(); }
  std::size_t num_locks() const { return d_->locks.size(); }

  SymbolId init_control() const { return d_->init_p; }
  SymbolId init_stack() const { return d_->init_g; }

  /// Rules whose left-hand side is (p, g), in declaration order.
  const std::vector<RuleIndex>& rules_from(SymbolId p, SymbolId g) const {
    static const std::vector<RuleIndex> kEmpty;
    auto it = d_->by_lhs.find({p, g});
    return it == d_->by_lhs.end() ? kEmpty : it->second;
  }

  RuleIndex rule_by_name(std::string_view name) const {
    auto id = d_->rule_names.find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown rule '" + std::string(name) + "'");
    return *id;
  }
  SymbolId stack_by_name(std::string_view name) const {
    auto id = d_->stack.find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown stack symbol '" + std::string(name) + "'");
    return *id;
  }
  SymbolId control_by_name(std::string_view name) const {
    auto id = d_->controls.find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown control state '" + std::string(name) + "'");
    return *id;
  }
  SymbolId lock_by_name(std::string_view name) const {
    auto id = d_->locks.find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown lock '" + std::string(name) + "'");
    return *id;
  }

  const std::string& rule_name(RuleIndex i) const { return d_->rule_names.name(i); }

  std::string describe_rule(RuleIndex i) const {
    const Rule& r = rule(i);
    std::ostringstream os;
    const auto& c = controls();
    const auto& s = stack_symbols();
    os << rule_name(i) << ' ' << rule_kind_name(r.kind);
    if (r.kind == RuleKind::Monitor) os << '(' << locks().name(r.lock) << ')';
    os << ' ' << c.name(r.p) << ' ' << s.name(r.g) << " ->";
    if (r.kind == RuleKind::Spawn) os << " [" << c.name(r.spawn_p) << ' ' << s.name(r.spawn_g) << ']';
    os << ' ' << c.name(r.p2);
    if (r.g2 != kNone) os << ' ' << s.name(r.g2);
    if (r.g_ret != kNone) os << ' ' << s.name(r.g_ret);
    return os.str();
  }

 private:
  struct Data {
    SymbolTable controls, stack, locks, actions, rule_names;
    std::vector<Rule> rules;
    SymbolId init_p = kNone;
    SymbolId init_g = kNone;
    std::map<std::pair<SymbolId, SymbolId>, std::vector<RuleIndex>> by_lhs;
  };

  explicit MonitorDpn(std::shared_ptr<const Data> d) : d_(std::move(d)) {}

  std::shared_ptr<const Data> d_;

  friend MonitorDpn parse_dpn(std::istream& in);
};

namespace detail {

struct Token {
  std::string text;
  int column = 0;
};

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
  }
  return true;
}

// Splits a line into tokens; '[' and ']' stand alone.
inline std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char ch = line[i];
    if (ch == '#') break;
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      continue;
    }
    if (ch == '[' || ch == ']') {
      out.push_back({std::string(1, ch), static_cast<int>(i + 1)});
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '[' &&
           line[i] != ']' && line[i] != '#') {
      ++i;
    }
    out.push_back({line.substr(start, i - start), static_cast<int>(start + 1)});
  }
  return out;
}

}  // namespace detail

/// Parses the line-oriented model format:
///   init <control> <stacksym>
///   lock <id> | act <id>
///   rule <id> base <p> <g> -> <p'> <g'> [act=<a>]
///   rule <id> call <p> <g> -> <p'> <g'> <gr> [act=<a>]
///   rule <id> ret <p> <g> -> <p'> [act=<a>]
///   rule <id> spawn <p> <g> -> [<ps> <gs>] <p'> <g'> [act=<a>]
///   rule <id> mon(<x>) <p> <g> -> <p'> <g'> <gr> [act=<a>]
/// Control states and stack symbols are declared by use; locks must be declared first.
inline MonitorDpn parse_dpn(std::istream& in) {
  auto data = std::make_shared<MonitorDpn::Data>();
  enum class Kind { Control, Stack, Lock, Action };
  std::map<std::string, Kind> kind_of;
  bool have_init = false;
  int line_no = 0;
  std::string line;

  auto kind_name = [](Kind k) {
    switch (k) {
      case Kind::Control: return "control state";
      case Kind::Stack: return "stack symbol";
      case Kind::Lock: return "lock";
      case Kind::Action: return "action";
    }
    return "?";
  };

  auto claim = [&](const detail::Token& tok, Kind k) {
    if (!detail::is_identifier(tok.text)) {
      throw Error(ErrorCode::Syntax, "expected identifier, got '" + tok.text + "'", line_no, tok.column);
    }
    auto [it, inserted] = kind_of.emplace(tok.text, k);
    if (!inserted && it->second != k) {
      throw Error(ErrorCode::Disjoint,
                  "'" + tok.text + "' used as " + kind_name(k) + " but already a " + kind_name(it->second),
                  line_no, tok.column);
    }
  };
  auto control = [&](const detail::Token& tok) {
    claim(tok, Kind::Control);
    return data->controls.intern(tok.text);
  };
  auto stack = [&](const detail::Token& tok) {
    claim(tok, Kind::Stack);
    return data->stack.intern(tok.text);
  };

  while (std::getline(in, line)) {
    ++line_no;
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;
    std::size_t pos = 0;
    auto eol_col = static_cast<int>(line.size() + 1);
    auto next = [&](const char* what) -> const detail::Token& {
      if (pos >= toks.size()) throw Error(ErrorCode::Syntax, std::string("expected ") + what, line_no, eol_col);
      return toks[pos++];
    };
    auto expect = [&](const char* lit) {
      const auto& t = next(lit);
      if (t.text != lit) {
        throw Error(ErrorCode::Syntax, std::string("expected '") + lit + "', got '" + t.text + "'", line_no,
                    t.column);
      }
    };

    const auto& head = next("keyword");
    if (head.text == "init") {
      if (have_init) throw Error(ErrorCode::Syntax, "duplicate init", line_no, head.column);
      data->init_p = control(next("control state"));
      data->init_g = stack(next("stack symbol"));
      have_init = true;
    } else if (head.text == "lock" || head.text == "act") {
      const auto& t = next("identifier");
      if (head.text == "lock") {
        claim(t, Kind::Lock);
        data->locks.intern(t.text);
      } else {
        claim(t, Kind::Action);
        data->actions.intern(t.text);
      }
    } else if (head.text == "rule") {
      const auto& name = next("rule id");
      if (!detail::is_identifier(name.text)) {
        throw Error(ErrorCode::Syntax, "bad rule id '" + name.text + "'", line_no, name.column);
      }
      if (data->rule_names.find(name.text)) {
        throw Error(ErrorCode::DuplicateRule, "duplicate rule id '" + name.text + "'", line_no, name.column);
      }
      Rule r;
      const auto& kind = next("rule kind");
      if (kind.text == "base") {
        r.kind = RuleKind::Base;
      } else if (kind.text == "call") {
        r.kind = RuleKind::Call;
      } else if (kind.text == "ret") {
        r.kind = RuleKind::Return;
      } else if (kind.text == "spawn") {
        r.kind = RuleKind::Spawn;
      } else if (kind.text.rfind("mon(", 0) == 0 && kind.text.size() > 5 && kind.text.back() == ')') {
        r.kind = RuleKind::Monitor;
        const std::string lock = kind.text.substr(4, kind.text.size() - 5);
        auto it = kind_of.find(lock);
        if (it == kind_of.end() || it->second != Kind::Lock) {
          if (it != kind_of.end()) {
            throw Error(ErrorCode::Disjoint, "'" + lock + "' is not a lock", line_no, kind.column + 4);
          }
          throw Error(ErrorCode::Undeclared, "lock '" + lock + "' used before declaration", line_no,
                      kind.column + 4);
        }
        r.lock = *data->locks.find(lock);
      } else {
        throw Error(ErrorCode::Syntax, "unknown rule kind '" + kind.text + "'", line_no, kind.column);
      }
      r.p = control(next("control state"));
      r.g = stack(next("stack symbol"));
      expect("->");
      if (r.kind == RuleKind::Spawn) {
        const bool bracket = pos < toks.size() && toks[pos].text == "[";
        if (bracket) ++pos;
        r.spawn_p = control(next("spawned control state"));
        r.spawn_g = stack(next("spawned stack symbol"));
        if (bracket) expect("]");
      }
      r.p2 = control(next("control state"));
      if (r.kind != RuleKind::Return) r.g2 = stack(next("stack symbol"));
      if (r.pushes()) r.g_ret = stack(next("return stack symbol"));
      if (pos < toks.size()) {
        bool bracket = toks[pos].text == "[";
        if (bracket) ++pos;
        const auto& a = next("act=<a>");
        if (a.text.rfind("act=", 0) != 0) {
          throw Error(ErrorCode::Syntax, "unexpected '" + a.text + "'", line_no, a.column);
        }
        detail::Token at{a.text.substr(4), a.column + 4};
        claim(at, Kind::Action);
        r.action = data->actions.intern(at.text);
        if (bracket) expect("]");
      }
      if (pos < toks.size()) {
        throw Error(ErrorCode::Syntax, "trailing '" + toks[pos].text + "'", line_no, toks[pos].column);
      }
      r.index = data->rule_names.intern(name.text);
      data->by_lhs[{r.p, r.g}].push_back(r.index);
      data->rules.push_back(r);
    } else {
      throw Error(ErrorCode::Syntax, "unknown keyword '" + head.text + "'", line_no, head.column);
    }
    if (pos < toks.size()) {
      throw Error(ErrorCode::Syntax, "trailing '" + toks[pos].text + "'", line_no, toks[pos].column);
    }
  }
  if (!have_init) throw Error(ErrorCode::Syntax, "missing init line", line_no + 1, 1);
  return MonitorDpn(std::move(data));
}

inline MonitorDpn parse_dpn(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_dpn(in);
}

/// Frames (p, g) among the initial frame and the frames of spawned threads that
/// can be popped, i.e. threads that could empty their stack. Computed from the
/// least relation Completes(p, g, p') saturated over all rules.
inline std::vector<std::pair<SymbolId, SymbolId>> check_no_empty_stack(const MonitorDpn& dpn) {
  using Key = std::pair<SymbolId, SymbolId>;
  std::map<Key, std::set<SymbolId>> completes;
  bool changed = true;
  auto add = [&](SymbolId p, SymbolId g, SymbolId p2) {
    if (completes[{p, g}].insert(p2).second) changed = true;
  };
  auto ends = [&](SymbolId p, SymbolId g) -> const std::set<SymbolId>* {
    auto it = completes.find({p, g});
    return it == completes.end() ? nullptr : &it->second;
  };
  while (changed) {
    changed = false;
    for (const Rule& r : dpn.rules()) {
      switch (r.kind) {
        case RuleKind::Return:
          add(r.p, r.g, r.p2);
          break;
        case RuleKind::Base:
        case RuleKind::Spawn:
          if (auto* e = ends(r.p2, r.g2)) {
            const std::set<SymbolId> copy = *e;
            for (SymbolId q : copy) add(r.p, r.g, q);
          }
          break;
        case RuleKind::Call:
        case RuleKind::Monitor:
          if (auto* inner = ends(r.p2, r.g2)) {
            const std::set<SymbolId> mids = *inner;
            for (SymbolId mid : mids) {
              if (auto* outer = ends(mid, r.g_ret)) {
                const std::set<SymbolId> copy = *outer;
                for (SymbolId q : copy) add(r.p, r.g, q);
              }
            }
          }
          break;
      }
    }
  }
  std::vector<Key> candidates{{dpn.init_control(), dpn.init_stack()}};
  for (const Rule& r : dpn.rules()) {
    if (r.kind == RuleKind::Spawn) candidates.emplace_back(r.spawn_p, r.spawn_g);
  }
  std::vector<Key> out;
  std::set<Key> seen;
  for (const auto& k : candidates) {
    if (!seen.insert(k).second) continue;
    auto* e = ends(k.first, k.second);
    if (e && !e->empty()) out.push_back(k);
  }
  return out;
}

}  // namespace mdpn
