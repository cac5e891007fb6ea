#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mdpn/tree_automaton.hpp"

namespace mdpn {

using TState = std::uint32_t;

/// Output template: either a variable (the output of child `var`) or a symbol
/// applied to sub-templates.
struct Template {
  bool is_var = false;
  int var = -1;
  TreeSymbol sym;
  std::vector<Template> kids;

  static Template variable(int i) {
    Template t;
    t.is_var = true;
    t.var = i;
    return t;
  }
  static Template node(const TreeSymbol& s, std::vector<Template> kids = {}) {
    Template t;
    t.sym = s;
    t.kids = std::move(kids);
    return t;
  }

  void collect_vars(std::vector<int>& out) const {
    if (is_var) {
      out.push_back(var);
      return;
    }
    for (const auto& k : kids) k.collect_vars(out);
  }

  ExecTree instantiate(const std::vector<ExecTree>& vars) const {
    if (is_var) return vars.at(static_cast<std::size_t>(var));
    std::vector<ExecTree> ks;
    for (const auto& k : kids) ks.push_back(k.instantiate(vars));
    return ExecTree::make(sym, std::move(ks));
  }
};

struct TransducerRule {
  TState state;
  Template output;
};

/// Linear, possibly deleting, bottom-up tree transducer with finitely many states.
class TreeTransducer {
 public:
  virtual ~TreeTransducer() = default;
  virtual const AlphabetPtr& input_alphabet() const = 0;
  virtual const AlphabetPtr& output_alphabet() const = 0;
  virtual std::vector<TransducerRule> rules(const TreeSymbol& sym, std::span<const TState> kids) const = 0;
  virtual bool accepting(TState q) const = 0;
  virtual std::string state_name(TState q) const { return std::to_string(q); }
};

using TransducerPtr = std::shared_ptr<const TreeTransducer>;

/// All (final state, output) pairs of runs on `t`.
inline std::vector<std::pair<TState, ExecTree>> transduce(const TreeTransducer& tr, const ExecTree& t) {
  if (!tr.input_alphabet()->contains(t.symbol())) {
    throw Error(ErrorCode::Alphabet, std::string("symbol ") + tag_name(t.symbol().tag) + " not in input alphabet");
  }
  std::vector<std::vector<std::pair<TState, ExecTree>>> kid_runs;
  for (const auto& k : t.kids()) kid_runs.push_back(transduce(tr, k));
  std::vector<std::pair<TState, ExecTree>> out;
  std::vector<TState> qs(kid_runs.size());
  std::vector<ExecTree> outs(kid_runs.size());
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == kid_runs.size()) {
      for (const auto& r : tr.rules(t.symbol(), qs)) {
        auto o = r.output.instantiate(outs);
        if (std::find(out.begin(), out.end(), std::make_pair(r.state, o)) == out.end()) out.emplace_back(r.state, o);
      }
      return;
    }
    for (const auto& [q, o] : kid_runs[i]) {
      qs[i] = q;
      outs[i] = o;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

/// Outputs of accepting runs.
inline std::vector<ExecTree> apply_transducer(const TreeTransducer& tr, const ExecTree& t) {
  std::vector<ExecTree> out;
  for (auto& [q, o] : transduce(tr, t)) {
    if (tr.accepting(q) && std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
  }
  return out;
}

class IdentityTransducer final : public TreeTransducer {
 public:
  explicit IdentityTransducer(AlphabetPtr alpha) : alpha_(std::move(alpha)) {}
  const AlphabetPtr& input_alphabet() const override { return alpha_; }
  const AlphabetPtr& output_alphabet() const override { return alpha_; }
  std::vector<TransducerRule> rules(const TreeSymbol& sym, std::span<const TState>) const override {
    std::vector<Template> kids;
    for (int i = 0; i < sym.arity(); ++i) kids.push_back(Template::variable(i));
    return {TransducerRule{0, Template::node(sym, std::move(kids))}};
  }
  bool accepting(TState) const override { return true; }

 private:
  AlphabetPtr alpha_;
};

// ---------------------------------------------------------------------------

/// Automaton over the transducer's input alphabet accepting exactly the trees
/// having an accepting run whose output is in L(A). States pair a transducer
/// state with an A-state, or with a wildcard for subtrees whose output is deleted.
class InverseImage final : public TreeAutomaton {
 public:
  static constexpr StateId kAny = UINT32_MAX;

  InverseImage(TransducerPtr t, AutomatonPtr a) : t_(std::move(t)), a_(std::move(a)) {
    for (const auto& s : t_->output_alphabet()->symbols()) {
      if (!a_->alphabet()->contains(s)) {
        throw Error(ErrorCode::Alphabet, "transducer output symbol " + std::string(tag_name(s.tag)) +
                                             " missing from the target automaton's alphabet");
      }
    }
  }

  const AlphabetPtr& alphabet() const override { return t_->input_alphabet(); }

  std::pair<TState, StateId> components(StateId s) const { return table_.get(s); }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    std::vector<TState> qs(kids.size());
    std::vector<StateId> as(kids.size());
    bool all_any = true;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      std::tie(qs[i], as[i]) = table_.get(kids[i]);
      if (as[i] != kAny) all_any = false;
    }
    std::vector<StateId> out;
    for (const auto& r : t_->rules(sym, qs)) {
      if (all_any) out.push_back(table_.intern({r.state, kAny}));
      std::vector<int> used;
      r.output.collect_vars(used);
      std::vector<bool> is_used(kids.size(), false);
      for (int v : used) is_used[static_cast<std::size_t>(v)] = true;
      bool ok = true;
      for (std::size_t i = 0; i < kids.size() && ok; ++i) ok = is_used[i] == (as[i] != kAny);
      if (!ok) continue;
      for (auto a : eval(r.output, as)) out.push_back(table_.intern({r.state, a}));
    }
    sort_unique(out);
    return out;
  }

  bool accepting(StateId s) const override {
    auto [q, a] = table_.get(s);
    return a != kAny && t_->accepting(q) && a_->accepting(a);
  }

  std::string describe(StateId s) const override {
    auto [q, a] = table_.get(s);
    return "(" + t_->state_name(q) + ", " + (a == kAny ? std::string("_") : a_->describe(a)) + ")";
  }

 private:
  std::vector<StateId> eval(const Template& tpl, const std::vector<StateId>& as) const {
    if (tpl.is_var) return {as.at(static_cast<std::size_t>(tpl.var))};
    std::vector<std::vector<StateId>> kid_sets;
    for (const auto& k : tpl.kids) {
      kid_sets.push_back(eval(k, as));
      if (kid_sets.back().empty()) return {};
    }
    std::vector<StateId> out;
    std::vector<StateId> choice(kid_sets.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == kid_sets.size()) {
        auto r = a_->step(tpl.sym, choice);
        out.insert(out.end(), r.begin(), r.end());
        return;
      }
      for (auto s : kid_sets[i]) {
        choice[i] = s;
        rec(i + 1);
      }
    };
    rec(0);
    sort_unique(out);
    return out;
  }

  struct PairHash {
    std::size_t operator()(const std::pair<TState, StateId>& p) const { return hash_combine(p.first, p.second); }
  };
  TransducerPtr t_;
  AutomatonPtr a_;
  StateTable<std::pair<TState, StateId>, PairHash> table_;
};

inline AutomatonPtr inverse_image(TransducerPtr t, AutomatonPtr a) {
  return std::make_shared<const InverseImage>(std::move(t), std::move(a));
}

/// Language of A with every node labelled by a symbol of S removed.
/// States are A's; transitions are closed under the silent S-moves.
class EraseUnary final : public TreeAutomaton {
 public:
  EraseUnary(AutomatonPtr a, const std::function<bool(const TreeSymbol&)>& erased) : a_(std::move(a)) {
    Alphabet kept;
    for (const auto& s : a_->alphabet()->symbols()) {
      if (!erased(s)) {
        kept.add(s);
        continue;
      }
      if (s.arity() != 1) {
        throw Error(ErrorCode::Arity, std::string("cannot erase non-unary symbol ") + tag_name(s.tag));
      }
      silent_.push_back(s);
    }
    alpha_ = std::make_shared<const Alphabet>(std::move(kept));
  }

  const AlphabetPtr& alphabet() const override { return alpha_; }

  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    if (!alpha_->contains(sym)) return {};
    std::vector<StateId> out;
    for (auto s : a_->step(sym, kids)) {
      const auto& c = closure(s);
      out.insert(out.end(), c.begin(), c.end());
    }
    sort_unique(out);
    return out;
  }

  bool accepting(StateId s) const override { return a_->accepting(s); }
  std::string describe(StateId s) const override { return a_->describe(s); }
  std::optional<std::uint64_t> slot_key(const TreeSymbol& sym, int pos, StateId s) const override {
    return a_->slot_key(sym, pos, s);
  }
  bool has_order() const override { return a_->has_order(); }
  std::uint64_t order_class(StateId s) const override { return a_->order_class(s); }
  bool subsumes(StateId x, StateId y) const override { return a_->subsumes(x, y); }

  /// States reachable from `s` through zero or more erased symbols.
  const std::vector<StateId>& closure(StateId s) const {
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(s);
      if (it != cache_.end()) return it->second;
    }
    std::vector<StateId> seen{s};
    std::vector<StateId> work{s};
    while (!work.empty()) {
      const StateId x = work.back();
      work.pop_back();
      for (const auto& sym : silent_) {
        const StateId one[1] = {x};
        for (auto y : a_->step(sym, one)) {
          if (std::find(seen.begin(), seen.end(), y) == seen.end()) {
            seen.push_back(y);
            work.push_back(y);
          }
        }
      }
    }
    sort_unique(seen);
    std::lock_guard lock(mu_);
    return cache_.emplace(s, std::move(seen)).first->second;
  }

 private:
  AutomatonPtr a_;
  AlphabetPtr alpha_;
  std::vector<TreeSymbol> silent_;
  mutable std::mutex mu_;
  mutable std::unordered_map<StateId, std::vector<StateId>> cache_;
};

inline AutomatonPtr erase_unary(AutomatonPtr a, const std::function<bool(const TreeSymbol&)>& erased) {
  return std::make_shared<const EraseUnary>(std::move(a), erased);
}

/// Extends A's alphabet with unary symbols that leave the state unchanged.
class UnaryPassthrough final : public TreeAutomaton {
 public:
  UnaryPassthrough(AutomatonPtr a, const std::vector<TreeSymbol>& extra) : a_(std::move(a)) {
    Alphabet alpha = *a_->alphabet();
    for (const auto& s : extra) {
      if (s.arity() != 1) throw Error(ErrorCode::Arity, "passthrough symbols must be unary");
      if (alpha.contains(s)) throw Error(ErrorCode::Alphabet, "passthrough symbol already in alphabet");
      alpha.add(s);
      extra_.add(s);
    }
    alpha_ = std::make_shared<const Alphabet>(std::move(alpha));
  }

  const AlphabetPtr& alphabet() const override { return alpha_; }
  std::vector<StateId> step(const TreeSymbol& sym, std::span<const StateId> kids) const override {
    if (extra_.contains(sym)) return {kids[0]};
    return a_->step(sym, kids);
  }
  bool accepting(StateId s) const override { return a_->accepting(s); }
  std::string describe(StateId s) const override { return a_->describe(s); }
  std::optional<std::uint64_t> slot_key(const TreeSymbol& sym, int pos, StateId s) const override {
    if (extra_.contains(sym)) return 0;
    return a_->slot_key(sym, pos, s);
  }
  bool has_order() const override { return a_->has_order(); }
  std::uint64_t order_class(StateId s) const override { return a_->order_class(s); }
  bool subsumes(StateId x, StateId y) const override { return a_->subsumes(x, y); }
  bool supports_down() const override { return a_->supports_down(); }
  std::vector<StateId> initial_down() const override { return a_->initial_down(); }
  std::vector<std::vector<StateId>> down(const TreeSymbol& sym, StateId s) const override {
    if (extra_.contains(sym)) return {{s}};
    return a_->down(sym, s);
  }

 private:
  AutomatonPtr a_;
  AlphabetPtr alpha_;
  Alphabet extra_;
};

inline AutomatonPtr with_unary_passthrough(AutomatonPtr a, const std::vector<TreeSymbol>& extra) {
  return std::make_shared<const UnaryPassthrough>(std::move(a), extra);
}

}  // namespace mdpn
