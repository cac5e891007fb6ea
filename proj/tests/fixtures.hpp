#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mdpn/mdpn.hpp"

namespace fixtures {

inline mdpn::MonitorDpn load(const std::string& name) {
  std::ifstream in(std::string(MDPN_MODELS_DIR) + "/" + name + ".dpn");
  return mdpn::parse_dpn(in);
}

inline mdpn::BitSet syms(const mdpn::MonitorDpn& d, const std::vector<std::string>& names) {
  mdpn::BitSet out;
  for (const auto& n : names) out.insert(d.stack_by_name(n));
  return out;
}

inline mdpn::RuleSet rules(const mdpn::MonitorDpn& d, const std::vector<std::string>& names) {
  mdpn::RuleSet out;
  for (const auto& n : names) out.insert(d.rule_by_name(n));
  return out;
}

inline mdpn::RuleSet all_but(const mdpn::MonitorDpn& d, const std::vector<std::string>& names) {
  mdpn::RuleSet out = mdpn::all_rules(d);
  for (const auto& n : names) out.erase(d.rule_by_name(n));
  return out;
}

inline mdpn::ExecStep st(const mdpn::MonitorDpn& d, const std::string& tid, const std::string& rule) {
  return {mdpn::ThreadId::parse(tid), d.rule_by_name(rule)};
}

/// Race query with patterns [read ∪ write, write].
inline mdpn::Query race_query(const mdpn::MonitorDpn& d, const std::vector<std::string>& read,
                              const std::vector<std::string>& write, bool sensitive = true) {
  const mdpn::BitSet w = syms(d, write);
  return {d, {{mdpn::MhpPatterns{{syms(d, read) | w, w}}, mdpn::all_rules(d)}}, sensitive};
}

struct RaceCase {
  std::string model;
  std::vector<std::string> read;
  std::vector<std::string> write;
};

/// Reads and writes of x in the Table-1 style fixtures.
inline std::vector<RaceCase> race_cases() {
  return {{"ex1", {"m0"}, {"t0"}},
          {"ex2", {"a1"}, {"t1"}},
          {"ex3", {"a1"}, {"a0", "b0"}},
          {"ex4", {"a1"}, {"b0"}},
          {"ex5", {"a2"}, {"a1", "b1"}},
          {"ex6", {"b2"}, {"c0", "a1", "b1"}}};
}

struct DefUseCase {
  std::string model;
  std::vector<std::string> gen;
  std::vector<std::string> kill;
  std::vector<std::string> use;
};

/// "x = 42" reaching "print(x)".
inline std::vector<DefUseCase> defuse_cases() {
  return {{"ex1", {"t1"}, {}, {"m0"}},          {"ex2", {"t2"}, {}, {"a1"}},
          {"ex3", {"b1"}, {"w17"}, {"a1"}},     {"ex5", {"b2"}, {"w17"}, {"a2"}},
          {"ex6", {"c1"}, {"w23", "w17"}, {"b2"}}};
}

inline mdpn::Query defuse_query(const mdpn::MonitorDpn& d, const std::vector<std::vector<std::string>>& tops,
                                const std::vector<std::vector<std::string>>& kills, bool sensitive = true) {
  mdpn::Query q{d, {}, sensitive};
  for (std::size_t i = 0; i < tops.size(); ++i) {
    q.stages.push_back({mdpn::TopSymbols{syms(d, tops[i])}, i == 0 ? mdpn::all_rules(d) : all_but(d, kills[i - 1])});
  }
  return q;
}

}  // namespace fixtures
