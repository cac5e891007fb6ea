#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mdpn/dpn.hpp"
#include "mdpn/error.hpp"
#include "mdpn/exec_tree.hpp"
#include "mdpn/oracle.hpp"
#include "mdpn/query.hpp"
#include "mdpn/semantics.hpp"

namespace mdpn::cli {

enum Exit : int { kHolds = 0, kNonempty = 1, kDiagnostics = 2, kUsage = 3 };

inline MonitorDpn load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_dpn(in);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline BitSet stack_set(const MonitorDpn& dpn, const std::string& list) {
  BitSet out;
  for (const auto& name : split_list(list)) {
    auto id = dpn.stack_symbols().find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown stack symbol '" + name + "'");
    out.insert(*id);
  }
  return out;
}

/// All rules except those listed; "-" lists none.
inline RuleSet rules_without(const MonitorDpn& dpn, const std::string& list) {
  RuleSet out = all_rules(dpn);
  if (list == "-") return out;
  for (const auto& name : split_list(list)) {
    auto id = dpn.rule_names().find(name);
    if (!id) throw Error(ErrorCode::Undeclared, "unknown rule '" + name + "'");
    out.erase(*id);
  }
  return out;
}

struct QueryFlags {
  bool insensitive = false;
  bool naive = false;
  bool prune = false;
  bool tree = false;
};

inline void add_query_flags(CLI::App* sub, QueryFlags& f) {
  sub->add_flag("--insensitive", f.insensitive, "Ignore locks");
  sub->add_flag("--naive", f.naive, "Plain product emptiness instead of the directed check");
  sub->add_flag("--prune", f.prune, "Subsumption pruning during saturation");
  sub->add_flag("--tree", f.tree, "Also print the witness tree");
}

inline int report(const MonitorDpn& dpn, const QueryResult& r, const QueryFlags& f, std::ostream& out) {
  if (!r.nonempty) {
    out << "empty\n";
    return kHolds;
  }
  out << "nonempty\n" << format_execution(dpn, *r.witness);
  for (std::size_t i = 0; i < r.stage_points.size(); ++i) {
    out << "# stage " << i + 1 << " ends after " << r.stage_points[i] << " steps\n";
  }
  if (f.tree) out << "# tree " << serialize_tree(dpn, *r.witness_tree) << "\n";
  return kNonempty;
}

inline int run_stages(const MonitorDpn& dpn, std::vector<QueryStage> stages, const QueryFlags& f, std::ostream& out) {
  Query q{dpn, std::move(stages), !f.insensitive};
  QueryOptions opt;
  opt.directed = !f.naive;
  opt.prune = f.prune;
  return report(dpn, run_query(q, opt), f, out);
}

/// Entry point of the command-line tool; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lock-sensitive reachability for Monitor-DPNs"};
  app.require_subcommand(1);
  std::string model;
  QueryFlags flags;

  auto* check = app.add_subcommand("check", "Parse a model and check that no thread can empty its stack");
  check->add_option("model", model)->required();

  std::string read_syms;
  std::string write_syms;
  auto* race = app.add_subcommand("race", "Search for a data race");
  race->add_option("model", model)->required();
  race->add_option("--read", read_syms, "Stack symbols reading the variable (comma separated)");
  race->add_option("--write", write_syms, "Stack symbols writing the variable")->required();
  add_query_flags(race, flags);

  std::vector<std::string> patterns;
  auto* mhp = app.add_subcommand("mhp", "Search for threads simultaneously at the given points");
  mhp->add_option("model", model)->required();
  mhp->add_option("--pattern", patterns, "One thread's stack symbols (repeatable)")->required();
  add_query_flags(mhp, flags);

  std::vector<std::string> tops;
  auto* reach = app.add_subcommand("reach", "Search for a run visiting the given points in order");
  reach->add_option("model", model)->required();
  reach->add_option("--top", tops, "Stack symbols for one stage (repeatable)")->required();
  add_query_flags(reach, flags);

  std::string gen;
  std::vector<std::string> kills;
  std::vector<std::string> uses;
  auto* defuse = app.add_subcommand("defuse", "Check whether a definition can reach a use");
  defuse->add_option("model", model)->required();
  defuse->add_option("--gen", gen, "Stack symbols right after the definition")->required();
  defuse->add_option("--kill", kills, "Killing rules for one hop, '-' for none (repeatable)");
  defuse->add_option("--use", uses, "Stack symbols of the use for one hop (repeatable)")->required();
  add_query_flags(defuse, flags);

  std::size_t steps = 12;
  bool sensitive = false;
  bool trees = false;
  auto* simulate = app.add_subcommand("simulate", "Explore configurations with the interpreter");
  simulate->add_option("model", model)->required();
  simulate->add_option("--steps", steps, "Maximal execution length");
  simulate->add_flag("--sensitive", sensitive, "Respect locks");
  simulate->add_flag("--trees", trees, "Also print the execution trees");

  std::string exec_file;
  std::vector<std::size_t> splits;
  auto* dump = app.add_subcommand("dump-tree", "Print the execution tree of a witness");
  dump->add_option("model", model)->required();
  dump->add_option("execution", exec_file, "File with 'step <tid> <rule>' lines, '-' for stdin")->required();
  dump->add_option("--cut", splits, "Prefix length at which to insert cut nodes (repeatable)");
  dump->add_flag("--sensitive", sensitive, "Replay respecting locks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kHolds;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kUsage;
  }

  try {
    const MonitorDpn dpn = load_model(model);
    if (check->parsed()) {
      auto bad = check_no_empty_stack(dpn);
      for (const auto& [p, g] : bad) {
        err << error_code_name(ErrorCode::StackEmptyable) << ": thread starting at (" << dpn.controls().name(p) << ", "
            << dpn.stack_symbols().name(g) << ") can empty its stack\n";
      }
      if (!bad.empty()) return kDiagnostics;
      out << "ok: " << dpn.num_rules() << " rules, " << dpn.num_locks() << " locks\n";
      return kHolds;
    }
    if (race->parsed()) {
      const BitSet w = stack_set(dpn, write_syms);
      const BitSet rw = stack_set(dpn, read_syms) | w;
      return run_stages(dpn, {{MhpPatterns{{rw, w}}, all_rules(dpn)}}, flags, out);
    }
    if (mhp->parsed()) {
      MhpPatterns p;
      for (const auto& s : patterns) p.patterns.push_back(stack_set(dpn, s));
      return run_stages(dpn, {{p, all_rules(dpn)}}, flags, out);
    }
    if (reach->parsed()) {
      std::vector<QueryStage> stages;
      for (const auto& s : tops) stages.push_back({TopSymbols{stack_set(dpn, s)}, all_rules(dpn)});
      return run_stages(dpn, stages, flags, out);
    }
    if (defuse->parsed()) {
      if (kills.size() > uses.size()) throw CLI::ValidationError("--kill", "more --kill than --use options");
      std::vector<QueryStage> stages{{TopSymbols{stack_set(dpn, gen)}, all_rules(dpn)}};
      for (std::size_t i = 0; i < uses.size(); ++i) {
        stages.push_back({TopSymbols{stack_set(dpn, uses[i])}, rules_without(dpn, i < kills.size() ? kills[i] : "-")});
      }
      return run_stages(dpn, stages, flags, out);
    }
    if (simulate->parsed()) {
      oracle::Bounds b;
      b.max_steps = steps;
      auto res = oracle::explore(dpn, sensitive, b);
      out << res.configs.size() << " configurations" << (res.truncated ? " (truncated)" : "") << "\n";
      for (const auto& [conf, exec] : res.configs) out << format_configuration(dpn, conf) << "\n";
      if (trees) {
        auto ts = oracle::enumerate_trees(dpn, sensitive, b);
        out << ts.trees.size() << " trees" << (ts.truncated ? " (truncated)" : "") << "\n";
        for (const auto& [t, exec] : ts.trees) out << serialize_tree(dpn, t) << "\n";
      }
      return kHolds;
    }
    if (dump->parsed()) {
      Execution exec;
      if (exec_file == "-") {
        exec = parse_execution(dpn, std::cin);
      } else {
        std::ifstream in(exec_file);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + exec_file);
        exec = parse_execution(dpn, in);
      }
      replay(dpn, exec, sensitive);
      const ExecTree t = splits.empty() ? tree_of_execution(dpn, exec) : cut_tree_of_executions(dpn, exec, splits);
      out << serialize_tree(dpn, t) << "\n";
      return kHolds;
    }
  } catch (const CLI::ValidationError& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == ErrorCode::Io ? kUsage : kDiagnostics;
  }
  return kUsage;
}

}  // namespace mdpn::cli
