// qcflp: check, transform, solve, prove and oracle-compare qualified
// functional logic programs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qcflp/qcflp.hpp"

using namespace qcflp;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFail = 1, kIo = 2, kFlagged = 3, kBudget = 4 };

struct Global {
  std::string qdom = "u";
  int depth = 0;
  std::size_t answers = 0;
  bool json = false;
  bool trace = false;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

QualDomain domain(const std::string& name) {
  if (name == "uxu") return QualDomain::product(QualDomain::unit(), QualDomain::unit());
  return QualDomain::unit();
}

bool is_plain_file(const std::string& path) { return std::filesystem::path(path).extension() == ".cflp"; }

void print_diagnostics(const std::string& file, const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds) std::cerr << file << ":" << to_string(d) << "\n";
}

// Parses a program or prints diagnostics; nullopt means exit 1.
std::optional<Program> load(const std::string& file, const ParseOptions& opts) {
  ProgramParse r = parse_program(read_text(file), opts);
  if (!r.ok()) {
    print_diagnostics(file, r.diagnostics);
    return std::nullopt;
  }
  return r.program;
}

json interval_json(const Interval& i) {
  return {{"lo", i.lo}, {"hi", i.hi}, {"lo_open", i.lo_open}, {"hi_open", i.hi_open}};
}

json answer_json(const Answer& a) {
  json subst = json::object();
  for (const auto& [v, t] : a.subst) subst[v] = to_string(t);
  json qual = json::object();
  for (const auto& q : a.qual) qual[q.var] = interval_json(q.range);
  json residual = json::array();
  for (const auto& c : a.residual) residual.push_back(to_string(c));
  return {{"subst", subst}, {"qual", qual}, {"residual", residual}, {"flags", a.flags()}};
}

int cmd_check(const std::string& file, const Global& g) {
  ParseOptions opts{is_plain_file(file) ? SourceKind::Plain : SourceKind::Qualified, domain(g.qdom)};
  if (!load(file, opts)) return kFail;
  return kOk;
}

struct TransformArgs {
  std::string file, out, goal;
  bool simplify = false, emit_map = false;
};

int cmd_transform(const TransformArgs& a, const Global& g) {
  QualDomain dom = domain(g.qdom);
  auto prog = load(a.file, {SourceKind::Qualified, dom});
  if (!prog) return kFail;
  if (a.emit_map && a.out.empty()) throw CLI::ValidationError("--emit-map", "needs -o PATH for the sidecar");
  FreshSupply fresh = FreshSupply::from_env();
  TranslatedProgram tp = transform_program(*prog, dom, fresh);
  std::string text = print_program(tp.program);
  if (!a.goal.empty()) {
    Transformer t(dom, fresh);
    ConstraintSet goal = t.goal(parse_goal(a.goal, prog->sig, {SourceKind::Qualified, dom}));
    if (a.simplify && dom.is_unit()) goal = simplify_goal(goal);
    text += "-- goal: " + to_string(goal) + "\n";
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
    if (a.emit_map) write_text(a.out + ".map", print_rule_map(tp));
  }
  return kOk;
}

int cmd_solve(const std::string& file, const std::string& goal_text, const Global& g) {
  QualDomain dom = domain(g.qdom);
  Program target;
  ConstraintSet goal;
  if (is_plain_file(file)) {
    auto prog = load(file, {SourceKind::Plain, dom});
    if (!prog) return kFail;
    target = *prog;
    goal = parse_constraints(goal_text, target.sig, {SourceKind::Plain, dom});
  } else {
    auto prog = load(file, {SourceKind::Qualified, dom});
    if (!prog) return kFail;
    FreshSupply fresh = FreshSupply::from_env();
    target = transform_program(*prog, dom, fresh).program;
    Transformer t(dom, fresh);
    goal = t.goal(parse_goal(goal_text, prog->sig, {SourceKind::Qualified, dom}));
  }
  SolveOptions o;
  if (g.depth > 0) o.max_depth = g.depth;
  o.max_answers = g.answers;
  if (g.trace) o.trace = [](const std::string& s) { std::cerr << "trace: " << s << "\n"; };
  bool any_clean = false;
  SolveReport rep = solve(target, goal, o, [&](const Answer& a) {
    if (a.flags().empty()) any_clean = true;
    if (g.json) {
      std::cout << answer_json(a).dump() << std::endl;
    } else {
      std::cout << to_string(a) << std::endl;
    }
    return true;
  });
  if (rep.incomplete) std::cerr << "note: search was cut at depth " << o.max_depth << "\n";
  if (rep.answers.empty()) {
    if (!g.json) std::cout << "no answers\n";
    return kFail;
  }
  return any_clean ? kOk : kFlagged;
}

struct ProveArgs {
  std::string file, statement, check, out;
};

int cmd_prove(const ProveArgs& a, const Global& g) {
  QualDomain dom = domain(g.qdom);
  ParseOptions opts{is_plain_file(a.file) ? SourceKind::Plain : SourceKind::Qualified, dom};
  auto prog = load(a.file, opts);
  if (!prog) return kFail;
  if (!a.check.empty()) {
    CheckResult r = check_certificate(*prog, dom, read_text(a.check));
    switch (r.kind) {
      case CheckResult::Kind::Valid:
        std::cout << "valid\n";
        return kOk;
      case CheckResult::Kind::Invalid:
        std::cout << "invalid" << (r.path.empty() ? "" : " at " + r.path) << ": " << r.reason << "\n";
        return kFail;
      case CheckResult::Kind::Unknown:
        std::cout << "unknown: " << r.reason << "\n";
        return kFlagged;
    }
  }
  if (a.statement.empty()) throw CLI::ValidationError("prove", "a statement or --check CERT is required");
  QcStatement phi = parse_statement(a.statement, prog->sig, opts);
  ProverOptions po;
  if (g.depth > 0) po.max_depth = g.depth;
  HoldsResult h = holds(*prog, dom, phi, po);
  switch (h.kind) {
    case HoldsResult::Kind::Derivable: {
      std::string cert = "% " + to_string(phi) + "\n" + write_certificate(*h.proof);
      if (a.out.empty()) {
        std::cout << cert;
      } else {
        write_text(a.out, cert);
      }
      return kOk;
    }
    case HoldsResult::Kind::NotFound:
      std::cout << "not_found" << (h.reason.empty() ? "" : ": " + h.reason) << "\n";
      return kFail;
    case HoldsResult::Kind::Unknown:
      std::cout << "unknown" << (h.reason.empty() ? "" : ": " + h.reason) << "\n";
      return kFlagged;
  }
  return kFail;
}

struct OracleArgs {
  std::string file, universe;
  int iterations = 6;
  long mutate = -1;
};

int cmd_oracle(const OracleArgs& a, const Global& g) {
  auto prog = load(a.file, {SourceKind::Qualified, QualDomain::unit()});
  if (!prog) return kFail;
  OracleOptions o;
  o.lfp_iterations = a.iterations;
  if (g.depth > 0) o.depth = g.depth;
  if (!a.universe.empty()) {
    for (const auto& t : detail::split_outside_quotes(a.universe, ';')) {
      o.universe.push_back(parse_expr(t, prog->sig));
    }
  }
  if (a.mutate >= 0) {
    FreshSupply fresh(0);
    Program tp = transform_program(*prog, QualDomain::unit(), fresh).program;
    auto sites = mutation_sites(tp);
    if (sites.empty()) throw CLI::ValidationError("--mutate", "the translated program has no qualification conditions");
    MutationSite s = sites[static_cast<std::size_t>(a.mutate) % sites.size()];
    o.mutation = s;
    std::cout << "mutation: drop `" << to_string(tp.rules[s.rule].conditions[s.condition]) << "` from rule "
              << s.rule << (is_redundant_site(tp, s) ? " (redundant)" : "") << "\n";
  }
  OracleReport r = oracle_compare(*prog, o);
  for (const auto& row : r.rows) {
    if (g.json) {
      json j{{"call", row.call}, {"result", row.result}, {"match", row.match}};
      j["lfp"] = row.lfp ? json(*row.lfp) : json(nullptr);
      j["runtime"] = row.runtime ? interval_json(*row.runtime) : json(nullptr);
      std::cout << j.dump() << "\n";
    } else {
      std::cout << format_oracle_row(row) << "\n";
    }
  }
  std::cout << r.rows.size() << " rows, " << r.mismatches << " mismatches";
  if (r.budget_exceeded) std::cout << ", budget exceeded (" << r.note << ")";
  std::cout << "\n";
  if (r.budget_exceeded) return kBudget;
  return r.mismatches == 0 ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Qualified constraint functional logic programs"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--qdom", g.qdom, "Qualification domain")->check(CLI::IsMember({"u", "uxu"}));
  app.add_option("--depth", g.depth, "Depth limit")->check(CLI::PositiveNumber);
  app.add_option("--answers", g.answers, "Stop after N answers")->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json, "One JSON record per line");
  app.add_flag("--trace", g.trace, "Trace rule applications on stderr");

  std::string check_file;
  auto* check = app.add_subcommand("check", "Parse and validate a program");
  check->add_option("file", check_file)->required();

  TransformArgs ta;
  auto* transform = app.add_subcommand("transform", "Translate a qualified program");
  transform->add_option("file", ta.file)->required();
  transform->add_option("-o", ta.out, "Output path");
  transform->add_option("--goal", ta.goal, "Also translate this goal");
  transform->add_flag("--simplify", ta.simplify, "Simplify the translated goal");
  transform->add_flag("--emit-map", ta.emit_map, "Write PATH.map with the rule correspondence");

  std::string solve_file, solve_goal;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a goal");
  solve_cmd->add_option("file", solve_file)->required();
  solve_cmd->add_option("goal", solve_goal)->required();

  ProveArgs pa;
  auto* prove = app.add_subcommand("prove", "Search a proof or check a certificate");
  prove->add_option("file", pa.file)->required();
  prove->add_option("statement", pa.statement);
  prove->add_option("--check", pa.check, "Certificate to check");
  prove->add_option("-o", pa.out, "Write the certificate here");

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle", "Compare the fixpoint semantics with the runtime");
  oracle->add_option("file", oa.file)->required();
  oracle->add_option("--iterations", oa.iterations, "Fixpoint iterations")->check(CLI::PositiveNumber);
  oracle->add_option("--universe", oa.universe, "Ground terms separated by ';'");
  oracle->add_option("--mutate", oa.mutate, "Drop one qualification condition (index modulo the sites)");

  for (auto* sub : {check, transform, solve_cmd, prove, oracle}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kIo;
  }

  try {
    if (*check) return cmd_check(check_file, g);
    if (*transform) return cmd_transform(ta, g);
    if (*solve_cmd) return cmd_solve(solve_file, solve_goal, g);
    if (*prove) return cmd_prove(pa, g);
    if (*oracle) return cmd_oracle(oa, g);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const SyntaxError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << to_string(d) << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kIo;
}
