#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rellift/batteries.hpp"
#include "rellift/distlaw.hpp"
#include "rellift/functor_laws.hpp"
#include "rellift/monad.hpp"
#include "rellift/pullbacks.hpp"
#include "rellift/search.hpp"

namespace fs = std::filesystem;
using namespace rellift;
using nlohmann::json;

namespace {

struct Options {
  std::string command;
  std::string expr, kind, name, law;
  std::vector<std::string> paths;
  std::size_t max_size = 3, support = 3, jobs = 1, size = 2, K = 2, kappa = 2;
  std::size_t max_elements = 0;
  double timeout = 0;
  std::string format = "text";
  std::string rel, fun, labels, dump, verify;
  std::vector<std::string> monoid_files;
  bool inverse_images = false;
};

struct Result {
  Report rep;
  std::vector<std::string> lines;  // extra text-mode output
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw usage_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw usage_error("malformed JSON in " + what + ": " + e.what());
  }
}

// Inline JSON if the argument looks like JSON, otherwise a file name.
json load_json(const std::string& arg) {
  const auto p = arg.find_first_not_of(" \t");
  if (p != std::string::npos && (arg[p] == '{' || arg[p] == '[')) return parse_json(arg, "argument");
  return parse_json(slurp(arg), arg);
}

void build(CLI::App& app, Options& o) {
  app.require_subcommand(0, 1);
  app.fallthrough();
  app.add_option("--format", o.format, "text | json")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--max-size,-N", o.max_size, "largest carrier in sweeps");
  app.add_option("--mult-support", o.support, "largest family size in multiplication checks");
  app.add_option("--jobs,-j", o.jobs, "search worker threads");
  app.add_option("--timeout", o.timeout, "search time limit in seconds (0: none)");
  app.add_option("--max-elements", o.max_elements, "bound on |F X| (overrides RELLIFT_MAX_ELEMENTS)");
  app.add_option("--load-monoid", o.monoid_files, "register a monoid table, NAME=FILE");
  app.add_option("--verify-witness", o.verify, "replay a saved JSON report");

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->callback([&o, name] { o.command = name; });
    return s;
  };
  auto expr = [&](CLI::App* s) { s->add_option("expr", o.expr, "functor expression, e.g. \"P(X)\"")->required(); };
  auto kind_expr = [&](CLI::App* s) {
    s->add_option("kind", o.kind, "barr | image | restricted-image | box-filt | box-mono | diamond-mono")->required();
    expr(s);
  };

  expr(sub("parse", "parse a functor expression"));
  {
    auto* s = sub("object", "list the elements of F X");
    expr(s);
    s->add_option("--size,-n", o.size, "|X|");
    s->add_option("--labels", o.labels, "comma-separated element names for X");
  }
  {
    auto* s = sub("map", "apply F to a map");
    expr(s);
    s->add_option("--fun", o.fun, "map as JSON {dom, cod, images} or file")->required();
  }
  expr(sub("functor-laws", "check F(id) = id and F(g.f) = Fg.Ff"));
  {
    auto* s = sub("wpb", "weak pullback preservation sweep");
    expr(s);
    s->add_flag("--inverse-images", o.inverse_images, "only cospans with an injective leg");
  }
  expr(sub("inverse-images", "preservation of inverse images"));
  sub("monoid", "positivity and refinability of a registered monoid")
      ->add_option("name", o.name, "monoid name")
      ->required();
  {
    auto* s = sub("barr", "Barr lifting of a relation");
    expr(s);
    s->add_option("--rel", o.rel, "relation as JSON {dom, cod, pairs} or file")->required();
  }
  kind_expr(sub("ext-check", "extension axioms"));
  kind_expr(sub("monotone-check", "local monotonicity"));
  kind_expr(sub("lemma1", "converse, identity and composition inequalities"));
  kind_expr(sub("lemma6", "the six equivalent monotonicity conditions"));
  {
    auto* s = sub("ewb", "elementwise boundedness with constant K");
    expr(s);
    s->add_option("--K", o.K, "|K_X|");
  }
  {
    auto* s = sub("ewb-witness", "search F κ for an element without proper support");
    expr(s);
    s->add_option("--kappa", o.kappa, "|κ|");
  }
  {
    auto* s = sub("codiagonal", "F e as a join over factorizations through X+X");
    expr(s);
    s->add_option("--fun", o.fun, "surjection e as JSON {dom, cod, images} or file")->required();
  }
  sub("monad-check", "monad axioms")->add_option("name", o.name, "P | Filt | Ultra | Mono | Nb | 1 | P-cap")->required();
  sub("morphism-check", "monad morphism axioms")
      ->add_option("name", o.name, "id | terminal | box-filt | box-mono | diamond-mono | diamond-filt")
      ->required();
  {
    auto* s = sub("law-check", "distributive law axioms");
    s->add_option("law", o.law, "barr | image | restricted-image | from-morphism:<name>")->required();
    expr(s);
  }
  {
    auto* s = sub("search", "enumerate distributive laws over P");
    expr(s);
    s->add_option("--dump-solutions", o.dump, "write solution tables to this directory");
  }
  sub("classify", "classify dumped solution tables")
      ->add_option("paths", o.paths, "solution files or directories")
      ->required();
}

Options parse_args(std::vector<std::string> args) {
  Options o;
  CLI::App app{"rellift"};
  build(app, o);
  std::reverse(args.begin(), args.end());
  app.parse(args);
  return o;
}

void load_monoids(const Options& o) {
  for (const auto& spec : o.monoid_files) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw usage_error("--load-monoid expects NAME=FILE");
    const auto file = spec.substr(eq + 1);
    MonoidRegistry::instance().add(monoid_from_json(spec.substr(0, eq), parse_json(slurp(file), file)));
  }
}

FunctorSpec functor(const Options& o) { return FunctorSpec::parse(o.expr); }

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(part);
  return out;
}

Result cmd_parse(const Options& o) {
  const auto F = functor(o);
  Result r;
  r.rep.command = "parse " + o.expr;
  r.rep.details["canonical"] = F.name();
  auto sizes = json::array();
  for (std::size_t n = 0; n <= 3; ++n) sizes.push_back(F.size_estimate(n));
  r.rep.details["sizes"] = sizes;
  return r;
}

Result cmd_object(const Options& o) {
  const auto F = functor(o);
  FinSet X = o.labels.empty() ? FinSet(o.size) : FinSet(o.size, split_labels(o.labels));
  Result r;
  r.rep.command = "object " + F.name() + " |X|=" + std::to_string(o.size);
  auto elems = json::array();
  const auto m = F.size(o.size);
  for (index_t a = 0; a < m; ++a) {
    auto text = F.render(o.size, a, &X);
    r.lines.push_back(std::to_string(a) + ": " + text);
    elems.push_back(std::move(text));
  }
  r.rep.instances_checked = m;
  r.rep.details["size"] = m;
  r.rep.details["elements"] = elems;
  return r;
}

Result cmd_map(const Options& o) {
  const auto F = functor(o);
  const auto f = fun_from_json(load_json(o.fun));
  const auto Ff = F.map(f);
  Result r;
  r.rep.command = "map " + F.name() + " f = " + describe(f);
  r.rep.instances_checked = Ff.dom();
  r.rep.details["map"] = fun_to_json(Ff);
  for (index_t a = 0; a < Ff.dom(); ++a)
    r.lines.push_back(F.render(f.dom(), a) + " ↦ " + F.render(f.cod(), Ff(a)));
  return r;
}

Result cmd_monoid(const Options& o) {
  const auto M = MonoidRegistry::instance().get(o.name);
  Result r{check_monoid_conditions(*M), {}};
  r.rep.details["table"] = monoid_to_json(*M);
  return r;
}

Result cmd_barr(const Options& o) {
  const auto F = functor(o);
  const auto rel = rel_from_json(load_json(o.rel));
  const auto lifted = barr_lift(F, rel);
  Result r;
  r.rep.command = "barr " + F.name();
  r.rep.instances_checked = lifted.dom() * lifted.cod();
  r.rep.details["lifted"] = rel_to_json(lifted);
  for (auto [a, b] : lifted.pairs())
    r.lines.push_back(F.render(rel.dom(), static_cast<index_t>(a)) + " ~ " +
                      F.render(rel.cod(), static_cast<index_t>(b)));
  return r;
}

Result cmd_search(const Options& o) {
  SearchOptions opt;
  opt.max_size = o.max_size;
  opt.support = o.support;
  opt.jobs = o.jobs;
  opt.timeout_s = o.timeout;
  const auto outcome = search_laws(functor(o), opt);
  const auto labels = classify_solutions(outcome);
  Result r{search_report(outcome, labels), {}};
  r.rep.command += " N=" + std::to_string(o.max_size) + " support=" + std::to_string(o.support);
  const auto unknown = std::count_if(labels.begin(), labels.end(), [](const auto& c) { return c.label == "UNKNOWN"; });
  if (unknown && r.rep.note.empty())
    r.rep.note = std::to_string(unknown) + " solution(s) match no named law; a larger --mult-support may refute them";
  for (std::size_t i = 0; i < outcome.solutions.size(); ++i) {
    std::string line = "solution " + std::to_string(i) + ": " + labels[i].label;
    for (std::size_t k = 1; k < labels[i].matches.size(); ++k) line += " = " + labels[i].matches[k];
    line += " (axioms " + std::string(to_string(outcome.verification[i])) + ")";
    r.lines.push_back(line);
  }
  if (outcome.obstruction) {
    const auto& ob = *outcome.obstruction;
    r.lines.push_back("obstruction at carrier size " + std::to_string(ob.size) + " with " +
                      std::to_string(ob.groups.size()) + " constraint groups" + (ob.minimized ? "" : " (not minimized)"));
    for (const auto& g : ob.groups) r.lines.push_back("  " + group_to_json(g).dump());
  }
  if (!o.dump.empty()) {
    fs::create_directories(o.dump);
    for (std::size_t i = 0; i < outcome.solutions.size(); ++i) {
      const auto base = fs::path(o.dump) / ("solution_" + std::to_string(i));
      auto j = solution_to_json(outcome.solutions[i]);
      j["label"] = labels[i].label;
      std::ofstream(base.string() + ".json") << j.dump(2) << "\n";
      std::ofstream(base.string() + ".txt") << "# " << labels[i].label << "\n" << render_solution(outcome.solutions[i]);
    }
    if (outcome.obstruction)
      std::ofstream((fs::path(o.dump) / "obstruction.json").string()) << obstruction_to_json(*outcome.obstruction).dump(2) << "\n";
  }
  return r;
}

Result cmd_classify(const Options& o) {
  std::vector<std::string> files;
  for (const auto& p : o.paths) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".json" && e.path().stem().string().rfind("solution", 0) == 0)
          files.push_back(e.path().string());
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw usage_error("classify: no solution files");

  std::map<std::string, std::vector<std::pair<std::string, DistLaw>>> by_functor;
  for (const auto& f : files) {
    auto law = solution_from_json(parse_json(slurp(f), f));
    by_functor[law.functor().name()].emplace_back(f, std::move(law));
  }
  Result r;
  r.rep.command = "classify";
  auto out = json::array();
  std::size_t unknown = 0;
  for (auto& [name, entries] : by_functor) {
    SearchOutcome oc{entries.front().second.functor(), {}, Verdict::pass, {}, {}, std::nullopt, {}, ""};
    oc.options.max_size = SIZE_MAX;
    for (auto& [file, law] : entries) {
      oc.options.max_size = std::min(oc.options.max_size, law.stored_bound().value_or(0));
      oc.solutions.push_back(law);
    }
    const auto labels = classify_solutions(oc);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      unknown += labels[i].label == "UNKNOWN";
      out.push_back({{"file", entries[i].first}, {"functor", name}, {"label", labels[i].label}, {"matches", labels[i].matches}});
      r.lines.push_back(entries[i].first + ": " + labels[i].label);
    }
  }
  r.rep.instances_checked = files.size();
  r.rep.details["solutions"] = out;
  r.rep.details["unknown"] = unknown;
  return r;
}

Result run(const Options& o) {
  const auto& c = o.command;
  auto with_command = [&](Report rep, const std::string& prefix) {
    if (rep.command.empty()) rep.command = prefix;
    return Result{std::move(rep), {}};
  };
  if (c == "parse") return cmd_parse(o);
  if (c == "object") return cmd_object(o);
  if (c == "map") return cmd_map(o);
  if (c == "functor-laws") return with_command(check_functor_laws(functor(o), o.max_size), "functor-laws " + functor(o).name());
  if (c == "wpb") return {check_wpb(functor(o), o.max_size, o.inverse_images), {}};
  if (c == "inverse-images") return {check_inverse_images(functor(o), o.max_size), {}};
  if (c == "monoid") return cmd_monoid(o);
  if (c == "barr") return cmd_barr(o);
  if (c == "ext-check" || c == "monotone-check" || c == "lemma1" || c == "lemma6") {
    const Extension E(extension_kind_from_string(o.kind), functor(o));
    if (c == "ext-check") return {check_extension_axioms(E, o.max_size), {}};
    if (c == "monotone-check") return {check_local_monotonicity(E, o.max_size), {}};
    if (c == "lemma1") return {lemma1_battery(E, o.max_size), {}};
    auto res = lemma6_battery(E, o.max_size);
    Result r{res.report, {}};
    for (std::size_t k = 0; k < 6; ++k)
      r.lines.push_back("(" + std::to_string(k + 1) + ") " + lemma6_labels[k] + ": " + (res.holds[k] ? "holds" : "fails"));
    return r;
  }
  if (c == "ewb") return {check_elementwise_bounded(functor(o), BoundedFamily::constant(o.K), o.max_size), {}};
  if (c == "ewb-witness") return {check_ewb_witness_set(functor(o), o.kappa), {}};
  if (c == "codiagonal") return {check_codiagonal_formula(functor(o), fun_from_json(load_json(o.fun))), {}};
  if (c == "monad-check") return {monad_axiom_check(monad_by_name(o.name), o.max_size), {}};
  if (c == "morphism-check") return {monad_morphism_check(morphism_by_name(o.name), o.max_size), {}};
  if (c == "law-check") {
    const auto F = functor(o);
    const auto law = DistLaw::from_name(o.law, F);
    return {check_distlaw_axioms(law, o.max_size, o.support).combined("law-check " + o.law + " " + F.name()), {}};
  }
  if (c == "search") return cmd_search(o);
  if (c == "classify") return cmd_classify(o);
  throw usage_error("no command given (try --help)");
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::pass:
    case Verdict::unsat: return 0;
    case Verdict::fail: return 1;
    case Verdict::inconclusive: return 3;
  }
  return 3;
}

void print(const Result& r, OutputFormat fmt) {
  std::cout << emit_report(r.rep, fmt);
  if (fmt == OutputFormat::text)
    for (const auto& l : r.lines) std::cout << l << "\n";
}

bool same_witness(const Witness& a, const Witness& b) { return a.kind == b.kind && a.data == b.data; }

// Re-runs the recorded invocation; witnesses with a standalone replay are
// re-checked from their data alone.
Result verify(const std::string& path) {
  const auto j = parse_json(slurp(path), path);
  if (!j.contains("invocation") || !j["invocation"].is_array()) throw usage_error(path + ": report has no invocation");
  const auto recorded = report_from_json(j);
  const auto o = parse_args(j["invocation"].get<std::vector<std::string>>());
  load_monoids(o);
  const auto fresh = run(o).rep;

  Result r;
  r.rep.command = "verify-witness " + path;
  bool ok = fresh.verdict == recorded.verdict;
  r.lines.push_back(std::string("verdict ") + to_string(recorded.verdict) + (ok ? " reproduced" : " changed to " + std::string(to_string(fresh.verdict))));
  for (std::size_t i = 0; i < recorded.witnesses.size(); ++i) {
    const auto& w = recorded.witnesses[i];
    bool holds;
    if (w.kind == "wpb-no-fill-in" || w.kind == "inverse-image-not-unique")
      holds = replay_pullback_witness(functor(o), w);
    else if (w.kind == "law-multiplication")
      holds = replay_multiplication_witness(DistLaw::from_name(o.law, functor(o)), w);
    else
      holds = std::any_of(fresh.witnesses.begin(), fresh.witnesses.end(), [&](const Witness& x) { return same_witness(w, x); });
    ++r.rep.instances_checked;
    ok = ok && holds;
    r.lines.push_back("witness " + std::to_string(i) + " [" + w.kind + "]: " + (holds ? "still holds" : "does not reproduce"));
  }
  if (recorded.verdict == Verdict::unsat && j.contains("obstruction")) {
    const bool valid = validate_obstruction(functor(o), obstruction_from_json(j["obstruction"]));
    ++r.rep.instances_checked;
    ok = ok && valid;
    r.lines.push_back(std::string("obstruction certificate: ") + (valid ? "unsatisfiable" : "satisfiable"));
  }
  r.rep.verdict = ok ? Verdict::pass : Verdict::fail;
  return r;
}

std::vector<std::string> invocation_of(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--format" || a == "--verify-witness") {
      ++i;
      continue;
    }
    if (a.rfind("--format=", 0) == 0 || a.rfind("--verify-witness=", 0) == 0) continue;
    out.push_back(a);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Relation liftings and distributive laws over the powerset monad on finite sets"};
  build(app, o);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  const auto fmt = o.format == "json" ? OutputFormat::json : OutputFormat::text;
  try {
    if (o.max_elements) setenv("RELLIFT_MAX_ELEMENTS", std::to_string(o.max_elements).c_str(), 1);
    load_monoids(o);
    if (!o.verify.empty()) {
      const auto r = verify(o.verify);
      print(r, fmt);
      return r.rep.verdict == Verdict::pass ? 0 : 1;
    }
    auto r = run(o);
    r.rep.details["invocation"] = invocation_of(argc, argv);
    print(r, fmt);
    return exit_code(r.rep.verdict);
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const bound_error& e) {
    std::cerr << "bound exceeded: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
