// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <rellift/batteries.hpp>
#include <rellift/distlaw.hpp>
#include <rellift/pullbacks.hpp>
#include <rellift/search.hpp>

#include "oracles.hpp"

using namespace rellift;

namespace {

// pinned limits
constexpr double a1_limit_s = 60;
constexpr double a3_limit_s = 600;
constexpr double a9_limit_s = 300;

struct Row {
  std::string id;
  bool pass = true;
  std::vector<std::string> facts, problems;

  void check(bool ok, const std::string& what) { ok ? facts.push_back(what) : (pass = false, problems.push_back(what)); }
};

std::string join(const std::vector<std::string>& v, const char* sep = "; ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string secs(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", ms / 1000);
  return buf;
}

std::vector<std::string> info;

Row a1() {
  Row row{"A1"};
  Stopwatch sw;
  const auto P = FunctorSpec::parse("P(X)");
  SearchOptions opt;
  opt.max_size = 3;
  opt.support = 3;
  auto out = search_laws(P, opt);
  row.check(out.verdict == Verdict::pass, "search P(X) N=3 support 3 complete with " + std::to_string(out.solutions.size()) + " solutions");
  if (out.solutions.size() > 3) {
    opt.support = 4;
    out = search_laws(P, opt);
    row.check(out.verdict == Verdict::pass, "escalated to support 4: " + std::to_string(out.solutions.size()) + " solutions");
  }
  row.check(out.solutions.size() == 3, "exactly 3 solutions");
  std::multiset<std::string> labels;
  for (const auto& c : classify_solutions(out)) labels.insert(c.label);
  row.check(labels == std::multiset<std::string>{"Barr", "Image", "RestrictedImage"},
            "classified " + join({labels.begin(), labels.end()}, ", "));
  row.check(out.all_verified(), "every solution passes the law axioms");
  row.check(sw.ms() < a1_limit_s * 1000, secs(sw.ms()) + " < 60 s");
  return row;
}

Row a2() {
  Row row{"A2"};
  const auto P = FunctorSpec::parse("P(X)");
  const auto barr = DistLaw::barr(P), img = DistLaw::image(), rimg = DistLaw::restricted_image();
  const index_t fam = (1u << 0b011) | (1u << 0b100);  // {{0,1},{2}} over X = 3
  auto row_of = [&](const DistLaw& l, std::size_t n, index_t t) { return detail::render_row(P, n, l.apply(n, t)); };
  auto eq = [&](const std::string& got, const std::string& want, const std::string& what) {
    row.check(got == want, what + " = " + got + (got == want ? "" : " (want " + want + ")"));
  };
  eq(row_of(barr, 3, fam), "{{0,2},{1,2},{0,1,2}}", "barr σ{{0,1},{2}}");
  eq(row_of(img, 3, fam), "{{0,1,2}}", "image σ{{0,1},{2}}");
  eq(row_of(rimg, 3, fam), "{{0,1,2}}", "restricted σ{{0,1},{2}}");
  for (std::size_t n = 0; n <= 3; ++n)
    for (const auto* l : {&barr, &img, &rimg})
      if (row_of(*l, n, 0) != "{{}}") row.check(false, l->name() + " σ(∅) at |X|=" + std::to_string(n));
  row.check(true, "σ(∅) = {∅} for all three laws, |X| ≤ 3");
  eq(row_of(rimg, 2, 1u << 0), "{}", "restricted σ{∅}");
  eq(row_of(barr, 2, (1u << 0) | (1u << 0b10)), "{}", "barr σ{∅,{1}}");
  const auto line = render_law_carrier(barr, 3);
  row.check(line.find("{{0,1},{2}} ↦ {{0,2},{1,2},{0,1,2}}\n") != std::string::npos, "rendered table line present");
  return row;
}

Row a3() {
  Row row{"A3"};
  Stopwatch sw;
  for (auto expr : {"P(X)", "X^2", "2*X^2+1", "M[B](X)", "Filt(X)", "Ultra(X)"}) {
    const auto rep = check_wpb(FunctorSpec::parse(expr), 4);
    row.check(rep.verdict == Verdict::pass, std::string(expr) + " holds at N=4 (" + to_string(rep.verdict) + ")");
  }
  for (auto expr : {"Pn[2](X)", "T32(X)", "Mono(X)", "Nb(X)", "M[Z2](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    const auto rep = check_wpb(F, 4);
    const bool replayed = !rep.witnesses.empty() &&
                          replay_pullback_witness(F, report_from_json(report_to_json(rep)).witnesses[0]);
    row.check(rep.verdict == Verdict::fail && replayed,
              std::string(expr) + " fails at N=4 with replayed witness (" + to_string(rep.verdict) + ")");
  }
  const auto pn3 = check_wpb(FunctorSpec::parse("Pn[3](X)"), 4);
  info.push_back("A3 Pn[3](X) at N=4: " + std::string(to_string(pn3.verdict)) +
                 (pn3.witnesses.empty() ? "" : ", witness " + pn3.witnesses[0].text));
  row.check(sw.ms() < a3_limit_s * 1000, secs(sw.ms()) + " < 600 s");
  return row;
}

std::vector<Extension> a4_passing() {
  const auto P = FunctorSpec::parse("P(X)"), Filt = FunctorSpec::parse("Filt(X)"), Mono = FunctorSpec::parse("Mono(X)");
  return {Extension(ExtensionKind::Barr, P),     Extension(ExtensionKind::Image, P),
          Extension(ExtensionKind::RestrictedImage, P), Extension(ExtensionKind::BoxFilt, Filt),
          Extension(ExtensionKind::BoxMono, Mono), Extension(ExtensionKind::DiamondMono, Mono)};
}

Row a4() {
  Row row{"A4"};
  for (const auto& E : a4_passing()) {
    const auto rep = check_extension_axioms(E, 3);
    row.check(rep.verdict == Verdict::pass, E.name() + " passes (" + to_string(rep.verdict) + ")");
  }
  for (auto expr : {"Mono(X)", "Pn[2](X)"}) {
    const auto rep = check_extension_axioms(Extension(ExtensionKind::Barr, FunctorSpec::parse(expr)), 3);
    row.check(rep.verdict == Verdict::fail && !rep.witnesses.empty(),
              std::string("barr over ") + expr + " fails with witness (" + to_string(rep.verdict) + ")");
  }
  return row;
}

Row a5() {
  Row row{"A5"};
  for (const auto& E : a4_passing()) {
    const auto res = lemma6_battery(E, 3);
    const bool want = E.kind() == ExtensionKind::Barr;
    const bool ok = res.all_equal() && res.holds[0] == want;
    row.check(ok, E.name() + ": six conditions " + (res.all_equal() ? (res.holds[0] ? "all true" : "all false") : "disagree"));
  }
  const auto pn2 = lemma6_battery(Extension(ExtensionKind::Barr, FunctorSpec::parse("Pn[2](X)")), 3);
  info.push_back(std::string("A5 barr over Pn[2](X): six conditions ") +
                 (pn2.all_equal() ? (pn2.holds[0] ? "all true" : "all false") : "disagree"));
  return row;
}

Row a6() {
  Row row{"A6"};
  SearchOptions opt;
  opt.max_size = 4;
  opt.support = 3;
  for (auto expr : {"T32(X)", "Pn[2](X)", "Pn[3](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    const auto out = search_laws(F, opt);
    std::string what = std::string(expr) + " N≤4: " + to_string(out.verdict);
    bool ok = out.verdict == Verdict::unsat && out.obstruction;
    if (out.obstruction) {
      const bool valid = validate_obstruction(F, obstruction_from_json(obstruction_to_json(*out.obstruction)));
      ok = ok && valid;
      what += ", obstruction at carrier size " + std::to_string(out.obstruction->size) + " with " +
              std::to_string(out.obstruction->groups.size()) + " groups" + (valid ? " (re-validated)" : " (INVALID)");
    } else {
      what += ", " + std::to_string(out.solutions.size()) + " solution(s)";
    }
    if (std::string(expr) == "Pn[3](X)") info.push_back("A6 " + what);
    else row.check(ok, what);
  }
  return row;
}

Row a7() {
  Row row{"A7"};
  struct Case {
    const char* expr;
    std::size_t K, N;
  };
  for (const auto& c : {Case{"2", 2, 3}, Case{"3", 2, 3}, Case{"3*X", 2, 3}, Case{"X^2", 3, 3}, Case{"X^3", 4, 2},
                        Case{"X+2", 2, 3}, Case{"X+1", 2, 3}}) {
    const auto rep = check_elementwise_bounded(FunctorSpec::parse(c.expr), BoundedFamily::constant(c.K), c.N);
    row.check(rep.verdict == Verdict::pass, std::string(c.expr) + " K=" + std::to_string(c.K) + " N=" +
                                                std::to_string(c.N) + " " + to_string(rep.verdict));
  }
  for (auto expr : {"P(X)", "Mono(X)"})
    for (std::size_t k = 2; k <= 4; ++k) {
      const auto rep = check_ewb_witness_set(FunctorSpec::parse(expr), k);
      row.check(rep.verdict == Verdict::fail, std::string(expr) + " κ=" + std::to_string(k) + " " + to_string(rep.verdict));
    }
  return row;
}

Row a8() {
  Row row{"A8"};
  for (const auto& name : MonoidRegistry::instance().names()) {
    const auto rep = check_monoid_conditions(*MonoidRegistry::instance().get(name));
    const bool pr = rep.details["positive"].get<bool>() && rep.details["refinable"].get<bool>();
    const bool wpb = check_wpb(FunctorSpec::parse("M[" + name + "](X)"), 3).verdict == Verdict::pass;
    row.check(pr == wpb, name + ": positive∧refinable " + (pr ? "yes" : "no") + ", WPB " + (wpb ? "yes" : "no"));
  }
  return row;
}

bool egli_milner(const Rel& r, std::uint64_t A, std::uint64_t B) {
  for (std::size_t a = 0; a < r.dom(); ++a) {
    if (!((A >> a) & 1)) continue;
    bool hit = false;
    for (std::size_t b = 0; b < r.cod(); ++b) hit = hit || (((B >> b) & 1) && r.test(a, b));
    if (!hit) return false;
  }
  for (std::size_t b = 0; b < r.cod(); ++b) {
    if (!((B >> b) & 1)) continue;
    bool hit = false;
    for (std::size_t a = 0; a < r.dom(); ++a) hit = hit || (((A >> a) & 1) && r.test(a, b));
    if (!hit) return false;
  }
  return true;
}

template <class Fn>
bool all_rels(std::size_t N, Fn&& fn) {
  for (std::size_t a = 0; a <= N; ++a)
    for (std::size_t b = 0; b <= N; ++b)
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << (a * b)); ++m)
        if (!fn(Rel::from_mask(a, b, m))) return false;
  return true;
}

Row a9() {
  Row row{"A9"};
  Stopwatch sw;
  const auto P = FunctorSpec::parse("P(X)");

  bool rt = true;
  for (const auto& law : {DistLaw::barr(P), DistLaw::image(), DistLaw::restricted_image(),
                          DistLaw::from_morphism(morphism_by_name("box-filt"))}) {
    const auto back = extension_to_law(law_to_extension(law, 3), 3);
    for (std::size_t n = 0; n <= 3; ++n) rt = rt && back.carrier(n) == law.carrier(n);
  }
  for (auto kind : {ExtensionKind::Barr, ExtensionKind::Image, ExtensionKind::RestrictedImage}) {
    const Extension E(kind, P);
    const auto E2 = law_to_extension(extension_to_law(E, 3), 3);
    rt = rt && all_rels(3, [&](const Rel& r) { return E2.lift(r) == E.lift(r); });
  }
  row.check(rt, "law ↔ extension round trip on carriers ≤ 3");

  std::mt19937_64 rng(21);
  bool indep = true;
  for (auto expr : {"P(X)", "X^2+1", "Filt(X)", "T32(X)"}) {
    const auto F = FunctorSpec::parse(expr);
    for (int i = 0; i < 200 && indep; ++i) {
      const auto r = oracle::random_rel(rng, 3, 3);
      std::vector<std::pair<index_t, index_t>> apex;
      std::uniform_int_distribution<int> copies(1, 3);
      for (auto [x, y] : r.pairs())
        for (int c = copies(rng); c > 0; --c) apex.emplace_back(static_cast<index_t>(x), static_cast<index_t>(y));
      std::shuffle(apex.begin(), apex.end(), rng);
      std::vector<index_t> l, rr;
      for (auto [x, y] : apex) l.push_back(x), rr.push_back(y);
      const auto Ff = F.map(FinFun(l.size(), 3, l)), Fg = F.map(FinFun(rr.size(), 3, rr));
      indep = compose_rel(converse(graph(Ff)), graph(Fg)) == barr_lift(F, r);
    }
  }
  row.check(indep, "Barr lifting independent of the span (800 random spans)");

  row.check(all_rels(3, [&](const Rel& r) {
              const auto L = barr_lift(P, r);
              for (std::uint64_t A = 0; A < powerset_size(r.dom()); ++A)
                for (std::uint64_t B = 0; B < powerset_size(r.cod()); ++B)
                  if (L.test(A, B) != egli_milner(r, A, B)) return false;
              return true;
            }),
            "Barr over P is Egli-Milner on carriers ≤ 3");

  bool l1 = true;
  for (const auto& E : a4_passing()) l1 = l1 && lemma1_battery(E, 3).verdict == Verdict::pass;
  row.check(l1, "converse/identity/composition inequalities on all six extensions");

  std::mt19937_64 rng2(40);
  const std::vector<FunctorSpec> fs = {P, FunctorSpec::parse("Mono(X)"), FunctorSpec::parse("X^2+1"),
                                       FunctorSpec::parse("Pn[2](X)"), FunctorSpec::parse("T32(X)")};
  std::uniform_int_distribution<std::size_t> ysize(0, 4), xsize(1, 2);
  bool ineq = true;
  for (int i = 0; i < 1000 && ineq; ++i) {
    const auto e = oracle::random_fun(rng2, ysize(rng2), xsize(rng2));
    const auto rep = check_codiagonal_formula(fs[i % fs.size()], e);
    ineq = rep.verdict == Verdict::pass && rep.details["inequality"].get<bool>();
  }
  row.check(ineq, "codiagonal join ≤ F e on 1000 random instances");
  row.check(sw.ms() < a9_limit_s * 1000, secs(sw.ms()) + " < 300 s");
  return row;
}

}  // namespace

int main() {
  const std::vector<std::function<Row()>> rows = {a1, a2, a3, a4, a5, a6, a7, a8, a9};
  bool all = true;
  for (const auto& fn : rows) {
    Row r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.problems.push_back(std::string("exception: ") + e.what());
    }
    all = all && r.pass;
    std::printf("%s %s  %s\n", r.id.c_str(), r.pass ? "PASS" : "FAIL",
                r.pass ? join(r.facts).c_str() : ("failed: " + join(r.problems) + " | ok: " + join(r.facts)).c_str());
    std::fflush(stdout);
  }
  for (const auto& s : info) std::printf("info: %s\n", s.c_str());
  return all ? 0 : 1;
}
