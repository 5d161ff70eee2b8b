#include <map>

#include <gtest/gtest.h>

#include <rellift/pullbacks.hpp>

#include "oracles.hpp"

using namespace rellift;

namespace {

// Brute force over every pair of maps into every D, not just one per
// isomorphism class. Returns true iff every square has all fill-ins.
bool wpb_oracle(const FunctorSpec& F, std::size_t N, bool g_injective) {
  for (std::size_t d = 0; d <= N; ++d)
    for (std::size_t b = 0; b <= N; ++b)
      for (std::size_t c = 0; c <= N; ++c) {
        bool ok = for_each_function(b, d, [&](const FinFun& f) {
          return for_each_function(c, d, [&](const FinFun& g) {
            if (g_injective && !g.injective()) return true;
            std::vector<std::pair<index_t, index_t>> apex;
            for (index_t x = 0; x < b; ++x)
              for (index_t y = 0; y < c; ++y)
                if (f(x) == g(y)) apex.emplace_back(x, y);
            std::vector<index_t> l, r;
            for (auto [x, y] : apex) {
              l.push_back(x);
              r.push_back(y);
            }
            const auto Fp1 = F.map(FinFun(apex.size(), b, l)), Fp2 = F.map(FinFun(apex.size(), c, r));
            const auto Ff = F.map(f), Fg = F.map(g);
            std::set<std::pair<index_t, index_t>> fills;
            for (index_t q = 0; q < Fp1.dom(); ++q) {
              if (g_injective && !fills.emplace(Fp1(q), Fp2(q)).second) return false;
              fills.emplace(Fp1(q), Fp2(q));
            }
            for (index_t u = 0; u < Ff.dom(); ++u)
              for (index_t v = 0; v < Fg.dom(); ++v)
                if (Ff(u) == Fg(v) && !fills.count({u, v})) return false;
            return true;
          });
        });
        if (!ok) return false;
      }
  return true;
}

// Canonical form of a cospan under relabelling: the sorted multiset of fibre sizes.
std::vector<std::pair<std::size_t, std::size_t>> fibre_profile(const FinFun& f, const FinFun& g) {
  std::vector<std::pair<std::size_t, std::size_t>> p(f.cod());
  for (auto v : f.images()) ++p[v].first;
  for (auto v : g.images()) ++p[v].second;
  std::sort(p.begin(), p.end());
  return p;
}

}  // namespace

TEST(Pullback, CanonicalApexIsTheFibreProduct) {
  const Cospan c(FinFun(3, 2, {0, 1, 1}), FinFun(2, 2, {1, 1}));
  const auto p = pullback(c);
  EXPECT_EQ(p.apex, 4u);
  EXPECT_EQ(p.left, FinFun(4, 3, {1, 1, 2, 2}));
  EXPECT_EQ(p.right, FinFun(4, 2, {0, 1, 0, 1}));
  EXPECT_THROW(Cospan(FinFun(1, 2, {0}), FinFun(1, 3, {0})), usage_error);
}

TEST(CospanShapes, OnePerIsomorphismClass) {
  for (std::size_t N = 0; N <= 3; ++N) {
    std::set<std::vector<std::pair<std::size_t, std::size_t>>> classes, inj_classes;
    for (std::size_t d = 0; d <= N; ++d)
      for (std::size_t b = 0; b <= N; ++b)
        for (std::size_t c = 0; c <= N; ++c)
          for_each_function(b, d, [&](const FinFun& f) {
            return for_each_function(c, d, [&](const FinFun& g) {
              classes.insert(fibre_profile(f, g));
              if (g.injective()) inj_classes.insert(fibre_profile(f, g));
              return true;
            });
          });
    const auto shapes = detail::cospan_shapes(N, false);
    std::set<std::vector<std::pair<std::size_t, std::size_t>>> got;
    for (const auto& s : shapes) got.insert(s.fibres);
    EXPECT_EQ(got, classes) << N;
    EXPECT_EQ(shapes.size(), classes.size());
    EXPECT_EQ(detail::cospan_shapes(N, true).size(), inj_classes.size());
  }
}

TEST(Wpb, AgreesWithBruteForceOverAllCospans) {
  for (auto expr : {"P(X)", "X^2", "2*X^2+1", "Filt(X)", "Ultra(X)", "T32(X)", "Nb(X)", "M[Z2](X)", "M[N2](X)",
                    "M[B](X)", "Pn[2](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    const std::size_t N = F.kind() == FunctorKind::Nb ? 2 : 3;
    EXPECT_EQ(check_wpb(F, N).verdict == Verdict::pass, wpb_oracle(F, N, false)) << expr;
    EXPECT_EQ(check_inverse_images(F, N).verdict == Verdict::pass, wpb_oracle(F, N, true)) << expr;
  }
}

TEST(Wpb, Catalog) {
  for (auto expr : {"P(X)", "X^2", "2*X^2+1", "M[B](X)", "Filt(X)", "Ultra(X)"})
    EXPECT_EQ(check_wpb(FunctorSpec::parse(expr), 3).verdict, Verdict::pass) << expr;
  for (auto expr : {"T32(X)", "Mono(X)", "Nb(X)", "M[Z2](X)", "M[Z3](X)", "M[N2](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    const auto rep = check_wpb(F, 3);
    ASSERT_EQ(rep.verdict, Verdict::fail) << expr;
    EXPECT_TRUE(replay_pullback_witness(F, report_from_json(report_to_json(rep)).witnesses[0])) << expr;
  }
}

TEST(Wpb, BoundedPowersetPassesUpToTwoAndFailsFromThree) {
  EXPECT_EQ(check_wpb(FunctorSpec::parse("Pn[2](X)"), 4).verdict, Verdict::pass);
  const auto F = FunctorSpec::parse("Pn[3](X)");
  const auto rep = check_wpb(F, 3);
  ASSERT_EQ(rep.verdict, Verdict::fail);
  EXPECT_TRUE(replay_pullback_witness(F, rep.witnesses[0]));
}

TEST(Wpb, ReplayRejectsForgedWitness) {
  const auto F = FunctorSpec::parse("P(X)");
  Witness w{"wpb-no-fill-in",
            {{"f", fun_to_json(FinFun(2, 1, {0, 0}))}, {"g", fun_to_json(FinFun(2, 1, {0, 0}))}, {"b", 3}, {"c", 3}},
            ""};
  EXPECT_FALSE(replay_pullback_witness(F, w));
}

TEST(Wpb, BoundSkipsMakeTheVerdictInconclusive) {
  const auto rep = check_wpb(FunctorSpec::parse("Nb(X)"), 4);
  // Nb fails on small cospans before any skip matters
  EXPECT_EQ(rep.verdict, Verdict::fail);
  const auto mono = check_inverse_images(FunctorSpec::parse("D[2](X)"), 5);
  EXPECT_TRUE(mono.verdict == Verdict::pass || mono.verdict == Verdict::inconclusive);
  if (mono.verdict == Verdict::inconclusive) EXPECT_GT(mono.details["cospans_skipped"].get<std::size_t>(), 0u);
}

TEST(InverseImages, Catalog) {
  for (auto expr : {"Mono(X)", "Nb(X)", "M[Z2](X)", "M[Z3](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    const auto rep = check_inverse_images(F, 3);
    ASSERT_EQ(rep.verdict, Verdict::fail) << expr;
    EXPECT_TRUE(replay_pullback_witness(F, rep.witnesses[0])) << expr;
  }
  EXPECT_EQ(check_inverse_images(FunctorSpec::parse("T32(X)"), 3).verdict, Verdict::pass);
}

TEST(Monoid, PositiveAndRefinableMatchesWpb) {
  std::map<std::string, std::pair<bool, bool>> expected = {
      {"B", {true, true}}, {"Z2", {false, true}}, {"Z3", {false, true}}, {"N2", {true, false}}, {"N3", {true, false}}};
  for (const auto& name : MonoidRegistry::instance().names()) {
    const auto M = MonoidRegistry::instance().get(name);
    const auto rep = check_monoid_conditions(*M);
    const bool pos = rep.details["positive"].get<bool>(), ref = rep.details["refinable"].get<bool>();
    if (expected.count(name)) {
      EXPECT_EQ(pos, expected[name].first) << name;
      EXPECT_EQ(ref, expected[name].second) << name;
    }
    const auto wpb = check_wpb(FunctorSpec::parse("M[" + name + "](X)"), 3);
    EXPECT_EQ(pos && ref, wpb.verdict == Verdict::pass) << name;
  }
}
