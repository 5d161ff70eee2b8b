#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <rellift/batteries.hpp>

#include "oracles.hpp"

using namespace rellift;

namespace {

const FunctorSpec& P() {
  static const auto F = FunctorSpec::parse("P(X)");
  return F;
}

// A (Pr) B iff every a in A has an r-successor in B and every b in B an
// r-predecessor in A.
bool egli_milner(const oracle::Pairs& r, const oracle::Subset& A, const oracle::Subset& B) {
  for (auto a : A) {
    bool hit = false;
    for (auto b : B) hit = hit || r.count({a, b});
    if (!hit) return false;
  }
  for (auto b : B) {
    bool hit = false;
    for (auto a : A) hit = hit || r.count({a, b});
    if (!hit) return false;
  }
  return true;
}

oracle::Subset rel_image(const oracle::Pairs& r, const oracle::Subset& A) {
  oracle::Subset out;
  for (auto [x, y] : r)
    if (A.count(x)) out.insert(y);
  return out;
}

template <class Fn>
void for_each_rel(std::size_t N, Fn&& fn) {
  for (std::size_t a = 0; a <= N; ++a)
    for (std::size_t b = 0; b <= N; ++b)
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << (a * b)); ++m) fn(Rel::from_mask(a, b, m));
}

}  // namespace

TEST(BarrLift, PowersetIsEgliMilner) {
  for_each_rel(3, [](const Rel& r) {
    const auto lifted = barr_lift(P(), r);
    const auto pr = oracle::pairs_of(r);
    for (std::uint64_t A = 0; A < powerset_size(r.dom()); ++A)
      for (std::uint64_t B = 0; B < powerset_size(r.cod()); ++B)
        ASSERT_EQ(lifted.test(A, B), egli_milner(pr, oracle::subset_of_mask(A), oracle::subset_of_mask(B)));
  });
}

TEST(BarrLift, CommutesWithConverse) {
  for (auto expr : {"P(X)", "X^2", "2*X+1", "Mono(X)", "Pn[2](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    for_each_rel(F.kind() == FunctorKind::Mono ? 2 : 3, [&](const Rel& r) { ASSERT_EQ(barr_lift(F, converse(r)), converse(barr_lift(F, r))) << expr; });
  }
}

TEST(BarrLift, IndependentOfFactorization) {
  // spread each pair of r over several apex points, plus a few duplicates
  std::mt19937_64 rng(21);
  for (auto expr : {"P(X)", "X^2+1", "Filt(X)", "T32(X)"}) {
    const auto F = FunctorSpec::parse(expr);
    for (int i = 0; i < 200; ++i) {
      const auto r = oracle::random_rel(rng, 3, 3);
      std::vector<index_t> l, rr;
      std::uniform_int_distribution<int> copies(1, 3);
      for (auto [x, y] : r.pairs())
        for (int c = copies(rng); c > 0; --c) {
          l.push_back(static_cast<index_t>(x));
          rr.push_back(static_cast<index_t>(y));
        }
      std::vector<std::size_t> perm(l.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<index_t> pl, pr;
      for (auto p : perm) {
        pl.push_back(l[p]);
        pr.push_back(rr[p]);
      }
      const auto n = pl.size();
      const auto Ff = F.map(FinFun(n, 3, pl)), Fg = F.map(FinFun(n, 3, pr));
      ASSERT_EQ(compose_rel(converse(graph(Ff)), graph(Fg)), barr_lift(F, r)) << expr;
    }
  }
}

TEST(BarrLift, GraphsGoToGraphs) {
  std::mt19937_64 rng(4);
  for (auto expr : {"P(X)", "Mono(X)", "Nb(X)", "D[2](X)"}) {
    const auto F = FunctorSpec::parse(expr);
    for (int i = 0; i < 50; ++i) {
      const auto f = oracle::random_fun(rng, 3, 3);
      EXPECT_EQ(barr_lift(F, graph(f)), graph(F.map(f))) << expr;
    }
  }
}

TEST(NamedExtension, ImageAndRestrictedImageClosedForms) {
  for_each_rel(3, [](const Rel& r) {
    const auto pr = oracle::pairs_of(r);
    const auto im = named_extension(ExtensionKind::Image, P(), r);
    const auto ri = named_extension(ExtensionKind::RestrictedImage, P(), r);
    for (std::uint64_t A = 0; A < powerset_size(r.dom()); ++A) {
      const auto img = rel_image(pr, oracle::subset_of_mask(A));
      for (std::uint64_t B = 0; B < powerset_size(r.cod()); ++B) {
        const bool is_img = oracle::subset_of_mask(B) == img;
        ASSERT_EQ(im.test(A, B), is_img);
        ASSERT_EQ(ri.test(A, B), is_img && (A == 0 || !img.empty()));
      }
    }
  });
}

TEST(NamedExtension, DiamondMonoIsInverseImageOfTheConverse) {
  const auto F = FunctorSpec::parse("Mono(X)");
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto r = oracle::random_rel(rng, 3, 2);
    const auto lifted = named_extension(ExtensionKind::DiamondMono, F, r);
    const auto pr = oracle::pairs_of(r);
    const auto src = F.object(3), dst = F.object(2);
    for (index_t a = 0; a < src->size; ++a) {
      oracle::System sys;
      for (std::uint64_t m = 0; m < 8; ++m)
        if ((src->code(a) >> m) & 1u) sys.insert(oracle::subset_of_mask(m));
      std::uint64_t expect = 0;
      for (std::uint64_t B = 0; B < 4; ++B) {
        oracle::Subset pre;
        for (auto [x, y] : pr)
          if ((B >> y) & 1u) pre.insert(x);
        if (sys.count(pre)) expect |= std::uint64_t{1} << B;
      }
      ASSERT_EQ(lifted.row_bits(a).elements(), std::vector<index_t>{dst->lookup(expect)});
    }
  }
}

TEST(NamedExtension, RequiresTheMatchingFunctor) {
  EXPECT_THROW(Extension(ExtensionKind::Image, FunctorSpec::parse("Mono(X)")), usage_error);
  EXPECT_THROW(Extension(ExtensionKind::BoxFilt, P()), usage_error);
  EXPECT_THROW(Extension(ExtensionKind::DiamondMono, FunctorSpec::parse("Filt(X)")), usage_error);
  EXPECT_THROW(extension_kind_from_string("box"), usage_error);
  EXPECT_EQ(extension_kind_from_string("restricted-image"), ExtensionKind::RestrictedImage);
}

TEST(Tabulated, RejectsTablesThatAreNotOnGraphs) {
  auto bad = [](const Rel& r) {
    auto out = barr_lift(P(), r);
    if (r.dom() == 1 && r.cod() == 1) out = Rel::full(2, 2);
    return out;
  };
  EXPECT_THROW(Extension::tabulated(P(), 2, bad), usage_error);
  auto ext = Extension::tabulated(P(), 2, [](const Rel& r) { return barr_lift(P(), r); });
  EXPECT_THROW(ext.lift(Rel(3, 1)), bound_error);
}

TEST(ExtensionAxioms, NamedExtensionsPassAtThree) {
  const auto Filt = FunctorSpec::parse("Filt(X)"), Mono = FunctorSpec::parse("Mono(X)");
  for (const auto& E : {Extension(ExtensionKind::Barr, P()), Extension(ExtensionKind::Image, P()),
                        Extension(ExtensionKind::RestrictedImage, P()), Extension(ExtensionKind::BoxFilt, Filt),
                        Extension(ExtensionKind::BoxMono, Mono), Extension(ExtensionKind::DiamondMono, Mono)}) {
    const auto rep = check_extension_axioms(E, 3);
    EXPECT_EQ(rep.verdict, Verdict::pass) << E.name() << ": " << (rep.witnesses.empty() ? "" : rep.witnesses[0].text);
  }
}

TEST(ExtensionAxioms, BarrOverMonoIsNotFunctorial) {
  const auto rep = check_extension_axioms(Extension(ExtensionKind::Barr, FunctorSpec::parse("Mono(X)")), 3);
  ASSERT_EQ(rep.verdict, Verdict::fail);
  EXPECT_EQ(rep.witnesses[0].kind, "extension-composition");
  const auto r = rel_from_json(rep.witnesses[0].data["r"]), s = rel_from_json(rep.witnesses[0].data["s"]);
  const auto F = FunctorSpec::parse("Mono(X)");
  EXPECT_NE(barr_lift(F, compose_rel(r, s)), compose_rel(barr_lift(F, r), barr_lift(F, s)));
}

TEST(ExtensionAxioms, MutatedTableIsCaught) {
  // Barr except at the converse of 2 -> 1, leaving graphs intact
  auto mutated = [](const Rel& r) {
    auto out = barr_lift(P(), r);
    if (r == Rel::full(1, 2)) out.set(1, 0);
    return out;
  };
  const auto E = Extension::tabulated(P(), 2, mutated, "mutated");
  EXPECT_EQ(check_extension_axioms(E, 2).verdict, Verdict::fail);
  EXPECT_EQ(lemma1_battery(E, 2).verdict, Verdict::fail);
}

TEST(ExtensionAxioms, LargeTriplesAreNotSilentlyPassed) {
  const auto rep = check_extension_axioms(Extension(ExtensionKind::Image, P()), 4);
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  EXPECT_GT(rep.details["triples_skipped"].get<std::size_t>(), 0u);
}

TEST(LocalMonotonicity, ImageFailsOnTheEmptyRelation) {
  const auto rep = check_local_monotonicity(Extension(ExtensionKind::Image, P()), 3);
  ASSERT_EQ(rep.verdict, Verdict::fail);
  EXPECT_EQ(rel_from_json(rep.witnesses[0].data["r"]), Rel(1, 1));
  EXPECT_EQ(rel_from_json(rep.witnesses[0].data["r_prime"]), Rel::identity(1));
  EXPECT_EQ(check_local_monotonicity(Extension(ExtensionKind::RestrictedImage, P()), 3).verdict, Verdict::fail);
  EXPECT_EQ(check_local_monotonicity(Extension(ExtensionKind::Barr, P()), 3).verdict, Verdict::pass);
}

TEST(Lemma1, HoldsForEveryAxiomPassingExtension) {
  const auto Filt = FunctorSpec::parse("Filt(X)"), Mono = FunctorSpec::parse("Mono(X)");
  for (const auto& E : {Extension(ExtensionKind::Barr, P()), Extension(ExtensionKind::Image, P()),
                        Extension(ExtensionKind::RestrictedImage, P()), Extension(ExtensionKind::BoxFilt, Filt),
                        Extension(ExtensionKind::BoxMono, Mono), Extension(ExtensionKind::DiamondMono, Mono)}) {
    const auto rep = lemma1_battery(E, 3);
    EXPECT_EQ(rep.verdict, Verdict::pass) << E.name();
  }
  EXPECT_TRUE(lemma1_battery(Extension(ExtensionKind::Barr, P()), 3).details["injection_equality"].get<bool>());
  EXPECT_FALSE(lemma1_battery(Extension(ExtensionKind::Image, P()), 3).details["injection_equality"].get<bool>());
}

TEST(Lemma6, BarrIsAllTrueOthersAllFalse) {
  const auto Filt = FunctorSpec::parse("Filt(X)"), Mono = FunctorSpec::parse("Mono(X)");
  const auto barr = lemma6_battery(Extension(ExtensionKind::Barr, P()), 3);
  EXPECT_EQ(barr.holds, (std::array<bool, 6>{true, true, true, true, true, true}));
  for (const auto& E : {Extension(ExtensionKind::Image, P()), Extension(ExtensionKind::RestrictedImage, P()),
                        Extension(ExtensionKind::BoxFilt, Filt), Extension(ExtensionKind::BoxMono, Mono),
                        Extension(ExtensionKind::DiamondMono, Mono)}) {
    const auto res = lemma6_battery(E, 3);
    EXPECT_EQ(res.holds, (std::array<bool, 6>{})) << E.name();
    EXPECT_EQ(res.report.verdict, Verdict::pass);
    EXPECT_EQ(res.report.witnesses.size(), 6u);
  }
}

TEST(Lemma6, SixConditionsAgreeOnTabulatedPowersetExtensions) {
  for (auto kind : {ExtensionKind::Barr, ExtensionKind::Image, ExtensionKind::RestrictedImage}) {
    const auto E = Extension::tabulated(P(), 4, [kind](const Rel& r) { return named_extension(kind, P(), r); });
    EXPECT_TRUE(lemma6_battery(E, 4).all_equal()) << to_string(kind);
  }
}

TEST(CompareExtensions, ImageLawsAreIncomparableWithBarr) {
  const Extension barr(ExtensionKind::Barr, P());
  for (auto kind : {ExtensionKind::Image, ExtensionKind::RestrictedImage}) {
    const auto o = compare_extensions(Extension(kind, P()), barr, 3);
    EXPECT_FALSE(o.leq);
    EXPECT_FALSE(o.geq);
  }
  const auto self = compare_extensions(barr, barr, 2);
  EXPECT_TRUE(self.leq && self.geq);
}

TEST(ElementwiseBounded, ExampleFunctors) {
  EXPECT_EQ(check_elementwise_bounded(FunctorSpec::parse("2"), BoundedFamily::constant(2), 3).verdict, Verdict::pass);
  EXPECT_EQ(check_elementwise_bounded(FunctorSpec::parse("X^2"), BoundedFamily::constant(3), 2).verdict, Verdict::pass);
  EXPECT_EQ(check_elementwise_bounded(FunctorSpec::parse("X+2"), BoundedFamily::constant(2), 3).verdict, Verdict::pass);
  EXPECT_EQ(check_elementwise_bounded(FunctorSpec::parse("2*X"), BoundedFamily::constant(2), 3).verdict, Verdict::pass);
  EXPECT_EQ(check_elementwise_bounded(FunctorSpec::parse("Ultra(X)"), BoundedFamily::constant(2), 2).verdict,
            Verdict::pass);
  // X^2 needs K = 3: a pair may use both copies of one element
  EXPECT_EQ(check_elementwise_bounded(FunctorSpec::parse("X^2"), BoundedFamily::constant(2), 2).verdict, Verdict::fail);
  EXPECT_EQ(check_elementwise_bounded(P(), BoundedFamily::constant(3), 2).verdict, Verdict::fail);
  EXPECT_THROW(BoundedFamily::constant(1), usage_error);
}

TEST(ElementwiseBounded, WitnessSetFailsForPowersetAndMono) {
  for (std::size_t k = 2; k <= 4; ++k) {
    auto p = check_ewb_witness_set(P(), k);
    ASSERT_EQ(p.verdict, Verdict::fail);
    EXPECT_EQ(p.witnesses[0].data["element"].get<index_t>(), powerset_size(k) - 1);
    auto m = check_ewb_witness_set(FunctorSpec::parse("Mono(X)"), k);
    ASSERT_EQ(m.verdict, Verdict::fail);
    EXPECT_EQ(m.witnesses[0].text.rfind("{{", 0), 0u);
  }
  EXPECT_EQ(check_ewb_witness_set(FunctorSpec::parse("2"), 2).verdict, Verdict::pass);
  EXPECT_THROW(check_ewb_witness_set(P(), 1), usage_error);
}

TEST(Codiagonal, ProductWithAFixedSetIsExact) {
  const FinFun pi(4, 2, {0, 0, 1, 1});
  const auto rep = check_codiagonal_formula(FunctorSpec::parse("2*X"), pi);
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_TRUE(rep.details["equality"].get<bool>());
  const auto pw = check_codiagonal_formula(P(), pi);
  EXPECT_TRUE(pw.details["inequality"].get<bool>());
}

TEST(Codiagonal, InequalityOnRandomInstances) {
  std::mt19937_64 rng(40);
  const std::vector<FunctorSpec> fs = {P(), FunctorSpec::parse("Mono(X)"), FunctorSpec::parse("X^2+1"),
                                       FunctorSpec::parse("Pn[2](X)"), FunctorSpec::parse("T32(X)")};
  std::uniform_int_distribution<std::size_t> ysize(0, 4), xsize(1, 2);
  for (int i = 0; i < 1000; ++i) {
    const auto& F = fs[i % fs.size()];
    const auto e = oracle::random_fun(rng, ysize(rng), xsize(rng));
    const auto rep = check_codiagonal_formula(F, e);
    ASSERT_EQ(rep.verdict, Verdict::pass) << F.name() << " " << describe(e);
    ASSERT_TRUE(rep.details["inequality"].get<bool>());
  }
}
