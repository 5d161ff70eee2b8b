#include <random>

#include <gtest/gtest.h>

#include <rellift/batteries.hpp>
#include <rellift/distlaw.hpp>

#include "oracles.hpp"

using namespace rellift;

namespace {

const FunctorSpec& P() {
  static const auto F = FunctorSpec::parse("P(X)");
  return F;
}

// σ{X_i} = {Y ⊆ ⋃X_i | Y ∩ X_i ≠ ∅ for all i}
oracle::System barr_closed_form(const oracle::System& family) {
  oracle::Subset u;
  for (const auto& A : family) u.insert(A.begin(), A.end());
  oracle::System out;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << 8); ++m) {
    auto Y = oracle::subset_of_mask(m);
    if (!std::includes(u.begin(), u.end(), Y.begin(), Y.end())) continue;
    bool meets = true;
    for (const auto& A : family) {
      bool hit = false;
      for (auto y : Y) hit = hit || A.count(y);
      meets = meets && hit;
    }
    if (meets) out.insert(Y);
  }
  return out;
}

oracle::System family_of(std::uint64_t t) {
  oracle::System s;
  for (std::size_t A = 0; A < 64; ++A)
    if ((t >> A) & 1u) s.insert(oracle::subset_of_mask(A));
  return s;
}

oracle::System row_family(const Bits& row) {
  oracle::System s;
  row.for_each([&](std::size_t A) { s.insert(oracle::subset_of_mask(A)); });
  return s;
}

}  // namespace

TEST(Monad, PowersetMultIsUnion) {
  const auto T = powerset_monad();
  const auto mu = T.mult_map(2);
  for (std::uint64_t t = 0; t < 16; ++t) {
    oracle::Subset u;
    for (const auto& A : family_of(t)) u.insert(A.begin(), A.end());
    EXPECT_EQ(mu(static_cast<index_t>(t)), oracle::mask_of(u));
  }
  EXPECT_EQ(T.unit_map(3), FinFun(3, 8, {1, 2, 4}));
}

TEST(Monad, GenericNeighbourhoodBindAgreesWithFilterAndUltraShortcuts) {
  std::mt19937_64 rng(3);
  for (auto name : {"Filt", "Ultra"}) {
    const auto T = neighbourhood_monad(name);
    const auto& F = T.functor();
    for (int i = 0; i < 300; ++i) {
      std::uniform_int_distribution<std::size_t> d(1, 3);
      const auto X = d(rng), Y = d(rng);
      std::vector<index_t> k(Y);
      std::vector<std::uint64_t> kc(Y);
      for (std::size_t y = 0; y < Y; ++y) {
        k[y] = std::uniform_int_distribution<index_t>(0, static_cast<index_t>(F.size(X) - 1))(rng);
        kc[y] = detail::system_code(F, X, k[y]);
      }
      const auto t = std::uniform_int_distribution<index_t>(0, static_cast<index_t>(F.size(Y) - 1))(rng);
      const auto generic = detail::system_bind(X, kc, detail::system_code(F, Y, t));
      EXPECT_EQ(detail::system_code(F, X, T.bind(X, k, Y, t)), generic) << name;
    }
  }
}

TEST(Monad, AxiomsHoldForTheRegistry) {
  for (auto name : {"P", "Filt", "Ultra", "Mono", "1"})
    EXPECT_EQ(monad_axiom_check(monad_by_name(name), 3).verdict, Verdict::pass) << name;
  EXPECT_EQ(monad_axiom_check(monad_by_name("Nb"), 2).verdict, Verdict::pass);
}

TEST(Monad, IntersectionMultIsRejected) {
  const auto rep = monad_axiom_check(powerset_intersection_monad(), 3);
  ASSERT_EQ(rep.verdict, Verdict::fail);
  EXPECT_FALSE(rep.witnesses.empty());
}

TEST(Monad, UnknownNameIsAUsageError) { EXPECT_THROW(monad_by_name("Q"), usage_error); }

TEST(MonadMorphism, ModalMorphismsPass) {
  for (auto name : {"id", "terminal", "box-filt", "box-mono", "diamond-mono"})
    EXPECT_EQ(monad_morphism_check(morphism_by_name(name), 3).verdict, Verdict::pass) << name;
}

TEST(MonadMorphism, DiamondIntoFiltersFails) {
  const auto rep = monad_morphism_check(morphism_by_name("diamond-filt"), 3);
  ASSERT_EQ(rep.verdict, Verdict::fail);
  EXPECT_EQ(rep.witnesses[0].kind, "not-in-target");
  // the two-element Diamond system {{0},{1},{0,1}} is not closed under intersection
  EXPECT_FALSE(morphism_by_name("diamond-filt").component(2, 0b11));
  EXPECT_TRUE(morphism_by_name("diamond-filt").component(2, 0b01));
}

TEST(MonadMorphism, BrokenComponentIsCaught) {
  auto l = identity_morphism();
  l.name = "shifted";
  l.component = [](std::size_t n, index_t U) -> std::optional<index_t> {
    return n == 2 && U == 1 ? 3 : U;  // {0} -> {0,1}
  };
  EXPECT_EQ(monad_morphism_check(l, 2).verdict, Verdict::fail);
}

TEST(DistLaw, PinnedPowersetValues) {
  const index_t p = (1u << 0b011) | (1u << 0b100);  // {{0,1},{2}}
  const auto barr = DistLaw::barr(P());
  EXPECT_EQ(detail::render_row(P(), 3, barr.apply(3, p)), "{{0,2},{1,2},{0,1,2}}");
  EXPECT_EQ(detail::render_row(P(), 3, DistLaw::image().apply(3, p)), "{{0,1,2}}");
  EXPECT_EQ(detail::render_row(P(), 3, DistLaw::restricted_image().apply(3, p)), "{{0,1,2}}");
  EXPECT_EQ(detail::render_row(P(), 3, barr.apply(3, 0)), "{{}}");
  EXPECT_EQ(detail::render_row(P(), 3, DistLaw::image().apply(3, 0)), "{{}}");
  EXPECT_EQ(DistLaw::restricted_image().apply(3, 1).count(), 0u);  // {∅} ↦ ∅
  EXPECT_EQ(DistLaw::image().apply(3, 1).count(), 1u);
  EXPECT_EQ(barr.apply(2, (1u << 0) | (1u << 2)).count(), 0u);  // {∅,{1}} ↦ ∅
}

TEST(DistLaw, BarrMatchesClosedForm) {
  const auto barr = DistLaw::barr(P());
  for (std::size_t n = 0; n <= 3; ++n)
    for (std::uint64_t t = 0; t < (std::uint64_t{1} << powerset_size(n)); ++t)
      ASSERT_EQ(row_family(barr.apply(n, static_cast<index_t>(t))), barr_closed_form(family_of(t))) << n << " " << t;
}

TEST(DistLaw, RuleBasedLawsPassTheAxioms) {
  for (const auto& law : {DistLaw::barr(P()), DistLaw::image(), DistLaw::restricted_image(),
                          DistLaw::barr(FunctorSpec::parse("Filt(X)")), DistLaw::barr(FunctorSpec::parse("X^2+1"))}) {
    const auto rep = check_distlaw_axioms(law, 3, 3);
    EXPECT_EQ(rep.verdict(), Verdict::pass) << law.name() << " " << rep.combined("").note;
  }
}

TEST(DistLaw, MorphismLawsAreSingletonValuedAndPass) {
  for (auto name : {"id", "terminal", "box-filt", "box-mono", "diamond-mono"}) {
    const auto law = DistLaw::from_morphism(morphism_by_name(name));
    const std::size_t N = law.functor().kind() == FunctorKind::Mono ? 2 : 3;
    for (std::size_t n = 0; n <= N; ++n)
      for (const auto& row : law.carrier(n)) ASSERT_EQ(row.count(), 1u) << name;
    EXPECT_EQ(check_distlaw_axioms(law, N, N).verdict(), Verdict::pass) << name;
  }
}

TEST(DistLaw, IdentityMorphismGivesTheImageLaw) {
  const auto a = DistLaw::from_morphism(identity_morphism()), b = DistLaw::image();
  for (std::size_t n = 0; n <= 3; ++n) EXPECT_EQ(a.carrier(n), b.carrier(n));
}

TEST(DistLaw, TerminalMorphismGivesTheBarrLawOfOne) {
  const auto a = DistLaw::from_morphism(terminal_morphism()), b = DistLaw::barr(FunctorSpec::parse("1"));
  for (std::size_t n = 0; n <= 3; ++n) EXPECT_EQ(a.carrier(n), b.carrier(n));
}

TEST(DistLaw, MorphismLawsInduceTheNamedExtensions) {
  auto same = [](const Extension& E, ExtensionKind kind, std::size_t N) {
    for (std::size_t a = 0; a <= N; ++a)
      for (std::size_t b = 0; b <= N; ++b)
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << (a * b)); ++m) {
          const auto r = Rel::from_mask(a, b, m);
          if (E.lift(r) != named_extension(kind, E.functor(), r)) return false;
        }
    return true;
  };
  EXPECT_TRUE(same(law_to_extension(DistLaw::from_morphism(morphism_by_name("box-filt")), 3), ExtensionKind::BoxFilt, 3));
  EXPECT_TRUE(same(law_to_extension(DistLaw::from_morphism(morphism_by_name("box-mono")), 2), ExtensionKind::BoxMono, 2));
  EXPECT_TRUE(
      same(law_to_extension(DistLaw::from_morphism(morphism_by_name("diamond-mono")), 2), ExtensionKind::DiamondMono, 2));
  EXPECT_TRUE(same(law_to_extension(DistLaw::image(), 3), ExtensionKind::Image, 3));
  EXPECT_TRUE(same(law_to_extension(DistLaw::restricted_image(), 3), ExtensionKind::RestrictedImage, 3));
  EXPECT_TRUE(same(law_to_extension(DistLaw::barr(P()), 3), ExtensionKind::Barr, 3));
}

TEST(DistLaw, RestrictedImageExtensionOnTheEmptySet) {
  const auto E = law_to_extension(DistLaw::restricted_image(), 2);
  const auto lifted = E.lift(Rel::full(2, 2));
  EXPECT_EQ(lifted.row_bits(0).elements(), std::vector<index_t>{0});
  EXPECT_EQ(E.lift(Rel(2, 2)).row_bits(1).count(), 0u);
}

TEST(DistLaw, LawExtensionRoundTrip) {
  for (const auto& law : {DistLaw::barr(P()), DistLaw::image(), DistLaw::restricted_image(),
                          DistLaw::from_morphism(morphism_by_name("box-filt"))}) {
    const auto back = extension_to_law(law_to_extension(law, 3), 3);
    for (std::size_t n = 0; n <= 3; ++n) EXPECT_EQ(back.carrier(n), law.carrier(n)) << law.name();
  }
  const Extension E(ExtensionKind::Image, P());
  const auto E2 = law_to_extension(extension_to_law(E, 3), 3);
  for (std::size_t a = 0; a <= 3; ++a)
    for (std::size_t b = 0; b <= 3; ++b)
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << (a * b)); ++m)
        ASSERT_EQ(E2.lift(Rel::from_mask(a, b, m)), E.lift(Rel::from_mask(a, b, m)));
}

TEST(DistLaw, CaseThreeCandidateBreaksMultiplication) {
  const auto cand = case3_candidate();
  const index_t p = (1u << 0b011) | (1u << 0b100);
  EXPECT_EQ(detail::render_row(P(), 3, cand.apply(3, p)), "{{0,2},{1,2}}");
  const auto rep = check_distlaw_axioms(cand, 3, 3);
  EXPECT_EQ(rep.naturality.verdict, Verdict::pass);
  EXPECT_EQ(rep.unit.verdict, Verdict::pass);
  ASSERT_EQ(rep.multiplication.verdict, Verdict::fail);
  EXPECT_TRUE(replay_multiplication_witness(cand, rep.multiplication.witnesses[0]));
  EXPECT_FALSE(replay_multiplication_witness(DistLaw::barr(P()), rep.multiplication.witnesses[0]));
  // the instance from the exclusion argument: B = [{0,1},{2}], 𝔅 = {{0},{0,1}}
  auto [lhs, rhs] = multiplication_sides(cand, 3, {0b011, 0b100}, (1u << 0b01) | (1u << 0b11));
  EXPECT_NE(lhs, rhs);
  EXPECT_TRUE(lhs.test(0b111));
  EXPECT_FALSE(rhs.test(0b111));
}

TEST(DistLaw, TablesOutsideTheirCarriersAreInconclusive) {
  const auto law = extension_to_law(Extension(ExtensionKind::Barr, P()), 2);
  const auto rep = check_distlaw_axioms(law, 3, 3);
  EXPECT_EQ(rep.verdict(), Verdict::inconclusive);
  EXPECT_THROW(DistLaw::table(P(), {{1, {}}}), usage_error);
}

TEST(DistLaw, NonWpbBarrLawsFail) {
  EXPECT_EQ(check_distlaw_axioms(DistLaw::barr(FunctorSpec::parse("T32(X)")), 3, 3).verdict(), Verdict::fail);
  EXPECT_EQ(check_distlaw_axioms(DistLaw::barr(FunctorSpec::parse("M[Z2](X)")), 2, 2).verdict(), Verdict::fail);
}

TEST(DistLaw, FromName) {
  EXPECT_EQ(DistLaw::from_name("from-morphism:box-filt", FunctorSpec::parse("Filt(X)")).rule(), LawRule::FromMorphism);
  EXPECT_THROW(DistLaw::from_name("from-morphism:box-filt", P()), usage_error);
  EXPECT_THROW(DistLaw::from_name("image", FunctorSpec::parse("Mono(X)")), usage_error);
  EXPECT_THROW(DistLaw::from_name("weird", P()), usage_error);
}
