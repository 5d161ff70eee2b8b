#pragma once

#include <concepts>
#include <map>

#include "core.hpp"
#include "functor.hpp"
#include "report.hpp"

namespace rellift {

/// Anything with an object size and a map action on finite carriers.
template <class F>
concept SetFunctor = requires(const F& f, std::size_t n, const FinFun& g) {
  { f.size(n) } -> std::convertible_to<std::size_t>;
  { f.map(g) } -> std::same_as<FinFun>;
};

inline std::string describe(const FinFun& f) {
  std::string s = std::to_string(f.dom()) + "→" + std::to_string(f.cod()) + " [";
  for (std::size_t x = 0; x < f.dom(); ++x) s += (x ? "," : "") + std::to_string(f(x));
  return s + "]";
}

/// F(id) = id and F(g.f) = F(g).F(f) for all maps between carriers of size <= N.
template <SetFunctor F>
Report check_functor_laws(const F& functor, std::size_t N) {
  Stopwatch sw;
  Report rep;
  rep.max_size = N;
  try {
    for (std::size_t a = 0; a <= N; ++a) {
      ++rep.instances_checked;
      if (functor.map(FinFun::identity(a)) != FinFun::identity(functor.size(a))) {
        rep.fail_with({"functor-identity", {{"carrier", a}}, "F(id_" + std::to_string(a) + ") is not the identity"});
        rep.elapsed_ms = sw.ms();
        return rep;
      }
    }
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<FinFun, FinFun>>> lifted;
    auto maps = [&](std::size_t a, std::size_t b) -> const std::vector<std::pair<FinFun, FinFun>>& {
      auto key = std::make_pair(a, b);
      auto it = lifted.find(key);
      if (it != lifted.end()) return it->second;
      std::vector<std::pair<FinFun, FinFun>> v;
      for_each_function(a, b, [&](const FinFun& f) {
        v.emplace_back(f, functor.map(f));
        return true;
      });
      return lifted.emplace(key, std::move(v)).first->second;
    };
    for (std::size_t a = 0; a <= N; ++a)
      for (std::size_t b = 0; b <= N; ++b)
        for (std::size_t c = 0; c <= N; ++c) {
          const auto& fs = maps(a, b);
          const auto& gs = maps(b, c);
          for (const auto& [f, Ff] : fs)
            for (const auto& [g, Fg] : gs) {
              ++rep.instances_checked;
              // maps a -> c are enumerated with element 0 as the least significant digit
              const auto h = compose(g, f);
              std::size_t code = 0;
              for (std::size_t x = a; x-- > 0;) code = code * c + h(x);
              if (maps(a, c)[code].second != compose(Fg, Ff)) {
                rep.fail_with({"functor-composition",
                               {{"f", fun_to_json(f)}, {"g", fun_to_json(g)}},
                               "F(g∘f) ≠ Fg∘Ff for f = " + describe(f) + ", g = " + describe(g)});
                rep.elapsed_ms = sw.ms();
                return rep;
              }
            }
        }
  } catch (const bound_error& e) {
    rep.verdict = Verdict::inconclusive;
    rep.note = e.what();
  }
  rep.elapsed_ms = sw.ms();
  return rep;
}

}  // namespace rellift
