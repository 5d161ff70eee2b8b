#pragma once

// Concrete set functors on finite carriers.
//
// A functor is given by an expression tree (see parse_functor). Applying it to
// an n-element carrier yields an Obj: a canonical enumeration of F(n) plus the
// per-node tables needed to compute F on maps and to render elements.

#include <cctype>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "core.hpp"
#include "monoid.hpp"

namespace rellift {

inline constexpr std::size_t default_element_bound = std::size_t{1} << 20;

/// Default bound on |FX|, overridable through RELLIFT_MAX_ELEMENTS.
inline std::size_t element_bound_from_env() {
  if (const char* v = std::getenv("RELLIFT_MAX_ELEMENTS")) {
    char* end = nullptr;
    auto n = std::strtoull(v, &end, 10);
    if (end && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return default_element_bound;
}

enum class FunctorKind {
  Var,      // X
  Const,    // k
  Sum,      // F + G + ...
  Product,  // F * G * ...
  Power,    // F ^ k
  Pow,      // P(F): full powerset
  PowN,     // Pn[k](F): subsets of size <= k
  MonoidV,  // M[m](F): monoid-valued
  Dist,     // D[d](F): weights in {0, 1/d, ..., 1} summing to 1
  Nb,       // neighbourhood systems
  Mono,     // monotone neighbourhood systems
  Filt,     // filters
  Ultra,    // ultrafilters
  T32       // triples with at most two distinct entries
};

struct FunctorExpr {
  FunctorKind kind = FunctorKind::Var;
  std::size_t param = 0;  // Const size, Power exponent, PowN bound, Dist denominator
  std::string monoid;     // MonoidV only
  std::vector<FunctorExpr> args;

  friend bool operator==(const FunctorExpr&, const FunctorExpr&) = default;
};

namespace detail {

inline int precedence(const FunctorExpr& e) {
  switch (e.kind) {
    case FunctorKind::Sum: return 0;
    case FunctorKind::Product: return 1;
    case FunctorKind::Power: return 2;
    default: return 3;
  }
}

inline std::string to_text(const FunctorExpr& e);

inline std::string wrap(const FunctorExpr& e, int min_prec) {
  auto s = to_text(e);
  return precedence(e) < min_prec ? "(" + s + ")" : s;
}

inline std::string to_text(const FunctorExpr& e) {
  auto unary = [&](const std::string& head) { return head + "(" + to_text(e.args[0]) + ")"; };
  switch (e.kind) {
    case FunctorKind::Var: return "X";
    case FunctorKind::Const: return std::to_string(e.param);
    case FunctorKind::Sum: {
      std::string s;
      for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? "+" : "") + wrap(e.args[i], 1);
      return s;
    }
    case FunctorKind::Product: {
      std::string s;
      for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? "*" : "") + wrap(e.args[i], 2);
      return s;
    }
    case FunctorKind::Power: return wrap(e.args[0], 3) + "^" + std::to_string(e.param);
    case FunctorKind::Pow: return unary("P");
    case FunctorKind::PowN: return unary("Pn[" + std::to_string(e.param) + "]");
    case FunctorKind::MonoidV: return unary("M[" + e.monoid + "]");
    case FunctorKind::Dist: return unary("D[" + std::to_string(e.param) + "]");
    case FunctorKind::Nb: return unary("Nb");
    case FunctorKind::Mono: return unary("Mono");
    case FunctorKind::Filt: return unary("Filt");
    case FunctorKind::Ultra: return unary("Ultra");
    case FunctorKind::T32: return unary("T32");
  }
  return "?";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  FunctorExpr parse() {
    auto e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw usage_error("syntax error at position " + std::to_string(pos_) + ": " + msg);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::size_t nat() {
    skip_ws();
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail("expected a natural number");
    std::size_t v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(s_[pos_++] - '0');
      if (v > 1'000'000) fail("number too large");
    }
    return v;
  }
  std::string name() {
    skip_ws();
    auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  FunctorExpr expr() {
    FunctorExpr sum{FunctorKind::Sum};
    sum.args.push_back(term());
    while (accept('+')) sum.args.push_back(term());
    return sum.args.size() == 1 ? std::move(sum.args[0]) : sum;
  }
  FunctorExpr term() {
    FunctorExpr prod{FunctorKind::Product};
    prod.args.push_back(factor());
    while (accept('*')) prod.args.push_back(factor());
    return prod.args.size() == 1 ? std::move(prod.args[0]) : prod;
  }
  FunctorExpr factor() {
    auto base = atom();
    if (accept('^')) {
      FunctorExpr p{FunctorKind::Power, nat()};
      p.args.push_back(std::move(base));
      return p;
    }
    return base;
  }
  FunctorExpr atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return FunctorExpr{FunctorKind::Const, nat()};
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    const auto at = pos_;
    const auto id = name();
    if (id == "X") return FunctorExpr{FunctorKind::Var};

    FunctorExpr e;
    bool needs_param = false;
    if (id == "P") e.kind = FunctorKind::Pow;
    else if (id == "Pn") e.kind = FunctorKind::PowN, needs_param = true;
    else if (id == "M") e.kind = FunctorKind::MonoidV, needs_param = true;
    else if (id == "D") e.kind = FunctorKind::Dist, needs_param = true;
    else if (id == "Nb") e.kind = FunctorKind::Nb;
    else if (id == "Mono") e.kind = FunctorKind::Mono;
    else if (id == "Filt") e.kind = FunctorKind::Filt;
    else if (id == "Ultra") e.kind = FunctorKind::Ultra;
    else if (id == "T32") e.kind = FunctorKind::T32;
    else {
      pos_ = at;
      throw usage_error("unknown functor name '" + id + "' at position " + std::to_string(at));
    }

    if (accept('[')) {
      if (!needs_param) fail("functor " + id + " takes no bracket argument");
      if (e.kind == FunctorKind::MonoidV) {
        e.monoid = name();
        if (e.monoid.empty()) fail("expected a monoid name");
        if (!MonoidRegistry::instance().find(e.monoid)) throw usage_error("unknown monoid '" + e.monoid + "'");
      } else {
        e.param = nat();
      }
      expect(']');
    } else if (needs_param) {
      fail("functor " + id + " requires a bracket argument");
    }
    if (e.kind == FunctorKind::Dist && e.param == 0) fail("D[d] requires d >= 1");
    expect('(');
    e.args.push_back(expr());
    expect(')');
    return e;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline FunctorExpr parse_functor(std::string_view text) { return detail::Parser(text).parse(); }
inline std::string to_string(const FunctorExpr& e) { return detail::to_text(e); }

// ---------------------------------------------------------------------------

/// F applied to one carrier: canonical enumeration and per-node tables.
struct Obj {
  std::size_t size = 0;
  std::vector<std::shared_ptr<const Obj>> kids;
  std::vector<std::size_t> offsets;   // Sum: start of each summand; Product/Power: radices
  std::vector<std::uint64_t> codes;   // sorted element codes for enumerated kinds
  std::size_t inner_subsets = 0;      // Nb/Mono: 2^|kid|

  /// Index of an element code, for kinds that keep a sorted code table.
  index_t lookup(std::uint64_t code) const {
    auto it = std::lower_bound(codes.begin(), codes.end(), code);
    if (it == codes.end() || *it != code) throw std::logic_error("Obj::lookup: code not in enumeration");
    return static_cast<index_t>(it - codes.begin());
  }
  std::uint64_t code(index_t i) const { return codes.empty() ? i : codes[i]; }
};

namespace detail {

inline std::size_t sat_mul(std::size_t a, std::size_t b) {
  if (a == 0 || b == 0) return 0;
  return a > SIZE_MAX / b ? SIZE_MAX : a * b;
}
inline std::size_t sat_add(std::size_t a, std::size_t b) { return a > SIZE_MAX - b ? SIZE_MAX : a + b; }
inline std::size_t sat_pow(std::size_t base, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r = sat_mul(r, base);
  return r;
}
inline std::size_t sat_pow2(std::size_t e) { return e >= 63 ? SIZE_MAX : std::size_t{1} << e; }

inline std::size_t binom(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = sat_mul(r, n - k + i);
    if (r == SIZE_MAX) return r;
    r /= i;
  }
  return r;
}

// Number of monotone Boolean functions of m variables.
inline std::size_t dedekind(std::size_t m) {
  static constexpr std::size_t table[] = {2, 3, 6, 20, 168, 7581, 7828354, 2414682040998ull};
  return m < 8 ? table[m] : SIZE_MAX;
}

inline std::uint64_t preimage_mask(const FinFun& g, std::uint64_t target) {
  std::uint64_t m = 0;
  for (std::size_t x = 0; x < g.dom(); ++x)
    if ((target >> g(x)) & 1u) m |= std::uint64_t{1} << x;
  return m;
}

inline std::uint64_t image_mask(const FinFun& g, std::uint64_t src) {
  std::uint64_t m = 0;
  for (std::size_t x = 0; x < g.dom(); ++x)
    if ((src >> x) & 1u) m |= std::uint64_t{1} << g(x);
  return m;
}

inline bool is_upset(std::uint64_t sys, std::size_t m) {
  const std::size_t subsets = std::size_t{1} << m;
  for (std::size_t s = 0; s < subsets; ++s)
    if ((sys >> s) & 1u)
      for (std::size_t x = 0; x < m; ++x)
        if (!((sys >> (s | (std::size_t{1} << x))) & 1u)) return false;
  return true;
}

// All upward-closed systems of subsets of an m-element set, as 2^m-bit codes.
inline std::vector<std::uint64_t> enumerate_upsets(std::size_t m) {
  const std::size_t subsets = std::size_t{1} << m;
  std::vector<std::size_t> order(subsets);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [](std::size_t a, std::size_t b) {
    return std::popcount(a) > std::popcount(b);
  });
  std::vector<std::uint64_t> out;
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t k, std::uint64_t sys) {
    if (k == subsets) {
      out.push_back(sys);
      return;
    }
    const auto s = order[k];
    rec(k + 1, sys);
    for (std::size_t x = 0; x < m; ++x) {
      auto sup = s | (std::size_t{1} << x);
      if (sup != s && !((sys >> sup) & 1u)) return;
    }
    rec(k + 1, sys | (std::uint64_t{1} << s));
  };
  rec(0, 0);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

class FunctorSpec {
 public:
  explicit FunctorSpec(FunctorExpr e, std::size_t max_elements = element_bound_from_env())
      : st_(std::make_shared<State>(std::move(e), max_elements)) {}

  static FunctorSpec parse(std::string_view text, std::size_t max_elements = element_bound_from_env()) {
    return FunctorSpec(parse_functor(text), max_elements);
  }

  const FunctorExpr& expr() const { return st_->expr; }
  const std::string& name() const { return st_->text; }
  std::size_t bound() const { return st_->bound; }
  FunctorKind kind() const { return st_->expr.kind; }

  /// |F(n)| without enumerating; saturates at SIZE_MAX.
  std::size_t size_estimate(std::size_t n) const { return estimate(st_->expr, n); }

  std::shared_ptr<const Obj> object(std::size_t n) const {
    {
      std::lock_guard lock(st_->mu);
      auto it = st_->objects.find(n);
      if (it != st_->objects.end()) return it->second;
    }
    auto obj = build(st_->expr, n);
    std::lock_guard lock(st_->mu);
    return st_->objects.emplace(n, std::move(obj)).first->second;
  }

  std::size_t size(std::size_t n) const { return object(n)->size; }

  FinFun map(const FinFun& f) const {
    auto src = object(f.dom());
    auto dst = object(f.cod());
    return map_node(st_->expr, *src, *dst, f);
  }

  std::string render(std::size_t n, index_t a, const FinSet* carrier = nullptr) const {
    return render_node(st_->expr, *object(n), a, carrier);
  }

  std::vector<std::string> render_all(std::size_t n) const {
    std::vector<std::string> out;
    auto obj = object(n);
    for (index_t a = 0; a < obj->size; ++a) out.push_back(render_node(st_->expr, *obj, a, nullptr));
    return out;
  }

  friend bool operator==(const FunctorSpec& a, const FunctorSpec& b) { return a.st_->text == b.st_->text; }

 private:
  struct State {
    State(FunctorExpr e, std::size_t b) : expr(std::move(e)), text(to_string(expr)), bound(b) {}
    FunctorExpr expr;
    std::string text;
    std::size_t bound;
    std::mutex mu;
    std::map<std::size_t, std::shared_ptr<const Obj>> objects;
  };

  std::size_t estimate(const FunctorExpr& e, std::size_t n) const {
    using namespace detail;
    switch (e.kind) {
      case FunctorKind::Var: return n;
      case FunctorKind::Const: return e.param;
      case FunctorKind::Sum: {
        std::size_t s = 0;
        for (const auto& a : e.args) s = sat_add(s, estimate(a, n));
        return s;
      }
      case FunctorKind::Product: {
        std::size_t s = 1;
        for (const auto& a : e.args) s = sat_mul(s, estimate(a, n));
        return s;
      }
      case FunctorKind::Power: return sat_pow(estimate(e.args[0], n), e.param);
      case FunctorKind::Pow:
      case FunctorKind::Filt: return sat_pow2(estimate(e.args[0], n));
      case FunctorKind::PowN: {
        const auto m = estimate(e.args[0], n);
        std::size_t s = 0;
        for (std::size_t k = 0; k <= std::min(m, e.param); ++k) s = sat_add(s, binom(m, k));
        return s;
      }
      case FunctorKind::MonoidV:
        return sat_pow(MonoidRegistry::instance().get(e.monoid)->size(), estimate(e.args[0], n));
      case FunctorKind::Dist: {
        const auto m = estimate(e.args[0], n);
        return m == 0 ? 0 : binom(sat_add(m, e.param - 1), e.param);
      }
      case FunctorKind::Nb: {
        const auto m = estimate(e.args[0], n);
        return m >= 6 ? SIZE_MAX : sat_pow2(std::size_t{1} << m);
      }
      case FunctorKind::Mono: return dedekind(estimate(e.args[0], n));
      case FunctorKind::Ultra: return estimate(e.args[0], n);
      case FunctorKind::T32: {
        const auto m = estimate(e.args[0], n);
        return sat_pow(m, 3) - (m >= 3 ? m * (m - 1) * (m - 2) : 0);
      }
    }
    return SIZE_MAX;
  }

  void check_bound(std::size_t est, const FunctorExpr& e, std::size_t n) const {
    if (est > st_->bound)
      throw bound_error("|" + to_string(e) + " applied to " + std::to_string(n) + "| = " +
                            (est == SIZE_MAX ? std::string("overflow") : std::to_string(est)) +
                            " exceeds the element bound " + std::to_string(st_->bound),
                        est);
  }

  std::shared_ptr<const Obj> build(const FunctorExpr& e, std::size_t n) const {
    check_bound(estimate(e, n), e, n);
    auto o = std::make_shared<Obj>();
    for (const auto& a : e.args) o->kids.push_back(build(a, n));
    const std::size_t m = o->kids.empty() ? 0 : o->kids[0]->size;
    switch (e.kind) {
      case FunctorKind::Var: o->size = n; break;
      case FunctorKind::Const: o->size = e.param; break;
      case FunctorKind::Sum:
        for (const auto& k : o->kids) {
          o->offsets.push_back(o->size);
          o->size += k->size;
        }
        break;
      case FunctorKind::Product:
        o->size = 1;
        for (const auto& k : o->kids) {
          o->offsets.push_back(k->size);
          o->size *= k->size;
        }
        break;
      case FunctorKind::Power:
        o->size = detail::sat_pow(m, e.param);
        o->offsets.assign(e.param, m);
        break;
      case FunctorKind::Pow:
      case FunctorKind::Filt: o->size = std::size_t{1} << m; break;
      case FunctorKind::Ultra: o->size = m; break;
      case FunctorKind::PowN: {
        if (m > 63) check_bound(SIZE_MAX, e, n);
        o->codes.push_back(0);
        for (std::size_t j = 1; j <= std::min(e.param, m); ++j)
          for (std::uint64_t s = (std::uint64_t{1} << j) - 1; s < (std::uint64_t{1} << m);) {
            o->codes.push_back(s);
            const auto c = s & (~s + 1), r = s + c;  // next subset of the same size
            s = (((r ^ s) >> 2) / c) | r;
          }
        std::sort(o->codes.begin(), o->codes.end());
        o->size = o->codes.size();
        break;
      }
      case FunctorKind::MonoidV:
        o->size = detail::sat_pow(MonoidRegistry::instance().get(e.monoid)->size(), m);
        break;
      case FunctorKind::Dist: {
        // coefficient vectors in radix d+1, element 0 least significant
        const std::size_t base = e.param + 1;
        const std::size_t total = detail::sat_pow(base, m);
        if (total > std::size_t{1} << 26) check_bound(total, e, n);
        for (std::uint64_t c = 0; c < total; ++c) {
          std::size_t s = 0;
          for (std::uint64_t v = c; v; v /= base) s += v % base;
          if (s == e.param) o->codes.push_back(c);
        }
        o->size = o->codes.size();
        break;
      }
      case FunctorKind::Nb:
        o->inner_subsets = std::size_t{1} << m;
        o->size = std::size_t{1} << o->inner_subsets;
        break;
      case FunctorKind::Mono:
        o->inner_subsets = std::size_t{1} << m;
        o->codes = detail::enumerate_upsets(m);
        o->size = o->codes.size();
        break;
      case FunctorKind::T32:
        for (std::uint64_t a = 0; a < m; ++a)
          for (std::uint64_t b = 0; b < m; ++b)
            for (std::uint64_t c = 0; c < m; ++c)
              if (a == b || b == c || a == c) o->codes.push_back((a * m + b) * m + c);
        o->size = o->codes.size();
        break;
    }
    return o;
  }

  // Decompose/compose mixed-radix product indices (first factor most significant).
  static std::vector<index_t> split(std::size_t idx, const std::vector<std::size_t>& radices) {
    std::vector<index_t> parts(radices.size());
    for (std::size_t k = radices.size(); k-- > 0;) {
      parts[k] = static_cast<index_t>(idx % radices[k]);
      idx /= radices[k];
    }
    return parts;
  }
  static std::size_t join(const std::vector<index_t>& parts, const std::vector<std::size_t>& radices) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < radices.size(); ++k) idx = idx * radices[k] + parts[k];
    return idx;
  }

  FinFun map_node(const FunctorExpr& e, const Obj& src, const Obj& dst, const FinFun& f) const {
    std::vector<FinFun> km;
    for (std::size_t k = 0; k < e.args.size(); ++k) km.push_back(map_node(e.args[k], *src.kids[k], *dst.kids[k], f));
    std::vector<index_t> img(src.size);
    switch (e.kind) {
      case FunctorKind::Var: return f;
      case FunctorKind::Const: return FinFun::identity(e.param);
      case FunctorKind::Sum:
        for (std::size_t j = 0; j < km.size(); ++j)
          for (std::size_t a = 0; a < src.kids[j]->size; ++a)
            img[src.offsets[j] + a] = static_cast<index_t>(dst.offsets[j] + km[j](a));
        break;
      case FunctorKind::Product:
      case FunctorKind::Power:
        for (std::size_t a = 0; a < src.size; ++a) {
          auto parts = split(a, src.offsets);
          for (std::size_t k = 0; k < parts.size(); ++k)
            parts[k] = km[e.kind == FunctorKind::Power ? 0 : k](parts[k]);
          img[a] = static_cast<index_t>(join(parts, dst.offsets));
        }
        break;
      case FunctorKind::Pow:
      case FunctorKind::Filt:  // filters are indexed by their generator U; f maps up(U) to up(f[U])
        for (std::size_t a = 0; a < src.size; ++a) img[a] = static_cast<index_t>(detail::image_mask(km[0], a));
        break;
      case FunctorKind::Ultra: return km[0];
      case FunctorKind::PowN:
        for (std::size_t a = 0; a < src.size; ++a) img[a] = dst.lookup(detail::image_mask(km[0], src.codes[a]));
        break;
      case FunctorKind::MonoidV: {
        const auto& mon = *MonoidRegistry::instance().get(e.monoid);
        const std::size_t base = mon.size();
        const std::size_t m = src.kids[0]->size, m2 = dst.kids[0]->size;
        for (std::size_t a = 0; a < src.size; ++a) {
          std::vector<index_t> out(m2, mon.zero());
          std::size_t v = a;
          for (std::size_t x = 0; x < m; ++x, v /= base) {
            auto y = km[0](x);
            out[y] = mon.add(out[y], static_cast<index_t>(v % base));
          }
          std::size_t code = 0;
          for (std::size_t y = m2; y-- > 0;) code = code * base + out[y];
          img[a] = static_cast<index_t>(code);
        }
        break;
      }
      case FunctorKind::Dist: {
        const std::size_t base = e.param + 1;
        const std::size_t m = src.kids[0]->size, m2 = dst.kids[0]->size;
        for (std::size_t a = 0; a < src.size; ++a) {
          std::vector<std::size_t> out(m2, 0);
          std::uint64_t v = src.codes[a];
          for (std::size_t x = 0; x < m; ++x, v /= base) out[km[0](x)] += v % base;
          std::uint64_t code = 0;
          for (std::size_t y = m2; y-- > 0;) code = code * base + out[y];
          img[a] = dst.lookup(code);
        }
        break;
      }
      case FunctorKind::Nb:
      case FunctorKind::Mono: {
        // Phi |-> { B | g^-1[B] in Phi }
        std::vector<std::uint64_t> pre(dst.inner_subsets);
        for (std::size_t b = 0; b < dst.inner_subsets; ++b) pre[b] = detail::preimage_mask(km[0], b);
        for (std::size_t a = 0; a < src.size; ++a) {
          const std::uint64_t sys = src.code(static_cast<index_t>(a));
          std::uint64_t out = 0;
          for (std::size_t b = 0; b < dst.inner_subsets; ++b)
            if ((sys >> pre[b]) & 1u) out |= std::uint64_t{1} << b;
          img[a] = e.kind == FunctorKind::Nb ? static_cast<index_t>(out) : dst.lookup(out);
        }
        break;
      }
      case FunctorKind::T32: {
        const std::size_t m = src.kids[0]->size, m2 = dst.kids[0]->size;
        for (std::size_t a = 0; a < src.size; ++a) {
          auto c = src.codes[a];
          std::uint64_t z = c % m, y = (c / m) % m, x = c / (m * m);
          img[a] = dst.lookup((km[0](x) * m2 + km[0](y)) * m2 + km[0](z));
        }
        break;
      }
    }
    return FinFun(src.size, dst.size, std::move(img));
  }

  static std::string render_set(std::uint64_t mask, const std::function<std::string(index_t)>& elem) {
    std::string s = "{";
    bool first = true;
    for (std::size_t i = 0; i < 64; ++i)
      if ((mask >> i) & 1u) {
        s += (first ? "" : ",") + elem(static_cast<index_t>(i));
        first = false;
      }
    return s + "}";
  }

  std::string render_node(const FunctorExpr& e, const Obj& o, index_t a, const FinSet* carrier) const {
    auto kid = [&](std::size_t k) {
      return [&, k](index_t i) { return render_node(e.args[k], *o.kids[k], i, carrier); };
    };
    switch (e.kind) {
      case FunctorKind::Var: return carrier ? carrier->label(a) : std::to_string(a);
      case FunctorKind::Const: return "#" + std::to_string(a);
      case FunctorKind::Sum: {
        std::size_t j = o.offsets.size() - 1;
        while (o.offsets[j] > a) --j;
        return "in" + std::to_string(j) + "(" + kid(j)(static_cast<index_t>(a - o.offsets[j])) + ")";
      }
      case FunctorKind::Product:
      case FunctorKind::Power: {
        auto parts = split(a, o.offsets);
        std::string s = "(";
        for (std::size_t k = 0; k < parts.size(); ++k)
          s += (k ? "," : "") + kid(e.kind == FunctorKind::Power ? 0 : k)(parts[k]);
        return s + ")";
      }
      case FunctorKind::Pow: return render_set(a, kid(0));
      case FunctorKind::PowN: return render_set(o.codes[a], kid(0));
      case FunctorKind::Filt: return "↑" + render_set(a, kid(0));
      case FunctorKind::Ultra: return "↑{" + kid(0)(a) + "}";
      case FunctorKind::MonoidV: {
        const std::size_t base = MonoidRegistry::instance().get(e.monoid)->size();
        std::string s = "(";
        std::size_t v = a;
        for (std::size_t x = 0; x < o.kids[0]->size; ++x, v /= base) s += (x ? "," : "") + std::to_string(v % base);
        return s + ")";
      }
      case FunctorKind::Dist: {
        const std::size_t base = e.param + 1;
        std::string s = "(";
        std::uint64_t v = o.codes[a];
        for (std::size_t x = 0; x < o.kids[0]->size; ++x, v /= base)
          s += (x ? "," : "") + std::to_string(v % base) + "/" + std::to_string(e.param);
        return s + ")";
      }
      case FunctorKind::Nb:
      case FunctorKind::Mono: {
        auto inner = kid(0);
        return render_set(o.code(a), [&](index_t s) { return render_set(s, inner); });
      }
      case FunctorKind::T32: {
        const std::size_t m = o.kids[0]->size;
        auto c = o.codes[a];
        auto k0 = kid(0);
        return "(" + k0(static_cast<index_t>(c / (m * m))) + "," + k0(static_cast<index_t>((c / m) % m)) + "," +
               k0(static_cast<index_t>(c % m)) + ")";
      }
    }
    return "?";
  }

  std::shared_ptr<State> st_;
};

/// A handle on one element of F(carrier).
struct ElementHandle {
  FunctorSpec functor;
  std::size_t carrier = 0;
  index_t index = 0;

  ElementHandle(FunctorSpec f, std::size_t n, index_t i) : functor(std::move(f)), carrier(n), index(i) {
    if (index >= functor.size(carrier)) throw usage_error("ElementHandle: index out of range");
  }
  std::string render() const { return functor.render(carrier, index); }
};

inline FinSet apply_object(const FunctorSpec& F, const FinSet& X) {
  return FinSet(F.size(X.size));
}

inline FinFun apply_map(const FunctorSpec& F, const FinFun& f) { return F.map(f); }

/// Inclusion of a subset (bitmask over an n-element carrier) as a map |A| -> n.
inline FinFun subset_inclusion(std::size_t n, const Bits& subset) {
  auto elems = subset.elements();
  const auto k = elems.size();
  return FinFun(k, n, std::move(elems));
}

/// a is in F A, i.e. a lies in the image of F applied to the inclusion of A.
inline bool member_of_subobject(const ElementHandle& a, const Bits& subset) {
  if (subset.size() != a.carrier) throw usage_error("member_of_subobject: subset width does not match carrier");
  const auto Fi = a.functor.map(subset_inclusion(a.carrier, subset));
  return std::find(Fi.images().begin(), Fi.images().end(), a.index) != Fi.images().end();
}

}  // namespace rellift
