#pragma once

// Shared verdict/report type and its text and JSON renderings.

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rellift {

inline constexpr const char* report_schema = "rellift.report/1";

enum class Verdict { pass, fail, unsat, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::unsat: return "unsat";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  if (s == "unsat") return Verdict::unsat;
  return Verdict::inconclusive;
}

/// A counterexample or certificate. `data` is machine-replayable, `text` is
/// the human-readable rendering.
struct Witness {
  std::string kind;
  nlohmann::json data;
  std::string text;
};

struct Report {
  std::string command;
  Verdict verdict = Verdict::pass;
  std::vector<Witness> witnesses;
  std::size_t instances_checked = 0;
  std::optional<std::size_t> max_size;
  double elapsed_ms = 0;
  std::string note;          // e.g. the bound that made a sweep inconclusive
  nlohmann::json details = nlohmann::json::object();

  bool passed() const { return verdict == Verdict::pass; }

  void fail_with(Witness w) {
    verdict = Verdict::fail;
    witnesses.push_back(std::move(w));
  }
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json j;
  j["schema"] = report_schema;
  j["command"] = r.command;
  j["verdict"] = to_string(r.verdict);
  j["instances_checked"] = r.instances_checked;
  j["elapsed_ms"] = r.elapsed_ms;
  if (r.max_size) j["max_size"] = *r.max_size;
  if (!r.note.empty()) j["note"] = r.note;
  auto ws = nlohmann::json::array();
  for (const auto& w : r.witnesses) ws.push_back({{"kind", w.kind}, {"data", w.data}, {"text", w.text}});
  j["witnesses"] = ws;
  for (auto it = r.details.begin(); it != r.details.end(); ++it) j[it.key()] = it.value();
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  r.command = j.value("command", "");
  r.verdict = verdict_from_string(j.value("verdict", "inconclusive"));
  r.instances_checked = j.value("instances_checked", std::size_t{0});
  r.elapsed_ms = j.value("elapsed_ms", 0.0);
  if (j.contains("max_size")) r.max_size = j["max_size"].get<std::size_t>();
  r.note = j.value("note", "");
  for (const auto& w : j.value("witnesses", nlohmann::json::array()))
    r.witnesses.push_back({w.value("kind", ""), w.value("data", nlohmann::json()), w.value("text", "")});
  static const char* known[] = {"schema", "command", "verdict", "instances_checked", "elapsed_ms",
                                "max_size", "note", "witnesses"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) r.details[it.key()] = it.value();
  }
  return r;
}

enum class OutputFormat { text, json };

inline std::string emit_report(const Report& r, OutputFormat format) {
  if (format == OutputFormat::json) return report_to_json(r).dump(2) + "\n";
  std::string s;
  if (!r.command.empty()) s += r.command + "\n";
  s += "verdict: " + std::string(to_string(r.verdict)) + "\n";
  s += "instances checked: " + std::to_string(r.instances_checked) + "\n";
  if (!r.note.empty()) s += "note: " + r.note + "\n";
  if (r.witnesses.empty()) {
    if (r.verdict == Verdict::pass)
      s += r.max_size ? "no violations in N≤" + std::to_string(*r.max_size) + " sweep\n" : "no violations\n";
  } else {
    for (const auto& w : r.witnesses) s += "[" + w.kind + "] " + w.text + "\n";
  }
  for (auto it = r.details.begin(); it != r.details.end(); ++it) {
    if (it.value().is_string()) s += it.key() + ": " + it.value().get<std::string>() + "\n";
    else if (it.value().is_primitive()) s += it.key() + ": " + it.value().dump() + "\n";
  }
  return s;
}

}  // namespace rellift
