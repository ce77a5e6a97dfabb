#include "policyscope/logic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace policyscope {

namespace {

void tighten(Interval& iv, const Predicate& p) {
  if (p.leq)
    iv.hi = std::min(iv.hi, p.threshold);
  else
    iv.lo = std::max(iv.lo, p.threshold);
}

void check_feature(const Predicate& p, std::size_t d_s) {
  if (p.feature < 0 || static_cast<std::size_t>(p.feature) >= d_s)
    throw SchemaError(fmt::format("predicate feature {} out of range [0, {})",
                                  p.feature, d_s));
}

}  // namespace

IntervalBox box_of(const LogicProgram& program, std::size_t d_s) {
  IntervalBox box;
  box.dims.resize(d_s);
  for (const auto& p : program.predicates) {
    check_feature(p, d_s);
    tighten(box.dims[p.feature], p);
  }
  return box;
}

std::pair<IntervalBox, std::vector<Conflict>> reduce(
    std::span<const LogicProgram> programs, std::size_t d_s) {
  IntervalBox box;
  box.dims.resize(d_s);
  // Who supplies the binding bound per dimension, for conflict witnesses.
  std::vector<int> lo_src(d_s, -1), hi_src(d_s, -1);

  for (std::size_t p = 0; p < programs.size(); ++p) {
    for (const auto& pred : programs[p].predicates) {
      check_feature(pred, d_s);
      Interval& iv = box.dims[pred.feature];
      if (pred.leq) {
        if (pred.threshold < iv.hi) {
          iv.hi = pred.threshold;
          hi_src[pred.feature] = static_cast<int>(p);
        }
      } else {
        if (pred.threshold > iv.lo) {
          iv.lo = pred.threshold;
          lo_src[pred.feature] = static_cast<int>(p);
        }
      }
    }
  }

  std::vector<Conflict> conflicts;
  for (std::size_t d = 0; d < d_s; ++d) {
    const Interval& iv = box.dims[d];
    if (!iv.constrained() || !iv.empty()) continue;
    Conflict c;
    c.feature = static_cast<int>(d);
    if (lo_src[d] >= 0) c.neuron_a = programs[lo_src[d]].neuron;
    if (hi_src[d] >= 0) c.neuron_b = programs[hi_src[d]].neuron;
    conflicts.push_back(std::move(c));
  }
  return {std::move(box), std::move(conflicts)};
}

double conflict_rate(const std::vector<std::vector<LogicProgram>>& steps, std::size_t d_s) {
  if (steps.empty()) throw DataError("conflict_rate: no timesteps");
  double total = 0.0;
  std::vector<Interval> combined(d_s);
  std::vector<int> constrainers(d_s);  // distinct programs touching each dim
  std::vector<char> touched(d_s);

  for (const auto& programs : steps) {
    std::fill(combined.begin(), combined.end(), Interval{});
    std::fill(constrainers.begin(), constrainers.end(), 0);
    for (const auto& prog : programs) {
      std::fill(touched.begin(), touched.end(), 0);
      for (const auto& p : prog.predicates) {
        check_feature(p, d_s);
        tighten(combined[p.feature], p);
        touched[p.feature] = 1;
      }
      for (std::size_t d = 0; d < d_s; ++d) constrainers[d] += touched[d];
    }
    int eligible = 0, clashing = 0;
    for (std::size_t d = 0; d < d_s; ++d) {
      if (constrainers[d] < 2) continue;
      ++eligible;
      // With one interval per neuron per dimension, an empty combined
      // intersection is equivalent to some pair being disjoint.
      if (combined[d].empty()) ++clashing;
    }
    total += eligible == 0 ? 0.0 : static_cast<double>(clashing) / eligible;
  }
  return total / static_cast<double>(steps.size());
}

LogicProgram program_of(const std::vector<std::vector<Predicate>>& tree_paths,
                        PathId path, std::string neuron) {
  if (path < 0 || static_cast<std::size_t>(path) >= tree_paths.size())
    throw SchemaError(fmt::format("program_of: unknown PathId {}", path));
  LogicProgram prog;
  prog.predicates = tree_paths[path];
  prog.neuron = std::move(neuron);
  prog.path = path;
  return prog;
}

std::string render(const LogicProgram& program, std::span<const std::string> names,
                   OpStyle style) {
  if (program.predicates.empty()) return "None";
  std::size_t d_s = names.size();
  if (!box_of(program, d_s).feasible()) return "(conflict)";
  std::string out;
  const char* leq = style == OpStyle::ascii_ops ? "<=" : "≤";
  for (std::size_t i = 0; i < program.predicates.size(); ++i) {
    const Predicate& p = program.predicates[i];
    if (i) out += " ∧ ";
    out += fmt::format("({} {} {:.2f})", names[p.feature], p.leq ? leq : ">", p.threshold);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Predicate parse_clause(std::string_view clause, std::span<const std::string> names) {
  clause = trim(clause);
  if (clause.size() < 2 || clause.front() != '(' || clause.back() != ')')
    throw ParseError(fmt::format("clause '{}' is not parenthesized", clause));
  std::string_view body = trim(clause.substr(1, clause.size() - 2));

  bool leq = true;
  std::size_t op_pos = body.find(" <= ");
  std::size_t op_len = 4;
  if (op_pos == std::string_view::npos) {
    op_pos = body.find(" ≤ ");  // UTF-8 fallback
    op_len = std::string_view(" ≤ ").size();
  }
  if (op_pos == std::string_view::npos) {
    op_pos = body.find(" > ");
    op_len = 3;
    leq = false;
  }
  if (op_pos == std::string_view::npos)
    throw ParseError(fmt::format("clause '{}' has no comparison operator", clause));

  std::string name(trim(body.substr(0, op_pos)));
  std::string number(trim(body.substr(op_pos + op_len)));

  Predicate p;
  p.leq = leq;
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw ParseError(fmt::format("clause '{}' names unknown state dimension '{}'",
                                 clause, name));
  p.feature = static_cast<int>(it - names.begin());
  try {
    std::size_t used = 0;
    p.threshold = std::stod(number, &used);
    if (used != number.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ParseError(fmt::format("clause '{}' has a malformed threshold '{}'",
                                 clause, number));
  }
  return p;
}

}  // namespace

LogicProgram parse_program(std::string_view text, std::span<const std::string> names) {
  LogicProgram prog;
  text = trim(text);
  if (text == "None") return prog;
  if (text.empty()) throw ParseError("empty program text (expected \"None\" or clauses)");
  const std::string_view wedge = " ∧ ";
  const std::string_view amp = " && ";
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t w = text.find(wedge, pos);
    std::size_t a = text.find(amp, pos);
    std::size_t cut = std::min(w, a);
    std::size_t sep = (cut == w) ? wedge.size() : amp.size();
    if (cut == std::string_view::npos) {
      prog.predicates.push_back(parse_clause(text.substr(pos), names));
      break;
    }
    prog.predicates.push_back(parse_clause(text.substr(pos, cut - pos), names));
    pos = cut + sep;
  }
  return prog;
}

}  // namespace policyscope
