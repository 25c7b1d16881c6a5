#pragma once

#include <map>
#include <string>
#include <vector>

#include "wfomc/canonical.hpp"
#include "wfomc/logic.hpp"
#include "wfomc/theory_ops.hpp"

namespace wfomc {

/// Make one individual of the segment explicit: the segment is retired into
/// a fresh constant plus the rest, and every clause is shattered over the
/// split. A clause with k distinct variables over the segment yields its
/// k+1 admissible copies; copies placing the new individual in two
/// distinct-variable positions are dropped by the implicit inequality.
inline Theory rule_domain_recursion(const Theory& t, SegmentId seg) {
  if (t.segments[seg].size.is_zero()) throw EngineError("domain recursion on empty segment");
  Theory out = t;
  static const char* const kNames[] = {"N", "M", "O"};
  std::string name = kNames[out.constants.size() % 3] + std::to_string(out.constants.size());
  split_off_individual(out, seg, name);
  out = rule_shatter(out);
  compact_registry(out);
  return out;
}

/// Ancestry of recursion shapes along one solving chain. A shape may recur
/// only at strictly smaller total population; anything else would not be a
/// well-founded recursion. An entry remembers which canonical segment role
/// an accepted probe recursed on, so recurrences of the shape commit
/// directly instead of re-probing.
struct RecursionGuard {
  struct Entry {
    uint64_t size = 0;
    uint32_t accepted_role = UINT32_MAX;
  };
  std::map<std::string, std::vector<Entry>> path;

  enum class Check { Fresh, SmallerRecurrence, NonDecreasing };

  Check classify(const std::string& shape, uint64_t size) const {
    auto it = path.find(shape);
    if (it == path.end() || it->second.empty()) return Check::Fresh;
    return size < it->second.back().size ? Check::SmallerRecurrence : Check::NonDecreasing;
  }
  uint32_t accepted_role(const std::string& shape) const {
    auto it = path.find(shape);
    if (it == path.end() || it->second.empty()) return UINT32_MAX;
    return it->second.back().accepted_role;
  }
  void push(const std::string& shape, uint64_t size) { path[shape].push_back({size, UINT32_MAX}); }
  void record_acceptance(const std::string& shape, uint32_t role) {
    path.at(shape).back().accepted_role = role;
  }
  void pop(const std::string& shape) {
    auto it = path.find(shape);
    it->second.pop_back();
    if (it->second.empty()) path.erase(it);
  }
};

}  // namespace wfomc
