#pragma once

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "wfomc/logic.hpp"
#include "wfomc/theory_ops.hpp"

namespace wfomc {

/// Order- and renaming-invariant serialization of a theory plus weights.
/// Equal keys imply equal weighted counts; distinct semantics yield distinct
/// keys because the serialization is complete, never a lossy hash.
using CanonicalKey = std::string;

namespace canon_detail {

using Code = SmallVec<uint32_t, 40>;

template <typename T>
inline std::vector<uint32_t> rank_by_sort(std::vector<T>& sigs) {
  std::vector<const T*> order;
  order.reserve(sigs.size());
  for (const auto& s : sigs) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const T* a, const T* b) { return *a < *b; });
  std::vector<uint32_t> rank(sigs.size(), 0);
  uint32_t next = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && *order[i - 1] < *order[i]) ++next;
    rank[static_cast<size_t>(order[i] - sigs.data())] = next;
  }
  return rank;
}

struct Elements {
  std::vector<PredId> preds;
  std::vector<SegmentId> segs;
  std::vector<ConstId> csts;
  std::map<PredId, uint32_t> pred_pos;
  std::map<SegmentId, uint32_t> seg_pos;
  std::map<ConstId, uint32_t> cst_pos;
  std::vector<uint32_t> pred_color, seg_color, cst_color;
};

inline Elements collect(const Theory& t, const WeightFunction& w, bool with_sizes) {
  Elements e;
  auto up = t.used_predicates();
  auto us = t.used_segments();
  auto uc = t.used_constants();
  for (PredId p = 0; p < t.predicates.size(); ++p)
    if (up[p]) {
      e.pred_pos[p] = static_cast<uint32_t>(e.preds.size());
      e.preds.push_back(p);
    }
  for (SegmentId s = 0; s < t.segments.size(); ++s)
    if (us[s]) {
      e.seg_pos[s] = static_cast<uint32_t>(e.segs.size());
      e.segs.push_back(s);
    }
  for (ConstId k = 0; k < t.constants.size(); ++k)
    if (uc[k]) {
      e.cst_pos[k] = static_cast<uint32_t>(e.csts.size());
      e.csts.push_back(k);
    }
  // initial colors: predicates by (arity, weights); segments by size
  {
    using PredSig = std::tuple<uint32_t, Rational, Rational>;
    std::vector<PredSig> sigs;
    for (PredId p : e.preds) sigs.emplace_back(t.predicates[p].arity(), w.pos(p), w.neg(p));
    e.pred_color = rank_by_sort(sigs);
  }
  {
    std::vector<std::pair<int, uint64_t>> sigs;
    for (SegmentId s : e.segs) {
      const Size& sz = t.segments[s].size;
      sigs.emplace_back(!with_sizes || sz.symbolic ? 1 : 0,
                        !with_sizes || sz.symbolic ? 0 : sz.value);
    }
    e.seg_color = rank_by_sort(sigs);
  }
  e.cst_color.assign(e.csts.size(), 0);
  return e;
}

/// One exact color-refinement round over the occurrence structure.
/// Returns true when some color class split.
inline bool refine_round(const Theory& t, Elements& e) {
  // literal codes under current colors; slot ids are within-literal
  struct LitRef {
    uint32_t clause, lit;
  };
  std::vector<Code> lit_codes;
  std::vector<std::vector<uint32_t>> lit_code_of(t.clauses.size());
  for (uint32_t ci = 0; ci < t.clauses.size(); ++ci) {
    const Clause& c = t.clauses[ci];
    lit_code_of[ci].resize(c.literals.size());
    for (uint32_t li = 0; li < c.literals.size(); ++li) {
      const Literal& lit = c.literals[li];
      Code code;
      code.reserve(1 + lit.args.size());
      code.push_back((e.pred_color[e.pred_pos.at(lit.pred)] << 1) | (lit.positive ? 1u : 0u));
      std::vector<int32_t> slot_of_var;
      int32_t next = 0;
      for (const auto& tm : lit.args) {
        if (tm.is_var) {
          if (slot_of_var.size() <= tm.idx) slot_of_var.resize(tm.idx + 1, -1);
          if (slot_of_var[tm.idx] < 0) slot_of_var[tm.idx] = next++;
          code.push_back(0x80000000u | (static_cast<uint32_t>(slot_of_var[tm.idx]) << 24) |
                         e.seg_color[e.seg_pos.at(c.vars[tm.idx].segment)]);
        } else {
          code.push_back(0x40000000u | e.cst_color[e.cst_pos.at(tm.idx)]);
        }
      }
      lit_code_of[ci][li] = static_cast<uint32_t>(lit_codes.size());
      lit_codes.push_back(std::move(code));
    }
  }
  auto lit_rank = rank_by_sort(lit_codes);

  // clause descriptors: sorted multiset of literal ranks
  std::vector<Code> clause_desc(t.clauses.size());
  for (uint32_t ci = 0; ci < t.clauses.size(); ++ci) {
    for (uint32_t li = 0; li < t.clauses[ci].literals.size(); ++li)
      clause_desc[ci].push_back(lit_rank[lit_code_of[ci][li]]);
    std::sort(clause_desc[ci].begin(), clause_desc[ci].end());
  }
  auto clause_rank = rank_by_sort(clause_desc);

  // element signatures: old color plus sorted occurrence codes
  std::vector<Code> pred_sig(e.preds.size()), seg_sig(e.segs.size()), cst_sig(e.csts.size());
  for (size_t i = 0; i < e.preds.size(); ++i) pred_sig[i].push_back(e.pred_color[i]);
  for (size_t i = 0; i < e.segs.size(); ++i) seg_sig[i].push_back(e.seg_color[i]);
  for (size_t i = 0; i < e.csts.size(); ++i) cst_sig[i].push_back(e.cst_color[i]);
  std::vector<std::vector<uint64_t>> pred_occ(e.preds.size()), seg_occ(e.segs.size()),
      cst_occ(e.csts.size());
  for (uint32_t ci = 0; ci < t.clauses.size(); ++ci) {
    const Clause& c = t.clauses[ci];
    for (uint32_t li = 0; li < c.literals.size(); ++li) {
      const Literal& lit = c.literals[li];
      uint64_t occ = (static_cast<uint64_t>(clause_rank[ci]) << 32) | lit_rank[lit_code_of[ci][li]];
      pred_occ[e.pred_pos.at(lit.pred)].push_back(occ);
      for (uint32_t ai = 0; ai < lit.args.size(); ++ai) {
        uint64_t pos_occ = (occ << 5) | ai;  // positions are few
        const Term& tm = lit.args[ai];
        if (tm.is_var)
          seg_occ[e.seg_pos.at(c.vars[tm.idx].segment)].push_back(pos_occ);
        else
          cst_occ[e.cst_pos.at(tm.idx)].push_back(pos_occ);
      }
    }
  }
  auto fold = [](std::vector<Code>& sigs, std::vector<std::vector<uint64_t>>& occ) {
    for (size_t i = 0; i < sigs.size(); ++i) {
      std::sort(occ[i].begin(), occ[i].end());
      for (uint64_t o : occ[i]) {
        sigs[i].push_back(static_cast<uint32_t>(o >> 32));
        sigs[i].push_back(static_cast<uint32_t>(o));
      }
    }
  };
  fold(pred_sig, pred_occ);
  fold(seg_sig, seg_occ);
  fold(cst_sig, cst_occ);

  auto np = rank_by_sort(pred_sig);
  auto ns = rank_by_sort(seg_sig);
  auto nc = rank_by_sort(cst_sig);
  bool changed = np != e.pred_color || ns != e.seg_color || nc != e.cst_color;
  e.pred_color = std::move(np);
  e.seg_color = std::move(ns);
  e.cst_color = std::move(nc);
  return changed;
}

/// Canonical encoding of one clause under fixed element ranks: the least
/// sorted-literal encoding over the admissible variable orderings.
inline Code render_clause(const Clause& c, const std::vector<uint32_t>& pred_rank,
                          const std::vector<uint32_t>& seg_rank,
                          const std::vector<uint32_t>& cst_rank,
                          const std::map<PredId, uint32_t>& pred_pos,
                          const std::map<SegmentId, uint32_t>& seg_pos,
                          const std::map<ConstId, uint32_t>& cst_pos) {
  std::map<uint32_t, std::vector<VarIdx>> by_seg_rank;
  for (VarIdx i = 0; i < c.vars.size(); ++i)
    by_seg_rank[seg_rank[seg_pos.at(c.vars[i].segment)]].push_back(i);

  std::vector<uint32_t> var_rank(c.vars.size(), 0);
  auto render = [&](Code& out) {
    std::vector<Code> lits;
    lits.reserve(c.literals.size());
    for (const auto& lit : c.literals) {
      Code s;
      s.reserve(2 + lit.args.size());
      s.push_back((pred_rank[pred_pos.at(lit.pred)] << 1) | (lit.positive ? 1u : 0u));
      for (const auto& tm : lit.args)
        s.push_back(tm.is_var ? (0x80000000u | var_rank[tm.idx])
                              : (0x40000000u | cst_rank[cst_pos.at(tm.idx)]));
      lits.push_back(std::move(s));
    }
    std::sort(lits.begin(), lits.end());
    out.clear();
    // header: per segment rank, the number of quantified variables
    for (auto& [sr, vs] : by_seg_rank) {
      out.push_back(sr);
      out.push_back(static_cast<uint32_t>(vs.size()));
    }
    out.push_back(0xfffffffeu);
    for (auto& s : lits) {
      out.insert(out.end(), s.begin(), s.end());
      out.push_back(0xffffffffu);
    }
  };

  uint64_t perms = 1;
  for (auto& [sr, vs] : by_seg_rank)
    for (size_t i = 2; i <= vs.size() && perms <= 720; ++i) perms *= i;
  if (perms > 720) {
    uint32_t n = 0;
    for (auto& [sr, vs] : by_seg_rank)
      for (VarIdx v : vs) var_rank[v] = n++;
    Code out;
    render(out);
    return out;
  }
  std::vector<std::vector<VarIdx>> blocks;
  for (auto& [sr, vs] : by_seg_rank) {
    auto b = vs;
    std::sort(b.begin(), b.end());
    blocks.push_back(std::move(b));
  }
  Code best, scratch;
  while (true) {
    uint32_t n = 0;
    for (auto& b : blocks)
      for (VarIdx v : b) var_rank[v] = n++;
    render(scratch);
    if (best.empty() || scratch < best) best = scratch;
    size_t i = 0;
    for (; i < blocks.size(); ++i)
      if (std::next_permutation(blocks[i].begin(), blocks[i].end())) break;
    if (i == blocks.size()) break;
  }
  return best;
}

inline void append_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}
inline void append_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

inline std::string serialize_clauses(const Theory& t, const Elements& e,
                                     const std::vector<uint32_t>& pred_rank,
                                     const std::vector<uint32_t>& seg_rank,
                                     const std::vector<uint32_t>& cst_rank) {
  std::vector<Code> clauses;
  clauses.reserve(t.clauses.size());
  for (const auto& c : t.clauses)
    clauses.push_back(
        render_clause(c, pred_rank, seg_rank, cst_rank, e.pred_pos, e.seg_pos, e.cst_pos));
  std::sort(clauses.begin(), clauses.end());
  std::string out;
  for (const auto& code : clauses) {
    for (uint32_t v : code) append_u32(out, v);
    out.push_back('\n');
  }
  return out;
}

}  // namespace canon_detail

inline CanonicalKey canonical_key_impl(const Theory& t, const WeightFunction& w, bool with_sizes,
                                       std::map<SegmentId, uint32_t>* seg_roles = nullptr) {
  using namespace canon_detail;
  Elements e = collect(t, w, with_sizes);
  for (int round = 0; round < 8; ++round)
    if (!refine_round(t, e)) break;

  // tie blocks per element kind, ordered by color
  auto blocks_of = [](const std::vector<uint32_t>& color) {
    std::map<uint32_t, std::vector<uint32_t>> blocks;  // color -> positions
    for (uint32_t i = 0; i < color.size(); ++i) blocks[color[i]].push_back(i);
    std::vector<std::vector<uint32_t>> out;
    for (auto& [col, members] : blocks) out.push_back(members);
    return out;
  };
  auto pred_blocks = blocks_of(e.pred_color);
  auto seg_blocks = blocks_of(e.seg_color);
  auto cst_blocks = blocks_of(e.cst_color);

  uint64_t total_perms = 1;
  auto count_perms = [&total_perms](auto& blocks) {
    for (auto& b : blocks)
      for (size_t i = 2; i <= b.size() && total_perms <= 5040; ++i) total_perms *= i;
  };
  count_perms(pred_blocks);
  count_perms(seg_blocks);
  count_perms(cst_blocks);

  auto ranks_from = [](const std::vector<std::vector<uint32_t>>& blocks, size_t n) {
    std::vector<uint32_t> rank(n, 0);
    uint32_t r = 0;
    for (auto& b : blocks)
      for (uint32_t pos : b) rank[pos] = r++;
    return rank;
  };

  std::string clause_part;
  std::vector<uint32_t> pred_rank, seg_rank, cst_rank;
  if (total_perms > 5040) {
    // exactness of the key is kept (full serialization); only cache-hit
    // quality across isomorphic theories degrades
    pred_rank = ranks_from(pred_blocks, e.preds.size());
    seg_rank = ranks_from(seg_blocks, e.segs.size());
    cst_rank = ranks_from(cst_blocks, e.csts.size());
    clause_part = serialize_clauses(t, e, pred_rank, seg_rank, cst_rank);
  } else {
    for (auto& b : pred_blocks) std::sort(b.begin(), b.end());
    for (auto& b : seg_blocks) std::sort(b.begin(), b.end());
    for (auto& b : cst_blocks) std::sort(b.begin(), b.end());
    auto advance = [](auto& blocks) {
      for (size_t i = 0; i < blocks.size(); ++i)
        if (std::next_permutation(blocks[i].begin(), blocks[i].end())) return true;
      return false;
    };
    while (true) {
      auto pr = ranks_from(pred_blocks, e.preds.size());
      auto sr = ranks_from(seg_blocks, e.segs.size());
      auto cr = ranks_from(cst_blocks, e.csts.size());
      std::string s = serialize_clauses(t, e, pr, sr, cr);
      if (clause_part.empty() || s < clause_part) {
        clause_part = std::move(s);
        pred_rank = std::move(pr);
        seg_rank = std::move(sr);
        cst_rank = std::move(cr);
      }
      if (advance(cst_blocks)) continue;
      if (advance(seg_blocks)) continue;
      if (advance(pred_blocks)) continue;
      break;
    }
  }

  // header: order-invariant under the chosen ranks because tied elements
  // carry identical weights and sizes
  std::string out;
  out.reserve(64 + clause_part.size());
  append_u32(out, static_cast<uint32_t>(e.preds.size()));
  {
    std::vector<std::pair<uint32_t, PredId>> order;
    for (size_t i = 0; i < e.preds.size(); ++i) order.emplace_back(pred_rank[i], e.preds[i]);
    std::sort(order.begin(), order.end());
    for (auto& [r, p] : order) {
      append_u32(out, t.predicates[p].arity());
      out += w.pos(p).get_str();
      out.push_back(',');
      out += w.neg(p).get_str();
      out.push_back(';');
    }
  }
  append_u32(out, static_cast<uint32_t>(e.segs.size()));
  {
    std::vector<std::pair<uint32_t, SegmentId>> order;
    for (size_t i = 0; i < e.segs.size(); ++i) order.emplace_back(seg_rank[i], e.segs[i]);
    std::sort(order.begin(), order.end());
    for (auto& [r, s] : order) {
      const Size& sz = t.segments[s].size;
      append_u64(out, !with_sizes || sz.symbolic ? ~uint64_t{0} : sz.value);
    }
  }
  append_u32(out, static_cast<uint32_t>(e.csts.size()));
  out.push_back('|');
  out += clause_part;
  if (seg_roles)
    for (size_t i = 0; i < e.segs.size(); ++i) (*seg_roles)[e.segs[i]] = seg_rank[i];
  return out;
}

/// Shape key plus the canonical role of each referenced segment; recurring
/// shapes assign corresponding segments the same role.
struct ShapeInfo {
  CanonicalKey key;
  std::map<SegmentId, uint32_t> seg_role;
};

inline ShapeInfo shape_info(const Theory& t, const WeightFunction& w) {
  ShapeInfo out;
  out.key = canonical_key_impl(t, w, false, &out.seg_role);
  return out;
}

inline CanonicalKey canonical_key(const Theory& t, const WeightFunction& w) {
  return canonical_key_impl(t, w, true);
}

/// Canonical key with segment sizes erased; identifies the recurring shape
/// for the domain-recursion guard.
inline CanonicalKey shape_key(const Theory& t, const WeightFunction& w) {
  return canonical_key_impl(t, w, false);
}

/// Total live population referenced by the clauses; the well-founded measure
/// for recursion-shape recurrences.
inline uint64_t total_size(const Theory& t) {
  auto us = t.used_segments();
  auto uc = t.used_constants();
  uint64_t total = 0;
  for (SegmentId s = 0; s < t.segments.size(); ++s)
    if (us[s] && !t.segments[s].size.symbolic) total += t.segments[s].size.value;
  for (ConstId k = 0; k < t.constants.size(); ++k)
    if (uc[k]) total += 1;
  return total;
}

}  // namespace wfomc
