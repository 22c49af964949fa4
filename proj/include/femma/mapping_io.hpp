#pragma once

// Line-oriented mapping files:
//
//   femma-mapping 1
//   shape 25 5 4
//   warps 4
//   tiles 1 1 1
//   0 0 0 0 -> 0 0 0
//   0 0 5 0 -> PAD
//   ...
//
// One entry per (warp, instr_m, instr_n, instr_k) slot. An entry is PAD when
// any of the three axis maps is padding there. Lines starting with '#' are
// comments.

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "femma/errors.hpp"
#include "femma/warp_mma.hpp"

namespace femma {

inline constexpr int kMappingFormatVersion = 1;

inline void write_mapping(std::ostream& out, const IndexMapping& mp) {
  out << "femma-mapping " << kMappingFormatVersion << "\n";
  out << "shape " << mp.shape.m << " " << mp.shape.n << " " << mp.shape.k << "\n";
  out << "warps " << mp.num_warps << "\n";
  out << "tiles " << mp.m_tiles << " " << mp.n_tiles << " " << mp.k_tiles << "\n";
  for (int w = 0; w < mp.num_warps; ++w)
    for (int im = 0; im < mp.m_slots(); ++im)
      for (int in = 0; in < mp.n_slots(); ++in)
        for (int ik = 0; ik < mp.k_slots(); ++ik) {
          const int pm = mp.map_m(w, im), pn = mp.map_n(in), pk = mp.map_k(ik);
          out << w << " " << im << " " << in << " " << ik << " -> ";
          if (pm == kPad || pn == kPad || pk == kPad)
            out << "PAD\n";
          else
            out << pm << " " << pn << " " << pk << "\n";
        }
}

inline std::string mapping_to_string(const IndexMapping& mp) {
  std::ostringstream s;
  write_mapping(s, mp);
  return s.str();
}

namespace detail {

inline bool next_content_line(std::istream& in, std::string& line, int& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

[[noreturn]] inline void parse_fail(int lineno, const std::string& msg) {
  throw ParseError("mapping line " + std::to_string(lineno) + ": " + msg);
}

// Records value v into slot of f, flagging disagreement with an earlier entry.
inline void assign_slot(std::vector<int>& f, std::size_t slot, int v, int lineno, const char* axis) {
  constexpr int kUnset = -2;
  if (f[slot] == kUnset)
    f[slot] = v;
  else if (f[slot] != v)
    parse_fail(lineno, std::string("entry disagrees with an earlier ") + axis + " assignment");
}

}  // namespace detail

// Parses a mapping file and reconstructs the per-axis maps. Entries must be
// consistent with a factored (f_m, f_n, f_k) mapping and every slot must be
// listed exactly once. Coverage is not checked here.
inline IndexMapping read_mapping(std::istream& in) {
  constexpr int kUnset = -2;
  std::string line;
  int lineno = 0;
  IndexMapping mp;

  auto expect_header = [&](const char* key, int count, int* vals) {
    if (!detail::next_content_line(in, line, lineno))
      detail::parse_fail(lineno, std::string("missing '") + key + "' header");
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word != key) detail::parse_fail(lineno, std::string("expected '") + key + "'");
    for (int i = 0; i < count; ++i)
      if (!(ls >> vals[i])) detail::parse_fail(lineno, std::string("bad '") + key + "' header");
    std::string extra;
    if (ls >> extra) detail::parse_fail(lineno, "trailing text '" + extra + "'");
  };

  int version = 0;
  expect_header("femma-mapping", 1, &version);
  if (version != kMappingFormatVersion)
    detail::parse_fail(lineno, "unsupported mapping format version " + std::to_string(version));
  int shape[3];
  expect_header("shape", 3, shape);
  mp.shape = {shape[0], shape[1], shape[2]};
  if (!mp.shape.valid()) detail::parse_fail(lineno, "shape must be positive");
  expect_header("warps", 1, &mp.num_warps);
  int tiles[3];
  expect_header("tiles", 3, tiles);
  mp.m_tiles = tiles[0];
  mp.n_tiles = tiles[1];
  mp.k_tiles = tiles[2];
  if (mp.num_warps < 1 || mp.m_tiles < 1 || mp.n_tiles < 1 || mp.k_tiles < 1)
    detail::parse_fail(lineno, "warp and tile counts must be positive");

  const long total = static_cast<long>(mp.num_warps) * mp.m_slots() * mp.n_slots() * mp.k_slots();
  if (total > (1L << 26)) detail::parse_fail(lineno, "mapping is too large");

  struct Entry {
    int w, im, in, ik;
    bool pad;
    int pm, pn, pk;
    int lineno;
  };
  std::vector<Entry> entries;
  std::vector<char> seen(static_cast<std::size_t>(total), 0);
  while (detail::next_content_line(in, line, lineno)) {
    std::istringstream ls(line);
    Entry e{};
    e.lineno = lineno;
    std::string arrow;
    if (!(ls >> e.w >> e.im >> e.in >> e.ik >> arrow) || arrow != "->")
      detail::parse_fail(lineno, "expected 'warp instr_m instr_n instr_k -> ...'");
    std::string first;
    if (!(ls >> first)) detail::parse_fail(lineno, "missing target after '->'");
    if (first == "PAD") {
      e.pad = true;
    } else {
      try {
        std::size_t used = 0;
        e.pm = std::stoi(first, &used);
        if (used != first.size()) throw std::invalid_argument(first);
      } catch (const std::exception&) {
        detail::parse_fail(lineno, "bad problem index '" + first + "'");
      }
      if (!(ls >> e.pn >> e.pk)) detail::parse_fail(lineno, "expected 'prob_m prob_n prob_k'");
      if (e.pm < 0 || e.pn < 0 || e.pk < 0) detail::parse_fail(lineno, "negative problem index");
    }
    std::string extra;
    if (ls >> extra) detail::parse_fail(lineno, "trailing text '" + extra + "'");
    if (e.w < 0 || e.w >= mp.num_warps || e.im < 0 || e.im >= mp.m_slots() || e.in < 0 ||
        e.in >= mp.n_slots() || e.ik < 0 || e.ik >= mp.k_slots())
      detail::parse_fail(lineno, "instruction slot out of range");
    const std::size_t flat =
        ((static_cast<std::size_t>(e.w) * mp.m_slots() + e.im) * mp.n_slots() + e.in) *
            mp.k_slots() + e.ik;
    if (seen[flat]) detail::parse_fail(lineno, "slot listed twice");
    seen[flat] = 1;
    entries.push_back(e);
  }
  if (entries.size() != static_cast<std::size_t>(total))
    detail::parse_fail(lineno, "expected " + std::to_string(total) + " entries, found " +
                                   std::to_string(entries.size()));

  mp.f_m.assign(static_cast<std::size_t>(mp.num_warps) * mp.m_slots(), kUnset);
  mp.f_n.assign(static_cast<std::size_t>(mp.n_slots()), kUnset);
  mp.f_k.assign(static_cast<std::size_t>(mp.k_slots()), kUnset);
  for (const auto& e : entries) {
    if (e.pad) continue;
    detail::assign_slot(mp.f_m, static_cast<std::size_t>(e.w) * mp.m_slots() + e.im, e.pm,
                        e.lineno, "f_m");
    detail::assign_slot(mp.f_n, e.in, e.pn, e.lineno, "f_n");
    detail::assign_slot(mp.f_k, e.ik, e.pk, e.lineno, "f_k");
  }
  for (auto* f : {&mp.f_m, &mp.f_n, &mp.f_k})
    for (int& v : *f)
      if (v == kUnset) v = kPad;
  // A PAD entry must be padding on at least one axis of the reconstruction.
  for (const auto& e : entries) {
    if (!e.pad) continue;
    if (mp.map_m(e.w, e.im) != kPad && mp.map_n(e.in) != kPad && mp.map_k(e.ik) != kPad)
      detail::parse_fail(e.lineno, "PAD entry where every axis maps to a problem index");
  }
  return mp;
}

inline IndexMapping read_mapping_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mapping file '" + path + "'");
  return read_mapping(in);
}

inline void write_mapping_file(const std::string& path, const IndexMapping& mp) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write mapping file '" + path + "'");
  write_mapping(out, mp);
}

}  // namespace femma
