// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sepred/errors.hpp"

namespace sepred {

enum class BondKind { Single, Double, Triple, Aromatic };

struct AtomRecord {
  std::string element;
  bool aromatic = false;
};

struct BondRecord {
  int i = 0;
  int j = 0;
  BondKind kind = BondKind::Single;
};

// Heavy-atom molecule. Hydrogens are never materialized.
struct Molecule {
  std::vector<AtomRecord> atoms;
  std::vector<BondRecord> bonds;
};

namespace detail {

inline const std::set<std::string>& periodic_table() {
  static const std::set<std::string> table = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
      "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
      "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
      "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
      "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
      "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
      "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
      "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
      "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
      "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
  return table;
}

// Lowercase symbols SMILES allows in aromatic form.
inline bool aromatic_symbol_allowed(const std::string& sym) {
  static const std::set<std::string> ok = {"b", "c", "n", "o",  "p",
                                           "s", "se", "as", "te", "si"};
  return ok.count(sym) > 0;
}

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(s[0]));
  return s;
}

struct RingOpen {
  int atom = -1;
  std::optional<BondKind> bond;
};

}  // namespace detail

/// Parses a practical subset of SMILES into a heavy-atom Molecule.
/// Charges, isotopes and stereo markers are accepted and discarded;
/// hydrogens (implicit or explicit) are dropped; wildcards and reaction
/// syntax are rejected.
inline Molecule parse_smiles(std::string_view text) {
  if (text.empty()) throw ParseError("empty SMILES string");

  std::vector<AtomRecord> atoms;
  std::vector<BondRecord> bonds;
  std::vector<int> branch_stack;
  std::map<int, detail::RingOpen> open_rings;
  std::set<std::pair<int, int>> bonded_pairs;
  int prev = -1;
  std::optional<BondKind> pending;

  auto default_kind = [&](int a, int b) {
    return (atoms[a].aromatic && atoms[b].aromatic) ? BondKind::Aromatic
                                                    : BondKind::Single;
  };
  auto add_bond = [&](int a, int b, BondKind kind) {
    if (a == b) throw ParseError("bond between an atom and itself");
    auto key = std::minmax(a, b);
    if (!bonded_pairs.insert(key).second)
      throw ParseError("duplicate bond between the same atom pair");
    bonds.push_back({a, b, kind});
  };
  auto attach = [&](int idx) {
    if (prev >= 0) {
      BondKind kind = pending ? *pending : default_kind(prev, idx);
      add_bond(prev, idx, kind);
    } else if (pending) {
      throw ParseError("bond symbol with no preceding atom");
    }
    pending.reset();
    prev = idx;
  };
  auto ring_event = [&](int ring_id) {
    if (prev < 0) throw ParseError("ring closure with no preceding atom");
    auto it = open_rings.find(ring_id);
    if (it == open_rings.end()) {
      open_rings[ring_id] = {prev, pending};
      pending.reset();
      return;
    }
    detail::RingOpen open = it->second;
    open_rings.erase(it);
    BondKind kind;
    if (open.bond && pending && *open.bond != *pending)
      throw ParseError("conflicting bond symbols on ring closure " +
                       std::to_string(ring_id));
    if (open.bond)
      kind = *open.bond;
    else if (pending)
      kind = *pending;
    else
      kind = default_kind(open.atom, prev);
    add_bond(open.atom, prev, kind);
    pending.reset();
  };

  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '(') {
      if (prev < 0) throw ParseError("branch opened before any atom");
      branch_stack.push_back(prev);
      ++i;
    } else if (c == ')') {
      if (branch_stack.empty()) throw ParseError("unbalanced parentheses");
      if (pending) throw ParseError("dangling bond symbol before ')'");
      prev = branch_stack.back();
      branch_stack.pop_back();
      ++i;
    } else if (c == '.') {
      if (pending) throw ParseError("bond symbol before component separator");
      prev = -1;
      ++i;
    } else if (c == '-' || c == '/' || c == '\\') {
      if (pending) throw ParseError("two consecutive bond symbols");
      pending = BondKind::Single;  // stereo slashes carry no bond order here
      ++i;
    } else if (c == '=') {
      if (pending) throw ParseError("two consecutive bond symbols");
      pending = BondKind::Double;
      ++i;
    } else if (c == '#') {
      if (pending) throw ParseError("two consecutive bond symbols");
      pending = BondKind::Triple;
      ++i;
    } else if (c == ':') {
      if (pending) throw ParseError("two consecutive bond symbols");
      pending = BondKind::Aromatic;
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_event(c - '0');
      ++i;
    } else if (c == '%') {
      if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text[i + 2])))
        throw ParseError("malformed %nn ring closure");
      ring_event((text[i + 1] - '0') * 10 + (text[i + 2] - '0'));
      i += 3;
    } else if (c == '[') {
      size_t close = text.find(']', i);
      if (close == std::string_view::npos)
        throw ParseError("unterminated bracket atom");
      std::string_view body = text.substr(i + 1, close - i - 1);
      size_t p = 0;
      while (p < body.size() && std::isdigit(static_cast<unsigned char>(body[p])))
        ++p;  // isotope, discarded
      if (p >= body.size()) throw ParseError("bracket atom without element");
      std::string sym;
      bool aromatic = false;
      char first = body[p];
      if (std::isupper(static_cast<unsigned char>(first))) {
        sym += first;
        ++p;
        if (p < body.size() && std::islower(static_cast<unsigned char>(body[p])) &&
            detail::periodic_table().count(sym + body[p]))
          sym += body[p++];
      } else if (std::islower(static_cast<unsigned char>(first))) {
        sym += first;
        ++p;
        if (p < body.size() && std::islower(static_cast<unsigned char>(body[p])) &&
            detail::aromatic_symbol_allowed(sym + body[p]))
          sym += body[p++];
        if (!detail::aromatic_symbol_allowed(sym))
          throw ParseError("element '" + sym + "' cannot be aromatic");
        aromatic = true;
        sym = detail::capitalize(sym);
      } else {
        throw ParseError(std::string("malformed bracket atom near '") + first +
                         "'");
      }
      if (!detail::periodic_table().count(sym))
        throw ParseError("unknown element symbol '" + sym + "'");
      // Trailing decorations: chirality, H-count, charge, atom class.
      while (p < body.size()) {
        char d = body[p];
        if (d == '@') {
          ++p;
          if (p < body.size() && body[p] == '@') ++p;
        } else if (d == 'H') {
          ++p;
          while (p < body.size() &&
                 std::isdigit(static_cast<unsigned char>(body[p])))
            ++p;
        } else if (d == '+' || d == '-') {
          char sign = d;
          ++p;
          while (p < body.size() &&
                 (body[p] == sign ||
                  std::isdigit(static_cast<unsigned char>(body[p]))))
            ++p;
        } else if (d == ':') {
          ++p;
          if (p >= body.size() ||
              !std::isdigit(static_cast<unsigned char>(body[p])))
            throw ParseError("malformed atom class in bracket atom");
          while (p < body.size() &&
                 std::isdigit(static_cast<unsigned char>(body[p])))
            ++p;
        } else {
          throw ParseError(std::string("malformed bracket atom near '") + d +
                           "'");
        }
      }
      atoms.push_back({sym, aromatic});
      attach(static_cast<int>(atoms.size()) - 1);
      i = close + 1;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      // Organic subset, two-letter symbols first.
      std::string sym(1, c);
      if (i + 1 < n) {
        std::string two = sym + text[i + 1];
        if (two == "Cl" || two == "Br") sym = two;
      }
      static const std::set<std::string> organic = {"B", "C",  "N",  "O", "P",
                                                    "S", "F",  "Cl", "Br", "I"};
      if (!organic.count(sym))
        throw ParseError("element '" + sym +
                         "' must be written as a bracket atom");
      atoms.push_back({sym, false});
      attach(static_cast<int>(atoms.size()) - 1);
      i += sym.size();
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      static const std::set<std::string> organic_aromatic = {"b", "c", "n",
                                                             "o", "p", "s"};
      if (!organic_aromatic.count(sym))
        throw ParseError(std::string("unknown atom symbol '") + c + "'");
      atoms.push_back({detail::capitalize(sym), true});
      attach(static_cast<int>(atoms.size()) - 1);
      ++i;
    } else if (c == '*') {
      throw ParseError("wildcard atoms are not supported");
    } else if (c == '>') {
      throw ParseError("reaction SMILES are not supported");
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      // Trailing whitespace / title field: stop at the first blank.
      break;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'");
    }
  }

  if (pending) throw ParseError("dangling bond symbol at end of input");
  if (!branch_stack.empty()) throw ParseError("unbalanced parentheses");
  if (!open_rings.empty())
    throw ParseError("unmatched ring closure " +
                     std::to_string(open_rings.begin()->first));
  if (atoms.empty()) throw ParseError("empty atom stream");

  // Strip explicit hydrogens and reindex.
  std::vector<int> remap(atoms.size(), -1);
  Molecule mol;
  for (size_t a = 0; a < atoms.size(); ++a) {
    if (atoms[a].element == "H") continue;
    remap[a] = static_cast<int>(mol.atoms.size());
    mol.atoms.push_back(atoms[a]);
  }
  for (const auto& b : bonds) {
    if (remap[b.i] < 0 || remap[b.j] < 0) continue;
    mol.bonds.push_back({remap[b.i], remap[b.j], b.kind});
  }
  if (mol.atoms.empty()) throw ParseError("empty atom stream");
  return mol;
}

/// Reads a two-column CSV of (compound id, SMILES) pairs.
inline std::vector<std::pair<std::string, std::string>> read_smiles_csv(
    std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected 'id,smiles'");
    out.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> read_smiles_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open SMILES CSV: " + path);
  return read_smiles_csv(in);
}

}  // namespace sepred
