// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sepred/errors.hpp"
#include "sepred/smiles.hpp"

namespace sepred {

inline constexpr int kNumElementGroups = 15;
inline constexpr int kNumBondKinds = 4;

// Maps element symbols onto the 15 physico-chemical groups used as node
// labels. Covers exactly the 31 symbols observed in the dataset.
class ElementGrouping {
public:
  static const ElementGrouping& standard() {
    static const ElementGrouping g;
    return g;
  }

  /// Group id in 1..15, or throws DataError for an unmapped symbol.
  int group_of(const std::string& symbol) const {
    auto it = table_.find(symbol);
    if (it == table_.end())
      throw DataError("unmapped element symbol '" + symbol + "'");
    return it->second;
  }

  bool contains(const std::string& symbol) const {
    return table_.count(symbol) > 0;
  }

  const std::map<std::string, int>& table() const { return table_; }

private:
  ElementGrouping() {
    const std::vector<std::vector<std::string>> groups = {
        {"C"},
        {"N"},
        {"O"},
        {"S", "Se"},
        {"F"},
        {"P"},
        {"Cl"},
        {"I"},
        {"Br"},
        {"Na", "K", "Li"},
        {"Ca", "Mg", "Ba", "Sr"},
        {"Co", "Tc", "Mn", "Fe"},
        {"Au", "Ag", "Pt", "Zn"},
        {"B", "Ge", "In", "Tl"},
        {"La", "Gd"}};
    for (size_t g = 0; g < groups.size(); ++g)
      for (const auto& sym : groups[g]) table_[sym] = static_cast<int>(g) + 1;
  }

  std::map<std::string, int> table_;
};

inline int group_element(const std::string& symbol,
                         const ElementGrouping& grouping =
                             ElementGrouping::standard()) {
  return grouping.group_of(symbol);
}

// Directed edge record (n_h, n_k, b1..b4); the trailing four entries one-hot
// encode the bond kind in the order (single, double, triple, aromatic).
struct EdgeRecord {
  int src = 0;
  int dst = 0;
  std::array<std::uint8_t, kNumBondKinds> bond{};

  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

// Learning representation of one compound: one-hot node matrix, directed
// labeled edge list, binary multi-label target.
struct MolGraph {
  Eigen::MatrixXd node_matrix;     // N x 15, one-hot rows
  std::vector<EdgeRecord> edges;   // both directions, sorted by (dst, src)
  std::vector<std::uint8_t> target;

  int num_nodes() const { return static_cast<int>(node_matrix.rows()); }
};

inline int bond_kind_index(BondKind kind) {
  switch (kind) {
    case BondKind::Single: return 0;
    case BondKind::Double: return 1;
    case BondKind::Triple: return 2;
    case BondKind::Aromatic: return 3;
  }
  return 0;
}

/// Encodes a Molecule as a MolGraph: one-hot node rows over element groups,
/// one directed edge pair per bond, all-zero target of length num_classes.
inline MolGraph molecule_to_graph(const Molecule& mol,
                                  const ElementGrouping& grouping,
                                  int num_classes) {
  MolGraph g;
  const int n = static_cast<int>(mol.atoms.size());
  g.node_matrix = Eigen::MatrixXd::Zero(n, kNumElementGroups);
  for (int i = 0; i < n; ++i) {
    int grp = grouping.group_of(mol.atoms[i].element);
    g.node_matrix(i, grp - 1) = 1.0;
  }
  g.edges.reserve(mol.bonds.size() * 2);
  for (const auto& b : mol.bonds) {
    EdgeRecord e;
    e.bond[bond_kind_index(b.kind)] = 1;
    e.src = b.i;
    e.dst = b.j;
    g.edges.push_back(e);
    std::swap(e.src, e.dst);
    g.edges.push_back(e);
  }
  // Deterministic traversal order for reproducible floating-point sums.
  std::sort(g.edges.begin(), g.edges.end(), [](const EdgeRecord& a,
                                               const EdgeRecord& b) {
    return std::tie(a.dst, a.src) < std::tie(b.dst, b.src);
  });
  g.target.assign(static_cast<size_t>(num_classes), 0);
  return g;
}

}  // namespace sepred
