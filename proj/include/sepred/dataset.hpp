// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sepred/errors.hpp"
#include "sepred/molgraph.hpp"
#include "sepred/smiles.hpp"

namespace sepred {

enum class TermType { LLT, PT };

// One row of a SIDER-layout association table.
struct RawAssociation {
  std::string stitch_flat_id;
  std::string stitch_stereo_id;
  TermType term_type = TermType::PT;
  std::string side_effect_id;
  std::string side_effect_name;
};

struct SiderParseResult {
  std::vector<RawAssociation> associations;
  std::vector<std::string> row_errors;  // "line N: reason"
};

/// Parses the 6-column SIDER layout (flat id, stereo id, label id, term
/// type, term id, term name). Malformed rows are reported, not fatal;
/// an entirely empty stream is.
inline SiderParseResult parse_sider_tsv(std::istream& in) {
  SiderParseResult result;
  std::string line;
  size_t lineno = 0;
  bool saw_any = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    saw_any = true;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 6) {
      result.row_errors.push_back("line " + std::to_string(lineno) +
                                  ": expected 6 columns, got " +
                                  std::to_string(cols.size()));
      continue;
    }
    RawAssociation a;
    a.stitch_flat_id = cols[0];
    a.stitch_stereo_id = cols[1];
    if (cols[3] == "PT")
      a.term_type = TermType::PT;
    else if (cols[3] == "LLT")
      a.term_type = TermType::LLT;
    else {
      result.row_errors.push_back("line " + std::to_string(lineno) +
                                  ": unknown term type '" + cols[3] + "'");
      continue;
    }
    a.side_effect_id = cols[4];
    a.side_effect_name = cols[5];
    result.associations.push_back(std::move(a));
  }
  if (!saw_any) throw DataError("empty SIDER table");
  return result;
}

inline SiderParseResult parse_sider_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open SIDER TSV: " + path);
  return parse_sider_tsv(in);
}

/// Keeps exactly the PT rows, deduplicated on (stereo id, side-effect id).
inline std::vector<RawAssociation> filter_pt_terms(
    const std::vector<RawAssociation>& assocs,
    std::ostream* warnings = nullptr) {
  std::vector<RawAssociation> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& a : assocs) {
    if (a.term_type != TermType::PT) continue;
    if (seen.insert({a.stitch_stereo_id, a.side_effect_id}).second)
      out.push_back(a);
  }
  if (out.empty() && warnings)
    *warnings << "warning: no PT associations survived filtering\n";
  return out;
}

struct VocabEntry {
  std::string id;
  std::string name;
  long count = 0;  // distinct drugs carrying this side effect
};

/// Drops side effects occurring in fewer than min_occ distinct drugs. The
/// surviving vocabulary is sorted lexicographically by concept id.
inline std::pair<std::vector<RawAssociation>, std::vector<VocabEntry>>
filter_rare_side_effects(const std::vector<RawAssociation>& assocs,
                         int min_occ = 5) {
  std::map<std::string, std::set<std::string>> drugs_of;
  std::map<std::string, std::string> name_of;
  for (const auto& a : assocs) {
    drugs_of[a.side_effect_id].insert(a.stitch_stereo_id);
    name_of.emplace(a.side_effect_id, a.side_effect_name);
  }
  std::set<std::string> kept;
  std::vector<VocabEntry> vocab;
  for (const auto& [id, drugs] : drugs_of) {
    if (static_cast<int>(drugs.size()) >= min_occ) {
      kept.insert(id);
      vocab.push_back({id, name_of[id], static_cast<long>(drugs.size())});
    }
  }
  std::vector<RawAssociation> out;
  for (const auto& a : assocs)
    if (kept.count(a.side_effect_id)) out.push_back(a);
  return {std::move(out), std::move(vocab)};
}

/// Drops drugs whose side-effect count lies outside [min_se, max_se].
inline std::vector<RawAssociation> filter_drugs_by_se_count(
    const std::vector<RawAssociation>& assocs, int min_se = 5,
    int max_se = 400) {
  std::map<std::string, int> se_count;
  for (const auto& a : assocs) ++se_count[a.stitch_stereo_id];
  std::vector<RawAssociation> out;
  for (const auto& a : assocs) {
    int c = se_count[a.stitch_stereo_id];
    if (c >= min_se && c <= max_se) out.push_back(a);
  }
  return out;
}

struct DrugRecord {
  std::string compound_id;  // STITCH stereo id
  MolGraph graph;
  int fold = -1;
};

/// Drops compounds whose graph has no edges at all.
inline std::vector<DrugRecord> remove_bondless_compounds(
    std::vector<DrugRecord> drugs) {
  std::erase_if(drugs, [](const DrugRecord& d) { return d.graph.edges.empty(); });
  return drugs;
}

struct TargetBuildReport {
  long filled = 0;
  // Associations whose drug has no structure record.
  std::vector<std::pair<std::string, std::string>> skipped;
};

/// Fills each drug's target vector against the ordered vocabulary.
inline TargetBuildReport build_targets(const std::vector<RawAssociation>& assocs,
                                       const std::vector<VocabEntry>& vocab,
                                       std::vector<DrugRecord>& drugs) {
  std::map<std::string, size_t> vocab_pos;
  for (size_t i = 0; i < vocab.size(); ++i) vocab_pos[vocab[i].id] = i;
  std::map<std::string, DrugRecord*> drug_of;
  for (auto& d : drugs) {
    d.graph.target.assign(vocab.size(), 0);
    drug_of[d.compound_id] = &d;
  }
  TargetBuildReport report;
  for (const auto& a : assocs) {
    auto vit = vocab_pos.find(a.side_effect_id);
    if (vit == vocab_pos.end()) continue;
    auto dit = drug_of.find(a.stitch_stereo_id);
    if (dit == drug_of.end()) {
      report.skipped.emplace_back(a.stitch_stereo_id, a.side_effect_id);
      continue;
    }
    dit->second->graph.target[vit->second] = 1;
    ++report.filled;
  }
  return report;
}

/// Deterministic shuffled round-robin fold assignment; sizes differ by <= 1.
inline std::vector<int> make_folds(size_t num_drugs, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("make_folds: k must be >= 2");
  if (num_drugs < static_cast<size_t>(k))
    throw DataError("make_folds: fewer drugs than folds");
  std::vector<size_t> order(num_drugs);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(num_drugs);
  for (size_t i = 0; i < order.size(); ++i)
    fold[order[i]] = static_cast<int>(i % static_cast<size_t>(k));
  return fold;
}

struct FilterParams {
  int min_se_occurrences = 5;
  bool drug_se_filter = false;
  int drug_se_min = 5;
  int drug_se_max = 400;
};

struct SePredDataset {
  static constexpr int kFormatVersion = 1;
  std::vector<VocabEntry> vocab;
  std::vector<DrugRecord> drugs;
  int k_folds = 0;
  std::uint64_t seed = 0;
  FilterParams filters;

  std::vector<long> vocab_counts() const {
    std::vector<long> counts(vocab.size());
    for (size_t i = 0; i < vocab.size(); ++i) counts[i] = vocab[i].count;
    return counts;
  }
};

struct DatasetStats {
  size_t num_drugs = 0;
  size_t vocab_size = 0;
  long total_associations = 0;
  double mean_se_per_drug = 0.0;
  std::map<int, int> se_count_histogram;  // SEs-per-drug -> number of drugs
};

inline DatasetStats dataset_stats(const SePredDataset& ds) {
  DatasetStats s;
  s.num_drugs = ds.drugs.size();
  s.vocab_size = ds.vocab.size();
  for (const auto& d : ds.drugs) {
    int ones = 0;
    for (auto t : d.graph.target) ones += t;
    s.total_associations += ones;
    ++s.se_count_histogram[ones];
  }
  s.mean_se_per_drug = s.num_drugs == 0
                           ? 0.0
                           : static_cast<double>(s.total_associations) /
                                 static_cast<double>(s.num_drugs);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset archive (.mgds): a single ordered-JSON document. Schema documented
// in the repository README.

namespace detail {

inline std::string bits_to_string(const std::vector<std::uint8_t>& bits) {
  std::string s(bits.size(), '0');
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) s[i] = '1';
  return s;
}

inline std::vector<std::uint8_t> string_to_bits(const std::string& s) {
  std::vector<std::uint8_t> bits(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1')
      throw DataError("invalid bit string in dataset file");
    bits[i] = s[i] == '1';
  }
  return bits;
}

}  // namespace detail

inline nlohmann::ordered_json molgraph_to_json(const MolGraph& g) {
  nlohmann::ordered_json j;
  auto& nodes = j["node_matrix"] = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < g.node_matrix.rows(); ++r) {
    std::string row(kNumElementGroups, '0');
    for (int c = 0; c < kNumElementGroups; ++c)
      if (g.node_matrix(r, c) > 0.5) row[c] = '1';
    nodes.push_back(row);
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges)
    edges.push_back({e.src, e.dst, e.bond[0], e.bond[1], e.bond[2], e.bond[3]});
  j["target"] = detail::bits_to_string(g.target);
  return j;
}

inline MolGraph molgraph_from_json(const nlohmann::json& j) {
  MolGraph g;
  const auto& nodes = j.at("node_matrix");
  g.node_matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes.size()),
                                        kNumElementGroups);
  for (size_t r = 0; r < nodes.size(); ++r) {
    auto bits = detail::string_to_bits(nodes[r].get<std::string>());
    if (bits.size() != kNumElementGroups)
      throw DataError("node row of wrong width in dataset file");
    for (int c = 0; c < kNumElementGroups; ++c)
      g.node_matrix(static_cast<Eigen::Index>(r), c) = bits[c];
  }
  for (const auto& e : j.at("edges")) {
    if (e.size() != 6) throw DataError("edge record of wrong length");
    EdgeRecord rec;
    rec.src = e[0].get<int>();
    rec.dst = e[1].get<int>();
    for (int b = 0; b < kNumBondKinds; ++b)
      rec.bond[b] = e[2 + b].get<int>() ? 1 : 0;
    g.edges.push_back(rec);
  }
  g.target = detail::string_to_bits(j.at("target").get<std::string>());
  return g;
}

inline nlohmann::ordered_json dataset_to_json(const SePredDataset& ds) {
  nlohmann::ordered_json j;
  j["format"] = "sepred-dataset";
  j["format_version"] = SePredDataset::kFormatVersion;
  j["filter_params"] = {{"min_se_occurrences", ds.filters.min_se_occurrences},
                        {"drug_se_filter", ds.filters.drug_se_filter},
                        {"drug_se_min", ds.filters.drug_se_min},
                        {"drug_se_max", ds.filters.drug_se_max}};
  j["k_folds"] = ds.k_folds;
  j["seed"] = ds.seed;
  auto& vocab = j["vocabulary"] = nlohmann::ordered_json::array();
  for (const auto& v : ds.vocab)
    vocab.push_back({{"id", v.id}, {"name", v.name}, {"count", v.count}});
  auto& drugs = j["drugs"] = nlohmann::ordered_json::array();
  for (const auto& d : ds.drugs) {
    auto rec = molgraph_to_json(d.graph);
    nlohmann::ordered_json out;
    out["compound_id"] = d.compound_id;
    out["fold"] = d.fold;
    out["node_matrix"] = rec["node_matrix"];
    out["edges"] = rec["edges"];
    out["target"] = rec["target"];
    drugs.push_back(std::move(out));
  }
  return j;
}

inline SePredDataset dataset_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "sepred-dataset")
    throw DataError("not a sepred dataset file");
  if (j.at("format_version").get<int>() != SePredDataset::kFormatVersion)
    throw DataError("unsupported dataset format version " +
                    std::to_string(j.at("format_version").get<int>()));
  SePredDataset ds;
  const auto& fp = j.at("filter_params");
  ds.filters.min_se_occurrences = fp.at("min_se_occurrences").get<int>();
  ds.filters.drug_se_filter = fp.at("drug_se_filter").get<bool>();
  ds.filters.drug_se_min = fp.at("drug_se_min").get<int>();
  ds.filters.drug_se_max = fp.at("drug_se_max").get<int>();
  ds.k_folds = j.at("k_folds").get<int>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& v : j.at("vocabulary"))
    ds.vocab.push_back({v.at("id").get<std::string>(),
                        v.at("name").get<std::string>(),
                        v.at("count").get<long>()});
  for (const auto& d : j.at("drugs")) {
    DrugRecord rec;
    rec.compound_id = d.at("compound_id").get<std::string>();
    rec.fold = d.at("fold").get<int>();
    rec.graph = molgraph_from_json(d);
    if (rec.graph.target.size() != ds.vocab.size())
      throw DataError("target length does not match vocabulary in dataset file");
    ds.drugs.push_back(std::move(rec));
  }
  return ds;
}

/// Atomic write: temp file in the same directory, then rename.
inline void write_text_atomic(const std::string& path,
                              const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename " + tmp + " to " + path);
}

inline void save_dataset(const SePredDataset& ds, const std::string& path) {
  write_text_atomic(path, dataset_to_json(ds).dump(1) + "\n");
}

inline SePredDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset file " + path + ": " + e.what());
  }
  return dataset_from_json(j);
}

// ---------------------------------------------------------------------------
// Full pipeline: dedup/PT -> rare-SE filter -> optional per-drug filter ->
// structure lookup -> bondless removal -> targets -> folds.

struct PipelineReport {
  size_t raw_rows = 0;
  size_t pt_deduplicated = 0;
  size_t after_rare_filter = 0;
  size_t after_drug_filter = 0;
  size_t drugs_with_structure = 0;
  size_t bondless_removed = 0;
  std::vector<std::string> unresolved_compounds;   // no SMILES available
  std::vector<std::string> unparseable_compounds;  // SMILES rejected
  TargetBuildReport targets;
};

using SmilesLookup =
    std::function<std::optional<std::string>(const std::string& stereo_id)>;

inline SePredDataset build_dataset(const std::vector<RawAssociation>& raw,
                                   const SmilesLookup& smiles_of,
                                   const FilterParams& filters, int k_folds,
                                   std::uint64_t seed, PipelineReport* report,
                                   std::ostream* warnings = nullptr) {
  PipelineReport local;
  PipelineReport& rep = report ? *report : local;
  rep.raw_rows = raw.size();

  auto pt = filter_pt_terms(raw, warnings);
  rep.pt_deduplicated = pt.size();

  auto [kept, vocab] = filter_rare_side_effects(pt, filters.min_se_occurrences);
  rep.after_rare_filter = kept.size();

  if (filters.drug_se_filter)
    kept = filter_drugs_by_se_count(kept, filters.drug_se_min,
                                    filters.drug_se_max);
  rep.after_drug_filter = kept.size();

  std::vector<std::string> drug_ids;
  {
    std::set<std::string> seen;
    for (const auto& a : kept)
      if (seen.insert(a.stitch_stereo_id).second)
        drug_ids.push_back(a.stitch_stereo_id);
    std::sort(drug_ids.begin(), drug_ids.end());
  }

  std::vector<DrugRecord> drugs;
  for (const auto& id : drug_ids) {
    auto smiles = smiles_of(id);
    if (!smiles) {
      rep.unresolved_compounds.push_back(id);
      continue;
    }
    try {
      Molecule mol = parse_smiles(*smiles);
      DrugRecord d;
      d.compound_id = id;
      d.graph = molecule_to_graph(mol, ElementGrouping::standard(),
                                  static_cast<int>(vocab.size()));
      drugs.push_back(std::move(d));
    } catch (const std::exception&) {
      rep.unparseable_compounds.push_back(id);
    }
  }
  rep.drugs_with_structure = drugs.size();

  size_t before = drugs.size();
  drugs = remove_bondless_compounds(std::move(drugs));
  rep.bondless_removed = before - drugs.size();

  if (drugs.empty()) throw DataError("no drugs survived the pipeline");

  rep.targets = build_targets(kept, vocab, drugs);

  auto folds = make_folds(drugs.size(), k_folds, seed);
  for (size_t i = 0; i < drugs.size(); ++i) drugs[i].fold = folds[i];

  SePredDataset ds;
  ds.vocab = std::move(vocab);
  ds.drugs = std::move(drugs);
  ds.k_folds = k_folds;
  ds.seed = seed;
  ds.filters = filters;
  return ds;
}

}  // namespace sepred
