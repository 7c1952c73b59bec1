// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sepred/dataset.hpp"
#include "sepred/fetch.hpp"

using namespace sepred;

namespace {

const std::string kDataDir = SEPRED_TEST_DATA_DIR;

RawAssociation assoc(const std::string& drug, const std::string& se,
                     TermType type = TermType::PT) {
  RawAssociation a;
  a.stitch_flat_id = "FLAT" + drug;
  a.stitch_stereo_id = drug;
  a.term_type = type;
  a.side_effect_id = se;
  a.side_effect_name = "name-" + se;
  return a;
}

SePredDataset build_fixture_dataset(PipelineReport* report = nullptr) {
  auto parsed = parse_sider_tsv(kDataDir + "/sider_fixture.tsv");
  auto lookup = csv_smiles_lookup(kDataDir + "/smiles_fixture.csv");
  FilterParams filters;
  filters.min_se_occurrences = 2;
  return build_dataset(parsed.associations, lookup, filters, 3, 42, report);
}

}  // namespace

TEST_CASE("sider tsv parsing") {
  std::istringstream in(
      "CID100000085\tCID000010917\tC0015967\tPT\tC0015967\tPyrexia\n"
      "CID100000085\tCID000010917\tC0015967\tLLT\tC0015967\tFever\n"
      "only\tfive\tcolumns\there\tno\n"
      "a\tb\tc\tBAD\te\tf\n");
  auto result = parse_sider_tsv(in);
  REQUIRE(result.associations.size() == 2);
  CHECK(result.associations[0].term_type == TermType::PT);
  CHECK(result.associations[0].side_effect_name == "Pyrexia");
  CHECK(result.associations[0].stitch_stereo_id == "CID000010917");
  CHECK(result.associations[1].term_type == TermType::LLT);
  REQUIRE(result.row_errors.size() == 2);
  CHECK(result.row_errors[0].find("line 3") != std::string::npos);
  CHECK(result.row_errors[1].find("line 4") != std::string::npos);

  std::istringstream empty("");
  CHECK_THROWS_AS(parse_sider_tsv(empty), DataError);
}

TEST_CASE("pt filter keeps PT rows and deduplicates") {
  std::vector<RawAssociation> in = {
      assoc("D1", "S1", TermType::PT), assoc("D1", "S1", TermType::LLT),
      assoc("D1", "S2", TermType::PT), assoc("D1", "S1", TermType::PT)};
  auto out = filter_pt_terms(in);
  CHECK(out.size() == 2);

  std::ostringstream warn;
  auto none = filter_pt_terms({assoc("D1", "S1", TermType::LLT)}, &warn);
  CHECK(none.empty());
  CHECK(warn.str().find("warning") != std::string::npos);
}

TEST_CASE("rare side-effect filter boundary at min_occ") {
  std::vector<RawAssociation> in;
  for (int d = 0; d < 4; ++d) in.push_back(assoc("D" + std::to_string(d), "S4"));
  for (int d = 0; d < 5; ++d) in.push_back(assoc("D" + std::to_string(d), "S5"));
  auto [kept, vocab] = filter_rare_side_effects(in, 5);
  REQUIRE(vocab.size() == 1);
  CHECK(vocab[0].id == "S5");  // 5 occurrences kept, 4 removed
  CHECK(vocab[0].count == 5);
  CHECK(kept.size() == 5);

  auto [all, vocab_all] = filter_rare_side_effects(in, 1);
  CHECK(all.size() == in.size());
  CHECK(vocab_all.size() == 2);
}

TEST_CASE("occurrence counting is per distinct drug") {
  // Same drug repeated does not inflate the count.
  std::vector<RawAssociation> in = {assoc("D1", "S1"), assoc("D1", "S1"),
                                    assoc("D2", "S1")};
  auto [kept, vocab] = filter_rare_side_effects(in, 3);
  CHECK(vocab.empty());
  CHECK(kept.empty());
}

TEST_CASE("vocabulary is sorted lexicographically by concept id") {
  std::vector<RawAssociation> in = {assoc("D1", "C0202"), assoc("D1", "C0003"),
                                    assoc("D1", "C0101")};
  auto [kept, vocab] = filter_rare_side_effects(in, 1);
  REQUIRE(vocab.size() == 3);
  CHECK(vocab[0].id == "C0003");
  CHECK(vocab[1].id == "C0101");
  CHECK(vocab[2].id == "C0202");
}

TEST_CASE("drug SE-count filter boundaries at 5 and 400") {
  std::vector<RawAssociation> in;
  for (int s = 0; s < 4; ++s) in.push_back(assoc("D4", "A" + std::to_string(s)));
  for (int s = 0; s < 5; ++s) in.push_back(assoc("D5", "B" + std::to_string(s)));
  for (int s = 0; s < 400; ++s)
    in.push_back(assoc("D400", "C" + std::to_string(s)));
  for (int s = 0; s < 401; ++s)
    in.push_back(assoc("D401", "D" + std::to_string(s)));
  auto out = filter_drugs_by_se_count(in, 5, 400);
  std::set<std::string> drugs;
  for (const auto& a : out) drugs.insert(a.stitch_stereo_id);
  CHECK(drugs == std::set<std::string>{"D5", "D400"});
}

TEST_CASE("filters are idempotent and monotone") {
  std::vector<RawAssociation> in;
  for (int d = 0; d < 6; ++d)
    for (int s = 0; s < 3 + d; ++s)
      in.push_back(assoc("D" + std::to_string(d), "S" + std::to_string(s)));
  auto once = filter_pt_terms(in);
  auto twice = filter_pt_terms(once);
  CHECK(once.size() == twice.size());
  CHECK(once.size() <= in.size());

  auto [rare1, vocab1] = filter_rare_side_effects(once, 4);
  auto [rare2, vocab2] = filter_rare_side_effects(rare1, 4);
  CHECK(rare1.size() == rare2.size());
  CHECK(rare1.size() <= once.size());
  CHECK(vocab1.size() == vocab2.size());
  for (const auto& v : vocab1) CHECK(v.count >= 4);

  auto d1 = filter_drugs_by_se_count(rare1, 2, 10);
  auto d2 = filter_drugs_by_se_count(d1, 2, 10);
  CHECK(d1.size() == d2.size());
  CHECK(d1.size() <= rare1.size());
}

TEST_CASE("bondless compound removal") {
  auto make_drug = [](const std::string& id, const std::string& smiles) {
    DrugRecord d;
    d.compound_id = id;
    d.graph = molecule_to_graph(parse_smiles(smiles),
                                ElementGrouping::standard(), 2);
    return d;
  };
  std::vector<DrugRecord> drugs;
  drugs.push_back(make_drug("salt", "[Na+].[Cl-]"));
  drugs.push_back(make_drug("ethanol", "CCO"));
  auto kept = remove_bondless_compounds(std::move(drugs));
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].compound_id == "ethanol");
  CHECK(remove_bondless_compounds({}).empty());
}

TEST_CASE("target building") {
  std::vector<VocabEntry> vocab = {
      {"S1", "", 2}, {"S2", "", 2}, {"S3", "", 2}, {"S4", "", 2}};
  std::vector<DrugRecord> drugs(2);
  drugs[0].compound_id = "D1";
  drugs[1].compound_id = "D2";
  std::vector<RawAssociation> assocs = {assoc("D1", "S2"), assoc("D1", "S4"),
                                        assoc("D3", "S1")};
  auto report = build_targets(assocs, vocab, drugs);
  CHECK(drugs[0].graph.target == std::vector<std::uint8_t>{0, 1, 0, 1});
  CHECK(drugs[1].graph.target == std::vector<std::uint8_t>{0, 0, 0, 0});
  CHECK(report.filled == 2);
  REQUIRE(report.skipped.size() == 1);
  CHECK(report.skipped[0].first == "D3");
}

TEST_CASE("fold assignment") {
  auto folds = make_folds(10, 5, 1);
  std::map<int, int> sizes;
  for (int f : folds) ++sizes[f];
  CHECK(sizes.size() == 5);
  for (const auto& [f, n] : sizes) CHECK(n == 2);

  CHECK(make_folds(10, 5, 7) == make_folds(10, 5, 7));
  CHECK(make_folds(10, 5, 7) != make_folds(10, 5, 8));
  CHECK_THROWS_AS(make_folds(3, 5, 1), DataError);

  // Full-scale arithmetic: 1397 drugs in 5 folds.
  auto big = make_folds(1397, 5, 0);
  std::map<int, int> big_sizes;
  for (int f : big) ++big_sizes[f];
  std::multiset<int> observed;
  for (const auto& [f, n] : big_sizes) observed.insert(n);
  CHECK(observed == std::multiset<int>{279, 279, 279, 280, 280});
}

TEST_CASE("end-to-end fixture pipeline") {
  PipelineReport report;
  auto ds = build_fixture_dataset(&report);

  // Vocabulary: S4 (1 drug) dropped, three side effects survive.
  REQUIRE(ds.vocab.size() == 3);
  CHECK(ds.vocab[0].id == "C0000001");
  CHECK(ds.vocab[1].id == "C0000002");
  CHECK(ds.vocab[2].id == "C0000003");

  // Drug 4 is bondless, 5 has no SMILES, 6 fails to parse.
  REQUIRE(ds.drugs.size() == 3);
  CHECK(report.bondless_removed == 1);
  CHECK(report.unresolved_compounds ==
        std::vector<std::string>{"CID000000005"});
  CHECK(report.unparseable_compounds ==
        std::vector<std::string>{"CID000000006"});

  CHECK(ds.drugs[0].compound_id == "CID000000001");
  CHECK(ds.drugs[0].graph.target == std::vector<std::uint8_t>{1, 1, 1});
  CHECK(ds.drugs[1].graph.target == std::vector<std::uint8_t>{1, 1, 0});
  CHECK(ds.drugs[2].graph.target == std::vector<std::uint8_t>{1, 0, 1});

  auto stats = dataset_stats(ds);
  CHECK(stats.num_drugs == 3);
  CHECK(stats.vocab_size == 3);
  CHECK(stats.total_associations == 7);
  CHECK(stats.mean_se_per_drug == doctest::Approx(7.0 / 3.0));
  CHECK(stats.se_count_histogram == std::map<int, int>{{2, 2}, {3, 1}});
}

TEST_CASE("pipeline is deterministic byte for byte") {
  auto a = dataset_to_json(build_fixture_dataset()).dump(1);
  auto b = dataset_to_json(build_fixture_dataset()).dump(1);
  CHECK(a == b);
}

TEST_CASE("dataset save/load round trip") {
  auto ds = build_fixture_dataset();
  auto path = std::filesystem::temp_directory_path() / "sepred_roundtrip.mgds";
  save_dataset(ds, path.string());
  auto loaded = load_dataset(path.string());
  CHECK(dataset_to_json(loaded).dump(1) == dataset_to_json(ds).dump(1));
  std::filesystem::remove(path);
}

TEST_CASE("dataset golden file") {
  auto ds = build_fixture_dataset();
  std::ifstream golden(kDataDir + "/golden_dataset.mgds", std::ios::binary);
  REQUIRE(golden.good());
  std::string expected((std::istreambuf_iterator<char>(golden)),
                       std::istreambuf_iterator<char>());
  CHECK(dataset_to_json(ds).dump(1) + "\n" == expected);
}

TEST_CASE("format version is enforced") {
  auto ds = build_fixture_dataset();
  auto j = dataset_to_json(ds);
  j["format_version"] = 999;
  CHECK_THROWS_AS(dataset_from_json(j), DataError);
  j["format"] = "something-else";
  CHECK_THROWS_AS(dataset_from_json(j), DataError);
}

TEST_CASE("pipeline with zero survivors fails loudly") {
  auto lookup = [](const std::string&) -> std::optional<std::string> {
    return std::nullopt;
  };
  std::vector<RawAssociation> assocs = {assoc("CID000000001", "S1"),
                                        assoc("CID000000002", "S1")};
  FilterParams filters;
  filters.min_se_occurrences = 1;
  CHECK_THROWS_AS(build_dataset(assocs, lookup, filters, 2, 0, nullptr),
                  DataError);
}
