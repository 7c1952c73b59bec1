// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sepred/dataset.hpp"

using namespace sepred;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SEPRED_CLI_PATH;
const std::string kDataDir = SEPRED_TEST_DATA_DIR;

int run_cli(const std::string& args) {
  std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Six drugs over three classes, big enough that every fold mixes labels.
void write_toy_dataset(const fs::path& path) {
  const std::vector<std::string> smiles = {"CCO",  "c1ccccc1", "CC=O",
                                           "CCNC", "CCCC",     "OCCO"};
  const std::vector<std::vector<std::uint8_t>> targets = {
      {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {0, 1, 1}, {1, 0, 1}};
  SePredDataset ds;
  ds.vocab = {{"C01", "alpha", 3}, {"C02", "beta", 3}, {"C03", "gamma", 3}};
  ds.k_folds = 2;
  for (size_t i = 0; i < smiles.size(); ++i) {
    DrugRecord d;
    d.compound_id = "CID00000000" + std::to_string(i + 1);
    d.graph = molecule_to_graph(parse_smiles(smiles[i]),
                                ElementGrouping::standard(), 3);
    d.graph.target = targets[i];
    d.fold = static_cast<int>(i % 2);
    ds.drugs.push_back(std::move(d));
  }
  save_dataset(ds, path.string());
}

}  // namespace

TEST_CASE("cli rejects missing subcommands and bad usage") {
  CHECK(run_cli("") == 1);
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("preprocess") == 1);  // missing required options
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("preprocess builds a dataset from local fixtures") {
  auto dir = fresh_dir("sepred_cli_pre");
  auto out = dir / "ds.mgds";
  std::string args = "preprocess --sider " + kDataDir +
                     "/sider_fixture.tsv --smiles " + kDataDir +
                     "/smiles_fixture.csv --min-se-occ 2 --folds 2 --seed 42 "
                     "--out " + out.string();
  REQUIRE(run_cli(args) == 0);
  CHECK(fs::exists(out));
  CHECK(fs::exists(dir / "ds.mgds.skipped.json"));
  CHECK(fs::exists(dir / "ds.mgds.stats.json"));

  auto ds = load_dataset(out.string());
  CHECK(ds.drugs.size() == 3);
  CHECK(ds.vocab.size() == 3);
  CHECK(ds.k_folds == 2);

  auto skip = nlohmann::json::parse(slurp(dir / "ds.mgds.skipped.json"));
  CHECK(skip["unresolved_compounds"] ==
        nlohmann::json::array({"CID000000005"}));
  CHECK(skip["unparseable_compounds"] ==
        nlohmann::json::array({"CID000000006"}));
  CHECK(skip["bondless_removed"] == 1);

  // Rerun is byte-identical.
  auto first = slurp(out);
  REQUIRE(run_cli(args) == 0);
  CHECK(slurp(out) == first);

  fs::remove_all(dir);
}

TEST_CASE("preprocess fails cleanly on a missing table") {
  CHECK(run_cli("preprocess --sider /nonexistent.tsv --smiles " + kDataDir +
                "/smiles_fixture.csv --out /tmp/never.mgds") == 2);
}

TEST_CASE("train, evaluate, and predict round trip") {
  auto dir = fresh_dir("sepred_cli_train");
  auto ds_path = dir / "toy.mgds";
  write_toy_dataset(ds_path);
  auto model_path = dir / "model.json";
  auto cfg = kDataDir + "/tiny.cfg";

  REQUIRE(run_cli("train --dataset " + ds_path.string() + " --config " + cfg +
                  " --fold 0 --out " + model_path.string()) == 0);
  CHECK(fs::exists(model_path));
  CHECK(fs::exists(dir / "model.json.history.csv"));
  CHECK(slurp(dir / "model.json.history.csv")
            .rfind("epoch,train_loss,val_loss\n", 0) == 0);

  auto report_path = dir / "report.json";
  REQUIRE(run_cli("evaluate --model " + model_path.string() + " --dataset " +
                  ds_path.string() + " --fold 0 --out " +
                  report_path.string()) == 0);
  auto report = nlohmann::json::parse(slurp(report_path));
  CHECK(report.contains("binary_accuracy"));
  CHECK(report.contains("auc"));
  CHECK(report.contains("aupr"));
  CHECK(report.contains("confusion"));

  CHECK(run_cli("predict --model " + model_path.string() +
                " --smiles CCO --json") == 0);
  // Threshold 1.0 cannot be reached by a sigmoid; still a clean run.
  CHECK(run_cli("predict --model " + model_path.string() +
                " --smiles CCO --threshold 1.0") == 0);

  // A malformed line is reported per-molecule, valid ones still score.
  auto input = dir / "input.smi";
  {
    std::ofstream out(input);
    out << "CCO\nC1CC\nc1ccccc1\n";
  }
  std::string json_out = (dir / "pred.json").string();
  std::string cmd = kCli + " predict --model " + model_path.string() +
                    " --input " + input.string() + " --json > " + json_out +
                    " 2> /dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  auto pred = nlohmann::json::parse(slurp(json_out));
  REQUIRE(pred.size() == 3);
  CHECK_FALSE(pred[0].contains("error"));
  CHECK(pred[1].contains("error"));
  CHECK_FALSE(pred[2].contains("error"));

  // No molecules at all is a data error.
  CHECK(run_cli("predict --model " + model_path.string()) == 2);

  fs::remove_all(dir);
}

TEST_CASE("cv writes per-fold reports and an aggregate") {
  auto dir = fresh_dir("sepred_cli_cv");
  auto ds_path = dir / "toy.mgds";
  write_toy_dataset(ds_path);
  auto out_dir = dir / "reports";

  REQUIRE(run_cli("cv --dataset " + ds_path.string() + " --config " +
                  kDataDir + "/tiny.cfg --folds 2 --out " +
                  out_dir.string()) == 0);
  CHECK(fs::exists(out_dir / "fold_0_report.json"));
  CHECK(fs::exists(out_dir / "fold_1_report.json"));
  CHECK(fs::exists(out_dir / "fold_0_history.csv"));
  CHECK(fs::exists(out_dir / "fold_1_history.csv"));
  auto agg = nlohmann::json::parse(slurp(out_dir / "aggregate.json"));
  CHECK(agg.contains("auc"));
  CHECK(agg["auc"].contains("mean"));
  CHECK(agg["auc"].contains("dev"));

  fs::remove_all(dir);
}

TEST_CASE("stats prints the histogram") {
  auto dir = fresh_dir("sepred_cli_stats");
  auto ds_path = dir / "toy.mgds";
  write_toy_dataset(ds_path);
  auto table = dir / "hist.tsv";
  REQUIRE(run_cli("stats --dataset " + ds_path.string() + " --out " +
                  table.string()) == 0);
  auto text = slurp(table);
  CHECK(text.rfind("se_count\tdrugs\n", 0) == 0);
  CHECK(run_cli("stats --dataset /nonexistent.mgds") == 2);
  fs::remove_all(dir);
}
