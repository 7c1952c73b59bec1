// SPDX-License-Identifier: Apache-2.0
//
// sepred: molecular-graph drug side-effect prediction.
// Subcommands: preprocess, cv, train, evaluate, predict, stats.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sepred/dataset.hpp"
#include "sepred/fetch.hpp"
#include "sepred/gnn.hpp"
#include "sepred/metrics.hpp"
#include "sepred/model_io.hpp"
#include "sepred/molgraph.hpp"
#include "sepred/smiles.hpp"
#include "sepred/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

using nlohmann::ordered_json;

sepred::TrainConfig load_config(const std::string& path) {
  return path.empty() ? sepred::TrainConfig{}
                      : sepred::parse_train_config_file(path);
}

ordered_json stats_to_json(const sepred::DatasetStats& s) {
  ordered_json j;
  j["num_drugs"] = s.num_drugs;
  j["vocab_size"] = s.vocab_size;
  j["total_associations"] = s.total_associations;
  j["mean_se_per_drug"] = s.mean_se_per_drug;
  auto& hist = j["se_count_histogram"] = ordered_json::array();
  for (const auto& [count, drugs] : s.se_count_histogram)
    hist.push_back({{"se_count", count}, {"drugs", drugs}});
  return j;
}

int run_preprocess(const std::string& sider_path, const std::string& smiles_csv,
                   const std::string& base_url, const std::string& cache_dir,
                   int min_se_occ, std::optional<int> drug_se_min,
                   std::optional<int> drug_se_max, int folds,
                   std::uint64_t seed, const std::string& out_path) {
  auto parsed = sepred::parse_sider_tsv(sider_path);
  for (const auto& err : parsed.row_errors)
    std::cerr << "sider: " << err << "\n";

  sepred::SmilesLookup lookup;
  std::optional<sepred::SmilesFetcher> fetcher;
  if (!smiles_csv.empty()) {
    lookup = sepred::csv_smiles_lookup(smiles_csv);
  } else {
    fetcher.emplace(base_url.empty() ? sepred::SmilesFetcher::default_base_url()
                                     : base_url,
                    cache_dir.empty() ? sepred::SmilesFetcher::default_cache_dir()
                                      : cache_dir);
    lookup = fetcher->lookup();
  }

  sepred::FilterParams filters;
  filters.min_se_occurrences = min_se_occ;
  if (drug_se_min || drug_se_max) {
    filters.drug_se_filter = true;
    if (drug_se_min) filters.drug_se_min = *drug_se_min;
    if (drug_se_max) filters.drug_se_max = *drug_se_max;
  }

  sepred::PipelineReport report;
  auto dataset = sepred::build_dataset(parsed.associations, lookup, filters,
                                       folds, seed, &report, &std::cerr);
  sepred::save_dataset(dataset, out_path);

  ordered_json skip;
  skip["unresolved_compounds"] = report.unresolved_compounds;
  skip["unparseable_compounds"] = report.unparseable_compounds;
  skip["bondless_removed"] = report.bondless_removed;
  skip["associations_without_structure"] = report.targets.skipped.size();
  sepred::write_text_atomic(out_path + ".skipped.json", skip.dump(1) + "\n");

  auto stats = sepred::dataset_stats(dataset);
  sepred::write_text_atomic(out_path + ".stats.json",
                            stats_to_json(stats).dump(1) + "\n");

  std::cout << "drugs: " << stats.num_drugs << "\n"
            << "side effects: " << stats.vocab_size << "\n"
            << "associations: " << stats.total_associations << "\n"
            << "mean SEs per drug: " << stats.mean_se_per_drug << "\n";
  return kExitOk;
}

int run_cv(const std::string& dataset_path, const std::string& config_path,
           std::optional<int> folds, std::optional<std::uint64_t> seed,
           const std::string& out_dir) {
  auto dataset = sepred::load_dataset(dataset_path);
  auto config = load_config(config_path);
  if (folds) config.k_folds = *folds;
  if (seed) config.seed = *seed;

  auto result = sepred::cross_validate(dataset, config);

  std::filesystem::create_directories(out_dir);
  for (size_t f = 0; f < result.fold_reports.size(); ++f) {
    sepred::write_text_atomic(
        out_dir + "/fold_" + std::to_string(f) + "_report.json",
        sepred::metrics_report_to_json(result.fold_reports[f]).dump(1) + "\n");
    sepred::write_text_atomic(
        out_dir + "/fold_" + std::to_string(f) + "_history.csv",
        sepred::history_to_csv(result.fold_training[f].history));
  }
  auto agg = sepred::cv_aggregate_to_json(result.aggregate);
  sepred::write_text_atomic(out_dir + "/aggregate.json", agg.dump(1) + "\n");
  std::cout << agg.dump(1) << "\n";
  return kExitOk;
}

int run_train(const std::string& dataset_path, const std::string& config_path,
              int test_fold, std::optional<std::uint64_t> seed,
              const std::string& out_path) {
  auto dataset = sepred::load_dataset(dataset_path);
  auto config = load_config(config_path);
  if (seed) config.seed = *seed;

  auto init = sepred::init_gnn_params(
      config.arch, static_cast<int>(dataset.vocab.size()), config.seed);
  auto trained = sepred::train_fold(dataset, test_fold, std::move(init), config);

  sepred::ModelArtifact model;
  model.params = std::move(trained.params);
  model.vocab = dataset.vocab;
  model.config = config;
  model.dataset_fingerprint = sepred::file_fingerprint(dataset_path);
  sepred::save_model(model, out_path);
  sepred::write_text_atomic(out_path + ".history.csv",
                            sepred::history_to_csv(trained.history));

  std::cout << "stopped by " << trained.stop_reason << " after "
            << trained.history.size() << " epochs; best validation loss "
            << trained.best_val_loss << " at epoch " << trained.best_epoch
            << "\n";
  return kExitOk;
}

int run_evaluate(const std::string& model_path, const std::string& dataset_path,
                 int fold, double threshold, const std::string& out_path) {
  auto model = sepred::load_model(model_path);
  auto dataset = sepred::load_dataset(dataset_path);
  if (dataset.vocab.size() != model.vocab.size())
    throw sepred::DataError("dataset vocabulary does not match the model");
  auto report = sepred::evaluate_fold(model.params, dataset, fold, threshold);
  auto j = sepred::metrics_report_to_json(report);
  if (!out_path.empty())
    sepred::write_text_atomic(out_path, j.dump(1) + "\n");
  std::cout << j.dump(1) << "\n";
  return kExitOk;
}

int run_predict(const std::string& model_path, const std::string& smiles,
                const std::string& input_path, double threshold, int top,
                bool as_json) {
  auto model = sepred::load_model(model_path);

  std::vector<std::string> lines;
  if (!smiles.empty()) lines.push_back(smiles);
  if (!input_path.empty()) {
    std::ifstream in(input_path);
    if (!in) throw sepred::DataError("cannot open input file: " + input_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back(line);
    }
  }
  if (lines.empty())
    throw sepred::DataError("no input molecules (use --smiles or --input)");

  ordered_json results = ordered_json::array();
  for (const auto& text : lines) {
    ordered_json rec;
    rec["smiles"] = text;
    try {
      auto mol = sepred::parse_smiles(text);
      auto graph = sepred::molecule_to_graph(mol,
                                             sepred::ElementGrouping::standard(),
                                             model.params.num_classes());
      auto pred = sepred::predict(model.params, graph, threshold);
      std::vector<Eigen::Index> above;
      for (Eigen::Index c = 0; c < pred.scores.size(); ++c)
        if (pred.labels[c]) above.push_back(c);
      std::sort(above.begin(), above.end(), [&](Eigen::Index a, Eigen::Index b) {
        return pred.scores[a] != pred.scores[b] ? pred.scores[a] > pred.scores[b]
                                                : a < b;
      });
      if (top > 0 && static_cast<int>(above.size()) > top)
        above.resize(static_cast<size_t>(top));
      auto& hits = rec["side_effects"] = ordered_json::array();
      for (auto c : above)
        hits.push_back({{"id", model.vocab[static_cast<size_t>(c)].id},
                        {"name", model.vocab[static_cast<size_t>(c)].name},
                        {"score", pred.scores[c]}});
    } catch (const sepred::ParseError& e) {
      rec["error"] = e.what();
      std::cerr << "predict: '" << text << "': " << e.what() << "\n";
    }
    results.push_back(std::move(rec));
  }

  if (as_json) {
    std::cout << results.dump(1) << "\n";
  } else {
    for (const auto& rec : results) {
      std::cout << rec["smiles"].get<std::string>() << "\n";
      if (rec.contains("error")) {
        std::cout << "  error: " << rec["error"].get<std::string>() << "\n";
        continue;
      }
      if (rec["side_effects"].empty()) {
        std::cout << "  (no side effects above threshold)\n";
        continue;
      }
      for (const auto& hit : rec["side_effects"])
        std::cout << "  " << hit["score"].get<double>() << "  "
                  << hit["id"].get<std::string>() << "  "
                  << hit["name"].get<std::string>() << "\n";
    }
  }
  return kExitOk;
}

int run_stats(const std::string& dataset_path, const std::string& out_path) {
  auto dataset = sepred::load_dataset(dataset_path);
  auto stats = sepred::dataset_stats(dataset);
  std::ostringstream table;
  table << "se_count\tdrugs\n";
  for (const auto& [count, drugs] : stats.se_count_histogram)
    table << count << "\t" << drugs << "\n";
  if (!out_path.empty()) sepred::write_text_atomic(out_path, table.str());
  std::cout << table.str();
  std::cout << "# drugs=" << stats.num_drugs << " vocab=" << stats.vocab_size
            << " associations=" << stats.total_associations
            << " mean_se_per_drug=" << stats.mean_se_per_drug << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Molecular-graph drug side-effect prediction"};
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand("preprocess",
                                 "Build a dataset from a SIDER table");
  std::string pre_sider, pre_smiles, pre_base_url, pre_cache, pre_out;
  int pre_min_occ = 5, pre_folds = 5;
  std::uint64_t pre_seed = 0;
  std::optional<int> pre_drug_min, pre_drug_max;
  pre->add_option("--sider", pre_sider, "SIDER-layout TSV")->required();
  pre->add_option("--smiles", pre_smiles, "local (id,SMILES) CSV");
  pre->add_option("--base-url", pre_base_url, "compound REST API base URL");
  pre->add_option("--cache-dir", pre_cache, "SMILES cache directory");
  pre->add_option("--min-se-occ", pre_min_occ, "minimum side-effect occurrences");
  pre->add_option("--drug-se-min", pre_drug_min, "minimum SEs per drug");
  pre->add_option("--drug-se-max", pre_drug_max, "maximum SEs per drug");
  pre->add_option("--folds", pre_folds, "number of cross-validation folds");
  pre->add_option("--seed", pre_seed, "fold shuffling seed");
  pre->add_option("--out", pre_out, "output dataset file")->required();

  // cv
  auto* cv = app.add_subcommand("cv", "Run k-fold cross-validation");
  std::string cv_dataset, cv_config, cv_out;
  std::optional<int> cv_folds;
  std::optional<std::uint64_t> cv_seed;
  cv->add_option("--dataset", cv_dataset, "dataset file")->required();
  cv->add_option("--config", cv_config, "training config file");
  cv->add_option("--folds", cv_folds, "override fold count");
  cv->add_option("--seed", cv_seed, "override seed");
  cv->add_option("--out", cv_out, "report output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a single model");
  std::string tr_dataset, tr_config, tr_out;
  int tr_fold = 0;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--dataset", tr_dataset, "dataset file")->required();
  tr->add_option("--config", tr_config, "training config file");
  tr->add_option("--fold", tr_fold, "held-out test fold");
  tr->add_option("--seed", tr_seed, "override seed");
  tr->add_option("--out", tr_out, "output model file")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a model on one fold");
  std::string ev_model, ev_dataset, ev_out;
  int ev_fold = 0;
  double ev_threshold = 0.5;
  ev->add_option("--model", ev_model, "model file")->required();
  ev->add_option("--dataset", ev_dataset, "dataset file")->required();
  ev->add_option("--fold", ev_fold, "fold to evaluate");
  ev->add_option("--threshold", ev_threshold, "classification threshold");
  ev->add_option("--out", ev_out, "report output file");

  // predict
  auto* pr = app.add_subcommand("predict", "Predict side effects for molecules");
  std::string pr_model, pr_smiles, pr_input;
  double pr_threshold = 0.5;
  int pr_top = 0;
  bool pr_json = false;
  pr->add_option("--model", pr_model, "model file")->required();
  pr->add_option("--smiles", pr_smiles, "single SMILES string");
  pr->add_option("--input", pr_input, "file with one SMILES per line");
  pr->add_option("--threshold", pr_threshold, "score threshold");
  pr->add_option("--top", pr_top, "keep only the N best-scoring side effects");
  pr->add_flag("--json", pr_json, "machine-readable output");

  // stats
  auto* st = app.add_subcommand("stats", "Dataset distribution report");
  std::string st_dataset, st_out;
  st->add_option("--dataset", st_dataset, "dataset file")->required();
  st->add_option("--out", st_out, "output table file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pre->parsed())
      return run_preprocess(pre_sider, pre_smiles, pre_base_url, pre_cache,
                            pre_min_occ, pre_drug_min, pre_drug_max, pre_folds,
                            pre_seed, pre_out);
    if (cv->parsed()) return run_cv(cv_dataset, cv_config, cv_folds, cv_seed, cv_out);
    if (tr->parsed())
      return run_train(tr_dataset, tr_config, tr_fold, tr_seed, tr_out);
    if (ev->parsed())
      return run_evaluate(ev_model, ev_dataset, ev_fold, ev_threshold, ev_out);
    if (pr->parsed())
      return run_predict(pr_model, pr_smiles, pr_input, pr_threshold, pr_top,
                         pr_json);
    if (st->parsed()) return run_stats(st_dataset, st_out);
  } catch (const sepred::NumericalError& e) {
    std::cerr << "numerical fault: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const sepred::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const sepred::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
