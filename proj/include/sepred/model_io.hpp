// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sepred/dataset.hpp"
#include "sepred/errors.hpp"
#include "sepred/gnn.hpp"
#include "sepred/train.hpp"

namespace sepred {

/// FNV-1a 64-bit content hash, used as the dataset fingerprint.
inline std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for fingerprint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a_hash(bytes);
}

// Everything needed to serve predictions: weights, vocabulary, grouping,
// and the training configuration they came from.
struct ModelArtifact {
  static constexpr int kFormatVersion = 1;
  GnnParams params;
  std::vector<VocabEntry> vocab;
  TrainConfig config;
  std::uint64_t dataset_fingerprint = 0;
};

namespace detail {

inline nlohmann::ordered_json mlp_to_json(const MlpParams& mlp) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& layer : mlp.layers) {
    nlohmann::ordered_json lj;
    switch (layer.activation) {
      case Activation::Selu: lj["activation"] = "selu"; break;
      case Activation::Sigmoid: lj["activation"] = "sigmoid"; break;
      case Activation::Linear: lj["activation"] = "linear"; break;
    }
    auto& w = lj["weight"] = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        row.push_back(layer.weight(r, c));
      w.push_back(std::move(row));
    }
    auto& b = lj["bias"] = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      b.push_back(layer.bias[i]);
    layers.push_back(std::move(lj));
  }
  return layers;
}

inline MlpParams mlp_from_json(const nlohmann::json& layers) {
  MlpParams mlp;
  for (const auto& lj : layers) {
    Layer layer;
    std::string act = lj.at("activation").get<std::string>();
    if (act == "selu") layer.activation = Activation::Selu;
    else if (act == "sigmoid") layer.activation = Activation::Sigmoid;
    else if (act == "linear") layer.activation = Activation::Linear;
    else throw DataError("unknown activation '" + act + "' in model file");
    const auto& w = lj.at("weight");
    const auto rows = static_cast<Eigen::Index>(w.size());
    const auto cols = static_cast<Eigen::Index>(w.at(0).size());
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        layer.weight(r, c) = w[r][c].get<double>();
    const auto& b = lj.at("bias");
    layer.bias.resize(static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      layer.bias[i] = b[i].get<double>();
    mlp.layers.push_back(std::move(layer));
  }
  if (mlp.layers.empty()) throw DataError("model file has an empty MLP");
  return mlp;
}

}  // namespace detail

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["loss_threshold"] = c.loss_threshold;
  j["use_loss_threshold"] = c.use_loss_threshold;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["k_folds"] = c.k_folds;
  j["seed"] = c.seed;
  j["validation_fraction"] = c.validation_fraction;
  j["threshold"] = c.threshold;
  j["state_dim"] = c.arch.state_dim;
  j["iterations"] = c.arch.iterations;
  j["aggregation"] = c.arch.aggregation;
  j["state_hidden"] = c.arch.state_hidden;
  j["output_hidden"] = c.arch.output_hidden;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.loss_threshold = j.at("loss_threshold").get<double>();
  c.use_loss_threshold = j.at("use_loss_threshold").get<bool>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.k_folds = j.at("k_folds").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.threshold = j.at("threshold").get<double>();
  c.arch.state_dim = j.at("state_dim").get<int>();
  c.arch.iterations = j.at("iterations").get<int>();
  c.arch.aggregation = j.at("aggregation").get<double>();
  c.arch.state_hidden = j.at("state_hidden").get<std::vector<int>>();
  c.arch.output_hidden = j.at("output_hidden").get<std::vector<int>>();
  return c;
}

inline void save_model(const ModelArtifact& model, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "sepred-model";
  j["format_version"] = ModelArtifact::kFormatVersion;
  j["state_dim"] = model.params.state_dim;
  j["iterations"] = model.params.iterations;
  j["aggregation"] = model.params.aggregation;
  j["state_net"] = detail::mlp_to_json(model.params.state_net);
  j["output_net"] = detail::mlp_to_json(model.params.output_net);
  auto& vocab = j["vocabulary"] = nlohmann::ordered_json::array();
  for (const auto& v : model.vocab)
    vocab.push_back({{"id", v.id}, {"name", v.name}, {"count", v.count}});
  auto& grouping = j["element_grouping"] = nlohmann::ordered_json::object();
  for (const auto& [sym, grp] : ElementGrouping::standard().table())
    grouping[sym] = grp;
  j["train_config"] = train_config_to_json(model.config);
  j["dataset_fingerprint"] = model.dataset_fingerprint;
  write_text_atomic(path, j.dump(1) + "\n");
}

inline ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
  if (j.value("format", "") != "sepred-model")
    throw DataError("not a sepred model file: " + path);
  if (j.at("format_version").get<int>() != ModelArtifact::kFormatVersion)
    throw DataError("unsupported model format version " +
                    std::to_string(j.at("format_version").get<int>()));
  ModelArtifact m;
  m.params.state_dim = j.at("state_dim").get<int>();
  m.params.iterations = j.at("iterations").get<int>();
  m.params.aggregation = j.at("aggregation").get<double>();
  m.params.state_net = detail::mlp_from_json(j.at("state_net"));
  m.params.output_net = detail::mlp_from_json(j.at("output_net"));
  for (const auto& v : j.at("vocabulary"))
    m.vocab.push_back({v.at("id").get<std::string>(),
                       v.at("name").get<std::string>(),
                       v.at("count").get<long>()});
  if (m.vocab.size() != static_cast<size_t>(m.params.num_classes()))
    throw DataError("vocabulary length does not match output dimension");
  m.config = train_config_from_json(j.at("train_config"));
  m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::uint64_t>();
  return m;
}

// ---------------------------------------------------------------------------
// Key-value configuration files (one `key = value` pair per line, '#'
// comments). Keys mirror the TrainConfig field names.

inline TrainConfig parse_train_config(std::istream& in) {
  TrainConfig c;
  std::string line;
  size_t lineno = 0;
  auto parse_int_list = [](const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "batch_size") c.batch_size = std::stoi(value);
      else if (key == "max_epochs") c.max_epochs = std::stoi(value);
      else if (key == "patience") c.patience = std::stoi(value);
      else if (key == "loss_threshold") c.loss_threshold = std::stod(value);
      else if (key == "use_loss_threshold")
        c.use_loss_threshold = (value == "true" || value == "1");
      else if (key == "learning_rate") c.learning_rate = std::stod(value);
      else if (key == "beta1") c.beta1 = std::stod(value);
      else if (key == "beta2") c.beta2 = std::stod(value);
      else if (key == "epsilon") c.epsilon = std::stod(value);
      else if (key == "k_folds") c.k_folds = std::stoi(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "validation_fraction")
        c.validation_fraction = std::stod(value);
      else if (key == "threshold") c.threshold = std::stod(value);
      else if (key == "state_dim") c.arch.state_dim = std::stoi(value);
      else if (key == "iterations") c.arch.iterations = std::stoi(value);
      else if (key == "aggregation") c.arch.aggregation = std::stod(value);
      else if (key == "state_hidden") c.arch.state_hidden = parse_int_list(value);
      else if (key == "output_hidden")
        c.arch.output_hidden = parse_int_list(value);
      else
        throw ParseError("config line " + std::to_string(lineno) +
                         ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError("config line " + std::to_string(lineno) +
                       ": bad value for '" + key + "'");
    }
  }
  return c;
}

inline TrainConfig parse_train_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  return parse_train_config(in);
}

}  // namespace sepred
