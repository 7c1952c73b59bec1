// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "sepred/model_io.hpp"
#include "test_util.hpp"

using namespace sepred;

namespace {

const std::string kConfigDir = std::string(SEPRED_TEST_DATA_DIR) + "/../../configs";

ModelArtifact sample_model(std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  ModelArtifact m;
  m.params = testutil::random_gnn(rng, 5, 3, 4);
  m.vocab = {{"C01", "alpha", 7}, {"C02", "beta", 6}, {"C03", "gamma", 5},
             {"C04", "delta", 5}};
  m.config.arch.state_dim = 5;
  m.config.arch.iterations = 3;
  m.dataset_fingerprint = 0xabcdef;
  return m;
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hash("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a_hash("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a_hash("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("model round trip preserves predictions bit for bit") {
  auto model = sample_model();
  auto path = std::filesystem::temp_directory_path() / "sepred_model.json";
  save_model(model, path.string());
  auto loaded = load_model(path.string());

  CHECK(loaded.vocab.size() == 4);
  CHECK(loaded.vocab[1].name == "beta");
  CHECK(loaded.dataset_fingerprint == 0xabcdef);
  CHECK(loaded.params.state_dim == 5);
  CHECK(loaded.params.iterations == 3);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = testutil::random_molgraph(rng, 7, 4);
    auto y1 = gnn_forward(model.params, g);
    auto y2 = gnn_forward(loaded.params, g);
    CHECK(y1 == y2);  // exact
  }
  std::filesystem::remove(path);
}

TEST_CASE("model files with the wrong format or version are refused") {
  auto model = sample_model();
  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / "sepred_model_bad.json";
  save_model(model, path.string());

  std::ifstream in(path);
  nlohmann::ordered_json j;
  in >> j;
  in.close();

  auto rewrite = [&](const nlohmann::ordered_json& doc) {
    std::ofstream out(path);
    out << doc.dump(1);
  };

  auto bad_version = j;
  bad_version["format_version"] = 99;
  rewrite(bad_version);
  CHECK_THROWS_AS(load_model(path.string()), DataError);

  auto bad_format = j;
  bad_format["format"] = "something-else";
  rewrite(bad_format);
  CHECK_THROWS_AS(load_model(path.string()), DataError);

  auto bad_vocab = j;
  bad_vocab["vocabulary"].erase(0);  // now shorter than the output layer
  rewrite(bad_vocab);
  CHECK_THROWS_AS(load_model(path.string()), DataError);

  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model((dir / "no_such_model.json").string()), DataError);
}

TEST_CASE("train config key-value parsing") {
  std::istringstream in(
      "# comment line\n"
      "batch_size = 16\n"
      "loss_threshold = 0.14   # trailing comment\n"
      "use_loss_threshold = false\n"
      "seed = 42\n"
      "state_hidden = 32,16\n"
      "\n"
      "output_hidden = 8\n");
  auto c = parse_train_config(in);
  CHECK(c.batch_size == 16);
  CHECK(c.loss_threshold == 0.14);
  CHECK_FALSE(c.use_loss_threshold);
  CHECK(c.seed == 42);
  CHECK(c.arch.state_hidden == std::vector<int>{32, 16});
  CHECK(c.arch.output_hidden == std::vector<int>{8});
  // Untouched keys keep their defaults.
  CHECK(c.max_epochs == 8000);
  CHECK(c.learning_rate == 1e-3);
}

TEST_CASE("config parse errors carry the line number") {
  std::istringstream unknown("batch_size = 8\nnot_a_key = 3\n");
  try {
    parse_train_config(unknown);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
  }

  std::istringstream noeq("batch_size 8\n");
  CHECK_THROWS_AS(parse_train_config(noeq), ParseError);

  std::istringstream badval("batch_size = many\n");
  CHECK_THROWS_AS(parse_train_config(badval), ParseError);
}

TEST_CASE("shipped experiment presets parse and validate") {
  auto a = parse_train_config_file(kConfigDir + "/expA.cfg");
  CHECK(a.batch_size == 32);
  CHECK(a.loss_threshold == 0.15);
  CHECK(a.max_epochs == 8000);
  CHECK(a.patience == 2000);
  a.validate();

  auto b = parse_train_config_file(kConfigDir + "/expB.cfg");
  CHECK(b.max_epochs == 10000);
  CHECK(b.loss_threshold == 0.15);
  b.validate();

  auto b1 = parse_train_config_file(kConfigDir + "/expB1.cfg");
  CHECK(b1.max_epochs == 10000);
  CHECK(b1.loss_threshold == 0.14);
  b1.validate();

  auto c = parse_train_config_file(kConfigDir + "/expC.cfg");
  CHECK(c.batch_size == 16);
  CHECK(c.loss_threshold == 0.14);
  CHECK(c.max_epochs == 7500);
  CHECK(c.patience == 1000);
  c.validate();

  for (const auto* cfg : {&a, &b, &b1, &c}) {
    CHECK(cfg->arch.state_dim == 20);
    CHECK(cfg->arch.iterations == 6);
    CHECK(cfg->arch.state_hidden == std::vector<int>{150, 150});
    CHECK(cfg->arch.output_hidden == std::vector<int>{100, 100});
  }
}

TEST_CASE("train config json round trip") {
  TrainConfig c;
  c.batch_size = 7;
  c.seed = 123456789ULL;
  c.arch.state_hidden = {9, 9, 9};
  auto j = train_config_to_json(c);
  auto back = train_config_from_json(j);
  CHECK(back.batch_size == 7);
  CHECK(back.seed == 123456789ULL);
  CHECK(back.arch.state_hidden == std::vector<int>{9, 9, 9});
  CHECK(back.learning_rate == c.learning_rate);
}
