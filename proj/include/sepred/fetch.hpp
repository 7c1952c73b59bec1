// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "sepred/dataset.hpp"
#include "sepred/errors.hpp"

// httplib (with TLS support) must come after Eigen; some of the system
// headers it drags in define macros that mangle Eigen internals.
#include <httplib.h>
#include <json.hpp>

namespace sepred {

/// Converts a STITCH stereo id ("CID" + zero-padded digits) to the numeric
/// compound id by stripping the prefix and leading zeros.
inline long stereo_to_cid(const std::string& stereo_id) {
  if (stereo_id.size() <= 3 || stereo_id.compare(0, 3, "CID") != 0)
    throw DataError("malformed stereo id: " + stereo_id);
  size_t pos = 3;
  while (pos < stereo_id.size() && stereo_id[pos] == '0') ++pos;
  if (pos == stereo_id.size()) throw DataError("zero compound id: " + stereo_id);
  long cid = 0;
  for (; pos < stereo_id.size(); ++pos) {
    char c = stereo_id[pos];
    if (c < '0' || c > '9')
      throw DataError("malformed stereo id: " + stereo_id);
    cid = cid * 10 + (c - '0');
  }
  return cid;
}

// Fetches canonical SMILES from a PubChem-style REST endpoint with an
// on-disk cache keyed by numeric compound id.
class SmilesFetcher {
public:
  SmilesFetcher(std::string base_url, std::string cache_dir,
                int max_retries = 3, int backoff_ms = 500)
      : base_url_(std::move(base_url)),
        cache_dir_(std::move(cache_dir)),
        max_retries_(max_retries),
        backoff_ms_(backoff_ms) {
    std::filesystem::create_directories(cache_dir_);
  }

  static std::string default_base_url() {
    if (const char* env = std::getenv("SEPRED_PUBCHEM_URL")) return env;
    return "https://pubchem.ncbi.nlm.nih.gov";
  }

  static std::string default_cache_dir() {
    if (const char* env = std::getenv("SEPRED_CACHE_DIR")) return env;
    return "smiles_cache";
  }

  /// Cache-first lookup; nullopt when the compound cannot be resolved after
  /// retries (the caller records it as unresolved).
  std::optional<std::string> fetch(const std::string& stereo_id) {
    long cid = stereo_to_cid(stereo_id);
    auto cache_path = cache_dir_ / (std::to_string(cid) + ".smi");
    if (std::filesystem::exists(cache_path)) {
      std::ifstream in(cache_path);
      std::string smiles;
      std::getline(in, smiles);
      if (!smiles.empty()) return smiles;
    }
    auto smiles = fetch_remote(cid);
    if (smiles) {
      // Atomic per-compound cache write.
      auto tmp = cache_path;
      tmp += ".tmp";
      {
        std::ofstream out(tmp);
        out << *smiles << "\n";
      }
      std::filesystem::rename(tmp, cache_path);
    }
    return smiles;
  }

  /// SmilesLookup adapter for build_dataset.
  SmilesLookup lookup() {
    return [this](const std::string& id) { return fetch(id); };
  }

private:
  std::optional<std::string> fetch_remote(long cid) {
    const std::string path = "/rest/pug/compound/cid/" + std::to_string(cid) +
                             "/property/CanonicalSMILES/JSON";
    for (int attempt = 0; attempt < max_retries_; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(backoff_ms_ * (1 << (attempt - 1))));
      httplib::Client client(base_url_);
      client.set_connection_timeout(10);
      client.set_read_timeout(30);
      auto res = client.Get(path);
      if (!res) continue;  // network failure, retry
      if (res->status == 404) return std::nullopt;
      if (res->status != 200) continue;
      try {
        auto j = nlohmann::json::parse(res->body);
        const auto& props = j.at("PropertyTable").at("Properties");
        if (props.empty()) return std::nullopt;
        const auto& entry = props[0];
        // Newer PubChem responses rename the property; accept either key.
        if (entry.contains("CanonicalSMILES"))
          return entry["CanonicalSMILES"].get<std::string>();
        if (entry.contains("SMILES"))
          return entry["SMILES"].get<std::string>();
        return std::nullopt;
      } catch (const nlohmann::json::exception&) {
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  std::string base_url_;
  std::filesystem::path cache_dir_;
  int max_retries_;
  int backoff_ms_;
};

/// Builds a SmilesLookup from a local (id, SMILES) CSV, bypassing the
/// network entirely.
inline SmilesLookup csv_smiles_lookup(const std::string& csv_path) {
  auto rows = read_smiles_csv(csv_path);
  auto table = std::make_shared<std::map<std::string, std::string>>();
  for (auto& [id, smiles] : rows) (*table)[id] = smiles;
  return [table](const std::string& id) -> std::optional<std::string> {
    auto it = table->find(id);
    if (it == table->end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace sepred
