#include "puttlab/corpus_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "puttlab/wav_io.hpp"

namespace puttlab::signal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string save_corpus(const std::vector<SamplePair>& corpus,
                        const std::vector<std::uint64_t>& pair_seeds,
                        const std::string& dir) {
  if (!pair_seeds.empty() && pair_seeds.size() != corpus.size())
    throw Error("save_corpus: pair_seeds size mismatch");
  fs::create_directories(dir);

  json pairs = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "pair_%05zu", i);
    const std::string clean_name = std::string(stem) + ".clean.wav";
    const std::string noise_name = std::string(stem) + ".noise.wav";
    write_wav(corpus[i].clean, (fs::path(dir) / clean_name).string());
    write_wav(corpus[i].noise, (fs::path(dir) / noise_name).string());
    pairs.push_back({{"clean_path", clean_name},
                     {"noise_path", noise_name},
                     {"snr_db", corpus[i].snr_db},
                     {"seed", pair_seeds.empty() ? 0 : pair_seeds[i]}});
  }

  json manifest = {{"sample_rate", corpus.empty() ? 16000 : corpus.front().clean.sample_rate},
                   {"pairs", pairs}};
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + manifest_path);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoFailure("short write to " + manifest_path);
  return manifest_path;
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoFailure("cannot open " + manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::parse_error& e) {
    throw CorruptHeader(manifest_path + ": " + e.what());
  }
  std::vector<ManifestEntry> entries;
  for (const auto& p : manifest.at("pairs")) {
    ManifestEntry e;
    e.clean_path = p.at("clean_path").get<std::string>();
    e.noise_path = p.at("noise_path").get<std::string>();
    e.snr_db = p.at("snr_db").get<double>();
    e.seed = p.value("seed", std::uint64_t{0});
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SamplePair> load_corpus(const std::string& manifest_path) {
  const auto entries = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<SamplePair> corpus;
  corpus.reserve(entries.size());
  for (const auto& e : entries) {
    SamplePair pair;
    pair.clean = read_wav((base / e.clean_path).string());
    pair.noise = read_wav((base / e.noise_path).string());
    if (pair.clean.samples.size() != pair.noise.samples.size() ||
        pair.clean.sample_rate != pair.noise.sample_rate) {
      throw Error("load_corpus: clean/noise mismatch for " + e.clean_path);
    }
    pair.snr_db = e.snr_db;
    pair.noisy.sample_rate = pair.clean.sample_rate;
    pair.noisy.samples.resize(pair.clean.samples.size());
    for (std::size_t i = 0; i < pair.clean.samples.size(); ++i)
      pair.noisy.samples[i] = pair.clean.samples[i] + pair.noise.samples[i];
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace puttlab::signal
