#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "puttlab/waveform.hpp"

namespace puttlab::signal {

struct ManifestEntry {
  std::string clean_path;  // relative to the manifest's directory
  std::string noise_path;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

// Writes pair WAVs plus a manifest.json into `dir` and returns the manifest path.
std::string save_corpus(const std::vector<SamplePair>& corpus,
                        const std::vector<std::uint64_t>& pair_seeds,
                        const std::string& dir);

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);

// Reads clean/noise WAVs listed in the manifest; noisy is re-summed in double
// precision so the SamplePair identity holds exactly.
std::vector<SamplePair> load_corpus(const std::string& manifest_path);

}  // namespace puttlab::signal
