#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "puttlab/errors.hpp"

namespace puttlab::signal {

// Mono audio buffer. Samples are unitless amplitudes, nominally in [-1, 1];
// quantization happens only at the WAV boundary.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t length() const { return samples.size(); }
};

inline bool is_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void check_waveform(const Waveform& w, const char* what) {
  if (w.samples.empty()) throw Error(std::string(what) + ": waveform is empty");
  if (w.sample_rate <= 0) throw Error(std::string(what) + ": sample_rate must be positive");
  if (!is_finite(w.samples)) throw Error(std::string(what) + ": non-finite sample");
}

// A clean/noise/noisy triple with noisy == clean + noise elementwise.
// snr_db records the level the mixer was asked for; it is bookkeeping,
// not an additional constraint on the three buffers.
struct SamplePair {
  Waveform clean;
  Waveform noise;
  Waveform noisy;
  double snr_db = 0.0;
};

struct CorpusSpec {
  int count = 0;
  int segment_length = 8192;
  int sample_rate = 16000;
  std::vector<double> snr_levels_db = {0.0, 5.0, 10.0, 15.0};
  std::uint64_t seed = 0;
};

inline void check_corpus_spec(const CorpusSpec& spec) {
  if (spec.count < 0) throw Error("CorpusSpec: count must be >= 0");
  if (spec.segment_length < 64) throw Error("CorpusSpec: segment_length must be >= 64");
  if (spec.sample_rate <= 0) throw Error("CorpusSpec: sample_rate must be positive");
  if (spec.snr_levels_db.empty()) throw Error("CorpusSpec: snr_levels_db must be non-empty");
}

}  // namespace puttlab::signal
