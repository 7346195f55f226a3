#pragma once

#include <cstdint>
#include <vector>

#include "puttlab/waveform.hpp"

namespace puttlab::signal {

// Speech-like test material: a harmonic complex with time-varying pitch and a
// smoothed random amplitude envelope. Deterministic per seed.
Waveform synth_speech(int length, int sample_rate, std::uint64_t seed);

// Noise material drawn from {white, band-limited, amplitude-modulated}.
Waveform synth_noise(int length, int sample_rate, std::uint64_t seed);

// Deterministic corpus of clean/noise/noisy triples. Each pair is mixed at an
// SNR drawn from spec.snr_levels_db. Pair i depends only on (spec.seed, i),
// so a longer corpus extends a shorter one with the same seed.
std::vector<SamplePair> synth_corpus(const CorpusSpec& spec);

// Sub-seed assigned to pair `index`; recorded in corpus manifests.
std::uint64_t pair_seed(std::uint64_t corpus_seed, int index);

}  // namespace puttlab::signal
