#pragma once

#include "puttlab/waveform.hpp"

namespace puttlab::signal {

double mean_power(const Waveform& w);

// Linear-interpolation resampler. Output length = round(T * target / source).
// Equal rates return the input unchanged.
Waveform resample(const Waveform& w, int target_rate);

// Scales `noise` so that 10*log10(P_clean / P_scaled_noise) == snr_db and
// returns {clean, scaled noise, clean + scaled noise}.
SamplePair mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

}  // namespace puttlab::signal
