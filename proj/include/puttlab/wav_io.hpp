#pragma once

#include <string>

#include "puttlab/waveform.hpp"

namespace puttlab::signal {

// PCM 16-bit mono RIFF/WAVE only. Anything else is a hard error, never a
// silent conversion.
//
// Scaling: read divides by 32768; write quantizes with round(clamp(x)*32768)
// clipped to the int16 range. The symmetric factor makes write_wav(read_wav(f))
// the byte identity on every valid input file.
Waveform read_wav(const std::string& path);
void write_wav(const Waveform& w, const std::string& path);

// Quantizer used by write_wav, exposed for tests.
std::int16_t quantize_sample(double x);

}  // namespace puttlab::signal
