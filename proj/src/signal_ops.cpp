#include "puttlab/signal_ops.hpp"

#include <cmath>

namespace puttlab::signal {

double mean_power(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double x : w.samples) acc += x * x;
  return acc / static_cast<double>(w.samples.size());
}

Waveform resample(const Waveform& w, int target_rate) {
  check_waveform(w, "resample");
  if (target_rate <= 0) throw Error("resample: target_rate must be positive");
  if (target_rate == w.sample_rate) return w;

  const std::size_t in_len = w.samples.size();
  const double ratio = static_cast<double>(target_rate) / static_cast<double>(w.sample_rate);
  std::size_t out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(in_len) * ratio));
  if (out_len == 0) out_len = 1;

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const double step = static_cast<double>(w.sample_rate) / static_cast<double>(target_rate);
  for (std::size_t m = 0; m < out_len; ++m) {
    const double pos = static_cast<double>(m) * step;
    if (pos >= static_cast<double>(in_len - 1)) {
      out.samples[m] = w.samples[in_len - 1];
      continue;
    }
    const std::size_t i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    out.samples[m] = w.samples[i0] + frac * (w.samples[i0 + 1] - w.samples[i0]);
  }
  return out;
}

SamplePair mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  check_waveform(clean, "mix_at_snr clean");
  check_waveform(noise, "mix_at_snr noise");
  if (clean.samples.size() != noise.samples.size())
    throw Error("mix_at_snr: length mismatch");
  if (clean.sample_rate != noise.sample_rate)
    throw Error("mix_at_snr: sample_rate mismatch");

  const double p_clean = mean_power(clean);
  const double p_noise = mean_power(noise);
  if (p_clean == 0.0) throw ZeroEnergyInput("mix_at_snr: clean signal has zero energy");
  if (p_noise == 0.0) throw ZeroEnergyInput("mix_at_snr: noise signal has zero energy");

  const double gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));

  SamplePair pair;
  pair.snr_db = snr_db;
  pair.clean = clean;
  pair.noise.sample_rate = noise.sample_rate;
  pair.noise.samples.resize(noise.samples.size());
  pair.noisy.sample_rate = clean.sample_rate;
  pair.noisy.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    pair.noise.samples[i] = gain * noise.samples[i];
    pair.noisy.samples[i] = clean.samples[i] + pair.noise.samples[i];
  }
  return pair;
}

}  // namespace puttlab::signal
