#include "puttlab/synth.hpp"

#include <cmath>

#include "puttlab/rng.hpp"
#include "puttlab/signal_ops.hpp"

namespace puttlab::signal {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void normalize_rms(std::vector<double>& v, double target_rms) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  const double rms = std::sqrt(acc / static_cast<double>(v.size()));
  if (rms == 0.0) return;
  const double g = target_rms / rms;
  for (double& x : v) x *= g;
}

// Piecewise-linear curve through random control points spaced `spacing`
// samples apart. Used for amplitude envelopes and pitch drift.
std::vector<double> random_curve(int length, int spacing, double lo, double hi, Rng& rng) {
  const int n_points = length / spacing + 2;
  std::vector<double> points(static_cast<std::size_t>(n_points));
  for (auto& p : points) p = rng.uniform(lo, hi);
  std::vector<double> out(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) {
    const double pos = static_cast<double>(t) / static_cast<double>(spacing);
    const int i0 = static_cast<int>(pos);
    const double frac = pos - static_cast<double>(i0);
    out[static_cast<std::size_t>(t)] =
        points[static_cast<std::size_t>(i0)] +
        frac * (points[static_cast<std::size_t>(i0 + 1)] - points[static_cast<std::size_t>(i0)]);
  }
  return out;
}

// Windowed-sinc FIR band-pass, applied in "same" alignment.
std::vector<double> fir_bandpass(const std::vector<double>& x, double f_lo, double f_hi,
                                 int sample_rate) {
  constexpr int kHalf = 64;
  const double w_lo = f_lo / static_cast<double>(sample_rate);
  const double w_hi = f_hi / static_cast<double>(sample_rate);
  std::vector<double> h(2 * kHalf + 1);
  for (int k = -kHalf; k <= kHalf; ++k) {
    double v;
    if (k == 0) {
      v = 2.0 * (w_hi - w_lo);
    } else {
      const double a = kTwoPi * static_cast<double>(k);
      v = (std::sin(a * w_hi) - std::sin(a * w_lo)) / (3.14159265358979323846 * k);
    }
    // Blackman window
    const double u = static_cast<double>(k + kHalf) / static_cast<double>(2 * kHalf);
    v *= 0.42 - 0.5 * std::cos(kTwoPi * u) + 0.08 * std::cos(2.0 * kTwoPi * u);
    h[static_cast<std::size_t>(k + kHalf)] = v;
  }
  std::vector<double> y(x.size(), 0.0);
  const int n = static_cast<int>(x.size());
  for (int t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int k = -kHalf; k <= kHalf; ++k) {
      const int j = t + k;
      if (j < 0 || j >= n) continue;
      acc += h[static_cast<std::size_t>(k + kHalf)] * x[static_cast<std::size_t>(j)];
    }
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

}  // namespace

Waveform synth_speech(int length, int sample_rate, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xC1EA7));
  const double fs = static_cast<double>(sample_rate);

  const double f0_base = rng.uniform(80.0, 300.0);
  const double vibrato_hz = rng.uniform(3.0, 8.0);
  const double vibrato_depth = rng.uniform(0.02, 0.08);
  const double vibrato_phase = rng.uniform(0.0, kTwoPi);
  const double glide = rng.uniform(-0.1, 0.1);  // relative drift per second

  const int n_harm = static_cast<int>(rng.uniform_int(5, 10));
  std::vector<double> amp(static_cast<std::size_t>(n_harm));
  std::vector<double> phase(static_cast<std::size_t>(n_harm));
  for (int h = 0; h < n_harm; ++h) {
    amp[static_cast<std::size_t>(h)] = rng.uniform(0.5, 1.0) / static_cast<double>(h + 1);
    phase[static_cast<std::size_t>(h)] = rng.uniform(0.0, kTwoPi);
  }

  // Envelope control points every 10-50 ms.
  const int env_spacing =
      std::max(1, static_cast<int>(rng.uniform(0.010, 0.050) * fs));
  std::vector<double> env = random_curve(length, env_spacing, 0.2, 1.0, rng);

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(static_cast<std::size_t>(length));
  double cycle = 0.0;  // accumulated fundamental phase in cycles
  for (int t = 0; t < length; ++t) {
    const double sec = static_cast<double>(t) / fs;
    const double f0 = f0_base * (1.0 + glide * sec) *
                      (1.0 + vibrato_depth * std::sin(kTwoPi * vibrato_hz * sec + vibrato_phase));
    cycle += f0 / fs;
    double v = 0.0;
    for (int h = 0; h < n_harm; ++h) {
      const double fh = (h + 1) * f0;
      if (fh >= 0.5 * fs) break;  // keep harmonics below Nyquist
      v += amp[static_cast<std::size_t>(h)] *
           std::sin(kTwoPi * (h + 1) * cycle + phase[static_cast<std::size_t>(h)]);
    }
    w.samples[static_cast<std::size_t>(t)] = v * env[static_cast<std::size_t>(t)];
  }
  normalize_rms(w.samples, 0.1);
  return w;
}

Waveform synth_noise(int length, int sample_rate, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x17015E));
  const int kind = static_cast<int>(rng.uniform_int(0, 2));

  std::vector<double> v(static_cast<std::size_t>(length));
  for (auto& x : v) x = rng.normal();

  if (kind == 1) {
    const double f_lo = rng.uniform(200.0, 2000.0);
    const double f_hi = f_lo + rng.uniform(500.0, 3000.0);
    v = fir_bandpass(v, f_lo, std::min(f_hi, 0.45 * sample_rate), sample_rate);
  } else if (kind == 2) {
    const double f_am = rng.uniform(4.0, 40.0);
    const double depth = rng.uniform(0.5, 0.9);
    const double phi = rng.uniform(0.0, kTwoPi);
    for (int t = 0; t < length; ++t) {
      const double sec = static_cast<double>(t) / static_cast<double>(sample_rate);
      v[static_cast<std::size_t>(t)] *= 1.0 + depth * std::sin(kTwoPi * f_am * sec + phi);
    }
  }

  normalize_rms(v, 0.1);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = std::move(v);
  return w;
}

std::uint64_t pair_seed(std::uint64_t corpus_seed, int index) {
  return mix_seed(corpus_seed, 0x9A12 + static_cast<std::uint64_t>(index));
}

std::vector<SamplePair> synth_corpus(const CorpusSpec& spec) {
  check_corpus_spec(spec);
  std::vector<SamplePair> corpus;
  corpus.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    const std::uint64_t ps = pair_seed(spec.seed, i);
    Rng rng(mix_seed(ps, 0x50AB));
    const std::size_t level =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.snr_levels_db.size()) - 1));
    const Waveform clean = synth_speech(spec.segment_length, spec.sample_rate, ps);
    const Waveform noise = synth_noise(spec.segment_length, spec.sample_rate, ps);
    corpus.push_back(mix_at_snr(clean, noise, spec.snr_levels_db[level]));
  }
  return corpus;
}

}  // namespace puttlab::signal
