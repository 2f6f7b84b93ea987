/*
 * Copyright 2026 The CAPT Intelligibility Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "capt/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>

#include "capt/error.hpp"
#include "text_util.hpp"

namespace capt {

FeatureFrames::FeatureFrames(std::size_t dim, double frame_rate, std::vector<double> data)
    : dim_(dim), frame_rate_(frame_rate), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) throw DomainError("frame data not a multiple of dim");
}

void FeatureFrames::push_back(std::span<const double> frame) {
  if (frame.size() != dim_) throw DomainError("frame dimension mismatch");
  data_.insert(data_.end(), frame.begin(), frame.end());
}

FeatureFrames FeatureFrames::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw DomainError("frame slice out of range");
  FeatureFrames out(dim_, frame_rate_);
  out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * dim_),
                   data_.begin() + static_cast<std::ptrdiff_t>(end * dim_));
  return out;
}

void FeatureFrames::append(const FeatureFrames& other) {
  if (other.dim_ != dim_) throw DomainError("frame dimension mismatch");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

std::size_t FrontendConfig::window_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(sample_rate * window_ms / 1000.0));
}

std::size_t FrontendConfig::hop_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::floor(sample_rate / frame_rate));
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const std::uint8_t* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

SampleBuffer read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  int rate = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw FormatError("truncated fmt chunk");
      const std::uint16_t format = le16(bytes.data() + body);
      const std::uint16_t channels = le16(bytes.data() + body + 2);
      rate = static_cast<int>(le32(bytes.data() + body + 4));
      const std::uint16_t bits = le16(bytes.data() + body + 14);
      if (format != 1) throw FormatError("WAV is not PCM");
      if (channels != 1) throw FormatError("WAV is not mono");
      if (bits != 16) throw FormatError("WAV is not 16-bit");
      if (rate <= 0) throw FormatError("WAV sample rate must be positive");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (body + size > bytes.size()) throw FormatError("truncated data chunk");
      if (size % 2 != 0) throw FormatError("odd data chunk size");
      SampleBuffer buf;
      buf.sample_rate = rate;
      buf.samples.resize(size / 2);
      for (std::size_t i = 0; i < buf.samples.size(); ++i) {
        auto s = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        buf.samples[i] = s / 32768.0;
      }
      return buf;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("no data chunk");
}

std::vector<std::uint8_t> write_wav(const SampleBuffer& buf) {
  std::vector<std::uint8_t> out;
  const auto data_size = static_cast<std::uint32_t>(buf.samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(buf.sample_rate));
  put32(out, static_cast<std::uint32_t>(buf.sample_rate * 2));
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_size);
  for (double v : buf.samples) {
    const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mel front end

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and executed with the new-array interface afterwards.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Power spectrum |X_k|^2 for k = 0..n/2.
  void power(const std::vector<double>& frame, std::vector<double>& out) const {
    struct Free {
      void operator()(void* p) const { fftw_free(p); }
    };
    std::unique_ptr<double, Free> in(fftw_alloc_real(n_));
    std::unique_ptr<fftw_complex, Free> spec(fftw_alloc_complex(n_ / 2 + 1));
    std::fill(in.get(), in.get() + n_, 0.0);
    std::copy(frame.begin(), frame.end(), in.get());
    fftw_execute_dft_r2c(plan_, in.get(), spec.get());
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      out[k] = spec.get()[k][0] * spec.get()[k][0] + spec.get()[k][1] * spec.get()[k][1];
    }
  }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

const RealFft& fft_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

struct Filterbank {
  std::size_t fft_size;
  // Per filter: first bin and weights.
  std::vector<std::pair<std::size_t, std::vector<double>>> filters;
};

Filterbank make_filterbank(int sample_rate, const FrontendConfig& cfg, std::size_t fft_size) {
  const double high = cfg.high_hz > 0.0 ? cfg.high_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.low_hz);
  const double mel_hi = hz_to_mel(high);
  const std::size_t m = cfg.num_filters;
  std::vector<double> edges(m + 2);
  for (std::size_t i = 0; i < m + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / double(m + 1));
  }
  Filterbank fb{fft_size, {}};
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  for (std::size_t f = 0; f < m; ++f) {
    const double lo = edges[f], mid = edges[f + 1], hi = edges[f + 2];
    std::size_t first = fft_size;
    std::vector<double> w;
    for (std::size_t k = 0; k <= fft_size / 2; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      double weight = 0.0;
      if (hz > lo && hz <= mid) {
        weight = (hz - lo) / (mid - lo);
      } else if (hz > mid && hz < hi) {
        weight = (hi - hz) / (hi - mid);
      }
      if (weight > 0.0) {
        if (first == fft_size) first = k;
        w.resize(k - first + 1, 0.0);
        w[k - first] = weight;
      }
    }
    if (first == fft_size) first = 0;
    fb.filters.emplace_back(first, std::move(w));
  }
  return fb;
}

}  // namespace

std::vector<double> mel_band_centers(int sample_rate, const FrontendConfig& cfg) {
  const double high = cfg.high_hz > 0.0 ? cfg.high_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.low_hz);
  const double mel_hi = hz_to_mel(high);
  std::vector<double> out(cfg.num_filters);
  for (std::size_t i = 0; i < cfg.num_filters; ++i) {
    out[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i + 1) / double(cfg.num_filters + 1));
  }
  return out;
}

std::size_t frame_count(std::size_t num_samples, int sample_rate, const FrontendConfig& cfg) {
  const auto window = cfg.window_samples(sample_rate);
  const auto hop = cfg.hop_samples(sample_rate);
  if (num_samples < window) return 0;
  return (num_samples - window) / hop + 1;
}

FeatureFrames log_mel_energies(const SampleBuffer& buf, const FrontendConfig& cfg) {
  if (buf.sample_rate <= 0) throw DomainError("sample rate must be positive");
  if (cfg.frame_rate <= 0.0 || cfg.num_filters == 0) throw DomainError("bad frontend config");
  const auto window = cfg.window_samples(buf.sample_rate);
  const auto hop = cfg.hop_samples(buf.sample_rate);
  if (window == 0 || hop == 0) throw DomainError("window and hop must be at least one sample");
  const auto n_frames = frame_count(buf.samples.size(), buf.sample_rate, cfg);
  if (n_frames == 0) throw TooShortError("signal shorter than one analysis window");

  const std::size_t fft_size = next_pow2(window);
  const auto fb = make_filterbank(buf.sample_rate, cfg, fft_size);
  const auto& fft = fft_for(fft_size);

  std::vector<double> hamming(window);
  for (std::size_t i = 0; i < window; ++i) {
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(window - 1));
  }

  FeatureFrames out(cfg.num_filters, cfg.frame_rate);
  std::vector<double> frame(window), power, energies(cfg.num_filters);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t offset = t * hop;
    for (std::size_t i = 0; i < window; ++i) {
      const double prev = (offset + i > 0) ? buf.samples[offset + i - 1] : 0.0;
      const double x = buf.samples[offset + i] - cfg.preemphasis * prev;
      frame[i] = x * hamming[i];
    }
    fft.power(frame, power);
    for (std::size_t f = 0; f < cfg.num_filters; ++f) {
      const auto& [first, w] = fb.filters[f];
      double e = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) e += w[k] * power[first + k];
      energies[f] = std::log(std::max(e, cfg.energy_floor));
    }
    out.push_back(energies);
  }
  return out;
}

FeatureFrames mfcc(const SampleBuffer& buf, const FrontendConfig& cfg) {
  if (cfg.dimension == 0 || cfg.dimension > cfg.num_filters) {
    throw DomainError("cepstral dimension must be in [1, num_filters]");
  }
  const auto logmel = log_mel_energies(buf, cfg);
  const std::size_t m = cfg.num_filters;
  // Orthonormal DCT-II.
  std::vector<double> basis(cfg.dimension * m);
  for (std::size_t c = 0; c < cfg.dimension; ++c) {
    const double scale = c == 0 ? std::sqrt(1.0 / double(m)) : std::sqrt(2.0 / double(m));
    for (std::size_t f = 0; f < m; ++f) {
      basis[c * m + f] = scale * std::cos(std::numbers::pi * double(c) * (double(f) + 0.5) / double(m));
    }
  }
  FeatureFrames out(cfg.dimension, cfg.frame_rate);
  std::vector<double> ceps(cfg.dimension);
  for (std::size_t t = 0; t < logmel.size(); ++t) {
    auto row = logmel.frame(t);
    // Equal log energies give exactly zero higher cepstra.
    const bool flat = std::all_of(row.begin(), row.end(), [&](double v) { return v == row[0]; });
    for (std::size_t c = 0; c < cfg.dimension; ++c) {
      if (flat && c > 0) {
        ceps[c] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (std::size_t f = 0; f < m; ++f) acc += basis[c * m + f] * row[f];
      ceps[c] = acc;
    }
    out.push_back(ceps);
  }
  return out;
}

FeatureFrames cmn(const FeatureFrames& frames) {
  const std::size_t n = frames.size(), d = frames.dim();
  if (n == 0) return frames;
  std::vector<double> mean(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += frames.at(t, k);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<double> data(frames.data());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; k < d; ++k) data[t * d + k] -= mean[k];
  }
  return FeatureFrames(d, frames.frame_rate(), std::move(data));
}

std::string serialize_frames(const FeatureFrames& frames) {
  std::string out = std::to_string(frames.size()) + '\t' + std::to_string(frames.dim()) + '\t' +
                    detail::format_double(frames.frame_rate()) + '\n';
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto row = frames.frame(t);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += '\t';
      out += detail::format_double(row[k]);
    }
    out += '\n';
  }
  return out;
}

FeatureFrames parse_frames(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::size_t li = 0;
  auto next_line = [&]() -> std::string_view {
    while (li < lines.size()) {
      auto l = detail::trim(lines[li++]);
      if (!l.empty() && l.front() != '#') return l;
    }
    return {};
  };
  auto header = detail::split_ws(next_line());
  std::size_t n = 0, d = 0;
  double rate = 0.0;
  if (header.size() != 3 || !detail::parse_int(header[0], n) || !detail::parse_int(header[1], d) ||
      !detail::parse_double(header[2], rate) || d == 0 || !(rate > 0.0)) {
    throw FormatError("frames file: bad 'T D frame_rate' header");
  }
  std::vector<double> data;
  data.reserve(n * d);
  for (std::size_t t = 0; t < n; ++t) {
    auto fields = detail::split_ws(next_line());
    if (fields.size() != d) throw FormatError("frames file: row " + std::to_string(t) + " has wrong width");
    for (auto f : fields) {
      double v;
      if (!detail::parse_double(f, v) || !std::isfinite(v)) {
        throw FormatError("frames file: non-numeric value in row " + std::to_string(t));
      }
      data.push_back(v);
    }
  }
  if (!next_line().empty()) throw FormatError("frames file: more rows than declared");
  return FeatureFrames(d, rate, std::move(data));
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

std::uint64_t symbol_seed(std::string_view sym) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : sym) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Generator {
  std::vector<double> mean;
  std::vector<double> spread;
};

// Means carry the four articulatory attributes in their leading dimensions so
// articulatory neighbours are acoustically closer than unrelated phonemes.
Generator make_generator(const PhonemeInventory& inv, PhonemeId p, std::size_t dim) {
  std::mt19937_64 rng(symbol_seed(inv.symbol(p)));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> spread(0.5, 1.5);
  Generator g;
  g.mean.resize(dim);
  g.spread.resize(dim);
  const auto& a = inv.attributes(p);
  const double attrs[4] = {a.place, a.closedness, a.roundedness, a.voicing};
  for (std::size_t k = 0; k < dim; ++k) {
    const double r = unit(rng);
    g.mean[k] = k < 4 ? 2.0 * attrs[k] - 1.0 : r;
    g.spread[k] = spread(rng);
  }
  if (inv.is_silence(p)) {
    for (std::size_t k = 0; k < std::min<std::size_t>(dim, 4); ++k) g.mean[k] = -1.5;
  }
  return g;
}

}  // namespace

std::vector<double> generator_mean(const PhonemeInventory& inv, PhonemeId p, std::size_t dim) {
  return make_generator(inv, p, dim).mean;
}

std::vector<double> generator_spread(const PhonemeInventory& inv, PhonemeId p, std::size_t dim) {
  return make_generator(inv, p, dim).spread;
}

std::vector<std::vector<double>> sample_frames(const PhonemeInventory& inv, PhonemeId p,
                                               std::size_t n, double noise_level,
                                               std::uint64_t seed, std::size_t dim) {
  const auto g = make_generator(inv, p, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& f : out) {
    for (std::size_t k = 0; k < dim; ++k) f[k] = g.mean[k] + noise_level * g.spread[k] * normal(rng);
  }
  return out;
}

SyntheticUtterance synthesize(const PhonemeInventory& inv, const PhonemeSeq& phonemes,
                              const DistortionSpec& spec, std::uint64_t seed,
                              const SynthConfig& cfg) {
  const std::size_t n = phonemes.size();
  if (n == 0) throw DomainError("synthesize: empty phoneme sequence");
  for (auto p : phonemes) {
    if (p.value >= inv.size()) throw DomainError("synthesize: phoneme not in inventory");
  }
  if (!(spec.noise_level >= 0.0)) throw DomainError("synthesize: noise_level must be >= 0");
  if (!spec.duration_scale.empty() && spec.duration_scale.size() != n) {
    throw DomainError("synthesize: duration_scale needs one entry per phoneme");
  }
  for (double s : spec.duration_scale) {
    if (!(s > 0.0)) throw DomainError("synthesize: duration_scale must be > 0");
  }
  if (cfg.base_min_frames < cfg.min_frames || cfg.base_max_frames < cfg.base_min_frames) {
    throw DomainError("synthesize: bad duration range");
  }

  std::vector<PhonemeId> source(phonemes);
  std::vector<bool> deleted(n, false);
  for (const auto& [pos, rep] : spec.substitutions) {
    if (pos >= n || rep.value >= inv.size()) throw DomainError("synthesize: bad substitution");
    source[pos] = rep;
  }
  for (auto pos : spec.deletions) {
    if (pos >= n) throw DomainError("synthesize: bad deletion position");
    deleted[pos] = true;
  }
  std::vector<std::vector<PhonemeId>> inserted_before(n + 1);
  for (const auto& [pos, ph] : spec.insertions) {
    if (pos > n || ph.value >= inv.size()) throw DomainError("synthesize: bad insertion");
    inserted_before[pos].push_back(ph);
  }

  // Durations and per-segment noise use separate streams keyed by segment
  // slot, so a distortion leaves the other segments of the utterance unchanged.
  std::mt19937_64 duration_rng(seed);
  std::mt19937_64 insert_rng(seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<std::size_t> base(cfg.base_min_frames, cfg.base_max_frames);

  SyntheticUtterance out;
  out.frames = FeatureFrames(cfg.dimension, cfg.frame_rate);
  auto emit = [&](PhonemeId p, std::size_t len, int target, std::uint64_t slot) {
    const auto g = make_generator(inv, p, cfg.dimension);
    std::mt19937_64 noise_rng(seed * 0x9E3779B97F4A7C15ULL + slot);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t start = out.frames.size();
    std::vector<double> f(cfg.dimension);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < cfg.dimension; ++k) {
        f[k] = g.mean[k] + spec.noise_level * g.spread[k] * normal(noise_rng);
      }
      out.frames.push_back(f);
    }
    out.segments.push_back({p, start, start + len, target});
  };
  auto silence_len = [&](std::size_t len) { return len == 0 ? 0 : std::max(len, cfg.min_frames); };

  if (auto len = silence_len(spec.leading_silence)) emit(inv.silence(), len, -1, 1000003);
  for (std::size_t i = 0; i <= n; ++i) {
    std::uint64_t k = 0;
    for (auto ph : inserted_before[i]) emit(ph, base(insert_rng), -1, 2000003 + 97 * i + k++);
    if (i == n) break;
    // Drawn even for deleted positions to keep later durations aligned.
    std::size_t len = base(duration_rng);
    if (!spec.duration_scale.empty()) {
      len = static_cast<std::size_t>(std::lround(static_cast<double>(len) * spec.duration_scale[i]));
    }
    len = std::max(len, cfg.min_frames);
    if (!deleted[i]) emit(source[i], len, static_cast<int>(i), i);
  }
  if (auto len = silence_len(spec.trailing_silence)) emit(inv.silence(), len, -1, 3000017);

  if (out.frames.empty()) throw DomainError("synthesize: every segment was deleted");
  return out;
}

}  // namespace capt
