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

#include "capt/acoustic_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "capt/error.hpp"

namespace capt {

AcousticModel::AcousticModel(std::size_t dim, std::vector<PhonemeGaussian> phonemes,
                             std::size_t min_duration, double exit_prob)
    : dim_(dim), phonemes_(std::move(phonemes)), min_duration_(min_duration) {
  if (dim_ == 0) throw DomainError("acoustic model dimension must be positive");
  if (min_duration_ == 0) throw DomainError("min_duration must be >= 1");
  if (!(exit_prob > 0.0 && exit_prob <= 1.0)) throw DomainError("exit probability must be in (0,1]");
  exit_logprob_ = std::log(exit_prob);
  self_loop_logprob_ = exit_prob < 1.0 ? std::log1p(-exit_prob) : -INFINITY;
  log_norm_.reserve(phonemes_.size());
  for (const auto& g : phonemes_) {
    if (g.mean.size() != dim_ || g.variance.size() != dim_) {
      throw DomainError("acoustic model: gaussian dimension mismatch");
    }
    double acc = 0.0;
    for (double v : g.variance) {
      if (!(v >= kVarianceFloor)) throw DomainError("acoustic model: variance below floor");
      acc += std::log(2.0 * std::numbers::pi * v);
    }
    log_norm_.push_back(-0.5 * acc);
  }
}

double AcousticModel::frame_logp(PhonemeId p, std::span<const double> frame) const {
  if (frame.size() != dim_) {
    throw DomainError("frame dimension " + std::to_string(frame.size()) +
                      " does not match model dimension " + std::to_string(dim_));
  }
  const auto& g = phonemes_.at(p.value);
  double acc = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    const double d = frame[k] - g.mean[k];
    acc += d * d / g.variance[k];
  }
  return log_norm_[p.value] - 0.5 * acc;
}

namespace {

constexpr char kMagic[4] = {'C', 'P', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("acoustic model file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> AcousticModel::save(const PhonemeInventory& inv) const {
  if (phonemes_.size() != inv.size()) throw DomainError("model does not match inventory");
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u32(static_cast<std::uint32_t>(phonemes_.size()));
  w.u32(static_cast<std::uint32_t>(min_duration_));
  w.f64(self_loop_logprob_);
  w.f64(exit_logprob_);
  for (std::size_t i = 0; i < phonemes_.size(); ++i) {
    const auto& sym = inv.symbol(PhonemeId{static_cast<std::uint16_t>(i)});
    w.out.push_back(static_cast<std::uint8_t>(sym.size()));
    w.bytes(sym.data(), sym.size());
    for (double v : phonemes_[i].mean) w.f64(v);
    for (double v : phonemes_[i].variance) w.f64(v);
  }
  return std::move(w.out);
}

AcousticModel AcousticModel::load(std::span<const std::uint8_t> bytes, const PhonemeInventory& inv,
                                  std::size_t expected_dim) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw FormatError("acoustic model: bad magic");
  if (r.u32() != kVersion) throw FormatError("acoustic model: unsupported version");
  const std::size_t dim = r.u32();
  const std::size_t count = r.u32();
  const std::size_t min_duration = r.u32();
  if (expected_dim != 0 && dim != expected_dim) {
    throw FormatError("acoustic model: dimension " + std::to_string(dim) + " but front end produces " +
                      std::to_string(expected_dim));
  }
  if (dim == 0 || count != inv.size()) throw FormatError("acoustic model: bad dimension or count");
  AcousticModel m;
  m.dim_ = dim;
  m.min_duration_ = min_duration;
  m.self_loop_logprob_ = r.f64();
  m.exit_logprob_ = r.f64();
  if (!std::isfinite(m.exit_logprob_) ||
      std::abs(std::exp(m.self_loop_logprob_) + std::exp(m.exit_logprob_) - 1.0) > 1e-9) {
    throw FormatError("acoustic model: inconsistent transition probabilities");
  }
  m.phonemes_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = r.u8();
    const auto sym = r.str(len);
    if (sym != inv.symbol(PhonemeId{static_cast<std::uint16_t>(i)})) {
      throw FormatError("acoustic model: record " + std::to_string(i) + " is '" + sym +
                        "', inventory expects '" + inv.symbol(PhonemeId{static_cast<std::uint16_t>(i)}) + "'");
    }
    auto& g = m.phonemes_[i];
    g.mean.resize(dim);
    g.variance.resize(dim);
    for (auto& v : g.mean) v = r.f64();
    for (auto& v : g.variance) {
      v = r.f64();
      if (!(v >= kVarianceFloor)) throw FormatError("acoustic model: variance below floor");
    }
  }
  if (!r.done()) throw FormatError("acoustic model: trailing bytes");
  AcousticModel rebuilt(dim, std::move(m.phonemes_), min_duration, std::exp(m.exit_logprob_));
  // Keep the stored log-probabilities bit-exact.
  rebuilt.self_loop_logprob_ = m.self_loop_logprob_;
  rebuilt.exit_logprob_ = m.exit_logprob_;
  return rebuilt;
}

AcousticModel train_acoustic_model(const PhonemeInventory& inv,
                                   std::span<const LabeledFrame> frames,
                                   const AcousticTrainOptions& opts) {
  if (frames.empty()) throw CoverageError("no labelled frames");
  const std::size_t dim = frames.front().second.size();
  if (dim == 0) throw DomainError("labelled frames have zero dimension");
  std::vector<std::vector<const std::vector<double>*>> by_phone(inv.size());
  for (const auto& [p, f] : frames) {
    if (p.value >= inv.size()) throw DomainError("labelled frame phoneme not in inventory");
    if (f.size() != dim) throw DomainError("labelled frames have mixed dimensions");
    by_phone[p.value].push_back(&f);
  }
  std::vector<PhonemeGaussian> gaussians(inv.size());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    auto& rows = by_phone[i];
    if (rows.size() < 2 * dim) {
      throw CoverageError("phoneme " + inv.symbol(PhonemeId{static_cast<std::uint16_t>(i)}) +
                          " has " + std::to_string(rows.size()) + " frames, needs " +
                          std::to_string(2 * dim));
    }
    // Canonical order makes the sums independent of input order.
    std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return *a < *b; });
    auto& g = gaussians[i];
    g.mean.assign(dim, 0.0);
    g.variance.assign(dim, 0.0);
    const double n = static_cast<double>(rows.size());
    for (const auto* f : rows) {
      for (std::size_t k = 0; k < dim; ++k) g.mean[k] += (*f)[k];
    }
    for (auto& m : g.mean) m /= n;
    for (const auto* f : rows) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = (*f)[k] - g.mean[k];
        g.variance[k] += d * d;
      }
    }
    for (auto& v : g.variance) v = std::max(v / n, kVarianceFloor);
  }
  const double extra = std::max(1.0, opts.mean_segment_frames - double(opts.min_duration) + 1.0);
  return AcousticModel(dim, std::move(gaussians), opts.min_duration, 1.0 / extra);
}

}  // namespace capt
