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

#include "capt/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <memory>
#include <unordered_map>

#include "capt/error.hpp"

namespace capt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Frame log-likelihoods for every phoneme the grammar uses.
class ScoreTable {
 public:
  ScoreTable(const FeatureFrames& frames, const CompiledGrammar& cg, const AcousticModel& m)
      : num_frames_(frames.size()), column_(m.num_phonemes(), kNone) {
    if (frames.dim() != m.dim()) {
      throw DomainError("frame dimension " + std::to_string(frames.dim()) +
                        " does not match acoustic model dimension " + std::to_string(m.dim()));
    }
    for (const auto& a : cg.arcs) {
      if (a.phoneme.value >= m.num_phonemes()) throw DomainError("grammar phoneme outside model");
      if (column_[a.phoneme.value] == kNone) {
        column_[a.phoneme.value] = phones_.size();
        phones_.push_back(a.phoneme);
      }
    }
    table_.resize(num_frames_ * phones_.size());
    for (std::size_t t = 0; t < num_frames_; ++t) {
      auto f = frames.frame(t);
      for (std::size_t c = 0; c < phones_.size(); ++c) table_[t * phones_.size() + c] = m.frame_logp(phones_[c], f);
    }
  }

  double operator()(std::size_t t, PhonemeId p) const { return table_[t * phones_.size() + column_[p.value]]; }

 private:
  std::size_t num_frames_;
  std::vector<std::size_t> column_;
  std::vector<PhonemeId> phones_;
  std::vector<double> table_;
};

std::size_t effective_min_duration(std::size_t frames, const CompiledGrammar& cg,
                                   const DecoderConfig& cfg, bool& relaxed) {
  if (frames == 0) throw NoPathError("no frames to decode");
  if (cg.arcs.empty()) throw NoPathError("grammar '" + cg.name + "' has no arcs");
  if (cfg.kbest == 0) throw DomainError("kbest must be >= 1");
  if (!(cfg.beam > 0.0)) throw DomainError("beam must be > 0");
  std::size_t m = std::max<std::size_t>(1, cfg.min_duration);
  relaxed = false;
  if (cg.min_length * m > frames) {
    m = std::max<std::size_t>(1, frames / std::max<std::size_t>(1, cg.min_length));
    relaxed = true;
  }
  if (cg.min_length > frames) {
    throw NoPathError("grammar '" + cg.name + "' needs at least " + std::to_string(cg.min_length) +
                      " frames, got " + std::to_string(frames));
  }
  return m;
}

// need[a * md + d]: frames still required after the current one before the
// path through arc a position d can finish in an accepting state.
std::vector<std::size_t> frames_needed(const CompiledGrammar& cg, std::size_t md) {
  std::vector<std::size_t> to_accept(cg.num_states, kNone);
  std::deque<std::size_t> queue;
  for (std::size_t q = 0; q < cg.num_states; ++q) {
    if (cg.accepting[q]) {
      to_accept[q] = 0;
      queue.push_back(q);
    }
  }
  while (!queue.empty()) {
    const auto q = queue.front();
    queue.pop_front();
    for (auto ai : cg.arcs_into[q]) {
      const auto from = cg.arcs[ai].from;
      if (to_accept[from] == kNone) {
        to_accept[from] = to_accept[q] + 1;
        queue.push_back(from);
      }
    }
  }
  std::vector<std::size_t> need(cg.arcs.size() * md, kNone);
  for (std::size_t ai = 0; ai < cg.arcs.size(); ++ai) {
    const auto rest = to_accept[cg.arcs[ai].to];
    if (rest == kNone) continue;
    for (std::size_t d = 0; d < md; ++d) need[ai * md + d] = (md - 1 - d) + md * rest;
  }
  return need;
}

bool feasible(const std::vector<std::size_t>& need, std::size_t i, std::size_t t, std::size_t T) {
  return need[i] != kNone && t + 1 + need[i] <= T;
}

class Tracer {
 public:
  explicit Tracer(const std::string& path) {
    if (!path.empty()) out_ = std::make_unique<std::ofstream>(path, std::ios::app);
  }
  bool on() const { return out_ != nullptr; }
  std::ostream& os() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> out_;
};

}  // namespace

double duration_logprob(const AcousticModel& m, std::size_t length, std::size_t min_duration) {
  if (length < min_duration) return kNegInf;
  const auto loops = static_cast<double>(length - min_duration);
  return (loops > 0 ? loops * m.self_loop_logprob() : 0.0) + m.exit_logprob();
}

// ---------------------------------------------------------------------------
// 1-best

Alignment align(const FeatureFrames& frames, const CompiledGrammar& cg, const AcousticModel& m,
                const DecoderConfig& cfg) {
  bool relaxed = false;
  const std::size_t T = frames.size();
  const std::size_t md = effective_min_duration(T, cg, cfg, relaxed);
  const ScoreTable lp(frames, cg, m);
  const std::size_t A = cg.arcs.size();
  const double log_loop = m.self_loop_logprob();
  const double log_exit = m.exit_logprob();
  Tracer trace(cfg.trace_path);
  const auto need = frames_needed(cg, md);

  // score[a * md + d]: best path ending at frame t inside arc a having spent
  // min(d + 1, md) frames there.
  std::vector<double> cur(A * md, kNegInf), nxt(A * md, kNegInf);
  std::vector<std::size_t> cur_start(A, 0), nxt_start(A, 0);
  // Segment start of the looping state per (t, arc); boundary arc per (t, state).
  std::vector<std::size_t> loop_start(T * A, kNone);
  std::vector<std::size_t> boundary_arc((T + 1) * cg.num_states, kNone);
  std::vector<double> boundary(cg.num_states, kNegInf);

  for (std::size_t t = 0; t < T; ++t) {
    // Boundary scores at the start of frame t.
    std::fill(boundary.begin(), boundary.end(), kNegInf);
    if (t == 0) {
      boundary[cg.start] = 0.0;
    } else {
      for (std::size_t q = 0; q < cg.num_states; ++q) {
        for (auto ai : cg.arcs_into[q]) {
          const double s = cur[ai * md + md - 1] + log_exit;
          if (s > boundary[q]) {
            boundary[q] = s;
            boundary_arc[t * cg.num_states + q] = ai;
          }
        }
      }
    }
    double best = kNegInf;
    for (std::size_t ai = 0; ai < A; ++ai) {
      const auto& arc = cg.arcs[ai];
      const double obs = lp(t, arc.phoneme);
      const double enter = boundary[arc.from];
      double* out = &nxt[ai * md];
      const double* in = &cur[ai * md];
      if (md == 1) {
        const double loop = t > 0 ? in[0] + log_loop : kNegInf;
        if (loop >= enter && loop > kNegInf) {
          out[0] = loop + obs;
          nxt_start[ai] = cur_start[ai];
        } else {
          out[0] = enter + obs;
          nxt_start[ai] = t;
        }
      } else {
        out[0] = enter + obs;
        for (std::size_t d = 1; d + 1 < md; ++d) out[d] = (t > 0 ? in[d - 1] : kNegInf) + obs;
        const double advance = t > 0 ? in[md - 2] : kNegInf;
        const double loop = t > 0 ? in[md - 1] + log_loop : kNegInf;
        if (loop >= advance && loop > kNegInf) {
          out[md - 1] = loop + obs;
          nxt_start[ai] = cur_start[ai];
        } else {
          out[md - 1] = advance + obs;
          nxt_start[ai] = t + 1 - md;
        }
      }
      for (std::size_t d = 0; d < md; ++d) {
        if (!feasible(need, ai * md + d, t, T)) out[d] = kNegInf;
        best = std::max(best, out[d]);
      }
    }
    if (best == kNegInf) {
      throw NoPathError("alignment: no surviving path at frame " + std::to_string(t) +
                        " (grammar '" + cg.name + "'); try a larger beam");
    }
    const double floor = best - cfg.beam;
    std::size_t survivors = 0;
    for (std::size_t i = 0; i < A * md; ++i) {
      if (nxt[i] < floor) nxt[i] = kNegInf;
      survivors += nxt[i] > kNegInf;
    }
    if (trace.on()) {
      trace.os() << "align t=" << t << " best=" << best << " survivors=" << survivors << '\n';
      for (std::size_t i = 0; i < A * md; ++i) {
        if (nxt[i] > kNegInf) trace.os() << "  arc=" << i / md << " d=" << i % md << " score=" << nxt[i] << '\n';
      }
    }
    for (std::size_t ai = 0; ai < A; ++ai) loop_start[t * A + ai] = nxt_start[ai];
    std::swap(cur, nxt);
    std::swap(cur_start, nxt_start);
  }

  // Final exit into an accepting state.
  double best_final = kNegInf;
  std::size_t best_arc = kNone;
  for (std::size_t ai = 0; ai < A; ++ai) {
    if (!cg.accepting[cg.arcs[ai].to]) continue;
    const double s = cur[ai * md + md - 1] + log_exit;
    if (s > best_final) {
      best_final = s;
      best_arc = ai;
    }
  }
  if (best_arc == kNone) {
    throw NoPathError("alignment: no complete path through grammar '" + cg.name +
                      "'; try a larger beam");
  }

  Alignment result;
  result.relaxed_min_duration = relaxed;
  result.path_logscore = best_final;
  std::size_t end = T;
  std::size_t ai = best_arc;
  while (true) {
    const std::size_t start = loop_start[(end - 1) * A + ai];
    const auto& arc = cg.arcs[ai];
    AlignedSegment seg{arc.phoneme, start, end, 0.0};
    for (std::size_t t = start; t < end; ++t) seg.acoustic_logscore += lp(t, arc.phoneme);
    result.segments.push_back(seg);
    if (start == 0) break;
    ai = boundary_arc[start * cg.num_states + arc.from];
    end = start;
    if (ai == kNone) throw NoPathError("alignment: broken backtrace");
  }
  std::reverse(result.segments.begin(), result.segments.end());
  for (const auto& s : result.segments) result.total_logscore += s.acoustic_logscore;
  return result;
}

// ---------------------------------------------------------------------------
// k-best

namespace {

// Interned symbol histories: equal sequences share a node id.
class HistoryTrie {
 public:
  HistoryTrie() { nodes_.push_back({kNone, PhonemeId{}}); }

  std::size_t extend(std::size_t parent, PhonemeId p) {
    const std::uint64_t key = (static_cast<std::uint64_t>(parent) << 16) | p.value;
    auto [it, inserted] = index_.try_emplace(key, nodes_.size());
    if (inserted) nodes_.push_back({parent, p});
    return it->second;
  }

  PhonemeSeq sequence(std::size_t node) const {
    PhonemeSeq out;
    while (node != 0) {
      out.push_back(nodes_[node].symbol);
      node = nodes_[node].parent;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t parent;
    PhonemeId symbol;
  };
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

struct Partial {
  double score;
  std::size_t node;
};

using PartialList = std::vector<Partial>;

// Keeps the best score per history, then the top k histories.
void normalize(PartialList& list, std::size_t k) {
  if (list.size() > 1) {
    std::sort(list.begin(), list.end(), [](const Partial& a, const Partial& b) {
      return a.node != b.node ? a.node < b.node : a.score > b.score;
    });
    list.erase(std::unique(list.begin(), list.end(),
                           [](const Partial& a, const Partial& b) { return a.node == b.node; }),
               list.end());
    std::sort(list.begin(), list.end(), [](const Partial& a, const Partial& b) {
      return a.score != b.score ? a.score > b.score : a.node < b.node;
    });
  }
  if (list.size() > k) list.resize(k);
}

}  // namespace

NBestList nbest(const FeatureFrames& frames, const CompiledGrammar& cg, const AcousticModel& m,
                const DecoderConfig& cfg) {
  bool relaxed = false;
  const std::size_t T = frames.size();
  const std::size_t md = effective_min_duration(T, cg, cfg, relaxed);
  const std::size_t k = cfg.kbest;
  const ScoreTable lp(frames, cg, m);
  const std::size_t A = cg.arcs.size();
  const double log_loop = m.self_loop_logprob();
  const double log_exit = m.exit_logprob();
  Tracer trace(cfg.trace_path);
  const auto need = frames_needed(cg, md);

  HistoryTrie trie;
  std::vector<PartialList> cur(A * md), nxt(A * md);
  std::vector<PartialList> boundary(cg.num_states);

  for (std::size_t t = 0; t < T; ++t) {
    for (auto& b : boundary) b.clear();
    if (t == 0) {
      boundary[cg.start].push_back({0.0, 0});
    } else {
      for (std::size_t q = 0; q < cg.num_states; ++q) {
        for (auto ai : cg.arcs_into[q]) {
          for (const auto& h : cur[ai * md + md - 1]) boundary[q].push_back({h.score + log_exit, h.node});
        }
        normalize(boundary[q], k);
      }
    }
    double best = kNegInf;
    for (std::size_t ai = 0; ai < A; ++ai) {
      const auto& arc = cg.arcs[ai];
      const double obs = lp(t, arc.phoneme);
      for (std::size_t d = 0; d < md; ++d) nxt[ai * md + d].clear();
      // Entry.
      auto& entry = nxt[ai * md];
      for (const auto& h : boundary[arc.from]) entry.push_back({h.score + obs, trie.extend(h.node, arc.phoneme)});
      if (t > 0) {
        for (std::size_t d = 1; d < md; ++d) {
          for (const auto& h : cur[ai * md + d - 1]) nxt[ai * md + d].push_back({h.score + obs, h.node});
        }
        for (const auto& h : cur[ai * md + md - 1]) {
          nxt[ai * md + md - 1].push_back({h.score + log_loop + obs, h.node});
        }
      }
      for (std::size_t d = 0; d < md; ++d) {
        auto& l = nxt[ai * md + d];
        if (!feasible(need, ai * md + d, t, T)) l.clear();
        normalize(l, k);
        if (!l.empty()) best = std::max(best, l.front().score);
      }
    }
    if (best == kNegInf) {
      throw NoPathError("n-best: no surviving path at frame " + std::to_string(t) + " (grammar '" +
                        cg.name + "'); try a larger beam");
    }
    const double floor = best - cfg.beam;
    std::size_t survivors = 0;
    for (auto& l : nxt) {
      std::erase_if(l, [&](const Partial& h) { return h.score < floor || h.score == kNegInf; });
      survivors += l.size();
    }
    if (trace.on()) {
      trace.os() << "nbest t=" << t << " best=" << best << " survivors=" << survivors << '\n';
    }
    std::swap(cur, nxt);
  }

  PartialList finals;
  for (std::size_t ai = 0; ai < A; ++ai) {
    if (!cg.accepting[cg.arcs[ai].to]) continue;
    for (const auto& h : cur[ai * md + md - 1]) finals.push_back({h.score + log_exit, h.node});
  }
  normalize(finals, k);
  if (finals.empty()) {
    throw NoPathError("n-best: no complete path through grammar '" + cg.name + "'; try a larger beam");
  }
  NBestList out;
  out.relaxed_min_duration = relaxed;
  for (const auto& h : finals) out.hypotheses.push_back({trie.sequence(h.node), h.score});
  std::stable_sort(out.hypotheses.begin(), out.hypotheses.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.logscore != b.logscore ? a.logscore > b.logscore : a.symbols < b.symbols;
  });
  return out;
}

}  // namespace capt
