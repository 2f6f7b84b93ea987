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

#include "capt/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include "capt/error.hpp"

namespace capt {

std::size_t Grammar::add_state() {
  accepting_.push_back(false);
  return accepting_.size() - 1;
}

void Grammar::add_edge(std::size_t from, std::size_t to, std::optional<PhonemeId> label) {
  if (from >= num_states() || to >= num_states()) throw DomainError("grammar edge references unknown state");
  edges_.push_back({from, to, label});
}

void Grammar::set_start(std::size_t s) {
  if (s >= num_states()) throw DomainError("grammar start state out of range");
  start_ = s;
}

void Grammar::set_accepting(std::size_t s, bool accepting) { accepting_.at(s) = accepting; }

void Grammar::validate(const PhonemeInventory& inv) const {
  if (num_states() == 0 || start_ >= num_states()) throw ValidationError("grammar has no start state");
  if (std::none_of(accepting_.begin(), accepting_.end(), [](bool b) { return b; })) {
    throw ValidationError("grammar has no accepting state");
  }
  std::vector<std::vector<std::size_t>> out(num_states()), eps(num_states());
  for (const auto& e : edges_) {
    if (e.label && e.label->value >= inv.size()) throw ValidationError("grammar label outside inventory");
    out[e.from].push_back(e.to);
    if (!e.label) eps[e.from].push_back(e.to);
  }
  // Epsilon cycles: iterative three-colour DFS over epsilon edges.
  std::vector<int> colour(num_states(), 0);
  for (std::size_t root = 0; root < num_states(); ++root) {
    if (colour[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = 1;
    while (!stack.empty()) {
      auto& [s, i] = stack.back();
      if (i < eps[s].size()) {
        const auto t = eps[s][i++];
        if (colour[t] == 1) throw ValidationError("grammar '" + name_ + "' has an epsilon cycle");
        if (colour[t] == 0) {
          colour[t] = 1;
          stack.push_back({t, 0});
        }
      } else {
        colour[s] = 2;
        stack.pop_back();
      }
    }
  }
  std::vector<bool> reach(num_states(), false);
  std::vector<std::size_t> todo{start_};
  reach[start_] = true;
  while (!todo.empty()) {
    auto s = todo.back();
    todo.pop_back();
    for (auto t : out[s]) {
      if (!reach[t]) {
        reach[t] = true;
        todo.push_back(t);
      }
    }
  }
  for (std::size_t s = 0; s < num_states(); ++s) {
    if (accepting_[s] && !reach[s]) {
      throw ValidationError("accepting state " + std::to_string(s) + " unreachable from start");
    }
  }
}

// ---------------------------------------------------------------------------
// Builders

Grammar build_alignment_grammar(const PhonemeInventory& inv, const std::vector<PhonemeSeq>& words,
                                SilencePolicy policy) {
  if (words.empty()) throw DomainError("alignment grammar needs at least one word");
  const auto sil = inv.silence();
  Grammar g("align");
  std::vector<std::size_t> frontier{g.add_state()};
  g.set_start(frontier.front());
  auto optional_silence = [&] {
    const auto from = frontier.front();
    const auto s = g.add_state();
    g.add_edge(from, s, sil);
    frontier.push_back(s);
  };
  if (policy == SilencePolicy::edges_only) optional_silence();
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].empty()) throw DomainError("alignment grammar: empty word");
    if (w > 0 && policy == SilencePolicy::between_words) optional_silence();
    for (auto p : words[w]) {
      if (p.value >= inv.size()) throw DomainError("alignment grammar: phoneme outside inventory");
      const auto n = g.add_state();
      for (auto f : frontier) g.add_edge(f, n, p);
      frontier = {n};
    }
  }
  const auto last = frontier.front();
  g.set_accepting(last);
  if (policy == SilencePolicy::edges_only) {
    const auto f = g.add_state();
    g.add_edge(last, f, sil);
    g.set_accepting(f);
  }
  return g;
}

Grammar build_alignment_grammar(const PhonemeInventory& inv, const PhonemeSeq& phonemes,
                                SilencePolicy policy) {
  if (phonemes.empty()) throw DomainError("alignment grammar needs a non-empty sequence");
  return build_alignment_grammar(inv, std::vector<PhonemeSeq>{phonemes}, policy);
}

namespace {
void check_member(const PhonemeInventory& inv, PhonemeId p) {
  if (p.value >= inv.size()) throw DomainError("phoneme outside inventory");
}
PhonemeId nth(std::size_t i) { return PhonemeId{static_cast<std::uint16_t>(i)}; }
}  // namespace

Grammar build_substitution_grammar(const PhonemeInventory& inv, PhonemeId prev, PhonemeId next) {
  check_member(inv, prev);
  check_member(inv, next);
  Grammar g("subst");
  const auto s0 = g.add_state(), s1 = g.add_state(), s2 = g.add_state(), s3 = g.add_state();
  g.set_start(s0);
  g.add_edge(s0, s1, prev);
  for (std::size_t x = 0; x < inv.size(); ++x) g.add_edge(s1, s2, nth(x));
  g.add_edge(s2, s3, next);
  g.set_accepting(s3);
  return g;
}

Grammar build_insdel_grammar(const PhonemeInventory& inv, PhonemeId first, PhonemeId second) {
  check_member(inv, first);
  check_member(inv, second);
  Grammar g("insdel");
  const auto s0 = g.add_state(), s1 = g.add_state(), s2 = g.add_state(), s3 = g.add_state();
  g.set_start(s0);
  g.add_edge(s0, s1, first);
  for (std::size_t x = 0; x < inv.size(); ++x) {
    if (nth(x) != second) g.add_edge(s1, s2, nth(x));
  }
  g.add_edge(s1, s3, second);
  g.add_edge(s2, s3, second);
  g.set_accepting(s1);
  g.set_accepting(s2);
  g.set_accepting(s3);
  return g;
}

// ---------------------------------------------------------------------------
// JSGF subset

namespace {

struct Expr {
  enum class Kind { token, sequence, alternatives, optional } kind;
  PhonemeId token{};
  std::vector<std::unique_ptr<Expr>> children;
};

class JsgfParser {
 public:
  JsgfParser(std::string_view text, const PhonemeInventory& inv) : text_(text), inv_(inv) {}

  Grammar parse() {
    skip_space();
    if (peek_is("#JSGF")) {
      while (pos_ < text_.size() && text_[pos_] != ';') advance();
      expect(';');
    }
    skip_space();
    const auto kw = identifier();
    if (kw == "import") unsupported("import statements");
    if (kw != "grammar") error("expected 'grammar' header");
    Grammar g(identifier());
    expect(';');
    skip_space();
    auto save_line = line_, save_col = col_;
    auto kw2 = peek_char() == '<' ? std::string() : identifier();
    if (kw2 == "import") unsupported("import statements");
    if (kw2 != "public") {
      line_ = save_line;
      col_ = save_col;
      unsupported("non-public rules");
    }
    expect('<');
    rule_name_ = identifier();
    expect('>');
    expect('=');
    auto expr = alternatives();
    expect(';');
    skip_space();
    if (pos_ < text_.size()) unsupported("more than one rule");

    const auto start = g.add_state();
    g.set_start(start);
    const auto end = build(g, *expr, start);
    g.set_accepting(end);
    return g;
  }

 private:
  [[noreturn]] void error(const std::string& what) const { throw ParseError(what, line_, col_); }
  [[noreturn]] void unsupported(const std::string& what) const {
    throw UnsupportedConstructError("line " + std::to_string(line_) + ", column " +
                                    std::to_string(col_) + ": unsupported JSGF construct: " + what);
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (peek_is("//")) {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (peek_is("/*")) {
        advance();
        advance();
        while (pos_ < text_.size() && !peek_is("*/")) advance();
        if (pos_ >= text_.size()) error("unterminated comment");
        advance();
        advance();
      } else {
        break;
      }
    }
  }

  bool peek_is(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }
  char peek_char() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void expect(char c) {
    if (peek_char() != c) {
      error(std::string("expected '") + c + "'" +
            (pos_ < text_.size() ? std::string(", found '") + text_[pos_] + "'" : ", found end of input"));
    }
    advance();
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' || c == '$';
  }

  std::string identifier() {
    skip_space();
    std::string out;
    while (pos_ < text_.size() && ident_char(text_[pos_])) {
      out += text_[pos_];
      advance();
    }
    if (out.empty()) error("expected identifier");
    return out;
  }

  std::unique_ptr<Expr> alternatives() {
    auto first = sequence();
    if (peek_char() != '|') return first;
    auto alt = std::make_unique<Expr>(Expr{Expr::Kind::alternatives, {}, {}});
    alt->children.push_back(std::move(first));
    while (peek_char() == '|') {
      advance();
      alt->children.push_back(sequence());
    }
    return alt;
  }

  std::unique_ptr<Expr> sequence() {
    auto seq = std::make_unique<Expr>(Expr{Expr::Kind::sequence, {}, {}});
    while (true) {
      const char c = peek_char();
      if (c == '\0' || c == ';' || c == '|' || c == ']' || c == ')') break;
      seq->children.push_back(item());
    }
    if (seq->children.empty()) error("empty expansion");
    if (seq->children.size() == 1) return std::move(seq->children.front());
    return seq;
  }

  std::unique_ptr<Expr> item() {
    const char c = peek_char();
    std::unique_ptr<Expr> e;
    if (c == '[') {
      advance();
      e = std::make_unique<Expr>(Expr{Expr::Kind::optional, {}, {}});
      e->children.push_back(alternatives());
      expect(']');
    } else if (c == '(') {
      advance();
      e = alternatives();
      expect(')');
    } else if (c == '<') {
      unsupported("rule references");
    } else if (c == '{') {
      unsupported("tags");
    } else if (c == '/') {
      unsupported("weights");
    } else if (c == '"') {
      unsupported("quoted tokens");
    } else if (ident_char(c)) {
      const auto l = line_, col = col_;
      std::string tok = identifier();
      for (auto& ch : tok) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      if (!inv_.contains(tok)) throw ParseError("unknown phoneme '" + tok + "'", l, col);
      e = std::make_unique<Expr>(Expr{Expr::Kind::token, inv_.id(tok), {}});
    } else {
      error(std::string("unexpected character '") + c + "'");
    }
    const char post = peek_char();
    if (post == '*') unsupported("Kleene star");
    if (post == '+') unsupported("Kleene plus");
    if (post == '{') unsupported("tags");
    return e;
  }

  // Adds the fragment for e starting at from; returns its end state.
  std::size_t build(Grammar& g, const Expr& e, std::size_t from) {
    switch (e.kind) {
      case Expr::Kind::token: {
        const auto to = g.add_state();
        g.add_edge(from, to, e.token);
        return to;
      }
      case Expr::Kind::sequence: {
        auto cur = from;
        for (const auto& c : e.children) cur = build(g, *c, cur);
        return cur;
      }
      case Expr::Kind::alternatives: {
        std::vector<std::size_t> ends;
        for (const auto& c : e.children) ends.push_back(build(g, *c, from));
        const auto join = g.add_state();
        for (auto end : ends) g.add_edge(end, join, std::nullopt);
        return join;
      }
      case Expr::Kind::optional: {
        const auto end = build(g, *e.children.front(), from);
        if (end != from) g.add_edge(from, end, std::nullopt);
        return end;
      }
    }
    return from;
  }

  std::string_view text_;
  const PhonemeInventory& inv_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  std::string rule_name_;
};

}  // namespace

Grammar parse_jsgf(std::string_view text, const PhonemeInventory& inv) {
  return JsgfParser(text, inv).parse();
}

namespace {

// Forward/backward reachability used for trimming.
std::vector<bool> coaccessible(const Grammar& g) {
  std::vector<bool> co(g.num_states(), false);
  std::vector<std::vector<std::size_t>> in(g.num_states());
  for (const auto& e : g.edges()) in[e.to].push_back(e.from);
  std::vector<std::size_t> todo;
  for (std::size_t s = 0; s < g.num_states(); ++s) {
    if (g.accepting(s)) {
      co[s] = true;
      todo.push_back(s);
    }
  }
  while (!todo.empty()) {
    auto s = todo.back();
    todo.pop_back();
    for (auto f : in[s]) {
      if (!co[f]) {
        co[f] = true;
        todo.push_back(f);
      }
    }
  }
  return co;
}

}  // namespace

std::string serialize_jsgf(const Grammar& g, const PhonemeInventory& inv) {
  g.validate(inv);
  const auto co = coaccessible(g);
  std::vector<std::vector<const GrammarEdge*>> out(g.num_states());
  for (const auto& e : g.edges()) {
    if (co[e.to]) out[e.from].push_back(&e);
  }
  // Memoised expression per state; state 2 in 'visiting' marks a cycle.
  std::vector<int> visiting(g.num_states(), 0);
  std::vector<std::optional<std::string>> memo(g.num_states());
  std::function<std::string(std::size_t)> expr = [&](std::size_t s) -> std::string {
    if (memo[s]) return *memo[s];
    if (visiting[s]) throw UnsupportedConstructError("cannot serialise a cyclic grammar to JSGF");
    visiting[s] = 1;
    // Group labelled edges by target so shared suffixes are emitted once.
    std::map<std::size_t, std::vector<PhonemeId>> by_target;
    std::vector<std::string> alts;
    bool has_empty = g.accepting(s);
    for (const auto* e : out[s]) {
      if (e->label) {
        by_target[e->to].push_back(*e->label);
      } else {
        auto sub = expr(e->to);
        if (sub.empty()) {
          has_empty = true;
        } else {
          alts.push_back(sub);
        }
      }
    }
    for (auto& [to, labels] : by_target) {
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
      std::string head;
      if (labels.size() == 1) {
        head = inv.symbol(labels.front());
      } else {
        head = "(";
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (i) head += " | ";
          head += inv.symbol(labels[i]);
        }
        head += ")";
      }
      auto tail = expr(to);
      alts.push_back(tail.empty() ? head : head + " " + tail);
    }
    std::string result;
    if (alts.size() == 1) {
      result = alts.front();
    } else if (!alts.empty()) {
      result = "(";
      for (std::size_t i = 0; i < alts.size(); ++i) {
        if (i) result += " | ";
        result += alts[i];
      }
      result += ")";
    }
    if (has_empty && !result.empty()) {
      if (result.front() == '(' && alts.size() > 1) {
        result = "[" + result.substr(1, result.size() - 2) + "]";
      } else {
        result = "[" + result + "]";
      }
    }
    visiting[s] = 0;
    memo[s] = result;
    return result;
  };
  const auto body = expr(g.start());
  if (body.empty()) throw UnsupportedConstructError("grammar accepts only the empty string");
  std::string name = g.name().empty() ? "g" : g.name();
  return "#JSGF V1.0;\ngrammar " + name + ";\npublic <" + name + "> = " + body + ";\n";
}

std::string dump_grammar(const Grammar& g, const PhonemeInventory& inv) {
  std::ostringstream os;
  os << "grammar " << g.name() << "\nstates " << g.num_states() << "\nstart " << g.start()
     << "\naccepting";
  for (std::size_t s = 0; s < g.num_states(); ++s) {
    if (g.accepting(s)) os << ' ' << s;
  }
  os << '\n';
  for (const auto& e : g.edges()) {
    os << "edge " << e.from << ' ' << e.to << ' ' << (e.label ? inv.symbol(*e.label) : "<eps>") << '\n';
  }
  return os.str();
}

namespace {

template <typename Out>
void enumerate_from(std::size_t s, PhonemeSeq& prefix, std::size_t max_length,
                    const std::vector<bool>& accepting, const Out& out_edges,
                    std::set<PhonemeSeq>& result, std::size_t depth) {
  if (depth > 10000) throw ValidationError("grammar enumeration did not terminate");
  if (accepting[s]) result.insert(prefix);
  for (const auto& [to, label] : out_edges[s]) {
    if (label) {
      if (prefix.size() == max_length) continue;
      prefix.push_back(*label);
      enumerate_from(to, prefix, max_length, accepting, out_edges, result, depth + 1);
      prefix.pop_back();
    } else {
      enumerate_from(to, prefix, max_length, accepting, out_edges, result, depth + 1);
    }
  }
}

}  // namespace

std::set<PhonemeSeq> enumerate_language(const Grammar& g, std::size_t max_length) {
  std::vector<std::vector<std::pair<std::size_t, std::optional<PhonemeId>>>> out(g.num_states());
  for (const auto& e : g.edges()) out[e.from].push_back({e.to, e.label});
  std::vector<bool> acc(g.num_states());
  for (std::size_t s = 0; s < g.num_states(); ++s) acc[s] = g.accepting(s);
  std::set<PhonemeSeq> result;
  PhonemeSeq prefix;
  if (g.num_states() > 0) enumerate_from(g.start(), prefix, max_length, acc, out, result, 0);
  return result;
}

std::set<PhonemeSeq> enumerate_language(const CompiledGrammar& g, std::size_t max_length) {
  std::vector<std::vector<std::pair<std::size_t, std::optional<PhonemeId>>>> out(g.num_states);
  for (const auto& a : g.arcs) out[a.from].push_back({a.to, a.phoneme});
  std::set<PhonemeSeq> result;
  PhonemeSeq prefix;
  if (g.num_states > 0) enumerate_from(g.start, prefix, max_length, g.accepting, out, result, 0);
  return result;
}

CompiledGrammar compile(const Grammar& g, const PhonemeInventory& inv) {
  g.validate(inv);
  const std::size_t n = g.num_states();
  std::vector<std::vector<std::size_t>> eps(n);
  std::vector<std::vector<const GrammarEdge*>> labelled(n);
  for (const auto& e : g.edges()) {
    if (e.label) {
      labelled[e.from].push_back(&e);
    } else {
      eps[e.from].push_back(e.to);
    }
  }
  // Epsilon closures (acyclic over epsilon edges, guaranteed by validate).
  std::vector<std::vector<std::size_t>> closure(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> todo{s};
    seen[s] = true;
    while (!todo.empty()) {
      auto q = todo.back();
      todo.pop_back();
      closure[s].push_back(q);
      for (auto t : eps[q]) {
        if (!seen[t]) {
          seen[t] = true;
          todo.push_back(t);
        }
      }
    }
    std::sort(closure[s].begin(), closure[s].end());
  }

  // Epsilon-free arcs from every state that is the start or the target of a
  // labelled edge; other states are only reached through epsilon edges.
  std::vector<bool> keep(n, false);
  keep[g.start()] = true;
  for (const auto& e : g.edges()) {
    if (e.label) keep[e.to] = true;
  }
  struct RawArc {
    std::size_t from, to;
    PhonemeId p;
    auto operator<=>(const RawArc&) const = default;
  };
  std::set<RawArc> raw;
  std::vector<bool> final_state(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    if (!keep[s]) continue;
    for (auto q : closure[s]) {
      if (g.accepting(q)) final_state[s] = true;
      for (const auto* e : labelled[q]) raw.insert({s, e->to, *e->label});
    }
  }

  // Trim: forward from start, backward from accepting.
  std::vector<bool> fwd(n, false), bwd(n, false);
  std::vector<std::vector<std::size_t>> fo(n), bi(n);
  for (const auto& a : raw) {
    fo[a.from].push_back(a.to);
    bi[a.to].push_back(a.from);
  }
  std::vector<std::size_t> todo{g.start()};
  fwd[g.start()] = true;
  while (!todo.empty()) {
    auto s = todo.back();
    todo.pop_back();
    for (auto t : fo[s]) {
      if (!fwd[t]) {
        fwd[t] = true;
        todo.push_back(t);
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (keep[s] && final_state[s]) {
      bwd[s] = true;
      todo.push_back(s);
    }
  }
  while (!todo.empty()) {
    auto s = todo.back();
    todo.pop_back();
    for (auto f : bi[s]) {
      if (!bwd[f]) {
        bwd[f] = true;
        todo.push_back(f);
      }
    }
  }
  if (!bwd[g.start()]) throw ValidationError("grammar '" + g.name() + "' accepts no string");

  std::vector<std::size_t> remap(n, SIZE_MAX);
  CompiledGrammar cg;
  cg.name = g.name();
  for (std::size_t s = 0; s < n; ++s) {
    if (keep[s] && fwd[s] && bwd[s]) {
      remap[s] = cg.num_states++;
      cg.accepting.push_back(final_state[s]);
    }
  }
  cg.start = remap[g.start()];
  cg.accepts_empty = final_state[g.start()];
  cg.arcs_from.resize(cg.num_states);
  cg.arcs_into.resize(cg.num_states);
  for (const auto& a : raw) {
    if (remap[a.from] == SIZE_MAX || remap[a.to] == SIZE_MAX) continue;
    const auto idx = cg.arcs.size();
    cg.arcs.push_back({remap[a.from], remap[a.to], a.p});
    cg.arcs_from[remap[a.from]].push_back(idx);
    cg.arcs_into[remap[a.to]].push_back(idx);
  }

  // Kahn topological sort; shortest non-empty accepted length via BFS layers.
  std::vector<std::size_t> indeg(cg.num_states, 0);
  for (const auto& a : cg.arcs) ++indeg[a.to];
  std::vector<std::size_t> queue;
  for (std::size_t s = 0; s < cg.num_states; ++s) {
    if (indeg[s] == 0) queue.push_back(s);
  }
  for (std::size_t i = 0; i < queue.size(); ++i) {
    for (auto ai : cg.arcs_from[queue[i]]) {
      if (--indeg[cg.arcs[ai].to] == 0) queue.push_back(cg.arcs[ai].to);
    }
  }
  if (queue.size() == cg.num_states) cg.topological_order = std::move(queue);

  std::vector<std::size_t> dist(cg.num_states, SIZE_MAX);
  std::vector<std::size_t> layer;
  for (auto ai : cg.arcs_from[cg.start]) {
    if (dist[cg.arcs[ai].to] == SIZE_MAX) {
      dist[cg.arcs[ai].to] = 1;
      layer.push_back(cg.arcs[ai].to);
    }
  }
  for (std::size_t i = 0; i < layer.size(); ++i) {
    for (auto ai : cg.arcs_from[layer[i]]) {
      auto t = cg.arcs[ai].to;
      if (dist[t] == SIZE_MAX) {
        dist[t] = dist[layer[i]] + 1;
        layer.push_back(t);
      }
    }
  }
  for (std::size_t s = 0; s < cg.num_states; ++s) {
    if (cg.accepting[s] && dist[s] != SIZE_MAX && (cg.min_length == 0 || dist[s] < cg.min_length)) {
      cg.min_length = dist[s];
    }
  }
  return cg;
}

}  // namespace capt
