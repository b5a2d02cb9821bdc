#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/token.hpp"

namespace metarule {

inline constexpr int kMaxHeight = 5;
inline constexpr int kSlotCount = (1 << kMaxHeight) - 1;  // 31
inline constexpr int kVteBits = 4 * kSlotCount;           // 124
inline constexpr int kMantissaCount = 21;
inline constexpr int kExponentCount = 2;

// Slot layout of a complete binary tree: root 0, children of s at 2s+1, 2s+2.
constexpr int slot_depth(int slot) { return std::bit_width(static_cast<unsigned>(slot + 1)); }
constexpr int parent_slot(int slot) { return (slot - 1) / 2; }
constexpr bool is_right_child(int slot) { return slot > 0 && slot % 2 == 0; }

// Constant grid: mantissa index m in [0, 20] maps to (m - 10) / 10, exponent
// index e in {0, 1} maps to 10^0 or 10^-1. The division form keeps every grid
// value the correctly rounded double of its decimal.
inline double grid_value(int mantissa, int exponent) {
  return static_cast<double>(mantissa - 10) / (exponent == 0 ? 10.0 : 100.0);
}

struct Constant {
  double value = 0.0;
  int mantissa = -1;  // -1 for constants that are not on the grid
  int exponent = -1;

  static Constant on_grid(int mantissa, int exponent) {
    if (mantissa < 0 || mantissa >= kMantissaCount || exponent < 0 || exponent >= kExponentCount) {
      throw GrammarError("constant grid index out of range");
    }
    return {grid_value(mantissa, exponent), mantissa, exponent};
  }
  static Constant off_grid(double value) { return {value, -1, -1}; }

  // Grid constant when the value is exactly representable (exponent 0
  // preferred), otherwise an off-grid constant.
  static Constant from_value(double value) {
    for (int e = 0; e < kExponentCount; ++e) {
      for (int m = 0; m < kMantissaCount; ++m) {
        if (grid_value(m, e) == value) return on_grid(m, e);
      }
    }
    return off_grid(value);
  }

  bool is_grid() const { return mantissa >= 0; }
  bool operator==(const Constant&) const = default;
};

// A pre-order traversal under construction, laid out on the 31 slots of a
// height-5 binary tree.
class PartialTree {
 public:
  explicit PartialTree(int max_height = kMaxHeight) : max_height_(max_height) {
    if (max_height < 2 || max_height > kMaxHeight) throw ContractError("max_height must lie in [2, 5]");
    cells_.fill(kEmpty);
  }

  bool complete() const { return frontier_ < 0; }
  int frontier() const { return frontier_; }
  int max_height() const { return max_height_; }
  std::size_t size() const { return traversal_.size(); }
  const std::vector<Token>& traversal() const { return traversal_; }
  const std::vector<int>& slots() const { return slots_; }

  std::optional<Token> at(int slot) const {
    if (slot < 0 || slot >= kSlotCount || cells_[slot] == kEmpty) return std::nullopt;
    return token_at(static_cast<std::size_t>(cells_[slot]));
  }

  int height() const {
    int h = 0;
    for (int s : slots_) h = std::max(h, slot_depth(s));
    return h;
  }

  // Tokens allowed by the grammar rules alone, without the fallback.
  TokenMask admissible_tokens() const {
    if (complete()) throw ContractError("valid_tokens called on a complete tree");
    TokenMask mask{};
    for (Token t : kAllTokens) mask[index_of(t)] = admissible(t);
    return mask;
  }

  TokenMask valid_tokens() const {
    TokenMask mask = admissible_tokens();
    const bool any = std::find(mask.begin(), mask.end(), true) != mask.end();
    if (!any) {
      for (Token t : kAllTokens) mask[index_of(t)] = !is_operator(t) && t != Token::Const;
    }
    return mask;
  }

  void append(Token t) {
    if (complete()) throw ContractError("append on a complete tree");
    if (!valid_tokens()[index_of(t)]) {
      throw GrammarError("token '" + std::string(mnemonic(t)) + "' is masked at slot " +
                         std::to_string(frontier_));
    }
    const int slot = frontier_;
    cells_[slot] = static_cast<std::int8_t>(index_of(t));
    traversal_.push_back(t);
    slots_.push_back(slot);
    if (is_operator(t)) {
      frontier_ = 2 * slot + 1;
      return;
    }
    int cur = slot;
    while (is_right_child(cur)) cur = parent_slot(cur);
    frontier_ = cur == 0 ? -1 : cur + 1;
  }

  // Each slot contributes four bits, most significant first; empty slots are 0000.
  std::array<std::uint8_t, kVteBits> vte() const {
    std::array<std::uint8_t, kVteBits> bits{};
    for (int s = 0; s < kSlotCount; ++s) {
      if (cells_[s] == kEmpty) continue;
      const std::uint8_t code = vte_code(token_at(static_cast<std::size_t>(cells_[s])));
      for (int j = 0; j < 4; ++j) bits[4 * s + j] = (code >> (3 - j)) & 1u;
    }
    return bits;
  }

  // Indices of the set bits of vte(), ascending.
  template <class F>
  void for_each_active_bit(F&& f) const {
    for (int s : slots_) {
      const std::uint8_t code = vte_code(token_at(static_cast<std::size_t>(cells_[s])));
      for (int j = 0; j < 4; ++j) {
        if ((code >> (3 - j)) & 1u) f(4 * s + j);
      }
    }
  }

 private:
  static constexpr std::int8_t kEmpty = -1;
  static constexpr std::int8_t kConstCell = static_cast<std::int8_t>(Token::Const);
  static constexpr std::int8_t kPeerCell = static_cast<std::int8_t>(Token::RandomPeer);
  using Cells = std::array<std::int8_t, kSlotCount>;

  bool admissible(Token t) const {
    const int f = frontier_;
    if (is_operator(t) && slot_depth(f) >= max_height_) return false;
    if (f == 0 && !is_operator(t)) return false;  // a bare operand has height 1
    if (is_right_child(f)) {
      const auto parent = static_cast<Token>(cells_[parent_slot(f)]);
      const bool left_is_const = cells_[f - 1] == kConstCell;
      if (left_is_const && t == Token::Const) return false;
      if (parent == Token::Times && !left_is_const && t != Token::Const) return false;
    }
    if (!is_operator(t)) return !completion_creates_twins(t);
    return true;
  }

  // Places `leaf` at the frontier and walks up through every subtree it
  // completes. A Times whose left child is finished and is not a constant can
  // only be completed by a constant, so that forced move is followed as well.
  bool completion_creates_twins(Token leaf) const {
    Cells cells = cells_;
    cells[frontier_] = static_cast<std::int8_t>(index_of(leaf));
    int cur = frontier_;
    while (cur > 0) {
      const int p = parent_slot(cur);
      const auto pt = static_cast<Token>(cells[p]);
      if (is_right_child(cur)) {
        if ((pt == Token::Plus || pt == Token::Minus) && same_subtree(cells, cur - 1, cur)) return true;
        cur = p;
      } else if (pt == Token::Times && cells[cur] != kConstCell) {
        cells[cur + 1] = kConstCell;
        cur = cur + 1;
      } else {
        break;
      }
    }
    return false;
  }

  // Token-level identity with products read as commutative. RandomPeer draws
  // fresh peers at every occurrence, so subtrees holding one never match.
  static bool same_subtree(const Cells& cells, int a, int b) {
    if (cells[a] != cells[b]) return false;
    if (cells[a] == kPeerCell) return false;
    if (cells[a] == kEmpty || !is_operator(static_cast<Token>(cells[a]))) return true;
    if (same_subtree(cells, 2 * a + 1, 2 * b + 1) && same_subtree(cells, 2 * a + 2, 2 * b + 2)) return true;
    return static_cast<Token>(cells[a]) == Token::Times && same_subtree(cells, 2 * a + 1, 2 * b + 2) &&
           same_subtree(cells, 2 * a + 2, 2 * b + 1);
  }

  int max_height_;
  Cells cells_{};
  int frontier_ = 0;
  std::vector<Token> traversal_;
  std::vector<int> slots_;
};

inline TokenMask valid_token_mask(const PartialTree& tree) { return tree.valid_tokens(); }

inline PartialTree append_token(PartialTree tree, Token token) {
  tree.append(token);
  return tree;
}

inline std::array<std::uint8_t, kVteBits> encode_vte(const PartialTree& tree) { return tree.vte(); }

// A complete update rule: pre-order tokens plus one constant per Const token.
class UpdateRule {
 public:
  UpdateRule() = default;

  UpdateRule(std::vector<Token> tokens, std::vector<Constant> constants)
      : tokens_(std::move(tokens)), constants_(std::move(constants)) {
    if (tokens_.empty()) throw GrammarError("empty rule");
    long pending = 1;
    std::size_t const_count = 0;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (pending == 0) throw GrammarError("tokens after the traversal completed");
      pending += arity(tokens_[i]) - 1;
      if (tokens_[i] == Token::Const) ++const_count;
    }
    if (pending != 0) throw GrammarError("incomplete traversal");
    if (const_count != constants_.size()) throw GrammarError("constant count does not match Const tokens");

    ends_.assign(tokens_.size(), 0);
    const_index_.assign(tokens_.size(), -1);
    slots_.assign(tokens_.size(), 0);
    std::size_t next = 0;
    int next_const = 0;
    layout(next, 0, next_const);
  }

  const std::vector<Token>& tokens() const { return tokens_; }
  const std::vector<Constant>& constants() const { return constants_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  // One past the last traversal index of the subtree rooted at node i.
  std::size_t subtree_end(std::size_t i) const { return ends_[i]; }
  std::size_t left(std::size_t i) const { return i + 1; }
  std::size_t right(std::size_t i) const { return ends_[i + 1]; }
  const Constant& constant_at(std::size_t i) const { return constants_[static_cast<std::size_t>(const_index_[i])]; }
  int slot(std::size_t i) const { return slots_[i]; }

  int height() const {
    int h = 0;
    for (int s : slots_) h = std::max(h, slot_depth(s));
    return h;
  }

  // Token-level identity of two subtrees, products read as commutative;
  // RandomPeer never matches.
  bool same_structure(std::size_t a, std::size_t b) const {
    if (tokens_[a] != tokens_[b] || tokens_[a] == Token::RandomPeer) return false;
    if (!is_operator(tokens_[a])) return true;
    if (same_structure(left(a), left(b)) && same_structure(right(a), right(b))) return true;
    return tokens_[a] == Token::Times && same_structure(left(a), right(b)) && same_structure(right(a), left(b));
  }

  bool operator==(const UpdateRule& o) const { return tokens_ == o.tokens_ && constants_ == o.constants_; }

 private:
  void layout(std::size_t& next, int slot, int& next_const) {
    const std::size_t i = next++;
    if (slot >= kSlotCount) throw GrammarError("rule exceeds height 5");
    slots_[i] = slot;
    if (tokens_[i] == Token::Const) const_index_[i] = next_const++;
    if (is_operator(tokens_[i])) {
      layout(next, 2 * slot + 1, next_const);
      layout(next, 2 * slot + 2, next_const);
    }
    ends_[i] = next;
  }

  std::vector<Token> tokens_;
  std::vector<Constant> constants_;
  std::vector<std::size_t> ends_;
  std::vector<int> const_index_;
  std::vector<int> slots_;
};

// Checks every grammar invariant independently of the mask machinery and
// returns a description of each violation found.
inline std::vector<std::string> invariant_violations(const UpdateRule& rule, bool require_grid = true) {
  std::vector<std::string> out;
  if (rule.empty()) {
    out.emplace_back("empty rule");
    return out;
  }
  const int h = rule.height();
  if (h < 2 || h > kMaxHeight) out.push_back("height " + std::to_string(h) + " outside [2, 5]");
  const auto& t = rule.tokens();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!is_operator(t[i])) continue;
    const Token l = t[rule.left(i)];
    const Token r = t[rule.right(i)];
    const int consts = (l == Token::Const) + (r == Token::Const);
    if (consts == 2) out.push_back("node " + std::to_string(i) + ": both children constant");
    if (t[i] == Token::Times && consts != 1) out.push_back("node " + std::to_string(i) + ": Times without exactly one constant");
    if ((t[i] == Token::Plus || t[i] == Token::Minus) && rule.same_structure(rule.left(i), rule.right(i))) {
      out.push_back("node " + std::to_string(i) + ": identical children");
    }
  }
  if (require_grid) {
    for (const Constant& c : rule.constants()) {
      if (!c.is_grid() || grid_value(c.mantissa, c.exponent) != c.value) {
        out.push_back("constant " + std::to_string(c.value) + " not on the grid");
      }
    }
  }
  return out;
}

// True when the traversal can be produced token by token under the masks.
inline bool mask_reachable(const UpdateRule& rule, int max_height = kMaxHeight) {
  PartialTree tree(max_height);
  for (Token t : rule.tokens()) {
    if (tree.complete() || !tree.valid_tokens()[index_of(t)]) return false;
    tree.append(t);
  }
  return tree.complete();
}

namespace detail {

inline std::string format_fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void render_infix(const UpdateRule& rule, std::size_t i, bool parent_is_times, std::string& out) {
  const Token t = rule.tokens()[i];
  switch (t) {
    case Token::Const:
      out += format_fixed2(rule.constant_at(i).value);
      return;
    case Token::Plus:
    case Token::Minus:
      out += '(';
      render_infix(rule, rule.left(i), false, out);
      out += t == Token::Plus ? '+' : '-';
      render_infix(rule, rule.right(i), false, out);
      out += ')';
      return;
    case Token::Times: {
      // constant factor first, so commuted products share one key
      std::size_t first = rule.left(i);
      std::size_t second = rule.right(i);
      if (rule.tokens()[first] != Token::Const && rule.tokens()[second] == Token::Const) std::swap(first, second);
      if (parent_is_times) out += '(';
      render_infix(rule, first, true, out);
      out += '*';
      render_infix(rule, second, true, out);
      if (parent_is_times) out += ')';
      return;
    }
    default:
      out += infix_name(t);
      return;
  }
}

}  // namespace detail

// Canonical infix rendering. Plus and Minus are always parenthesized, a
// product is written constant-first and parenthesized only under another
// product, constants use two decimals.
inline std::string to_infix(const UpdateRule& rule) {
  if (rule.empty()) throw ContractError("to_infix on an empty rule");
  std::string out;
  detail::render_infix(rule, 0, false, out);
  return out;
}

// Single-line text form: space-separated mnemonics, constants inline.
// Grid constants are written as mantissa and exponent ("c:0.3e-1"),
// off-grid constants as the shortest round-trip decimal ("c:0.18").
inline std::string serialize_rule(const UpdateRule& rule) {
  std::string out;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    if (i) out += ' ';
    const Token t = rule.tokens()[i];
    if (t != Token::Const) {
      out += mnemonic(t);
      continue;
    }
    const Constant& c = rule.constant_at(i);
    out += "c:";
    if (c.is_grid()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1fe%d", static_cast<double>(c.mantissa - 10) / 10.0, -c.exponent);
      out += buf;
    } else {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, c.value);
      out.append(buf, end);
    }
  }
  return out;
}

namespace detail {

inline double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

// "<m>e<k>" with one-decimal mantissa and k in {0, -1}.
inline std::optional<Constant> parse_grid_literal(std::string_view s) {
  const auto epos = s.find('e');
  if (epos == std::string_view::npos) return std::nullopt;
  const std::string_view mant = s.substr(0, epos);
  const std::string_view expo = s.substr(epos + 1);
  if (expo != "0" && expo != "-1") return std::nullopt;
  const std::size_t dot = mant.find('.');
  if (dot == std::string_view::npos || mant.size() - dot != 2) return std::nullopt;
  const double m = parse_double(mant, "mantissa");
  const long idx = std::lround(m * 10.0) + 10;
  if (idx < 0 || idx >= kMantissaCount || std::abs(static_cast<double>(idx - 10) / 10.0 - m) > 1e-12) return std::nullopt;
  return Constant::on_grid(static_cast<int>(idx), expo == "0" ? 0 : 1);
}

}  // namespace detail

inline UpdateRule parse_rule(std::string_view line) {
  std::vector<Token> tokens;
  std::vector<Constant> constants;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    const std::string_view word = line.substr(pos, end - pos);
    pos = end;
    if (word.rfind("c:", 0) == 0) {
      const std::string_view lit = word.substr(2);
      if (auto grid = detail::parse_grid_literal(lit)) {
        constants.push_back(*grid);
      } else {
        constants.push_back(Constant::from_value(detail::parse_double(lit, "constant")));
      }
      tokens.push_back(Token::Const);
    } else if (auto t = token_from_mnemonic(word); t && *t != Token::Const) {
      tokens.push_back(*t);
    } else {
      throw ParseError("unknown token '" + std::string(word) + "'");
    }
  }
  try {
    return UpdateRule(std::move(tokens), std::move(constants));
  } catch (const GrammarError& e) {
    throw ParseError(std::string("malformed rule: ") + e.what());
  }
}

namespace detail {

class InfixParser {
 public:
  explicit InfixParser(std::string_view s) : s_(s) {}

  UpdateRule parse() {
    product();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    try {
      return UpdateRule(std::move(tokens_), std::move(constants_));
    } catch (const GrammarError& e) {
      throw ParseError(std::string("malformed rule: ") + e.what());
    }
  }

 private:
  // Nodes are emitted in pre-order, so a binary operator must be inserted in
  // front of its already-parsed left operand.
  void product() {
    const std::size_t start_tok = tokens_.size();
    atom();
    skip_ws();
    if (peek() == '*') {
      ++pos_;
      tokens_.insert(tokens_.begin() + static_cast<long>(start_tok), Token::Times);
      atom();
    }
  }

  void atom() {
    skip_ws();
    const char c = peek();
    if (c == '(') {
      ++pos_;
      const std::size_t start_tok = tokens_.size();
      product();
      skip_ws();
      const char op = peek();
      if (op == '+' || op == '-') {
        ++pos_;
        tokens_.insert(tokens_.begin() + static_cast<long>(start_tok), op == '+' ? Token::Plus : Token::Minus);
        product();
        skip_ws();
      }
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return;
    }
    if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      number();
      return;
    }
    name();
  }

  void number() {
    const std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    const double v = parse_double(s_.substr(start, pos_ - start), "number");
    tokens_.push_back(Token::Const);
    constants_.push_back(Constant::from_value(v));
  }

  void name() {
    static constexpr std::array<std::pair<std::string_view, Token>, 6> kNames = {{
        {"x_i*", Token::BestPersonal},
        {"x_w", Token::WorstGlobal},
        {"x_r", Token::RandomPeer},
        {"x*", Token::BestGlobal},
        {"dx", Token::DeltaX},
        {"x", Token::X},
    }};
    for (const auto& [text, tok] : kNames) {
      if (s_.substr(pos_, text.size()) == text) {
        pos_ += text.size();
        tokens_.push_back(tok);
        return;
      }
    }
    fail("unknown operand");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  [[noreturn]] void fail(const char* what) const {
    throw ParseError(std::string(what) + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<Token> tokens_;
  std::vector<Constant> constants_;
};

}  // namespace detail

// Inverse of to_infix up to product commutation; constants that land on the
// grid are bound to it.
inline UpdateRule parse_infix(std::string_view text) { return detail::InfixParser(text).parse(); }

}  // namespace metarule
