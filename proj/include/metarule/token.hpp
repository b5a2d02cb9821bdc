#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace metarule {

// Basis symbols of an update rule. The enumerator value is the index used by
// the policy's token head.
enum class Token : std::uint8_t {
  Plus,
  Minus,
  Times,
  X,             // current candidate positions
  BestGlobal,    // best solution found so far
  WorstGlobal,   // worst solution found so far
  BestPersonal,  // each candidate's own best-so-far
  DeltaX,        // displacement of the previous generation
  RandomPeer,    // a randomly drawn member of the current population
  Const,
};

inline constexpr std::size_t kTokenCount = 10;

inline constexpr std::array<Token, kTokenCount> kAllTokens = {
    Token::Plus,         Token::Minus,  Token::Times,      Token::X,     Token::BestGlobal,
    Token::WorstGlobal,  Token::BestPersonal, Token::DeltaX, Token::RandomPeer, Token::Const};

using TokenMask = std::array<bool, kTokenCount>;

constexpr std::size_t index_of(Token t) { return static_cast<std::size_t>(t); }
constexpr Token token_at(std::size_t i) { return static_cast<Token>(i); }

constexpr int arity(Token t) {
  return (t == Token::Plus || t == Token::Minus || t == Token::Times) ? 2 : 0;
}
constexpr bool is_operator(Token t) { return arity(t) == 2; }

// 4-bit code of each token inside the tree embedding.
constexpr std::uint8_t vte_code(Token t) {
  switch (t) {
    case Token::Plus: return 0b0001;
    case Token::Times: return 0b0010;
    case Token::Minus: return 0b0011;
    case Token::Const: return 0b0100;
    case Token::X: return 0b0101;
    case Token::BestGlobal: return 0b0110;
    case Token::WorstGlobal: return 0b0111;
    case Token::DeltaX: return 0b1000;
    case Token::RandomPeer: return 0b1001;
    case Token::BestPersonal: return 0b1010;
  }
  return 0;
}

// Mnemonic used by the single-line text format.
constexpr std::string_view mnemonic(Token t) {
  switch (t) {
    case Token::Plus: return "+";
    case Token::Minus: return "-";
    case Token::Times: return "*";
    case Token::X: return "x";
    case Token::BestGlobal: return "xg";
    case Token::WorstGlobal: return "xw";
    case Token::BestPersonal: return "xp";
    case Token::DeltaX: return "dx";
    case Token::RandomPeer: return "xr";
    case Token::Const: return "c";
  }
  return "?";
}

// Operand names used by the infix rendering.
constexpr std::string_view infix_name(Token t) {
  switch (t) {
    case Token::X: return "x";
    case Token::BestGlobal: return "x*";
    case Token::WorstGlobal: return "x_w";
    case Token::BestPersonal: return "x_i*";
    case Token::DeltaX: return "dx";
    case Token::RandomPeer: return "x_r";
    case Token::Plus: return "+";
    case Token::Minus: return "-";
    case Token::Times: return "*";
    case Token::Const: return "c";
  }
  return "?";
}

inline std::optional<Token> token_from_mnemonic(std::string_view s) {
  for (Token t : kAllTokens) {
    if (mnemonic(t) == s) return t;
  }
  return std::nullopt;
}

}  // namespace metarule
