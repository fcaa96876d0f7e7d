#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace termeval::cint {

/// A C integer type reduced to what matters for evaluation: bit width and
/// signedness. Enums are modelled as `int`. `_Bool` is width 1, unsigned, and
/// converts any nonzero value to 1.
struct IntType {
  std::uint8_t width = 32;
  bool is_signed = true;

  friend bool operator==(const IntType&, const IntType&) = default;
};

inline constexpr IntType kBool{1, false};
inline constexpr IntType kChar{8, true};
inline constexpr IntType kUChar{8, false};
inline constexpr IntType kShort{16, true};
inline constexpr IntType kUShort{16, false};
inline constexpr IntType kInt{32, true};
inline constexpr IntType kUInt{32, false};
inline constexpr IntType kLong{64, true};
inline constexpr IntType kULong{64, false};

std::string type_name(IntType t);

std::int64_t min_value(IntType t);
/// Largest value, as uint64 so that unsigned long fits.
std::uint64_t max_value(IntType t);

/// A typed value. `bits` holds the value normalized to `type`: sign-extended
/// for signed types, zero-extended for unsigned ones (for unsigned 64-bit
/// values the int64 holds the raw bit pattern).
struct Value {
  std::int64_t bits = 0;
  IntType type = kInt;

  friend bool operator==(const Value&, const Value&) = default;
};

/// Truncate to the width of `t` and re-extend: C conversion with wraparound.
std::int64_t normalize(std::uint64_t raw, IntType t);
Value convert(Value v, IntType to);
Value make(std::int64_t v, IntType t);

/// Integer promotion (anything narrower than int becomes int).
IntType promote(IntType t);
/// Usual arithmetic conversions over two already-promoted types.
IntType common_type(IntType a, IntType b);

/// Type of an unsuffixed decimal literal: int if it fits, else long.
/// Returns nullopt when the magnitude exceeds the signed 64-bit range.
std::optional<IntType> literal_type(std::uint64_t magnitude);

enum class BinOp {
  Add, Sub, Mul, Div, Rem,
  Lt, Le, Gt, Ge, Eq, Ne,
  BitAnd, BitOr, BitXor, Shl, Shr,
  LogAnd, LogOr,
};
enum class UnOp { Neg, BitNot, LogNot };

std::string_view spelling(BinOp op);
std::string_view spelling(UnOp op);
bool is_comparison(BinOp op);

/// Evaluate a binary operator under C semantics at the operands' common
/// type, with two's-complement wraparound. `&&`/`||` are not short-circuited
/// here; callers handle evaluation order. Returns nullopt for operations C
/// leaves undefined and that we refuse to give a value to: division or
/// remainder by zero, and shift counts outside [0, width).
std::optional<Value> apply(BinOp op, Value lhs, Value rhs);
Value apply(UnOp op, Value v);

bool truthy(Value v);

/// Decimal rendering honouring signedness.
std::string to_string(Value v);

}  // namespace termeval::cint
