#include "termeval/cint.hpp"

#include <limits>

namespace termeval::cint {

namespace {

std::uint64_t mask(std::uint8_t width) {
  return width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

std::uint64_t raw(Value v) { return static_cast<std::uint64_t>(v.bits); }

// Comparison in the common type. Both values are already converted.
int compare(Value a, Value b) {
  if (a.type.is_signed) {
    return a.bits < b.bits ? -1 : (a.bits > b.bits ? 1 : 0);
  }
  std::uint64_t ua = raw(a) & mask(a.type.width);
  std::uint64_t ub = raw(b) & mask(b.type.width);
  return ua < ub ? -1 : (ua > ub ? 1 : 0);
}

Value boolean(bool b) { return Value{b ? 1 : 0, kInt}; }

}  // namespace

std::string type_name(IntType t) {
  std::string base;
  switch (t.width) {
    case 1: return "_Bool";
    case 8: base = "char"; break;
    case 16: base = "short"; break;
    case 32: base = "int"; break;
    default: base = "long"; break;
  }
  if (!t.is_signed) return "unsigned " + base;
  if (t.width == 8) return "signed char";
  return base;
}

std::int64_t min_value(IntType t) {
  if (!t.is_signed) return 0;
  if (t.width >= 64) return std::numeric_limits<std::int64_t>::min();
  return -(std::int64_t{1} << (t.width - 1));
}

std::uint64_t max_value(IntType t) {
  if (!t.is_signed) return mask(t.width);
  return mask(t.width) >> 1;
}

std::int64_t normalize(std::uint64_t value, IntType t) {
  if (t.width == 1) return value != 0 ? 1 : 0;
  std::uint64_t m = mask(t.width);
  value &= m;
  if (t.is_signed && t.width < 64) {
    std::uint64_t sign = std::uint64_t{1} << (t.width - 1);
    if (value & sign) value |= ~m;
  }
  return static_cast<std::int64_t>(value);
}

Value convert(Value v, IntType to) { return Value{normalize(raw(v), to), to}; }

Value make(std::int64_t v, IntType t) {
  return Value{normalize(static_cast<std::uint64_t>(v), t), t};
}

IntType promote(IntType t) { return t.width < 32 ? kInt : t; }

IntType common_type(IntType a, IntType b) {
  if (a.width != b.width) {
    const IntType& wide = a.width > b.width ? a : b;
    // A wider signed type can represent every value of the narrower one.
    return wide;
  }
  return IntType{a.width, a.is_signed && b.is_signed};
}

std::optional<IntType> literal_type(std::uint64_t magnitude) {
  if (magnitude <= max_value(kInt)) return kInt;
  if (magnitude <= max_value(kLong)) return kLong;
  return std::nullopt;
}

std::string_view spelling(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Rem: return "%";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::BitAnd: return "&";
    case BinOp::BitOr: return "|";
    case BinOp::BitXor: return "^";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::LogAnd: return "&&";
    case BinOp::LogOr: return "||";
  }
  return "?";
}

std::string_view spelling(UnOp op) {
  switch (op) {
    case UnOp::Neg: return "-";
    case UnOp::BitNot: return "~";
    case UnOp::LogNot: return "!";
  }
  return "?";
}

bool is_comparison(BinOp op) {
  switch (op) {
    case BinOp::Lt: case BinOp::Le: case BinOp::Gt:
    case BinOp::Ge: case BinOp::Eq: case BinOp::Ne:
      return true;
    default:
      return false;
  }
}

bool truthy(Value v) { return v.bits != 0; }

std::optional<Value> apply(BinOp op, Value lhs, Value rhs) {
  if (op == BinOp::LogAnd) return boolean(truthy(lhs) && truthy(rhs));
  if (op == BinOp::LogOr) return boolean(truthy(lhs) || truthy(rhs));

  if (op == BinOp::Shl || op == BinOp::Shr) {
    IntType t = promote(lhs.type);
    Value l = convert(lhs, t);
    Value count = convert(rhs, promote(rhs.type));
    bool negative = count.type.is_signed && count.bits < 0;
    if (negative || static_cast<std::uint64_t>(count.bits) >= t.width) {
      return std::nullopt;
    }
    unsigned n = static_cast<unsigned>(count.bits);
    if (op == BinOp::Shl) return Value{normalize(raw(l) << n, t), t};
    if (t.is_signed) return Value{l.bits >> n, t};
    return Value{normalize((raw(l) & mask(t.width)) >> n, t), t};
  }

  IntType t = common_type(promote(lhs.type), promote(rhs.type));
  Value a = convert(lhs, t);
  Value b = convert(rhs, t);

  switch (op) {
    case BinOp::Add: return Value{normalize(raw(a) + raw(b), t), t};
    case BinOp::Sub: return Value{normalize(raw(a) - raw(b), t), t};
    case BinOp::Mul: return Value{normalize(raw(a) * raw(b), t), t};
    case BinOp::BitAnd: return Value{normalize(raw(a) & raw(b), t), t};
    case BinOp::BitOr: return Value{normalize(raw(a) | raw(b), t), t};
    case BinOp::BitXor: return Value{normalize(raw(a) ^ raw(b), t), t};
    case BinOp::Div:
    case BinOp::Rem: {
      if (b.bits == 0) return std::nullopt;
      if (t.is_signed) {
        // MIN / -1 overflows; wrap like the hardware-independent
        // two's-complement reading (quotient MIN, remainder 0).
        if (b.bits == -1) {
          if (op == BinOp::Rem) return Value{0, t};
          return Value{normalize(0 - raw(a), t), t};
        }
        std::int64_t r = op == BinOp::Div ? a.bits / b.bits : a.bits % b.bits;
        return Value{normalize(static_cast<std::uint64_t>(r), t), t};
      }
      std::uint64_t ua = raw(a) & mask(t.width);
      std::uint64_t ub = raw(b) & mask(t.width);
      return Value{normalize(op == BinOp::Div ? ua / ub : ua % ub, t), t};
    }
    case BinOp::Lt: return boolean(compare(a, b) < 0);
    case BinOp::Le: return boolean(compare(a, b) <= 0);
    case BinOp::Gt: return boolean(compare(a, b) > 0);
    case BinOp::Ge: return boolean(compare(a, b) >= 0);
    case BinOp::Eq: return boolean(compare(a, b) == 0);
    case BinOp::Ne: return boolean(compare(a, b) != 0);
    default: break;
  }
  return std::nullopt;
}

Value apply(UnOp op, Value v) {
  IntType t = promote(v.type);
  Value p = convert(v, t);
  switch (op) {
    case UnOp::Neg: return Value{normalize(0 - raw(p), t), t};
    case UnOp::BitNot: return Value{normalize(~raw(p), t), t};
    case UnOp::LogNot: return boolean(!truthy(p));
  }
  return p;
}

std::string to_string(Value v) {
  if (!v.type.is_signed) {
    return std::to_string(static_cast<std::uint64_t>(v.bits) & mask(v.type.width));
  }
  return std::to_string(v.bits);
}

}  // namespace termeval::cint
