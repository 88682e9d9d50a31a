#pragma once

// Digit-string labels: one face digit 0..5 followed by one quad-tree digit
// 0..3 per level, root to leaf, no separators ("431" is child 1 of child 3 of
// face 4). The same digits are the decoder's token alphabet.

#include <string>
#include <string_view>
#include <vector>

#include "geoseq/cellgeo.hpp"
#include "geoseq/error.hpp"

namespace geoseq::labelcodec {

enum class LabelErrorKind { kEmpty, kNonDigit, kInvalidFace, kInvalidChild, kTooLong };

inline const char* to_string(LabelErrorKind k) noexcept {
  switch (k) {
    case LabelErrorKind::kEmpty: return "empty label";
    case LabelErrorKind::kNonDigit: return "non-digit character";
    case LabelErrorKind::kInvalidFace: return "invalid face digit";
    case LabelErrorKind::kInvalidChild: return "invalid child digit";
    case LabelErrorKind::kTooLong: return "label too long";
  }
  return "invalid label";
}

class LabelError : public ArgumentError {
 public:
  LabelError(LabelErrorKind kind, std::string_view label, std::size_t position)
      : ArgumentError(std::string(to_string(kind)) + " in label \"" + std::string(label) + "\" at position " +
                      std::to_string(position)),
        kind_(kind),
        position_(position) {}

  LabelErrorKind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  LabelErrorKind kind_;
  std::size_t position_;
};

inline std::string encode(const CellId& c) {
  std::string s;
  s.reserve(static_cast<std::size_t>(c.level()) + 1);
  s.push_back(static_cast<char>('0' + c.face()));
  for (int k = 0; k < c.level(); ++k) s.push_back(static_cast<char>('0' + c.digit(k)));
  return s;
}

inline CellId decode(std::string_view s, int max_level = kDefaultMaxLevel) {
  if (s.empty()) throw LabelError(LabelErrorKind::kEmpty, s, 0);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < '0' || s[k] > '9') throw LabelError(LabelErrorKind::kNonDigit, s, k);
  }
  if (s[0] > '5') throw LabelError(LabelErrorKind::kInvalidFace, s, 0);
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k] > '3') throw LabelError(LabelErrorKind::kInvalidChild, s, k);
  }
  if (s.size() > static_cast<std::size_t>(max_level) + 1 || s.size() > kMaxSupportedLevel + 1) {
    throw LabelError(LabelErrorKind::kTooLong, s, s.size() - 1);
  }
  CellId c = CellId::from_face(s[0] - '0');
  for (std::size_t k = 1; k < s.size(); ++k) c = c.child(s[k] - '0');
  return c;
}

inline bool is_valid(std::string_view s, int max_level = kDefaultMaxLevel) noexcept {
  try {
    decode(s, max_level);
    return true;
  } catch (const LabelError&) {
    return false;
  }
}

/// Proper prefixes, shortest first.
inline std::vector<std::string> ancestors(std::string_view s) {
  decode(s, kMaxSupportedLevel);
  std::vector<std::string> out;
  for (std::size_t n = 1; n < s.size(); ++n) out.emplace_back(s.substr(0, n));
  return out;
}

}  // namespace geoseq::labelcodec
