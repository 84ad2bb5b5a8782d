#pragma once

// NSW -> SFW renderers, one per pattern label.
//
// Numeral conventions:
//  - positional reading groups by 万/亿; a run of zeros inside the number is
//    read as a single 零, trailing zeros are silent, a leading 一十 becomes 十;
//  - with use_liang, a leading 2 is read 两 unless it sits in a 十 position
//    (2 -> 两, 200 -> 两百, 20000 -> 两万, but 20 -> 二十);
//  - spelling reads digit by digit, 0 -> 零, and 1 -> 幺 when use_yao is set;
//  - fractional digits after a decimal point are always spelled.

#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hybridtn/error.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/taxonomy.hpp"
#include "hybridtn/unicode.hpp"

namespace hybridtn {

struct RenderedSFW {
  Text text;
  Text source;
  LabelId label = 0;
};

inline constexpr wchar_t kHanDigits[] = L"零一二三四五六七八九";

namespace detail {

inline void require_digits(TextView digits, const char* what) {
  if (digits.empty()) throw ValidationError(std::string(what) + ": empty digit string");
  for (wchar_t c : digits) {
    if (!is_ascii_digit(c)) {
      throw ValidationError(std::string(what) + ": non-digit character in '" +
                            to_utf8(digits) + "'");
    }
  }
}

// Reads one 4-digit group (1..9999). `number_start` is true for the most
// significant group of the whole number.
inline Text read_group(int g, bool number_start, bool use_liang) {
  static constexpr const wchar_t* kUnits[] = {L"", L"十", L"百", L"千"};
  const int d[4] = {g % 10, g / 10 % 10, g / 100 % 10, g / 1000};
  Text out;
  bool started = false;
  bool zero = false;
  for (int pos = 3; pos >= 0; --pos) {
    const int digit = d[pos];
    if (digit == 0) {
      if (started) zero = true;
      continue;
    }
    if (zero) {
      out += L'零';
      zero = false;
    }
    const bool first = number_start && !started;
    if (first && pos == 1 && digit == 1) {
      out += L'十';
    } else if (first && digit == 2 && use_liang && pos != 1) {
      out += L'两';
      out += kUnits[pos];
    } else {
      out += kHanDigits[digit];
      out += kUnits[pos];
    }
    started = true;
  }
  return out;
}

}  // namespace detail

inline Text read_number_positional(TextView digits, bool use_liang = false) {
  detail::require_digits(digits, "read_number_positional");
  std::size_t first = digits.find_first_not_of(L'0');
  if (first == TextView::npos) return L"零";
  const TextView sig = digits.substr(first);
  if (sig.size() > 12) {
    throw ValidationError("read_number_positional: magnitude must be below 10^12");
  }
  long long n = 0;
  for (wchar_t c : sig) n = n * 10 + (c - L'0');

  static constexpr const wchar_t* kBig[] = {L"", L"万", L"亿"};
  const int groups[3] = {static_cast<int>(n % 10000), static_cast<int>(n / 10000 % 10000),
                         static_cast<int>(n / 100000000)};
  Text out;
  bool pending_zero = false;
  for (int k = 2; k >= 0; --k) {
    const int g = groups[k];
    if (g == 0) {
      if (!out.empty()) pending_zero = true;
      continue;
    }
    if (!out.empty() && (pending_zero || g < 1000)) out += L'零';
    pending_zero = false;
    out += detail::read_group(g, out.empty(), use_liang);
    out += kBig[k];
  }
  return out;
}

inline Text spell_digits(TextView digits, bool use_yao = false) {
  detail::require_digits(digits, "spell_digits");
  Text out;
  out.reserve(digits.size());
  for (wchar_t c : digits) {
    out += (use_yao && c == L'1') ? L'幺' : kHanDigits[c - L'0'];
  }
  return out;
}

// Integer part positional (thousands separators allowed), fraction spelled.
inline Text read_decimal(TextView number, bool use_liang = false) {
  Text integer;
  TextView fraction;
  const auto dot = number.find(L'.');
  for (wchar_t c : number.substr(0, dot)) {
    if (c != L',') integer += c;
  }
  if (dot != TextView::npos) fraction = number.substr(dot + 1);
  if (fraction.empty()) return read_number_positional(integer, use_liang);
  return read_number_positional(integer, false) + L"点" + spell_digits(fraction);
}

namespace render_fn {

inline Text read_no_zero(TextView s) { return read_decimal(s); }
inline Text spell_keep_zero(TextView s) { return spell_digits(s); }
inline Text two_liang(TextView s) { return read_number_positional(s, true); }
inline Text one_yao_spell(TextView s) { return spell_digits(s, true); }

inline Text percent(TextView s) {
  return L"百分之" + read_decimal(s.substr(0, s.size() - 1));
}

inline std::size_t find_any(TextView s, TextView chars) {
  return s.find_first_of(chars);
}

inline Text range(TextView s) {
  const auto sep = find_any(s, L"~-—");
  return read_decimal(s.substr(0, sep)) + L"到" + read_decimal(s.substr(sep + 1));
}

inline Text score_ratio(TextView s) {
  const auto sep = find_any(s, L":-—");
  return read_number_positional(s.substr(0, sep)) + L"比" +
         read_number_positional(s.substr(sep + 1));
}

// 每 + denominator unit + quantity + numerator unit: 5人/组 -> 每组五人.
inline Text slash_per(TextView s) {
  const auto slash = s.find(L'/');
  const TextView quantity = s.substr(0, slash - 1);
  const wchar_t unit = s[slash - 1];
  const wchar_t per = s[slash + 1];
  Text out = L"每";
  out += per;
  out += read_decimal(quantity, true);
  out += unit;
  return out;
}

// Hour 2 reads 两; minutes 00 are dropped; single-digit minutes and seconds
// get a leading 零; seconds 00 are dropped.
inline Text time(TextView s) {
  const auto c1 = s.find(L':');
  const auto c2 = s.find(L':', c1 + 1);
  const TextView hour = s.substr(0, c1);
  const TextView minute = s.substr(c1 + 1, c2 == TextView::npos ? TextView::npos : c2 - c1 - 1);
  const TextView second = c2 == TextView::npos ? TextView() : s.substr(c2 + 1);
  const auto two_digit = [](TextView v) {
    return v[0] == L'0' ? L"零" + spell_digits(v.substr(1)) : read_number_positional(v);
  };
  Text out = read_number_positional(hour, true) + L"点";
  const bool has_seconds = !second.empty() && second != L"00";
  if (minute != L"00" || has_seconds) out += two_digit(minute) + L"分";
  if (has_seconds) out += two_digit(second) + L"秒";
  return out;
}

// Year spelled, month and day positional: 2019-10-01 -> 二零一九年十月一日.
inline Text date_ymd(TextView s) {
  const auto a = s.find_first_of(L"-/.");
  const auto b = s.find_first_of(L"-/.", a + 1);
  return spell_digits(s.substr(0, a)) + L"年" +
         read_number_positional(s.substr(a + 1, b - a - 1)) + L"月" +
         read_number_positional(s.substr(b + 1)) + L"日";
}

inline Text currency(TextView s) { return read_decimal(s.substr(1)) + L"美元"; }

}  // namespace render_fn

using RenderFunction = std::function<Text(TextView)>;

inline const std::unordered_map<std::string, RenderFunction>& builtin_renderers() {
  static const std::unordered_map<std::string, RenderFunction> table = {
      {std::string(labels::kReadNoZero), render_fn::read_no_zero},
      {std::string(labels::kSpellKeepZero), render_fn::spell_keep_zero},
      {std::string(labels::kPercent), render_fn::percent},
      {std::string(labels::kRange), render_fn::range},
      {std::string(labels::kScoreRatio), render_fn::score_ratio},
      {std::string(labels::kSlashPer), render_fn::slash_per},
      {std::string(labels::kTime), render_fn::time},
      {std::string(labels::kDateYMD), render_fn::date_ymd},
      {std::string(labels::kTwoLiang), render_fn::two_liang},
      {std::string(labels::kOneYaoSpell), render_fn::one_yao_spell},
      {std::string(labels::kCurrency), render_fn::currency},
  };
  return table;
}

// Binds every label of a LabelSet to its renderer and checks the render
// precondition against the shared format registry.
class PatternReader {
 public:
  explicit PatternReader(const LabelSet& labels)
      : PatternReader(labels, FormatRegistry(labels)) {}

  PatternReader(const LabelSet& labels, FormatRegistry formats)
      : formats_(std::move(formats)) {
    const auto& table = builtin_renderers();
    for (const auto& l : labels.all()) {
      auto it = table.find(l.name);
      if (it == table.end()) {
        throw ConfigError("no renderer registered for label '" + l.name + "'");
      }
      renderers_.push_back(it->second);
    }
  }

  const FormatRegistry& formats() const noexcept { return formats_; }

  RenderedSFW render(TextView surface, LabelId label) const {
    if (!formats_.verify(surface, label)) {
      throw ValidationError("'" + to_utf8(surface) + "' is not a legal surface for label id " +
                            std::to_string(label));
    }
    return {renderers_[label](surface), Text(surface), label};
  }

 private:
  FormatRegistry formats_;
  std::vector<RenderFunction> renderers_;
};

}  // namespace hybridtn
