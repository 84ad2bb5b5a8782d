#pragma once

// Template-driven synthetic corpus and the oversampling strategies used to
// expand rare labels.
//
// Template registry file:
//
//   [label B_Time]
//   surface = time
//   template = 发布会定于{NSW}在北京举行
//   template = ...
//
// Every template carries exactly one {NSW} slot. Surface generator specs:
//
//   int LO HI              decimal integer in [LO, HI]
//   digits MINLEN MAXLEN   random digit string, no leading zero
//   decimal LO HI PLACES   LO..HI with PLACES fractional digits
//   percent LO HI          integer percentage, occasionally one decimal
//   range LO HI            a<b joined by - ~ or —
//   score LO HI SEPS       two integers joined by one of SEPS
//   time                   H:MM or HH:MM
//   date LO HI             YYYY-M-D with one of - / . as separator
//   per LO HI U/V ...      rate such as 5人/组, unit pair drawn from the list
//   currency LO HI         $N
//   phone                  11-digit mobile number
//   choice A B ...         one of the listed literals

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hybridtn/corpus.hpp"
#include "hybridtn/error.hpp"
#include "hybridtn/extractor.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/random.hpp"
#include "hybridtn/record_file.hpp"
#include "hybridtn/taxonomy.hpp"

namespace hybridtn {

inline constexpr std::wstring_view kSlot = L"{NSW}";

struct SurfaceSpec {
  std::string kind;
  std::vector<std::string> args;

  Text generate(Rng& rng) const {
    const auto num = [&](std::size_t i) { return std::stoll(args.at(i)); };
    const auto w = [](long long v) { return std::to_wstring(v); };
    const auto pad2 = [&](long long v) {
      return (v < 10 && uniform01(rng) < 0.5) ? L"0" + w(v) : w(v);
    };
    if (kind == "int") return w(uniform_int(rng, num(0), num(1)));
    if (kind == "digits") {
      const auto len = uniform_int(rng, num(0), num(1));
      Text t;
      for (long long i = 0; i < len; ++i) {
        t += static_cast<wchar_t>(L'0' + uniform_int(rng, i == 0 && len > 1 ? 1 : 0, 9));
      }
      return t;
    }
    if (kind == "decimal") {
      Text t = w(uniform_int(rng, num(0), num(1))) + L".";
      for (long long i = 0; i < num(2); ++i) t += static_cast<wchar_t>(L'0' + uniform_int(rng, 0, 9));
      return t;
    }
    if (kind == "percent") {
      Text t = w(uniform_int(rng, num(0), num(1)));
      if (uniform01(rng) < 0.2) t += L"." + w(uniform_int(rng, 1, 9));
      return t + L"%";
    }
    if (kind == "range") {
      const auto a = uniform_int(rng, num(0), num(1) - 1);
      const auto b = uniform_int(rng, a + 1, num(1));
      const double u = uniform01(rng);
      const wchar_t sep = u < 0.6 ? L'-' : (u < 0.9 ? L'~' : L'—');
      return w(a) + sep + w(b);
    }
    if (kind == "score") {
      const Text seps = from_utf8(args.at(2));
      const wchar_t sep = seps[uniform_below(rng, seps.size())];
      return w(uniform_int(rng, num(0), num(1))) + sep + w(uniform_int(rng, num(0), num(1)));
    }
    if (kind == "time") {
      static constexpr int kMinutes[] = {0, 0, 30, 15, 45, -1, -1};
      const auto h = uniform_int(rng, 0, 23);
      int m = kMinutes[uniform_below(rng, 7)];
      if (m < 0) m = static_cast<int>(uniform_int(rng, 0, 59));
      return (h < 10 && uniform01(rng) < 0.3 ? L"0" + w(h) : w(h)) + L":" +
             (m < 10 ? L"0" + w(m) : w(m));
    }
    if (kind == "date") {
      static constexpr wchar_t kSeps[] = {L'-', L'/', L'.'};
      const wchar_t sep = kSeps[uniform_below(rng, 3)];
      const auto y = uniform_int(rng, num(0), num(1));
      const auto mo = uniform_int(rng, 1, 12);
      const auto d = uniform_int(rng, 1, 28);
      return w(y) + sep + pad2(mo) + sep + pad2(d);
    }
    if (kind == "per") {
      const auto q = uniform_int(rng, num(0), num(1));
      const auto pair = from_utf8(args.at(2 + uniform_below(rng, args.size() - 2)));
      return w(q) + pair;
    }
    if (kind == "currency") return L"$" + w(uniform_int(rng, num(0), num(1)));
    if (kind == "phone") {
      Text t = L"1";
      t += static_cast<wchar_t>(L'0' + uniform_int(rng, 3, 9));
      for (int i = 0; i < 9; ++i) t += static_cast<wchar_t>(L'0' + uniform_int(rng, 0, 9));
      return t;
    }
    if (kind == "choice") return from_utf8(args.at(uniform_below(rng, args.size())));
    throw ConfigError("unknown surface generator '" + kind + "'");
  }
};

inline SurfaceSpec parse_surface_spec(const std::string& spec) {
  std::istringstream in(spec);
  SurfaceSpec s;
  in >> s.kind;
  for (std::string a; in >> a;) s.args.push_back(a);
  static const std::map<std::string, std::size_t> kMinArgs = {
      {"int", 2}, {"digits", 2}, {"decimal", 3}, {"percent", 2}, {"range", 2},
      {"score", 3}, {"time", 0}, {"date", 2}, {"per", 3}, {"currency", 2},
      {"phone", 0}, {"choice", 1}};
  auto it = kMinArgs.find(s.kind);
  if (it == kMinArgs.end()) throw ConfigError("unknown surface generator '" + s.kind + "'");
  if (s.args.size() < it->second) {
    throw ConfigError("surface generator '" + s.kind + "' needs " +
                      std::to_string(it->second) + " arguments");
  }
  return s;
}

struct LabelTemplates {
  SurfaceSpec surface;
  std::vector<Text> templates;
};

class TemplateRegistry {
 public:
  TemplateRegistry() = default;

  TemplateRegistry(const std::vector<Record>& records, const LabelSet& labels)
      : by_label_(labels.size()) {
    for (const auto& r : records) {
      if (r.kind != "label") {
        throw ParseError("expected a [label ...] record, got [" + r.kind + "]", r.line);
      }
      const auto id = labels.require(r.name);
      auto& entry = by_label_[id];
      if (entry) throw ConfigError("templates for '" + r.name + "' defined twice");
      entry = LabelTemplates{parse_surface_spec(r.require("surface")), {}};
      for (const auto& t : r.get_all("template")) {
        Text tt = from_utf8(t);
        const auto first = tt.find(kSlot);
        if (first == Text::npos || tt.find(kSlot, first + 1) != Text::npos) {
          throw ConfigError("template for '" + r.name + "' must contain exactly one {NSW}: " + t);
        }
        entry->templates.push_back(std::move(tt));
      }
    }
  }

  const std::optional<LabelTemplates>& operator[](LabelId id) const { return by_label_.at(id); }
  std::size_t size() const noexcept { return by_label_.size(); }

 private:
  std::vector<std::optional<LabelTemplates>> by_label_;
};

inline TemplateRegistry load_templates(const std::string& path, const LabelSet& labels) {
  return TemplateRegistry(parse_records_file(path), labels);
}

// Draws n single-NSW sentences: label ~ dist, template uniform, surface from
// the label's generator. Throws ConfigError when a label with nonzero mass has
// no templates, a generated surface is illegal for its label, or a template
// makes the extractor see a different span than the intended one.
inline Corpus generate_synthetic_corpus(const CorpusDistribution& dist, std::size_t n,
                                        std::uint64_t seed, const TemplateRegistry& templates,
                                        const LabelSet& labels, const FormatRegistry& formats) {
  dist.validate();
  if (dist.proportions.size() != labels.size()) {
    throw ConfigError("distribution size does not match the label set");
  }
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (dist.proportions[l] > 0 && (l >= templates.size() || !templates[static_cast<LabelId>(l)] ||
                                    templates[static_cast<LabelId>(l)]->templates.empty())) {
      throw ConfigError("label '" + labels[static_cast<LabelId>(l)].name +
                        "' has nonzero proportion but no templates");
    }
  }
  Corpus out;
  out.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<LabelId>(sample_categorical(rng, dist.proportions));
    const auto& entry = *templates[label];
    const Text& tmpl = entry.templates[uniform_below(rng, entry.templates.size())];
    const Text surface = entry.surface.generate(rng);
    if (!formats.verify(surface, label)) {
      throw ConfigError("generator for '" + labels[label].name + "' produced illegal surface '" +
                        to_utf8(surface) + "'");
    }
    const auto slot = tmpl.find(kSlot);
    LabeledSentence s;
    s.text = tmpl.substr(0, slot) + surface + tmpl.substr(slot + kSlot.size());
    s.spans.push_back({slot, slot + surface.size(), label});
    const auto found = extract_nsw(s.text);
    if (found.size() != 1 || found[0].start != slot || found[0].end != slot + surface.size()) {
      throw ConfigError("template '" + to_utf8(tmpl) + "' does not isolate its NSW '" +
                        to_utf8(surface) + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

enum class Augmentation { kDuplicate, kPadPrefix, kDigitJitter, kWindowShift };

inline Augmentation parse_augmentation(const std::string& name) {
  if (name == "duplicate") return Augmentation::kDuplicate;
  if (name == "pad_prefix") return Augmentation::kPadPrefix;
  if (name == "digit_jitter") return Augmentation::kDigitJitter;
  if (name == "window_shift") return Augmentation::kWindowShift;
  throw ConfigError("unknown oversampling strategy '" + name + "'");
}

struct ExpandOptions {
  std::set<Augmentation> strategies;
  double rare_threshold = 0.05;  // span-level proportion below which a label is rare
  std::size_t factor = 1;        // augmented copies per strategy per rare sentence
  std::size_t window = kDefaultWindow;
  std::uint64_t seed = 0;

  static std::set<Augmentation> parse(const std::vector<std::string>& names) {
    std::set<Augmentation> out;
    for (const auto& n : names) out.insert(parse_augmentation(n));
    return out;
  }
};

namespace detail {

inline bool in_any_span(const LabeledSentence& s, std::size_t p) {
  for (const auto& sp : s.spans) {
    if (p >= sp.start && p < sp.end) return true;
  }
  return false;
}

// Redraws digits of one span until the surface is still legal for its label.
// Leading nonzero digits stay nonzero. Leaves the span untouched if 20 draws
// all fail.
inline void jitter_span(LabeledSentence& s, const NSWSpan& sp, const FormatRegistry& formats,
                        Rng& rng) {
  const Text original(s.surface(sp));
  for (int attempt = 0; attempt < 20; ++attempt) {
    Text cand = original;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (!is_ascii_digit(cand[i]) || uniform01(rng) < 0.5) continue;
      const bool lead = i == 0 || !is_ascii_digit(cand[i - 1]);
      const bool keep_nonzero = lead && cand[i] != L'0' && i + 1 < cand.size() &&
                                is_ascii_digit(cand[i + 1]);
      cand[i] = static_cast<wchar_t>(L'0' + uniform_int(rng, keep_nonzero ? 1 : 0, 9));
    }
    if (sp.label && formats.verify(cand, *sp.label)) {
      std::copy(cand.begin(), cand.end(), s.text.begin() + static_cast<long>(sp.start));
      return;
    }
  }
}

}  // namespace detail

// Appends augmented copies of sentences that carry a rare label. The input
// sentences come first and are unchanged; labels of augmented spans are never
// modified.
inline Corpus oversample_expand(const Corpus& corpus, const ExpandOptions& opt,
                                const LabelSet& labels, const FormatRegistry& formats) {
  Corpus out = corpus;
  if (opt.strategies.empty() || corpus.empty()) return out;
  const auto counts = label_counts(corpus, labels.size());
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return out;
  std::vector<bool> rare(labels.size(), false);
  for (std::size_t l = 0; l < counts.size(); ++l) {
    rare[l] = counts[l] > 0 && static_cast<double>(counts[l]) / total < opt.rare_threshold;
  }
  Rng rng(opt.seed);
  for (const auto& s : corpus) {
    const NSWSpan* target = nullptr;
    for (const auto& sp : s.spans) {
      if (sp.label && rare[*sp.label]) {
        target = &sp;
        break;
      }
    }
    if (!target) continue;
    const std::size_t ti = static_cast<std::size_t>(target - s.spans.data());
    for (auto strategy : opt.strategies) {
      for (std::size_t k = 0; k < opt.factor; ++k) {
        LabeledSentence copy = s;
        NSWSpan& sp = copy.spans[ti];
        switch (strategy) {
          case Augmentation::kDuplicate:
            break;
          case Augmentation::kPadPrefix: {
            const std::size_t len = sp.length();
            const std::size_t left = len < opt.window ? (opt.window - len) / 2 : 0;
            const std::size_t ws = sp.start > left ? sp.start - left : 0;
            const std::size_t avail = sp.start - ws;
            if (avail == 0) continue;
            const auto pads = static_cast<std::size_t>(
                uniform_int(rng, 1, static_cast<long long>(std::min<std::size_t>(avail, 5))));
            for (std::size_t p = ws, done = 0; p < sp.start && done < pads; ++p) {
              if (detail::in_any_span(copy, p)) continue;
              copy.text[p] = kPadChar;
              ++done;
            }
            break;
          }
          case Augmentation::kDigitJitter:
            detail::jitter_span(copy, sp, formats, rng);
            break;
          case Augmentation::kWindowShift: {
            int shift = 0;
            while (shift == 0) shift = static_cast<int>(uniform_int(rng, -3, 3));
            sp.window_shift = shift;
            break;
          }
        }
        out.push_back(std::move(copy));
      }
    }
  }
  return out;
}

}  // namespace hybridtn
