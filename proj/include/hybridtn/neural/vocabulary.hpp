#pragma once

#include <algorithm>
#include <set>
#include <unordered_map>
#include <vector>

#include "hybridtn/corpus_types.hpp"
#include "hybridtn/error.hpp"

namespace hybridtn::neural {

// Character vocabulary. Ids 0 and 1 are reserved for padding and unknown
// characters (which one is which depends on pad_id); real characters follow
// in code point order.
class Vocabulary {
 public:
  static constexpr wchar_t kReserved = static_cast<wchar_t>(0xFFFFFFFF);

  Vocabulary() : Vocabulary(1) {}

  explicit Vocabulary(int pad_id) : pad_id_(pad_id), unk_id_(pad_id == 1 ? 0 : 1) {
    if (pad_id != 0 && pad_id != 1) throw ConfigError("pad_id must be 0 or 1");
    chars_.assign(2, kReserved);
  }

  static Vocabulary build(const Corpus& corpus, int pad_id = 1) {
    std::set<wchar_t> seen;
    for (const auto& s : corpus) {
      for (wchar_t c : s.text) {
        if (c != kPadChar) seen.insert(c);
      }
    }
    Vocabulary v(pad_id);
    for (wchar_t c : seen) v.add(c);
    return v;
  }

  // From an id-ordered character list; the two reserved slots hold kReserved.
  static Vocabulary from_chars(const std::vector<wchar_t>& chars, int pad_id) {
    if (chars.size() < 2 || chars[0] != kReserved || chars[1] != kReserved) {
      throw ValidationError("vocabulary must start with two reserved slots");
    }
    Vocabulary v(pad_id);
    for (std::size_t i = 2; i < chars.size(); ++i) {
      if (v.add(chars[i]) != static_cast<int>(i)) {
        throw ValidationError("duplicate character in vocabulary");
      }
    }
    return v;
  }

  int add(wchar_t c) {
    auto [it, inserted] = ids_.emplace(c, static_cast<int>(chars_.size()));
    if (inserted) chars_.push_back(c);
    return it->second;
  }

  int id(wchar_t c) const {
    if (c == kPadChar) return pad_id_;
    auto it = ids_.find(c);
    return it == ids_.end() ? unk_id_ : it->second;
  }

  // Character of a regular id; reserved ids map to kReserved.
  wchar_t character(int id) const { return chars_.at(static_cast<std::size_t>(id)); }

  int pad_id() const noexcept { return pad_id_; }
  int unk_id() const noexcept { return unk_id_; }
  std::size_t size() const noexcept { return chars_.size(); }
  const std::vector<wchar_t>& chars() const noexcept { return chars_; }

  std::vector<int> encode(const ContextWindow& w) const {
    std::vector<int> out(w.width());
    for (std::size_t i = 0; i < w.width(); ++i) out[i] = w.pad_mask[i] ? pad_id_ : id(w.chars[i]);
    return out;
  }

 private:
  int pad_id_;
  int unk_id_;
  std::vector<wchar_t> chars_;
  std::unordered_map<wchar_t, int> ids_;
};

}  // namespace hybridtn::neural
