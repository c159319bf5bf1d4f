#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mflag/corpus.hpp"
#include "mflag/form.hpp"

namespace mflag {

/// Token <-> id table. Ids 0..9 are the reserved control tokens and form
/// codes; word tokens follow in sorted order.
class Vocabulary {
 public:
  Vocabulary() {
    add(std::string(kPadToken));
    add(std::string(kEosToken));
    add(std::string(kMaskToken));
    add(std::string(kUnkToken));
    for (auto t : kFormTokens) add(std::string(t));
  }

  static Vocabulary build(const std::vector<TaggedText>& texts) {
    std::set<std::string> words;
    for (const auto& t : texts) {
      for (const auto& tok : t.tokens) {
        if (!is_control_token(tok)) words.insert(tok);
      }
    }
    Vocabulary v;
    for (const auto& w : words) v.add(w);
    return v;
  }

  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    if (tokens.size() < static_cast<std::size_t>(kFirstWordId)) throw Error("vocabulary missing reserved tokens");
    for (std::size_t i = 0; i < static_cast<std::size_t>(kFirstWordId); ++i) {
      if (tokens[i] != v.tokens_[i]) throw Error("vocabulary reserved token mismatch at id " + std::to_string(i));
    }
    for (std::size_t i = kFirstWordId; i < tokens.size(); ++i) v.add(tokens[i]);
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int id(const std::string& tok) const {
    auto it = ids_.find(tok);
    return it == ids_.end() ? kUnkId : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw Error("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  /// "[FORM] t1 .. tn [eos]" as ids.
  std::vector<int> encode(const TaggedText& t) const {
    std::vector<int> ids;
    ids.reserve(t.tokens.size() + 2);
    ids.push_back(form_token_id(t.form));
    for (const auto& tok : t.tokens) ids.push_back(id(tok));
    ids.push_back(kEosId);
    return ids;
  }

  /// Word tokens of an id sequence; control tokens are dropped.
  std::vector<std::string> words(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    for (int i : ids) {
      if (i >= kFirstWordId) out.push_back(token(i));
    }
    return out;
  }

 private:
  void add(std::string tok) {
    if (ids_.count(tok)) return;
    ids_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(std::move(tok));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace mflag
