// Figure-of-speech labels and the reserved control vocabulary.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "mflag/common.hpp"

namespace mflag {

enum class Form : int { Literal = 0, Hyperbole, Idiom, Sarcasm, Metaphor, Simile };

inline constexpr int kNumForms = 6;

inline constexpr std::array<Form, kNumForms> kAllForms = {
    Form::Literal, Form::Hyperbole, Form::Idiom, Form::Sarcasm, Form::Metaphor, Form::Simile};

/// The five figurative forms, in canonical order.
inline constexpr std::array<Form, 5> kFigurativeForms = {
    Form::Hyperbole, Form::Idiom, Form::Sarcasm, Form::Metaphor, Form::Simile};

// Reserved vocabulary layout. Word tokens start at kFirstWordId.
inline constexpr int kPadId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kMaskId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kFirstFormId = 4;
inline constexpr int kFirstWordId = kFirstFormId + kNumForms;

inline constexpr std::string_view kPadToken = "[pad]";
inline constexpr std::string_view kEosToken = "[eos]";
inline constexpr std::string_view kMaskToken = "[mask]";
inline constexpr std::string_view kUnkToken = "[unk]";

inline constexpr std::array<std::string_view, kNumForms> kFormNames = {
    "LITERAL", "HYPERBOLE", "IDIOM", "SARCASM", "METAPHOR", "SIMILE"};

inline constexpr std::array<std::string_view, kNumForms> kFormTokens = {
    "[LITERAL]", "[HYPERBOLE]", "[IDIOM]", "[SARCASM]", "[METAPHOR]", "[SIMILE]"};

inline std::string_view form_name(Form f) { return kFormNames[static_cast<int>(f)]; }

inline std::string_view form_token(Form f) { return kFormTokens[static_cast<int>(f)]; }

inline int form_token_id(Form f) { return kFirstFormId + static_cast<int>(f); }

inline std::optional<Form> form_from_token_id(int id) {
  if (id < kFirstFormId || id >= kFirstWordId) return std::nullopt;
  return static_cast<Form>(id - kFirstFormId);
}

inline std::optional<Form> try_parse_form(std::string_view name) {
  for (int i = 0; i < kNumForms; ++i) {
    if (kFormNames[i] == name) return static_cast<Form>(i);
  }
  return std::nullopt;
}

inline Form parse_form(std::string_view name) {
  if (auto f = try_parse_form(name)) return *f;
  throw Error("unknown form name '" + std::string(name) + "'");
}

inline bool is_figurative(Form f) { return f != Form::Literal; }

/// True for [pad], [eos], [mask], [unk] and the six form codes.
inline bool is_control_token(std::string_view tok) {
  if (tok == kPadToken || tok == kEosToken || tok == kMaskToken || tok == kUnkToken) return true;
  for (auto t : kFormTokens) {
    if (t == tok) return true;
  }
  return false;
}

}  // namespace mflag
