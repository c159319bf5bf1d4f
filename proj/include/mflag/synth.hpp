// Desk-scale synthetic benchmark: a small template grammar of literal
// sentences and one deterministic rewrite per figurative form.
#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mflag/common.hpp"
#include "mflag/corpus.hpp"
#include "mflag/form.hpp"

namespace mflag {

struct SplitCorpus {
  std::vector<ParallelPair> train;
  std::vector<ParallelPair> valid;
  std::vector<ParallelPair> test;
};

using FormCorpora = std::map<Form, SplitCorpus>;

namespace synth {

struct Verb {
  std::string_view literal;
  std::string_view idiom;     // fixed phrase substitution
  std::string_view metaphor;  // verb mapping
};

struct Adjective {
  std::string_view plain;
  std::string_view antonym;
  std::string_view superlative;
  std::string_view vehicle;  // "like a <vehicle>"
};

// Open-class slots are wide so that rewriting has to copy rather than
// memorise sentence content.
inline constexpr std::array<std::string_view, 32> kSubjects = {
    "teacher", "doctor", "farmer", "child",   "driver", "singer",  "writer",  "pilot",
    "baker",   "student", "nurse", "painter", "lawyer", "sailor",  "miner",   "guard",
    "dancer",  "cook",    "judge", "monk",    "poet",   "tailor",  "hunter",  "clerk",
    "actor",   "barber",  "coach", "waiter",  "vendor", "plumber", "soldier", "priest"};

inline constexpr std::array<std::string_view, 32> kObjects = {
    "house",  "car",    "box",    "chair",  "table",  "boat",   "lamp",   "book",
    "door",   "window", "bag",    "bike",   "clock",  "bottle", "carpet", "mirror",
    "basket", "fence",  "bench",  "ladder", "kettle", "wagon",  "piano",  "jacket",
    "bucket", "shovel", "blanket", "pillow", "teapot", "helmet", "drawer", "curtain"};

inline constexpr std::array<Verb, 10> kVerbs = {{
    {"liked", "took a shine to", "devoured"},
    {"watched", "kept an eye on", "drank"},
    {"found", "came across", "unearthed"},
    {"cleaned", "spruced up", "bathed"},
    {"carried", "shouldered the burden of", "cradled"},
    {"moved", "set in motion", "herded"},
    {"painted", "gave a facelift to", "dressed"},
    {"bought", "splashed out on", "harvested"},
    {"sold", "parted ways with", "surrendered"},
    {"fixed", "breathed new life into", "healed"},
}};

inline constexpr std::array<Adjective, 10> kAdjectives = {{
    {"big", "small", "biggest", "mountain"},
    {"small", "big", "smallest", "mouse"},
    {"old", "new", "oldest", "fossil"},
    {"new", "old", "newest", "penny"},
    {"clean", "dirty", "cleanest", "whistle"},
    {"dirty", "clean", "dirtiest", "pig"},
    {"warm", "cold", "warmest", "fire"},
    {"cold", "warm", "coldest", "glacier"},
    {"bright", "dark", "brightest", "star"},
    {"dark", "bright", "darkest", "cave"},
}};

inline constexpr std::array<std::string_view, 12> kPlaces = {
    "near the river", "in the town", "at night",        "on monday",   "after lunch", "by the sea",
    "in the morning", "at the market", "behind the barn", "last winter", "for a friend", "with great care"};

// Sentence openers carried through every rewrite unchanged.
inline constexpr std::array<std::string_view, 6> kOpeners = {
    "well ,", "today ,", "honestly ,", "in fact ,", "as expected ,", "once again ,"};

inline constexpr std::string_view kHyperboleMarker = "ever";
inline constexpr std::string_view kSarcasmPrefix = "oh great ,";
inline constexpr std::string_view kSimileMarker = "like a";

/// Slot values of one literal sentence.
struct Frame {
  std::size_t subject = 0;
  std::size_t verb = 0;
  std::size_t adjective = 0;
  std::size_t object = 0;
  int place = -1;   // -1 = no place phrase
  int opener = -1;  // -1 = no opener
  // A second figure present on both sides of a pair, as in mined paraphrase
  // data where "literal" only means "not the form being collected".
  Form background = Form::Literal;
};

/// Figures that rewrite the same slot cannot be combined.
inline bool compatible(Form a, Form b) {
  auto clash = [&](Form x, Form y) { return (a == x && b == y) || (a == y && b == x); };
  return a != b && !clash(Form::Hyperbole, Form::Sarcasm) && !clash(Form::Idiom, Form::Metaphor);
}

/// Share of frames given a background figure. Texts often combine figures, so
/// a form's "literal" side is only literal with respect to that form.
inline constexpr double kBackgroundShare = 0.3;

inline void assign_background(Frame& fr, Form form, Rng& rng) {
  if (rng.uniform() >= kBackgroundShare) return;
  std::vector<Form> options;
  for (Form g : kFigurativeForms) {
    if (compatible(form, g)) options.push_back(g);
  }
  fr.background = options[rng.below(options.size())];
}

inline Frame draw_frame(Rng& rng) {
  Frame f;
  f.subject = rng.below(kSubjects.size());
  f.verb = rng.below(kVerbs.size());
  f.adjective = rng.below(kAdjectives.size());
  f.object = rng.below(kObjects.size());
  f.place = rng.uniform() < 0.5 ? -1 : static_cast<int>(rng.below(kPlaces.size()));
  f.opener = rng.uniform() < 0.7 ? -1 : static_cast<int>(rng.below(kOpeners.size()));
  return f;
}

inline void append(std::vector<std::string>& out, std::string_view phrase) {
  for (auto& t : split_ws(std::string(phrase))) out.push_back(std::move(t));
}

/// Renders a frame in the requested form, on top of the frame's background
/// figure.
inline std::vector<std::string> render(const Frame& fr, Form form) {
  const auto& verb = kVerbs[fr.verb];
  const auto& adj = kAdjectives[fr.adjective];
  const auto has = [&](Form f) { return form == f || fr.background == f; };
  std::vector<std::string> out;
  if (has(Form::Sarcasm)) append(out, kSarcasmPrefix);
  if (fr.opener >= 0) append(out, kOpeners[static_cast<std::size_t>(fr.opener)]);
  out.emplace_back("the");
  out.emplace_back(kSubjects[fr.subject]);
  if (has(Form::Idiom)) append(out, verb.idiom);
  else if (has(Form::Metaphor)) out.emplace_back(verb.metaphor);
  else out.emplace_back(verb.literal);
  out.emplace_back("the");
  if (has(Form::Hyperbole)) out.emplace_back(adj.superlative);
  else if (has(Form::Sarcasm)) out.emplace_back(adj.antonym);
  else out.emplace_back(adj.plain);
  out.emplace_back(kObjects[fr.object]);
  if (has(Form::Hyperbole)) out.emplace_back(kHyperboleMarker);
  if (fr.place >= 0) append(out, kPlaces[static_cast<std::size_t>(fr.place)]);
  if (has(Form::Simile)) {
    append(out, kSimileMarker);
    out.emplace_back(adj.vehicle);
  }
  out.emplace_back(".");
  return out;
}

inline bool contains_phrase(const std::vector<std::string>& toks, std::string_view phrase) {
  const auto p = split_ws(std::string(phrase));
  if (p.empty() || p.size() > toks.size()) return false;
  for (std::size_t i = 0; i + p.size() <= toks.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < p.size() && match; ++j) match = toks[i + j] == p[j];
    if (match) return true;
  }
  return false;
}

}  // namespace synth

/// Exact-string test for the marker transformation of a figurative form.
inline bool has_form_marker(Form form, const std::vector<std::string>& toks) {
  using namespace synth;
  switch (form) {
    case Form::Hyperbole: return contains_phrase(toks, kHyperboleMarker);
    case Form::Idiom:
      for (const auto& v : kVerbs) {
        if (contains_phrase(toks, v.idiom)) return true;
      }
      return false;
    case Form::Sarcasm: return contains_phrase(toks, kSarcasmPrefix);
    case Form::Metaphor:
      for (const auto& v : kVerbs) {
        if (contains_phrase(toks, v.metaphor)) return true;
      }
      return false;
    case Form::Simile: return contains_phrase(toks, kSimileMarker);
    case Form::Literal: break;
  }
  return false;
}

namespace synth {

/// Draws `n` distinct frames (distinct as literal sentences).
inline std::vector<Frame> draw_frames(std::size_t n, Rng& rng) {
  std::vector<Frame> frames;
  std::set<std::vector<std::string>> seen;
  std::size_t attempts = 0;
  while (frames.size() < n) {
    Frame f = draw_frame(rng);
    // the grammar has ~10^5 sentences; past that, allow repeats
    if (seen.insert(render(f, Form::Literal)).second || ++attempts > 50 * n) frames.push_back(f);
  }
  return frames;
}

}  // namespace synth

/// Generates n_per_form literal->figurative pairs per figurative form, split
/// 80/10/10 into train/valid/test. Some pairs carry a second, compatible
/// figure on both sides.
inline FormCorpora synth_corpus(std::size_t n_per_form, std::uint64_t seed) {
  if (n_per_form < 1) throw Error("n_per_form must be >= 1");
  FormCorpora out;
  for (Form form : kFigurativeForms) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(form)));
    auto frames = synth::draw_frames(n_per_form, rng);
    std::vector<ParallelPair> pairs;
    pairs.reserve(n_per_form);
    for (auto& fr : frames) {
      synth::assign_background(fr, form, rng);
      pairs.push_back({{Form::Literal, synth::render(fr, Form::Literal)}, {form, synth::render(fr, form)}});
    }
    const std::size_t n_train = n_per_form * 8 / 10;
    const std::size_t n_valid = n_per_form / 10;
    SplitCorpus split;
    split.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.valid.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
                       pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    split.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), pairs.end());
    out.emplace(form, std::move(split));
  }
  return out;
}

/// Candidate paraphrase pool standing in for mined generic paraphrase data.
/// Every candidate is tagged LITERAL -> form; only some are genuine: the rest
/// are literal paraphrases, pairs with a figurative source, or rewrites into
/// a different form. Classifier scoring plus thresholding must separate them.
inline std::map<Form, std::vector<ParallelPair>> synth_paraphrase_pool(std::size_t n_per_form,
                                                                       std::uint64_t seed) {
  std::map<Form, std::vector<ParallelPair>> out;
  for (Form form : kFigurativeForms) {
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(form)));
    auto frames = synth::draw_frames(n_per_form, rng);
    std::vector<ParallelPair> pool;
    pool.reserve(n_per_form);
    for (auto& fr : frames) {
      synth::assign_background(fr, form, rng);
      const double u = rng.uniform();
      std::vector<std::string> src = synth::render(fr, Form::Literal);
      std::vector<std::string> tgt;
      if (u < 0.6) {
        tgt = synth::render(fr, form);
      } else if (u < 0.8) {
        synth::Frame alt = fr;
        alt.place = alt.place < 0 ? static_cast<int>(rng.below(synth::kPlaces.size())) : -1;
        tgt = synth::render(alt, Form::Literal);
      } else if (u < 0.9) {
        src = synth::render(fr, form);
        tgt = synth::render(fr, form);
      } else {
        Form other = kFigurativeForms[rng.below(kFigurativeForms.size())];
        if (other == form) other = kFigurativeForms[(static_cast<int>(form)) % 5];
        synth::Frame plain = fr;
        plain.background = Form::Literal;
        tgt = synth::render(plain, other);
      }
      pool.push_back({{Form::Literal, std::move(src)}, {form, std::move(tgt)}});
    }
    out.emplace(form, std::move(pool));
  }
  return out;
}

}  // namespace mflag
