#pragma once

// Template-based annotation engine.
//
// Every segment is rendered in 8 styles (4 registers x with/without an
// explicit duration) and every trajectory in 17 descriptions: the 8 styles,
// each drawn twice with independent synonym/connective streams, plus one
// compact comma-joined summary in the concise register.
//
// Draw order per segment rendering, from the stream
// SplitMix64::derive(seed, {kSegmentStream, segment, style}):
//   verb; direction (all but concise); manner (natural, modes without speed
//   support); turn verb (when turning, all but concise); open-ended phrase
//   (natural without duration).
// Trajectory description d uses SplitMix64::derive(seed, {kTrajectoryStream, d})
// and draws, per segment in order: the connective joining it to the previous
// segment (all but the first), then that segment's clause draws as above.
// Descriptions 0..15 are style d / 2, variant d % 2; description 16 is the
// summary.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mocomp/protocol.hpp"
#include "mocomp/recipe.hpp"
#include "mocomp/registry.hpp"
#include "mocomp/rng.hpp"

namespace mocomp {

enum class Register { Instruction, Natural, Narrative, Concise };
std::string_view register_name(Register r);

struct StyleId {
  Register reg = Register::Instruction;
  bool with_duration = true;

  friend bool operator==(const StyleId&, const StyleId&) = default;
};

inline constexpr std::size_t kStyleCount = 8;
inline constexpr std::size_t kTrajectoryDescriptionCount = 17;

// Instruction+duration, instruction, natural+duration, natural, ...
const std::array<StyleId, kStyleCount>& all_styles();
std::string style_label(StyleId s);

struct SegmentIntent {
  int mode_index = 0;
  Movement movement = Movement::None;
  std::optional<double> turn_deg;
  double speed = 0.0;
  double duration_s = 0.0;
  std::optional<double> height;

  friend bool operator==(const SegmentIntent&, const SegmentIntent&) = default;
};

nlohmann::ordered_json intent_to_json(const SegmentIntent& intent);
SegmentIntent intent_from_json(const nlohmann::json& j);

// Dominant axis of a body-frame direction; zero maps to None.
Movement classify_direction(Vec2 dir);

// Sum of wrapped facing changes between consecutive commands, radians.
double accumulated_turn_rad(std::span<const MetaCommand> commands);

// Recovers a segment's intent from the effective commands issued inside it:
// mode from the tag, movement from the modal direction (or the sign of the
// accumulated facing rotation when standing), speed and height as the modal
// effective values, duration from the tag bounds.
SegmentIntent derive_intent(const Registry& registry, std::span<const MetaCommand> segment_commands,
                            const SegmentTag& tag);

enum class TurnSize { Slight, Partial, Quarter, Half, Full };
std::string_view turn_size_name(TurnSize t);

struct TurnBucket {
  TurnSize size = TurnSize::Slight;
  bool left = true;  // positive angles turn left (counter-clockwise)

  friend bool operator==(const TurnBucket&, const TurnBucket&) = default;
};

// Breakpoints at 15, 60, 120 and 240 degrees of magnitude.
TurnBucket turn_bucket(double turn_deg);

// Linear interpolation of speed over the mode's range into its tempo bank.
// Throws NoTempoBank when the mode has no speed support.
const std::string& tempo_adverb(const ModeSpec& mode, double speed);

// Throws UnknownMode.
const std::vector<std::string>& verb_bank_lookup(const Registry& registry, int mode_index);

// Linguistic content that is not tied to a single mode.
struct Banks {
  std::map<Movement, std::vector<std::string>> directions;
  std::map<Movement, std::string> concise_directions;
  std::map<std::string, std::vector<std::string>> manner;  // keyed by mode name
  std::vector<std::string> default_manner;
  std::vector<std::string> turn_verbs;
  std::map<TurnSize, std::string> turn_sizes;
  std::vector<std::string> connectives;
  std::vector<std::string> open_ended;

  // Throws BankLoadError.
  static Banks from_json(std::string_view text);
  static Banks load(const std::string& path);
  static const Banks& builtin();

  const std::vector<std::string>& manner_for(const ModeSpec& mode) const;
  const std::string& canonical_text() const { return canonical_; }

 private:
  std::string canonical_;
};

// Concrete lexical choices for one clause. Indices point into the banks.
struct ClauseDraws {
  std::size_t verb = 0;
  std::size_t direction = 0;
  std::size_t manner = 0;
  std::size_t turn_verb = 0;
  std::size_t open_ended = 0;
};

struct TrajectoryDescription {
  StyleId style;
  int variant = 0;  // 0 or 1 for the styled descriptions, -1 for the summary
  std::string text;
  std::vector<std::string> connectives;

  friend bool operator==(const TrajectoryDescription&, const TrajectoryDescription&) = default;
};

struct AnnotationSet {
  std::uint64_t seed = 0;
  std::vector<std::array<std::string, kStyleCount>> per_segment;
  std::vector<TrajectoryDescription> trajectory;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

// Canonical annotation document, e.g. annotations.json of a package.
std::string annotations_to_text(const AnnotationSet& set);
AnnotationSet annotations_from_text(std::string_view text);

class Annotator {
 public:
  static constexpr std::uint64_t kSegmentStream = 1;
  static constexpr std::uint64_t kTrajectoryStream = 2;

  Annotator(const Registry& registry, const Banks& banks) : registry_(&registry), banks_(&banks) {}

  ClauseDraws draw(const SegmentIntent& intent, StyleId style, SplitMix64& rng) const;
  std::string render_with(const SegmentIntent& intent, StyleId style, const ClauseDraws& draws) const;
  std::string render_segment(const SegmentIntent& intent, StyleId style, SplitMix64& rng) const;

  // Throws EmptyTrajectory.
  AnnotationSet render_trajectory(std::span<const SegmentIntent> intents, std::uint64_t seed) const;

 private:
  enum class Form { Imperative, Finite, Gerund, Keyword };
  std::string clause(const SegmentIntent& intent, StyleId style, Form form, const ClauseDraws& draws) const;
  std::string describe(std::span<const SegmentIntent> intents, StyleId style, SplitMix64& rng,
                       std::vector<std::string>& connectives) const;
  std::string summary(std::span<const SegmentIntent> intents, SplitMix64& rng) const;

  const Registry* registry_;
  const Banks* banks_;
};

// Verb phrase inflection on the head word.
std::string third_person(std::string_view phrase);
std::string gerund(std::string_view phrase);

}  // namespace mocomp
