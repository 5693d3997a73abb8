#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pausebench {

enum class TechniqueId {
  baseline,
  t1_standard,
  t2_instruction_augmented,
  t3_preprompt,
  t4_finetuned_plain,
  t5_pause_tuned,
};

enum class InjectionMode { none, standard, augmented };
enum class TemplateKind { plain, pause_aware };

struct Technique {
  TechniqueId id;
  InjectionMode injection;
  TemplateKind prompt_template;
  bool requires_finetuned_model;
};

std::string_view to_string(TechniqueId id);
std::optional<TechniqueId> parse_technique(std::string_view name);

// Baseline plus the five treatment arms, in that order.
const std::vector<Technique>& technique_catalog();
const Technique& technique(TechniqueId id);

inline constexpr std::string_view kPauseMarker = "<PAUSE>";
inline constexpr std::string_view kStandardInsertion = "\n<PAUSE>\n";
inline constexpr std::string_view kAugmentedInsertion =
    "\n<PAUSE> (stop and absorb the information you have just read)\n";

struct InjectedContext {
  std::string text;
  std::vector<std::size_t> pause_offsets;  // first byte of each "<PAUSE>"
  std::vector<std::size_t> insert_offsets; // where each insertion begins in `text`
};

// Appends a pause insertion after every paragraph. The bytes outside the
// insertions are untouched.
InjectedContext inject_pauses(std::string_view context, InjectionMode mode);

// Inverse of inject_pauses.
std::string strip_pauses(const InjectedContext& injected, InjectionMode mode);

std::string_view prompt_template(TemplateKind kind);
std::string_view judge_template();

enum class Role { system, user, assistant };
std::string_view to_string(Role role);

struct Message {
  Role role;
  std::string content;
  bool operator==(const Message&) const = default;
};

struct RenderedPrompt {
  std::vector<Message> messages;
  // Byte offsets of each injected "<PAUSE>" within the user message content.
  std::vector<std::size_t> pause_positions;
};

// Fills {context} and {input} once each, left to right, without rescanning
// substituted text.
std::string fill_template(std::string_view tmpl, std::string_view context, std::string_view input);

// `context` must already carry the injection for `tech`; pass the offsets
// from inject_pauses so they can be rebased onto the rendered message.
RenderedPrompt render_prompt(const Technique& tech, std::string_view context,
                             std::string_view question,
                             const std::vector<std::size_t>& context_pause_offsets = {});

// Like render_prompt but with an explicit template choice.
RenderedPrompt render_prompt(TemplateKind kind, std::string_view context,
                             std::string_view question,
                             const std::vector<std::size_t>& context_pause_offsets = {});

}  // namespace pausebench
