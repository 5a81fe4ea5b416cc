#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace idcurate::attr {

struct Attribute {
  std::string label;
  double weight = 1.0;
};

struct AttributeClass {
  std::string name;
  double inclusion_probability = 1.0;
  std::vector<Attribute> attributes;
};

/// Either a whole class (attribute empty) or one attribute of a class.
struct AttributeRef {
  std::string class_name;
  std::optional<std::string> attribute;

  bool operator==(const AttributeRef&) const = default;
};

/// Selecting `trigger` forbids every entry of `excluded` in the same profile.
struct ClashRule {
  AttributeRef trigger;  // attribute always set
  std::vector<AttributeRef> excluded;
};

struct AttributeConfig {
  std::vector<AttributeClass> classes;
  std::vector<ClashRule> clash_rules;
  std::string description;
};

enum class Severity { error, warning };

struct Finding {
  Severity severity = Severity::error;
  std::string code;     // e.g. "probability_out_of_range"
  std::string where;    // e.g. "classes[2].inclusion_probability"
  std::string message;
};

/// Selections keep config class order; classes not present were skipped
/// (not included, or excluded by a clash).
struct IdentityProfile {
  std::string id;
  std::vector<std::pair<std::string, std::string>> selections;
  std::string prompt;
  std::uint64_t seed = 0;
  std::uint64_t generation_index = 0;
  bool unsatisfiable = false;

  const std::string* selection(std::string_view class_name) const;
  bool operator==(const IdentityProfile&) const = default;
};

AttributeConfig parse_config(std::string_view json_text);
AttributeConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const AttributeConfig& config);

/// Errors mean the config must not be sampled. Warnings flag rules whose
/// excluded class precedes the trigger class in config order.
std::vector<Finding> validate_config(const AttributeConfig& config);
bool has_errors(const std::vector<Finding>& findings);

std::string format_identity_id(std::uint64_t generation_index);

/// Throws ValidationError if validate_config reports errors.
/// `first_index` supports resuming or sharding a run.
std::vector<IdentityProfile> sample_profiles(const AttributeConfig& config,
                                             std::size_t count,
                                             std::uint64_t master_seed,
                                             std::uint64_t first_index = 0,
                                             int threads = 0);

/// True when `profile` selects two attributes forbidden by some rule.
bool violates_clash_rules(const AttributeConfig& config, const IdentityProfile& profile);

// -- prompt templates -------------------------------------------------------

/// Template text with `${class}` placeholders. A `[...]` group is emitted
/// only when every placeholder inside it has a selection; a bare unselected
/// placeholder is dropped and the surrounding whitespace/commas tidied.
/// Selections whose class never appears are appended as a trailing clause.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);

  /// Placeholder class names in order of first appearance.
  const std::vector<std::string>& placeholders() const { return placeholders_; }
  const std::string& text() const { return text_; }

  /// Throws ValidationError naming every placeholder that is not a class.
  void check_against(const AttributeConfig& config) const;

  std::string render(const IdentityProfile& profile) const;

 private:
  struct Piece {
    enum Kind { literal, placeholder, group_open, group_close } kind;
    std::string value;
  };
  std::string text_;
  std::vector<Piece> pieces_;
  std::vector<std::string> placeholders_;
};

/// The template used when none is supplied; covers the shipped 14 classes.
const std::string& default_template_text();

std::string assemble_prompt(const IdentityProfile& profile, const PromptTemplate& tmpl);

// -- JSON Lines ------------------------------------------------------------

std::string profile_to_json_line(const IdentityProfile& profile);
IdentityProfile profile_from_json_line(std::string_view line);
void write_profiles_jsonl(const std::filesystem::path& path,
                          const std::vector<IdentityProfile>& profiles);
std::vector<IdentityProfile> read_profiles_jsonl(const std::filesystem::path& path);

}  // namespace idcurate::attr
