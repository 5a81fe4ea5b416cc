#include "idcurate/attr_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "idcurate/error.hpp"
#include "idcurate/rng.hpp"
#include "io_util.hpp"

namespace idcurate::attr {

using detail::ordered_json;

const std::string* IdentityProfile::selection(std::string_view class_name) const {
  for (const auto& [cls, label] : selections)
    if (cls == class_name) return &label;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Config (de)serialization

namespace {

AttributeRef parse_ref(const ordered_json& j, const std::string& path, bool need_attribute) {
  AttributeRef ref;
  ref.class_name = detail::require_string(j, "class", path);
  if (auto it = j.find("attribute"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError(path + ".attribute: expected string");
    ref.attribute = it->get<std::string>();
  } else if (need_attribute) {
    throw ValidationError(path + ".attribute: missing field");
  }
  return ref;
}

ordered_json ref_to_json(const AttributeRef& ref) {
  ordered_json j;
  j["class"] = ref.class_name;
  if (ref.attribute) j["attribute"] = *ref.attribute;
  return j;
}

}  // namespace

AttributeConfig parse_config(std::string_view json_text) {
  const ordered_json root = detail::parse_json(json_text, "attribute config");
  if (!root.is_object()) throw ParseError("attribute config: top level must be an object", 1, 1);

  AttributeConfig config;
  if (auto it = root.find("description"); it != root.end() && it->is_string())
    config.description = it->get<std::string>();

  const auto& classes = detail::require(root, "classes", "config");
  if (!classes.is_array()) throw ValidationError("config.classes: expected array");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string path = "classes[" + std::to_string(i) + "]";
    const auto& c = classes[i];
    AttributeClass cls;
    cls.name = detail::require_string(c, "name", path);
    cls.inclusion_probability = detail::require_number(c, "inclusion_probability", path);
    const auto& attrs = detail::require(c, "attributes", path);
    if (!attrs.is_array()) throw ValidationError(path + ".attributes: expected array");
    for (std::size_t k = 0; k < attrs.size(); ++k) {
      const std::string apath = path + ".attributes[" + std::to_string(k) + "]";
      Attribute a;
      a.label = detail::require_string(attrs[k], "label", apath);
      a.weight = detail::require_number(attrs[k], "weight", apath);
      cls.attributes.push_back(std::move(a));
    }
    config.classes.push_back(std::move(cls));
  }

  if (auto it = root.find("clash_rules"); it != root.end()) {
    if (!it->is_array()) throw ValidationError("config.clash_rules: expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = "clash_rules[" + std::to_string(i) + "]";
      const auto& r = (*it)[i];
      ClashRule rule;
      rule.trigger = parse_ref(detail::require(r, "trigger", path), path + ".trigger", true);
      const auto& ex = detail::require(r, "excluded", path);
      if (!ex.is_array()) throw ValidationError(path + ".excluded: expected array");
      for (std::size_t k = 0; k < ex.size(); ++k)
        rule.excluded.push_back(
            parse_ref(ex[k], path + ".excluded[" + std::to_string(k) + "]", false));
      config.clash_rules.push_back(std::move(rule));
    }
  }
  return config;
}

AttributeConfig load_config(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  try {
    return parse_config(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const AttributeConfig& config) {
  ordered_json root;
  if (!config.description.empty()) root["description"] = config.description;
  root["classes"] = ordered_json::array();
  for (const auto& c : config.classes) {
    ordered_json jc;
    jc["name"] = c.name;
    jc["inclusion_probability"] = c.inclusion_probability;
    jc["attributes"] = ordered_json::array();
    for (const auto& a : c.attributes) jc["attributes"].push_back({{"label", a.label}, {"weight", a.weight}});
    root["classes"].push_back(std::move(jc));
  }
  root["clash_rules"] = ordered_json::array();
  for (const auto& r : config.clash_rules) {
    ordered_json jr;
    jr["trigger"] = ref_to_json(r.trigger);
    jr["excluded"] = ordered_json::array();
    for (const auto& e : r.excluded) jr["excluded"].push_back(ref_to_json(e));
    root["clash_rules"].push_back(std::move(jr));
  }
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Finding> validate_config(const AttributeConfig& config) {
  std::vector<Finding> out;
  auto add = [&](Severity s, std::string code, std::string where, std::string msg) {
    out.push_back({s, std::move(code), std::move(where), std::move(msg)});
  };

  std::unordered_map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < config.classes.size(); ++i) {
    const auto& c = config.classes[i];
    const std::string where = "classes[" + std::to_string(i) + "] '" + c.name + "'";
    if (c.name.empty()) add(Severity::error, "invalid_name", where, "class name is empty");
    if (!class_index.emplace(c.name, i).second)
      add(Severity::error, "duplicate_class", where, "duplicate class name '" + c.name + "'");
    if (!(c.inclusion_probability >= 0.0 && c.inclusion_probability <= 1.0))
      add(Severity::error, "probability_out_of_range", where,
          "probability out of range: inclusion_probability " +
              detail::format_double(c.inclusion_probability) + " not in [0, 1]");
    if (c.attributes.empty()) add(Severity::error, "empty_class", where, "class has no attributes");
    std::set<std::string> labels;
    for (const auto& a : c.attributes) {
      if (a.label.empty()) add(Severity::error, "invalid_name", where, "attribute label is empty");
      if (!labels.insert(a.label).second)
        add(Severity::error, "duplicate_attribute", where, "duplicate attribute '" + a.label + "'");
      if (!(a.weight > 0.0) || !std::isfinite(a.weight))
        add(Severity::error, "weight_not_positive", where,
            "weight of '" + a.label + "' must be a positive finite number");
    }
  }

  auto resolve = [&](const AttributeRef& ref) -> std::optional<std::size_t> {
    auto it = class_index.find(ref.class_name);
    if (it == class_index.end()) return std::nullopt;
    if (ref.attribute) {
      const auto& attrs = config.classes[it->second].attributes;
      if (std::none_of(attrs.begin(), attrs.end(),
                       [&](const Attribute& a) { return a.label == *ref.attribute; }))
        return std::nullopt;
    }
    return it->second;
  };
  auto describe = [](const AttributeRef& ref) {
    return ref.attribute ? ref.class_name + "=" + *ref.attribute : ref.class_name;
  };

  for (std::size_t r = 0; r < config.clash_rules.size(); ++r) {
    const auto& rule = config.clash_rules[r];
    const std::string where = "clash_rules[" + std::to_string(r) + "]";
    const auto trig = resolve(rule.trigger);
    if (!trig)
      add(Severity::error, "unknown_reference", where,
          "unknown reference in trigger: " + describe(rule.trigger));
    for (const auto& ex : rule.excluded) {
      const auto exi = resolve(ex);
      if (!exi) {
        add(Severity::error, "unknown_reference", where, "unknown reference in excluded: " + describe(ex));
        continue;
      }
      if (ex.class_name == rule.trigger.class_name &&
          (!ex.attribute || *ex.attribute == rule.trigger.attribute)) {
        add(Severity::error, "self_exclusion", where,
            "trigger " + describe(rule.trigger) + " is contained in its own excluded set");
        continue;
      }
      if (trig && *exi < *trig)
        add(Severity::warning, "backward_clash", where,
            "excluded class '" + ex.class_name + "' precedes trigger class '" +
                rule.trigger.class_name + "'; the trigger is suppressed instead of removing the earlier selection");
    }
  }
  return out;
}

bool has_errors(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(),
                     [](const Finding& f) { return f.severity == Severity::error; });
}

std::string format_identity_id(std::uint64_t generation_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id_%06llu", static_cast<unsigned long long>(generation_index));
  return buf;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

struct ResolvedRef {
  std::size_t cls;
  int attr;  // -1: whole class
};

/// Index-resolved form of a validated config.
struct CompiledConfig {
  std::vector<double> inclusion;
  std::vector<std::vector<double>> weights;
  // rules_by_trigger[class][attr] -> excluded refs of every rule with that trigger
  std::vector<std::vector<std::vector<ResolvedRef>>> excludes;

  explicit CompiledConfig(const AttributeConfig& config) {
    std::unordered_map<std::string, std::size_t> ci;
    const std::size_t nc = config.classes.size();
    inclusion.resize(nc);
    weights.resize(nc);
    excludes.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& cls = config.classes[c];
      ci.emplace(cls.name, c);
      inclusion[c] = cls.inclusion_probability;
      for (const auto& a : cls.attributes) weights[c].push_back(a.weight);
      excludes[c].resize(cls.attributes.size());
    }
    auto attr_index = [&](std::size_t c, const std::string& label) {
      const auto& attrs = config.classes[c].attributes;
      for (std::size_t k = 0; k < attrs.size(); ++k)
        if (attrs[k].label == label) return static_cast<int>(k);
      return -1;
    };
    for (const auto& rule : config.clash_rules) {
      const std::size_t tc = ci.at(rule.trigger.class_name);
      const int ta = attr_index(tc, *rule.trigger.attribute);
      for (const auto& ex : rule.excluded) {
        const std::size_t ec = ci.at(ex.class_name);
        excludes[tc][static_cast<std::size_t>(ta)].push_back(
            {ec, ex.attribute ? attr_index(ec, *ex.attribute) : -1});
      }
    }
  }
};

IdentityProfile sample_one(const AttributeConfig& config, const CompiledConfig& cc,
                           std::uint64_t master_seed, std::uint64_t index) {
  IdentityProfile p;
  p.generation_index = index;
  p.seed = derive_seed(master_seed, index);
  p.id = format_identity_id(index);
  Rng rng(p.seed);

  const std::size_t nc = config.classes.size();
  std::vector<char> class_excluded(nc, 0);
  std::vector<std::vector<char>> attr_excluded(nc);
  std::vector<int> chosen(nc, -1);
  for (std::size_t c = 0; c < nc; ++c) attr_excluded[c].assign(cc.weights[c].size(), 0);

  auto matches_selection = [&](const ResolvedRef& r) {
    return chosen[r.cls] >= 0 && (r.attr < 0 || chosen[r.cls] == r.attr);
  };

  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < nc; ++c) {
    // Inclusion draw always happens so the stream layout is fixed per class.
    const double u_incl = rng.uniform();
    if (class_excluded[c]) continue;
    if (!(u_incl < cc.inclusion[c])) continue;

    candidates.clear();
    double total = 0.0;
    for (std::size_t a = 0; a < cc.weights[c].size(); ++a) {
      if (attr_excluded[c][a]) continue;
      // An attribute whose rules would exclude an earlier selection is not
      // eligible; earlier selections are never retracted.
      const auto& ex = cc.excludes[c][a];
      if (std::any_of(ex.begin(), ex.end(), matches_selection)) continue;
      candidates.push_back(a);
      total += cc.weights[c][a];
    }
    if (candidates.empty()) {
      if (cc.inclusion[c] >= 1.0) p.unsatisfiable = true;
      continue;
    }
    const double x = rng.uniform() * total;
    double cum = 0.0;
    std::size_t pick = candidates.back();
    for (std::size_t a : candidates) {
      cum += cc.weights[c][a];
      if (x < cum) {
        pick = a;
        break;
      }
    }
    chosen[c] = static_cast<int>(pick);
    for (const auto& r : cc.excludes[c][pick]) {
      if (r.attr < 0)
        class_excluded[r.cls] = 1;
      else
        attr_excluded[r.cls][static_cast<std::size_t>(r.attr)] = 1;
    }
  }

  for (std::size_t c = 0; c < nc; ++c)
    if (chosen[c] >= 0)
      p.selections.emplace_back(config.classes[c].name,
                                config.classes[c].attributes[static_cast<std::size_t>(chosen[c])].label);
  return p;
}

}  // namespace

std::vector<IdentityProfile> sample_profiles(const AttributeConfig& config, std::size_t count,
                                             std::uint64_t master_seed, std::uint64_t first_index,
                                             int threads) {
  const auto findings = validate_config(config);
  if (has_errors(findings)) {
    std::string msg = "invalid attribute config:";
    for (const auto& f : findings)
      if (f.severity == Severity::error) msg += "\n  " + f.where + ": " + f.message;
    throw ValidationError(msg);
  }
  std::vector<IdentityProfile> out(count);
  if (count == 0) return out;
  const CompiledConfig cc(config);
  const auto n = static_cast<std::int64_t>(count);
  const int nt = threads > 0 ? threads : 1;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        sample_one(config, cc, master_seed, first_index + static_cast<std::uint64_t>(i));
  return out;
}

bool violates_clash_rules(const AttributeConfig& config, const IdentityProfile& profile) {
  for (const auto& rule : config.clash_rules) {
    const std::string* t = profile.selection(rule.trigger.class_name);
    if (!t || *t != *rule.trigger.attribute) continue;
    for (const auto& ex : rule.excluded) {
      const std::string* s = profile.selection(ex.class_name);
      if (s && (!ex.attribute || *s == *ex.attribute)) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Prompt templates

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  std::string lit;
  int depth = 0;
  auto flush = [&] {
    if (!lit.empty()) pieces_.push_back({Piece::literal, std::move(lit)});
    lit.clear();
  };
  for (std::size_t i = 0; i < text_.size(); ++i) {
    const char c = text_[i];
    if (c == '\\' && i + 1 < text_.size() &&
        (text_[i + 1] == '[' || text_[i + 1] == ']' || text_[i + 1] == '$' || text_[i + 1] == '\\')) {
      lit += text_[++i];
    } else if (c == '$' && i + 1 < text_.size() && text_[i + 1] == '{') {
      const std::size_t close = text_.find('}', i + 2);
      if (close == std::string::npos)
        throw ValidationError("prompt template: unterminated placeholder at offset " + std::to_string(i));
      std::string name = text_.substr(i + 2, close - i - 2);
      if (name.empty()) throw ValidationError("prompt template: empty placeholder at offset " + std::to_string(i));
      if (std::find(placeholders_.begin(), placeholders_.end(), name) != placeholders_.end())
        throw ValidationError("prompt template: placeholder ${" + name + "} appears more than once");
      flush();
      placeholders_.push_back(name);
      pieces_.push_back({Piece::placeholder, std::move(name)});
      i = close;
    } else if (c == '[') {
      flush();
      ++depth;
      pieces_.push_back({Piece::group_open, {}});
    } else if (c == ']') {
      if (depth == 0) throw ValidationError("prompt template: unbalanced ']' at offset " + std::to_string(i));
      flush();
      --depth;
      pieces_.push_back({Piece::group_close, {}});
    } else {
      lit += c;
    }
  }
  if (depth != 0) throw ValidationError("prompt template: unbalanced '['");
  flush();
}

void PromptTemplate::check_against(const AttributeConfig& config) const {
  std::vector<std::string> unknown;
  for (const auto& name : placeholders_)
    if (std::none_of(config.classes.begin(), config.classes.end(),
                     [&](const AttributeClass& c) { return c.name == name; }))
      unknown.push_back(name);
  if (!unknown.empty()) {
    std::string msg = "prompt template references unknown classes:";
    for (const auto& u : unknown) msg += " " + u;
    throw ValidationError(msg);
  }
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t'; }

void rstrip(std::string& s) {
  while (!s.empty() && is_space(s.back())) s.pop_back();
}

/// Joins `lit` onto `out` after a dropped placeholder, so that
/// "of a ${x}, in" does not leave doubled spaces or orphaned commas.
void join_after_gap(std::string& out, std::string_view lit) {
  rstrip(out);
  while (!lit.empty() && is_space(lit.front())) lit.remove_prefix(1);
  const bool out_open = out.empty() || out.back() == ',' || out.back() == '(' || out.back() == ';';
  if (!lit.empty() && (lit.front() == ',' || lit.front() == ';') && out_open) {
    lit.remove_prefix(1);
    while (!lit.empty() && is_space(lit.front())) lit.remove_prefix(1);
  }
  if (!lit.empty() && (lit.front() == '.' || lit.front() == '!' || lit.front() == '?') && !out.empty() &&
      (out.back() == ',' || out.back() == ';'))
    out.pop_back();
  if (lit.empty()) return;
  const char f = lit.front();
  if (!out.empty() && f != '.' && f != ',' && f != ';' && f != ':' && f != '!' && f != '?' && f != ')')
    out += ' ';
  out += lit;
}

std::string display_name(std::string_view class_name) {
  std::string s(class_name);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

}  // namespace

std::string PromptTemplate::render(const IdentityProfile& profile) const {
  struct Frame {
    std::string text;
    bool complete = true;
    bool gap = false;
  };
  std::vector<Frame> stack(1);
  for (const auto& piece : pieces_) {
    Frame& top = stack.back();
    switch (piece.kind) {
      case Piece::literal:
        if (top.gap) {
          join_after_gap(top.text, piece.value);
          top.gap = false;
        } else {
          top.text += piece.value;
        }
        break;
      case Piece::placeholder:
        if (const std::string* label = profile.selection(piece.value)) {
          top.text += *label;
        } else {
          top.complete = false;
          top.gap = true;
        }
        break;
      case Piece::group_open:
        stack.emplace_back();
        break;
      case Piece::group_close: {
        Frame inner = std::move(stack.back());
        stack.pop_back();
        if (inner.complete) stack.back().text += inner.text;
        break;
      }
    }
  }
  std::string out = std::move(stack.front().text);
  if (stack.front().gap) rstrip(out);

  std::string extra;
  for (const auto& [cls, label] : profile.selections) {
    if (std::find(placeholders_.begin(), placeholders_.end(), cls) != placeholders_.end()) continue;
    extra += extra.empty() ? "" : ", ";
    extra += display_name(cls) + " " + label;
  }
  if (!extra.empty()) {
    rstrip(out);
    if (!out.empty()) out += ' ';
    out += "Additional attributes: " + extra + ".";
  }
  return out;
}

std::string assemble_prompt(const IdentityProfile& profile, const PromptTemplate& tmpl) {
  return tmpl.render(profile);
}

const std::string& default_template_text() {
  static const std::string text =
      "A high-resolution frontal document-style portrait photo of a ${gender} person in their ${age}, "
      "of ${region_of_origin} origin[, with a ${body_type} build][, ${eye_shape} eyes][, ${lip_shape} lips]"
      "[, a ${nose_shape} nose][, a ${face_shape} face][, ${hairstyle} hairstyle][, ${hair_color} hair]"
      "[, wearing ${eyewear}][, ${facial_hair}][, ${skin_type} skin][, wearing a ${headwear}], "
      "neutral expression, uniform white background.";
  return text;
}

// ---------------------------------------------------------------------------
// JSON Lines

std::string profile_to_json_line(const IdentityProfile& p) {
  ordered_json j;
  j["id"] = p.id;
  j["generation_index"] = p.generation_index;
  j["seed"] = p.seed;
  j["unsatisfiable"] = p.unsatisfiable;
  j["selections"] = ordered_json::object();
  for (const auto& [cls, label] : p.selections) j["selections"][cls] = label;
  j["prompt"] = p.prompt;
  return j.dump();
}

IdentityProfile profile_from_json_line(std::string_view line) {
  const ordered_json j = detail::parse_json(line, "profile");
  IdentityProfile p;
  p.id = detail::require_string(j, "id", "profile");
  const auto& gi = detail::require(j, "generation_index", "profile");
  const auto& sd = detail::require(j, "seed", "profile");
  if (!gi.is_number_unsigned() || !sd.is_number_unsigned())
    throw ValidationError("profile " + p.id + ": generation_index/seed must be unsigned integers");
  p.generation_index = gi.get<std::uint64_t>();
  p.seed = sd.get<std::uint64_t>();
  if (auto it = j.find("unsatisfiable"); it != j.end()) p.unsatisfiable = it->get<bool>();
  const auto& sel = detail::require(j, "selections", "profile");
  if (!sel.is_object()) throw ValidationError("profile " + p.id + ": selections must be an object");
  for (auto it = sel.begin(); it != sel.end(); ++it) {
    if (!it.value().is_string()) throw ValidationError("profile " + p.id + ": selection must be a string");
    p.selections.emplace_back(it.key(), it.value().get<std::string>());
  }
  if (auto it = j.find("prompt"); it != j.end() && it->is_string()) p.prompt = it->get<std::string>();
  return p;
}

void write_profiles_jsonl(const std::filesystem::path& path, const std::vector<IdentityProfile>& profiles) {
  std::string out;
  for (const auto& p : profiles) {
    out += profile_to_json_line(p);
    out += '\n';
  }
  detail::write_file(path, out);
}

std::vector<IdentityProfile> read_profiles_jsonl(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  std::vector<IdentityProfile> out;
  std::size_t lineno = 0;
  for (const auto& line : detail::split_lines(text)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(profile_from_json_line(line));
    } catch (const ParseError&) {
      throw ParseError(path.string() + ": malformed profile", lineno, 1);
    }
  }
  return out;
}

}  // namespace idcurate::attr
