#pragma once

// Attribute schema, patterns and groups.
//
// A pattern is a string of d slots, one per attribute of interest, where each
// slot is either a value index or unspecified ("X").  Groups are patterns with
// exactly the slots of interest specified.

#include "coverage/errors.hpp"

#include <algorithm>
#include <compare>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coverage {

using ValueIndex = int;
inline constexpr ValueIndex kUnspecified = -1;

// One value index per attribute; kUnspecified where the label is unknown.
using Labels = std::vector<ValueIndex>;

struct Attribute {
    std::string name;
    std::vector<std::string> values;

    std::size_t cardinality() const { return values.size(); }
    bool operator==(const Attribute&) const = default;
};

class AttributeSchema {
public:
    AttributeSchema() = default;

    explicit AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
        std::set<std::string> names;
        for (const auto& a : attributes_) {
            if (a.name.empty()) throw ConfigError("attribute with empty name");
            if (!names.insert(a.name).second) throw ConfigError("duplicate attribute '" + a.name + "'");
            if (a.values.size() < 2)
                throw ConfigError("attribute '" + a.name + "' needs at least 2 values");
            std::set<std::string> seen;
            for (const auto& v : a.values) {
                if (v.empty() || v == "X")
                    throw ConfigError("attribute '" + a.name + "' has reserved or empty value name");
                if (!seen.insert(v).second)
                    throw ConfigError("attribute '" + a.name + "' has duplicate value '" + v + "'");
            }
        }
    }

    std::size_t size() const { return attributes_.size(); }
    bool empty() const { return attributes_.empty(); }
    const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
    std::span<const Attribute> attributes() const { return attributes_; }

    std::size_t cardinality(std::size_t i) const { return attributes_.at(i).cardinality(); }

    std::optional<std::size_t> find_attribute(std::string_view name) const {
        for (std::size_t i = 0; i < attributes_.size(); ++i)
            if (attributes_[i].name == name) return i;
        return std::nullopt;
    }

    std::optional<ValueIndex> find_value(std::size_t attr, std::string_view value) const {
        const auto& vals = attributes_.at(attr).values;
        auto it = std::find(vals.begin(), vals.end(), value);
        if (it == vals.end()) return std::nullopt;
        return static_cast<ValueIndex>(it - vals.begin());
    }

    ValueIndex value_index(std::size_t attr, std::string_view value) const {
        if (auto v = find_value(attr, value)) return *v;
        throw ConfigError("unknown value '" + std::string(value) + "' for attribute '" +
                          attributes_.at(attr).name + "'");
    }

    const std::string& value_name(std::size_t attr, ValueIndex v) const {
        return attributes_.at(attr).values.at(static_cast<std::size_t>(v));
    }

    // Number of fully-specified subgroups, prod(sigma_i).
    std::size_t leaf_count() const {
        return std::accumulate(attributes_.begin(), attributes_.end(), std::size_t{1},
                               [](std::size_t acc, const Attribute& a) { return acc * a.cardinality(); });
    }

    // Number of patterns, prod(sigma_i + 1).
    std::size_t pattern_count() const {
        return std::accumulate(attributes_.begin(), attributes_.end(), std::size_t{1},
                               [](std::size_t acc, const Attribute& a) { return acc * (a.cardinality() + 1); });
    }

    bool operator==(const AttributeSchema&) const = default;

private:
    std::vector<Attribute> attributes_;
};

class Pattern {
public:
    Pattern() = default;
    explicit Pattern(std::size_t d) : slots_(d, kUnspecified) {}
    explicit Pattern(std::vector<ValueIndex> slots) : slots_(std::move(slots)) {}

    // Pattern with only slot `attr` specified.
    static Pattern single(std::size_t d, std::size_t attr, ValueIndex v) {
        Pattern p(d);
        p.slots_.at(attr) = v;
        return p;
    }

    std::size_t size() const { return slots_.size(); }
    ValueIndex operator[](std::size_t i) const { return slots_[i]; }
    std::span<const ValueIndex> slots() const { return slots_; }

    bool specified(std::size_t i) const { return slots_.at(i) != kUnspecified; }

    std::size_t level() const {
        return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(),
                                                      [](ValueIndex v) { return v != kUnspecified; }));
    }

    std::vector<std::size_t> specified_slots() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i] != kUnspecified) out.push_back(i);
        return out;
    }

    Pattern with(std::size_t i, ValueIndex v) const {
        Pattern p = *this;
        p.slots_.at(i) = v;
        return p;
    }

    Pattern without(std::size_t i) const { return with(i, kUnspecified); }

    // True if every item matching `other` also matches *this (ancestor-or-self).
    bool generalizes(const Pattern& other) const {
        if (other.size() != size()) return false;
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i] != kUnspecified && slots_[i] != other.slots_[i]) return false;
        return true;
    }

    void validate(const AttributeSchema& schema) const {
        if (slots_.size() != schema.size())
            throw ConfigError("pattern has " + std::to_string(slots_.size()) + " slots, schema has " +
                              std::to_string(schema.size()) + " attributes");
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            const auto v = slots_[i];
            if (v != kUnspecified && (v < 0 || static_cast<std::size_t>(v) >= schema.cardinality(i)))
                throw ConfigError("pattern slot " + std::to_string(i) + " out of range");
        }
    }

    auto operator<=>(const Pattern&) const = default;
    bool operator==(const Pattern&) const = default;

private:
    std::vector<ValueIndex> slots_;
};

// "X"-notation: value names concatenated, "X" for unspecified slots.
inline std::string to_x_notation(const AttributeSchema& schema, const Pattern& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i)
        out += p.specified(i) ? schema.value_name(i, p[i]) : std::string("X");
    return out;
}

// Human-readable name: "F", "F-Black", or "all" for the level-0 pattern.
inline std::string display_name(const AttributeSchema& schema, const Pattern& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!p.specified(i)) continue;
        if (!out.empty()) out += '-';
        out += schema.value_name(i, p[i]);
    }
    return out.empty() ? std::string("all") : out;
}

// Unambiguous "attr=value,attr=value" rendering used in fingerprints.
inline std::string to_assignment_string(const AttributeSchema& schema, const Pattern& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!p.specified(i)) continue;
        if (!out.empty()) out += ',';
        out += schema.attribute(i).name + "=" + schema.value_name(i, p[i]);
    }
    return out;
}

// Accepts "attr=value,attr=value" or a bare value name that occurs in exactly
// one attribute ("F").
inline Pattern parse_pattern(const AttributeSchema& schema, std::string_view text) {
    Pattern p(schema.size());
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        auto part = text.substr(pos, comma - pos);
        pos = comma + 1;
        if (part.empty()) {
            if (comma == text.size()) break;
            continue;
        }
        if (auto eq = part.find('='); eq != std::string_view::npos) {
            auto attr = schema.find_attribute(part.substr(0, eq));
            if (!attr) throw ConfigError("unknown attribute in '" + std::string(part) + "'");
            p = p.with(*attr, schema.value_index(*attr, part.substr(eq + 1)));
        } else {
            std::optional<std::size_t> hit;
            for (std::size_t i = 0; i < schema.size(); ++i) {
                if (schema.find_value(i, part)) {
                    if (hit) throw ConfigError("value '" + std::string(part) + "' is ambiguous; use attr=value");
                    hit = i;
                }
            }
            if (!hit) throw ConfigError("unknown value '" + std::string(part) + "'");
            p = p.with(*hit, schema.value_index(*hit, part));
        }
    }
    return p;
}

struct Group {
    Pattern pattern;
    std::string name;

    bool operator==(const Group& o) const { return pattern == o.pattern; }
};

inline Group make_group(const AttributeSchema& schema, Pattern p) {
    p.validate(schema);
    auto name = display_name(schema, p);
    return Group{std::move(p), std::move(name)};
}

// One group per value of attribute `attr`.
inline std::vector<Group> groups_of_attribute(const AttributeSchema& schema, std::size_t attr) {
    std::vector<Group> out;
    for (std::size_t v = 0; v < schema.cardinality(attr); ++v)
        out.push_back(make_group(schema, Pattern::single(schema.size(), attr, static_cast<ValueIndex>(v))));
    return out;
}

// All fully-specified subgroups in lexicographic slot order.
inline std::vector<Group> fully_specified_groups(const AttributeSchema& schema) {
    std::vector<Group> out;
    const auto d = schema.size();
    if (d == 0) return out;
    std::vector<ValueIndex> slots(d, 0);
    while (true) {
        out.push_back(make_group(schema, Pattern(slots)));
        std::size_t i = d;
        while (i > 0) {
            --i;
            if (static_cast<std::size_t>(++slots[i]) < schema.cardinality(i)) break;
            slots[i] = 0;
            if (i == 0) return out;
        }
    }
}

// True iff every specified slot of `p` equals the item's value.
inline bool match(std::span<const ValueIndex> labels, const Pattern& p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == kUnspecified) continue;
        if (i >= labels.size() || labels[i] == kUnspecified)
            throw PartialLabelError("item is missing a label for attribute slot " + std::to_string(i));
        if (labels[i] != p[i]) return false;
    }
    return true;
}

} // namespace coverage
