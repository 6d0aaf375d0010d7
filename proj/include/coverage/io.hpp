#pragma once

// Dataset manifest (JSON) and CSV loaders.
//
// Manifest:
//   { "schema": {"attributes": [{"name": "gender", "values": ["F", "M"]}]},
//     "items": [{"id": "i1", "image": "img/1.jpg",
//                "truth": {"gender": "F"}, "predicted": {"gender": "X"}}] }
//
// CSV: header row with columns id, image, truth.<attr>, predicted.<attr>.
// "X" (or an empty cell) marks an unspecified value.

#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/schema.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace coverage {

using json = nlohmann::json;

inline json schema_to_json(const AttributeSchema& schema) {
    json attrs = json::array();
    for (const auto& a : schema.attributes()) attrs.push_back({{"name", a.name}, {"values", a.values}});
    return json{{"attributes", attrs}};
}

inline AttributeSchema schema_from_json(const json& j) {
    if (!j.is_object() || !j.contains("attributes") || !j["attributes"].is_array())
        throw ConfigError("schema must be an object with an 'attributes' array");
    std::vector<Attribute> attrs;
    for (const auto& a : j["attributes"]) {
        if (!a.contains("name") || !a.contains("values")) throw ConfigError("attribute needs name and values");
        attrs.push_back(Attribute{a["name"].get<std::string>(), a["values"].get<std::vector<std::string>>()});
    }
    return AttributeSchema(std::move(attrs));
}

inline json labels_to_json(const AttributeSchema& schema, const Labels& l) {
    json out = json::object();
    for (std::size_t a = 0; a < schema.size(); ++a)
        out[schema.attribute(a).name] = l[a] == kUnspecified ? std::string("X") : schema.value_name(a, l[a]);
    return out;
}

inline Labels labels_from_json(const AttributeSchema& schema, const json& j) {
    if (!j.is_object()) throw ConfigError("labels must be an object mapping attribute to value");
    Labels l(schema.size(), kUnspecified);
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto attr = schema.find_attribute(it.key());
        if (!attr) throw ConfigError("unknown attribute '" + it.key() + "'");
        const auto v = it.value().get<std::string>();
        if (v == "X" || v.empty()) continue;
        l[*attr] = schema.value_index(*attr, v);
    }
    return l;
}

inline json pattern_to_json(const AttributeSchema& schema, const Pattern& p) {
    json out = json::object();
    for (std::size_t a = 0; a < p.size(); ++a)
        if (p.specified(a)) out[schema.attribute(a).name] = schema.value_name(a, p[a]);
    return out;
}

inline Pattern pattern_from_json(const AttributeSchema& schema, const json& j) {
    if (j.is_string()) return parse_pattern(schema, j.get<std::string>());
    return Pattern(labels_from_json(schema, j));
}

inline json manifest_to_json(const ItemCollection& c) {
    json items = json::array();
    for (const auto& it : c.items()) {
        json ji{{"id", it.id}};
        if (!it.image.empty()) ji["image"] = it.image;
        if (it.truth) ji["truth"] = labels_to_json(c.schema(), *it.truth);
        if (it.predicted) ji["predicted"] = labels_to_json(c.schema(), *it.predicted);
        items.push_back(std::move(ji));
    }
    return json{{"schema", schema_to_json(c.schema())}, {"items", std::move(items)}};
}

inline ItemCollection manifest_from_json(const json& j) {
    if (!j.is_object() || !j.contains("schema") || !j.contains("items"))
        throw ConfigError("manifest needs 'schema' and 'items'");
    auto schema = schema_from_json(j["schema"]);
    std::vector<Item> items;
    items.reserve(j["items"].size());
    for (const auto& ji : j["items"]) {
        Item it;
        if (!ji.contains("id")) throw ConfigError("manifest item without id");
        it.id = ji["id"].is_string() ? ji["id"].get<std::string>() : ji["id"].dump();
        if (ji.contains("image")) it.image = ji["image"].get<std::string>();
        if (ji.contains("truth")) it.truth = labels_from_json(schema, ji["truth"]);
        if (ji.contains("predicted")) it.predicted = labels_from_json(schema, ji["predicted"]);
        items.push_back(std::move(it));
    }
    return ItemCollection(std::move(schema), std::move(items));
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

// Loads items from CSV against a known schema.
inline ItemCollection collection_from_csv(const AttributeSchema& schema, const std::string& text) {
    auto rows = parse_csv(text);
    if (rows.empty()) throw ConfigError("CSV has no header");
    const auto& header = rows.front();
    int id_col = -1, image_col = -1;
    std::vector<std::pair<int, std::size_t>> truth_cols, pred_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h == "id") id_col = static_cast<int>(c);
        else if (h == "image") image_col = static_cast<int>(c);
        else if (h.rfind("truth.", 0) == 0 || h.rfind("predicted.", 0) == 0) {
            const bool truth = h[0] == 't';
            auto attr = schema.find_attribute(h.substr(truth ? 6 : 10));
            if (!attr) throw ConfigError("CSV column '" + h + "' names an unknown attribute");
            (truth ? truth_cols : pred_cols).emplace_back(static_cast<int>(c), *attr);
        }
    }
    if (id_col < 0) throw ConfigError("CSV lacks an 'id' column");
    std::vector<Item> items;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto cell = [&](int c) -> std::string {
            return c >= 0 && static_cast<std::size_t>(c) < row.size() ? row[static_cast<std::size_t>(c)] : "";
        };
        Item it;
        it.id = cell(id_col);
        it.image = cell(image_col);
        auto fill = [&](const std::vector<std::pair<int, std::size_t>>& cols) -> std::optional<Labels> {
            if (cols.empty()) return std::nullopt;
            Labels l(schema.size(), kUnspecified);
            bool any = false;
            for (auto [c, a] : cols) {
                auto v = cell(c);
                if (v.empty() || v == "X") continue;
                l[a] = schema.value_index(a, v);
                any = true;
            }
            if (!any) return std::nullopt;
            return l;
        };
        it.truth = fill(truth_cols);
        it.predicted = fill(pred_cols);
        items.push_back(std::move(it));
    }
    return ItemCollection(schema, std::move(items));
}

// Predictions CSV (id, predicted.<attr>...) merged into an existing collection.
inline ItemCollection with_predictions_csv(const ItemCollection& base, const std::string& text) {
    auto rows = parse_csv(text);
    if (rows.empty()) throw ConfigError("predictions CSV has no header");
    const auto& schema = base.schema();
    const auto& header = rows.front();
    int id_col = -1;
    std::vector<std::pair<std::size_t, std::size_t>> cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "id") id_col = static_cast<int>(c);
        else if (header[c].rfind("predicted.", 0) == 0) {
            auto attr = schema.find_attribute(header[c].substr(10));
            if (!attr) throw ConfigError("predictions column '" + header[c] + "' names an unknown attribute");
            cols.emplace_back(c, *attr);
        }
    }
    if (id_col < 0) throw ConfigError("predictions CSV lacks an 'id' column");
    std::vector<Item> items(base.items().begin(), base.items().end());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const auto& id = row.at(static_cast<std::size_t>(id_col));
        auto idx = base.find(id);
        if (!idx) throw ConfigError("predictions reference unknown item '" + id + "'");
        Labels l(schema.size(), kUnspecified);
        for (auto [c, a] : cols) {
            if (c >= row.size() || row[c].empty() || row[c] == "X") continue;
            l[a] = schema.value_index(a, row[c]);
        }
        items[*idx].predicted = std::move(l);
    }
    return ItemCollection(schema, std::move(items));
}

inline ItemCollection load_manifest(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        throw ConfigError("CSV collections need a schema; load them with collection_from_csv");
    return manifest_from_json(parse_json(read_file(path), path));
}

} // namespace coverage
