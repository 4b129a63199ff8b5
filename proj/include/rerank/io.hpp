#pragma once

// Text formats: schema documents (JSON) and dataset files (CSV, first column
// "id"). Numbers are written in shortest round-trip form so a file read back
// yields bit-identical doubles.

#include "rerank/domain.hpp"
#include "rerank/error.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace rerank {

using json = nlohmann::json;

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// Schema document

inline json schema_to_json(const Schema& schema) {
    json attrs = json::array();
    for (const auto& a : schema.attributes()) {
        json j = {{"name", a.name}, {"kind", to_string(a.kind)}};
        if (a.numeric()) {
            j["min"] = a.domain_min;
            j["max"] = a.domain_max;
            if (a.kind == AttributeKind::numeric_discrete) j["resolution"] = a.resolution;
        } else {
            j["categories"] = a.categories;
        }
        attrs.push_back(std::move(j));
    }
    return {{"attributes", attrs}};
}

inline Schema schema_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("attributes") || !doc["attributes"].is_array())
        throw Error(ErrorCode::schema, "schema document needs an \"attributes\" array", "attributes");
    std::vector<AttributeSchema> attrs;
    for (const auto& j : doc["attributes"]) {
        AttributeSchema a;
        try {
            a.name = j.at("name").get<std::string>();
            a.kind = parse_attribute_kind(j.at("kind").get<std::string>());
            if (a.numeric()) {
                a.domain_min = j.at("min").get<double>();
                a.domain_max = j.at("max").get<double>();
                if (j.contains("resolution")) a.resolution = j["resolution"].get<double>();
            } else {
                a.categories = j.at("categories").get<std::vector<std::string>>();
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::schema, std::string("bad attribute entry: ") + e.what(), a.name);
        }
        attrs.push_back(std::move(a));
    }
    return Schema(std::move(attrs));
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::storage, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::storage, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(ErrorCode::storage, "write failed for '" + path + "'");
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config, what + ": " + e.what());
    }
}

inline Schema load_schema(const std::string& path) { return schema_from_json(parse_json(read_file(path), path)); }

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline void append_csv_field(std::string& out, std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

/// Splits CSV text into rows of fields (RFC 4180 quoting).
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"': quoted = true; any = true; break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            any = true;
            break;
        case '\r': break;
        case '\n':
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
            break;
        default: field.push_back(c); any = true;
        }
    }
    if (quoted) throw Error(ErrorCode::schema, "unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

inline std::string tuples_to_csv(const Schema& schema, const std::vector<Tuple>& tuples) {
    std::string out = "id";
    for (const auto& a : schema.attributes()) {
        out.push_back(',');
        out.append(a.name);
    }
    out.push_back('\n');
    for (const auto& t : tuples) {
        detail::append_csv_field(out, t.id);
        for (std::size_t i = 0; i < schema.size(); ++i) {
            out.push_back(',');
            if (const double* v = std::get_if<double>(&t.values[i]))
                out.append(format_number(*v));
            else
                detail::append_csv_field(out, std::get<std::string>(t.values[i]));
        }
        out.push_back('\n');
    }
    return out;
}

/// Parses dataset CSV. Columns may appear in any order after "id"; every
/// schema attribute must be present. Each tuple is validated.
inline std::vector<Tuple> tuples_from_csv(const Schema& schema, std::string_view text) {
    auto rows = detail::parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::schema, "dataset has no header row");
    const auto& header = rows.front();
    if (header.empty() || header[0] != "id") throw Error(ErrorCode::schema, "first dataset column must be \"id\"", "id");
    std::vector<std::size_t> column_of(schema.size(), 0);
    std::vector<bool> seen(schema.size(), false);
    for (std::size_t c = 1; c < header.size(); ++c) {
        std::size_t i = schema.index_of(header[c]);
        if (seen[i]) throw Error(ErrorCode::schema, "duplicate column '" + header[c] + "'", header[c]);
        seen[i] = true;
        column_of[i] = c;
    }
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (!seen[i]) throw Error(ErrorCode::schema, "missing column '" + schema[i].name + "'", schema[i].name);

    std::vector<Tuple> tuples;
    tuples.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw Error(ErrorCode::schema, "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                               " fields, expected " + std::to_string(header.size()));
        Tuple t;
        t.id = row[0];
        t.values.resize(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const std::string& cell = row[column_of[i]];
            if (schema[i].numeric()) {
                auto v = parse_number(cell);
                if (!v) throw Error(ErrorCode::schema, "row " + std::to_string(r + 1) + ": bad number '" + cell + "'",
                                    schema[i].name);
                t.values[i] = *v;
            } else {
                t.values[i] = cell;
            }
        }
        validate_tuple(schema, t);
        tuples.push_back(std::move(t));
    }
    return tuples;
}

inline std::vector<Tuple> load_dataset(const Schema& schema, const std::string& path) {
    return tuples_from_csv(schema, read_file(path));
}

// ---------------------------------------------------------------------------
// JSON forms used on the wire

inline json value_to_json(const Value& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    return std::get<std::string>(v);
}

inline json tuple_to_json(const Schema& schema, const Tuple& t) {
    json values = json::object();
    for (std::size_t i = 0; i < schema.size(); ++i) values[schema[i].name] = value_to_json(t.values[i]);
    return {{"id", t.id}, {"values", values}};
}

inline json interval_to_json(const Interval& iv) {
    return {{"lo", iv.lo}, {"hi", iv.hi}, {"lo_open", iv.lo_open}, {"hi_open", iv.hi_open}};
}

inline Interval interval_from_json(const json& j) {
    return {j.at("lo").get<double>(), j.at("hi").get<double>(), j.value("lo_open", false), j.value("hi_open", false)};
}

inline json predicate_to_json(const Predicate& p) {
    if (p.is_range()) {
        json j = interval_to_json(p.interval());
        j["attribute"] = p.attribute;
        j["op"] = "range";
        return j;
    }
    return {{"attribute", p.attribute}, {"op", "equals"}, {"value", value_to_json(p.value())}};
}

inline Predicate predicate_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::validation, "predicate must be an object", "predicates");
    if (!j.contains("attribute") || !j["attribute"].is_string())
        throw Error(ErrorCode::validation, "predicate needs an attribute", "predicates");
    std::string attr = j["attribute"].get<std::string>();
    std::string op = j.value("op", j.contains("value") ? "equals" : "range");
    try {
        if (op == "range") return {attr, interval_from_json(j)};
        if (op == "equals") {
            const json& v = j.at("value");
            if (v.is_number()) return Predicate::equals(attr, v.get<double>());
            if (v.is_string()) return Predicate::equals(attr, v.get<std::string>());
        }
    } catch (const json::exception&) {
    }
    throw Error(ErrorCode::validation, "malformed predicate on '" + attr + "'", attr);
}

inline json query_to_json(const SearchQuery& q) {
    json preds = json::array();
    for (const auto& p : q.predicates) preds.push_back(predicate_to_json(p));
    json j = {{"predicates", preds}};
    if (q.unsatisfiable) j["unsatisfiable"] = true;
    return j;
}

} // namespace rerank
