#pragma once

// linkm-curve-v1 JSON documents:
//   {"schema": "linkm-curve-v1",
//    "components": [{"constant": [x, y, z],
//                    "cos": [[ax1, ax2, ...], [ay1, ...], [az1, ...]],
//                    "sin": [[bx1, ...], [by1, ...], [bz1, ...]]}, x3]}

#include <string>

#include <nlohmann/json.hpp>

#include "linkm/curves.hpp"

namespace linkm {

inline constexpr const char* kCurveSchema = "linkm-curve-v1";

nlohmann::json to_json(const Curve3& curve);
nlohmann::json to_json(const Link3& link);

/// Throws SchemaError naming the offending JSON path, ValidationError when the
/// curves themselves are invalid.
Curve3 curve_from_json(const nlohmann::json& j, const std::string& path = "");
Link3 link_from_json(const nlohmann::json& j);

/// Parses JSON text; syntax errors are reported with line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);
std::string read_text_file(const std::string& path);

Link3 read_link_file(const std::string& path);
void write_link_file(const Link3& link, const std::string& path);

}  // namespace linkm
