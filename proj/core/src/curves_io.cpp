#include "linkm/curves_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "linkm/errors.hpp"

namespace linkm {

using nlohmann::json;

namespace {

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + ": non-finite number");
  return v;
}

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + ": missing \"" + key + "\"");
  return *it;
}

std::vector<Vec3> coefficient_block(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(path + ": expected 3 per-axis arrays");
  const std::size_t n = j[0].is_array() ? j[0].size() : 0;
  std::vector<Vec3> out(n);
  for (int axis = 0; axis < 3; ++axis) {
    const std::string p = path + "/" + std::to_string(axis);
    const json& row = j[static_cast<std::size_t>(axis)];
    if (!row.is_array()) throw SchemaError(p + ": expected an array");
    if (row.size() != n) throw SchemaError(p + ": all axes must have the same order");
    for (std::size_t k = 0; k < n; ++k) out[k][axis] = number_at(row[k], p + "/" + std::to_string(k));
  }
  return out;
}

}  // namespace

json to_json(const Curve3& curve) {
  json c;
  c["constant"] = {curve.constant().x, curve.constant().y, curve.constant().z};
  for (const char* key : {"cos", "sin"}) {
    const auto& coeffs = std::string(key) == "cos" ? curve.cos_coeffs() : curve.sin_coeffs();
    json block = json::array();
    for (int axis = 0; axis < 3; ++axis) {
      json row = json::array();
      for (const auto& v : coeffs) row.push_back(v[axis]);
      block.push_back(std::move(row));
    }
    c[key] = std::move(block);
  }
  return c;
}

json to_json(const Link3& link) {
  json j;
  j["schema"] = kCurveSchema;
  j["components"] = json::array();
  for (const auto& c : link.components()) j["components"].push_back(to_json(c));
  return j;
}

Curve3 curve_from_json(const json& j, const std::string& path) {
  const json& constant = member(j, "constant", path);
  if (!constant.is_array() || constant.size() != 3)
    throw SchemaError(path + "/constant: expected [x, y, z]");
  Vec3 c;
  for (int a = 0; a < 3; ++a)
    c[a] = number_at(constant[static_cast<std::size_t>(a)], path + "/constant/" + std::to_string(a));
  auto cs = coefficient_block(member(j, "cos", path), path + "/cos");
  auto sn = coefficient_block(member(j, "sin", path), path + "/sin");
  if (cs.size() != sn.size()) throw SchemaError(path + ": cos and sin must have the same order");
  if (cs.empty()) throw SchemaError(path + ": a closed curve needs order >= 1");
  return Curve3(c, std::move(cs), std::move(sn));
}

Link3 link_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("/: expected an object");
  const json& schema = member(j, "schema", "");
  if (!schema.is_string() || schema.get<std::string>() != kCurveSchema)
    throw SchemaError("/schema: expected \"" + std::string(kCurveSchema) + "\"");
  const json& comps = member(j, "components", "");
  if (!comps.is_array() || comps.size() != 3)
    throw SchemaError("/components: expected exactly 3 components");
  return Link3({curve_from_json(comps[0], "/components/0"), curve_from_json(comps[1], "/components/1"),
                curve_from_json(comps[2], "/components/2")});
}

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON syntax error: " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Link3 read_link_file(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  try {
    return link_from_json(j);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_link_file(const Link3& link, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot write file");
  out << to_json(link).dump(2) << '\n';
}

}  // namespace linkm
