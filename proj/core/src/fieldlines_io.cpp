#include <cmath>

#include "linkm/curves_io.hpp"
#include "linkm/errors.hpp"
#include "linkm/fieldlines.hpp"

namespace linkm {

using nlohmann::json;

namespace {

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + ": missing \"" + key + "\"");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + ": non-finite number");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0 || j.get<long long>() > 64)
    throw SchemaError(path + ": expected an integer exponent in 0..64");
  return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path + ": expected an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], path + "/" + std::to_string(k)));
  return out;
}

TubeSpec tube_from_json(const json& j, const std::string& path) {
  TubeSpec t;
  t.center = curve_from_json(member(j, "center", path), path + "/center");
  t.radius = number(member(j, "radius", path), path + "/radius");
  if (j.contains("flux")) t.flux = number(j["flux"], path + "/flux");
  if (j.contains("reference")) {
    const auto r = numbers(j["reference"], path + "/reference");
    if (r.size() != 3) throw SchemaError(path + "/reference: expected [x, y, z]");
    t.reference = Vec3{r[0], r[1], r[2]};
  }
  if (j.contains("transit")) t.transit = numbers(j["transit"], path + "/transit");
  if (j.contains("stream")) {
    const json& s = j["stream"];
    const std::string sp = path + "/stream";
    if (!s.is_object()) throw SchemaError(sp + ": expected an object");
    if (s.contains("radial")) t.stream.radial = numbers(s["radial"], sp + "/radial");
    if (s.contains("shear")) {
      const json& sh = s["shear"];
      if (!sh.is_array()) throw SchemaError(sp + "/shear: expected an array");
      for (std::size_t k = 0; k < sh.size(); ++k) {
        const std::string mp = sp + "/shear/" + std::to_string(k);
        t.stream.shear.push_back({integer(member(sh[k], "u", mp), mp + "/u"),
                                  integer(member(sh[k], "v", mp), mp + "/v"),
                                  number(member(sh[k], "c", mp), mp + "/c")});
      }
    }
  }
  return t;
}

}  // namespace

json to_json(const FieldSystem& field) {
  json j;
  j["schema"] = kFieldSchema;
  j["tubes"] = json::array();
  for (int i = 0; i < field.size(); ++i) {
    const auto& t = field.tube(i);
    json tj;
    tj["center"] = to_json(t.center);
    tj["radius"] = t.radius;
    tj["flux"] = t.flux;
    const Vec3& r = field.reference(i);
    tj["reference"] = {r.x, r.y, r.z};
    tj["transit"] = t.transit;
    tj["stream"]["radial"] = t.stream.radial;
    tj["stream"]["shear"] = json::array();
    for (const auto& m : t.stream.shear) tj["stream"]["shear"].push_back({{"u", m.pu}, {"v", m.pv}, {"c", m.c}});
    j["tubes"].push_back(std::move(tj));
  }
  return j;
}

FieldSystem field_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("/: expected an object");
  const json& schema = member(j, "schema", "");
  if (!schema.is_string() || schema.get<std::string>() != kFieldSchema)
    throw SchemaError("/schema: expected \"" + std::string(kFieldSchema) + "\"");
  const json& tubes = member(j, "tubes", "");
  if (!tubes.is_array() || tubes.empty() || tubes.size() > 3)
    throw SchemaError("/tubes: expected 1 to 3 tubes");
  std::vector<TubeSpec> specs;
  for (std::size_t k = 0; k < tubes.size(); ++k) specs.push_back(tube_from_json(tubes[k], "/tubes/" + std::to_string(k)));
  return FieldSystem(std::move(specs));
}

FieldSystem read_field_file(const std::string& path) {
  return field_from_json(parse_json_text(read_text_file(path), path));
}

json to_json(const CesaroEstimate& c) {
  return {{"checkpoints", c.checkpoints}, {"values", c.values}, {"raw", c.raw}, {"limit", c.limit},
          {"spread", c.spread},           {"lower", c.lower},   {"upper", c.upper}};
}

json to_json(const ErgodicResult& r) {
  return {{"M", to_json(r.M)},   {"used", r.used},           {"skipped", r.skipped},
          {"values", r.values},  {"std_errors", r.std_errors}, {"weights", r.weights}};
}

}  // namespace linkm
