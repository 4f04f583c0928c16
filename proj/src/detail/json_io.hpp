#pragma once

#include "graphsolver/em.hpp"
#include "graphsolver/mesh.hpp"

#include <json.hpp>

namespace graphsolver::detail {

using nlohmann::json;

inline json shape_to_json(const mesh::ShapeSpec& spec) {
  json params = json::object();
  for (const auto& [name, value] : spec.parameters) params[name] = value;
  return {{"kind", mesh::to_string(spec.kind)}, {"parameters", params}};
}

inline mesh::ShapeSpec shape_from_json(const json& j) {
  mesh::ShapeSpec spec;
  spec.kind = mesh::shape_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& [name, value] : j.at("parameters").items()) spec.parameters[name] = value.get<double>();
  spec.validate();
  return spec;
}

inline json plane_wave_to_json(const em::PlaneWave& pw) {
  return {{"frequency", pw.frequency},
          {"theta", pw.theta},
          {"phi", pw.phi},
          {"polarization", em::to_string(pw.polarization)},
          {"amplitude", pw.amplitude}};
}

inline em::PlaneWave plane_wave_from_json(const json& j) {
  em::PlaneWave pw;
  pw.frequency = j.at("frequency").get<double>();
  pw.theta = j.at("theta").get<double>();
  pw.phi = j.at("phi").get<double>();
  pw.polarization = em::polarization_from_string(j.at("polarization").get<std::string>());
  pw.amplitude = j.value("amplitude", 1.0);
  pw.validate();
  return pw;
}

}  // namespace graphsolver::detail
