// __BEGIN_LICENSE__
//  Copyright (c) 2026, the satstereo authors.
//
//  Licensed under the Apache License, Version 2.0 (the "License"); you may
//  not use this file except in compliance with the License. You may obtain a
//  copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.
// __END_LICENSE__

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "satstereo/common/error.hpp"
#include "satstereo/geo/camera.hpp"

namespace satstereo::geo {
namespace {

constexpr double kMaxNormalized = 1.5;
constexpr double kMinDenominator = 1e-9;

double dot(const RpcCamera::Coefficients& c, const RpcCamera::Coefficients& t) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < 20; ++i) s += c[i] * t[i];
  return s;
}

}  // namespace

RpcCamera::Coefficients rpc_terms(double L, double P, double H) noexcept {
  return {1.0,       L,         P,         H,         L * P,     L * H,     P * H,
          L * L,     P * P,     H * H,     P * L * H, L * L * L, L * P * P, L * H * H,
          L * L * P, P * P * P, P * H * H, L * L * H, P * P * H, H * H * H};
}

Pixel rpc_project(const RpcCamera& cam, const GeodeticPoint& p) {
  const auto& n = cam.norm;
  const double P = (p.lat - n.lat_off) / n.lat_scale;
  const double L = (p.lon - n.lon_off) / n.lon_scale;
  const double H = (p.alt - n.height_off) / n.height_scale;
  if (!(std::abs(P) <= kMaxNormalized && std::abs(L) <= kMaxNormalized && std::abs(H) <= kMaxNormalized)) {
    throw InvalidArgument("rpc_project: point outside the RPC validity volume");
  }
  const auto t = rpc_terms(L, P, H);
  const double samp_den = dot(cam.samp_den, t);
  const double line_den = dot(cam.line_den, t);
  if (std::abs(samp_den) < kMinDenominator || std::abs(line_den) < kMinDenominator) {
    throw SingularProjection("rpc_project: denominator vanishes at query point");
  }
  return {dot(cam.samp_num, t) / samp_den * n.samp_scale + n.samp_off,
          dot(cam.line_num, t) / line_den * n.line_scale + n.line_off};
}

RpcCamera read_rpc(std::istream& in) {
  std::map<std::string, double> values;
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    std::istringstream rest(line.substr(colon + 1));
    double v = 0.0;
    if (!(rest >> v)) throw FormatError("RPC: value for " + key + " is not a number");
    values[key] = v;
  }
  auto get = [&](const std::string& key) {
    const auto it = values.find(key);
    if (it == values.end()) throw FormatError("RPC: missing key " + key);
    return it->second;
  };
  RpcCamera cam;
  for (int i = 0; i < 20; ++i) {
    const std::string idx = std::to_string(i + 1);
    cam.line_num[i] = get("LINE_NUM_COEFF_" + idx);
    cam.line_den[i] = get("LINE_DEN_COEFF_" + idx);
    cam.samp_num[i] = get("SAMP_NUM_COEFF_" + idx);
    cam.samp_den[i] = get("SAMP_DEN_COEFF_" + idx);
  }
  auto& n = cam.norm;
  n.lat_scale = get("LAT_SCALE");
  n.lat_off = get("LAT_OFF");
  n.lon_scale = get("LONG_SCALE");
  n.lon_off = get("LONG_OFF");
  n.height_scale = get("HEIGHT_SCALE");
  n.height_off = get("HEIGHT_OFF");
  n.line_scale = get("LINE_SCALE");
  n.line_off = get("LINE_OFF");
  n.samp_scale = get("SAMP_SCALE");
  n.samp_off = get("SAMP_OFF");
  for (double s : {n.lat_scale, n.lon_scale, n.height_scale, n.line_scale, n.samp_scale}) {
    if (s == 0.0) throw FormatError("RPC: zero scale factor");
  }
  return cam;
}

RpcCamera read_rpc(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path.string());
  return read_rpc(f);
}

void write_rpc(std::ostream& out, const RpcCamera& cam) {
  out << std::setprecision(17);
  const auto& n = cam.norm;
  out << "LINE_OFF: " << n.line_off << "\nSAMP_OFF: " << n.samp_off << "\nLAT_OFF: " << n.lat_off
      << "\nLONG_OFF: " << n.lon_off << "\nHEIGHT_OFF: " << n.height_off << "\nLINE_SCALE: " << n.line_scale
      << "\nSAMP_SCALE: " << n.samp_scale << "\nLAT_SCALE: " << n.lat_scale << "\nLONG_SCALE: " << n.lon_scale
      << "\nHEIGHT_SCALE: " << n.height_scale << '\n';
  auto block = [&](const char* key, const RpcCamera::Coefficients& c) {
    for (int i = 0; i < 20; ++i) out << key << (i + 1) << ": " << c[i] << '\n';
  };
  block("LINE_NUM_COEFF_", cam.line_num);
  block("LINE_DEN_COEFF_", cam.line_den);
  block("SAMP_NUM_COEFF_", cam.samp_num);
  block("SAMP_DEN_COEFF_", cam.samp_den);
}

void write_rpc(const std::filesystem::path& path, const RpcCamera& cam) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot create " + path.string());
  write_rpc(f, cam);
}

}  // namespace satstereo::geo
