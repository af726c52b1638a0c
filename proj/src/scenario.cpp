#include "camho/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "camho/error.hpp"

namespace camho {

void SceneConfig::validate() const {
  if (base_stations.size() < 2) throw InvalidArgument("scene: need at least two base stations");
  if (cameras.empty()) throw InvalidArgument("scene: need at least one camera");
  for (const auto& bs : base_stations) {
    bs.budget.validate();
    if (!std::isfinite(bs.clear_sky_dbm)) throw InvalidArgument("scene: clear_sky_dbm must be finite");
  }
  for (const auto& cam : cameras) {
    if (!(cam.fov_rad > 0.0 && cam.fov_rad < std::numbers::pi))
      throw InvalidArgument("scene: camera fov_rad must lie in (0, pi)");
  }
  for (const auto& p : pedestrians) {
    if (!(p.speed_mps > 0.0)) throw InvalidArgument("scene: pedestrian speed must be > 0");
    if (!(p.radius_m > 0.0)) throw InvalidArgument("scene: pedestrian radius must be > 0");
    if (!(p.height_m > 0.0)) throw InvalidArgument("scene: pedestrian height must be > 0");
  }
  if (!(blockage_radius_m > 0.0)) throw InvalidArgument("scene: blockage_radius_m must be > 0");
  if (!(ramp_width_m >= 0.0)) throw InvalidArgument("scene: ramp_width_m must be >= 0");
  if (!(max_depth_m > 0.0)) throw InvalidArgument("scene: max_depth_m must be > 0");
  if (!(blockage_db >= 0.0)) throw InvalidArgument("scene: blockage_db must be >= 0");
  if (!(jitter_db >= 0.0)) throw InvalidArgument("scene: jitter_db must be >= 0");
  if (epoch_interval_ms <= 0) throw InvalidArgument("scene: epoch_interval_ms must be > 0");
  if (duration_epochs <= 0) throw InvalidArgument("scene: duration_epochs must be > 0");
  if (frame_width <= 0 || frame_height <= 0) throw InvalidArgument("scene: frame size must be > 0");
}

std::optional<Vec2> pedestrian_position(const PedestrianPath& path, int t, int epoch_interval_ms) {
  if (t < path.start_epoch) return std::nullopt;
  const double elapsed_s = static_cast<double>(t - path.start_epoch) * epoch_interval_ms / 1000.0;
  const double dx = path.end.x - path.start.x;
  const double dy = path.end.y - path.start.y;
  const double length = std::hypot(dx, dy);
  double travelled = path.speed_mps * elapsed_s;
  if (length == 0.0) return path.start;
  if (path.loop) {
    travelled = std::fmod(travelled, 2.0 * length);
    if (travelled > length) travelled = 2.0 * length - travelled;
  } else if (travelled > length) {
    return std::nullopt;
  }
  const double f = travelled / length;
  return Vec2{path.start.x + f * dx, path.start.y + f * dy};
}

double distance_to_segment(Vec2 p, Vec2 a, Vec2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double f = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  f = std::clamp(f, 0.0, 1.0);
  return std::hypot(wx - f * vx, wy - f * vy);
}

double blockage_attenuation_db(const SceneConfig& scene, std::span<const Vec2> pedestrians, int bs) {
  if (bs < 1 || bs > static_cast<int>(scene.base_stations.size()))
    throw InvalidArgument("blockage: BS index out of range");
  const Vec2 a = scene.sta;
  const Vec2 b = scene.base_stations[bs - 1].position;
  const double A = scene.blockage_db;
  const double rb = scene.blockage_radius_m;
  const double wr = scene.ramp_width_m;
  double total = 0.0;
  for (const auto& p : pedestrians) {
    const double d = distance_to_segment(p, a, b);
    if (d <= rb) {
      total += A;
    } else if (d <= rb + wr) {
      total += A * (1.0 - (d - rb) / wr);
    }
  }
  return std::clamp(total, 0.0, 2.0 * A);
}

std::vector<float> render_depth_frame(const SceneConfig& scene, std::span<const Cylinder> pedestrians,
                                      int camera) {
  if (camera < 1 || camera > static_cast<int>(scene.cameras.size()))
    throw InvalidArgument("render: camera index out of range");
  const auto& cam = scene.cameras[camera - 1];
  const int W = scene.frame_width;
  const int H = scene.frame_height;
  std::vector<float> frame(static_cast<std::size_t>(W) * H, 1.0f);
  std::vector<double> zbuf(frame.size(), std::numeric_limits<double>::infinity());

  const double fx = std::cos(cam.heading_rad), fy = std::sin(cam.heading_rad);
  // Image u grows to the camera's right.
  const double rx = fy, ry = -fx;
  const double focal = 0.5 * W / std::tan(0.5 * cam.fov_rad);
  constexpr double kNear = 0.05;

  for (const auto& ped : pedestrians) {
    const double px = ped.center.x - cam.position.x;
    const double py = ped.center.y - cam.position.y;
    const double z = px * fx + py * fy;
    const double lateral = px * rx + py * ry;
    if (z <= kNear) continue;
    if (std::abs(std::atan2(lateral, z)) > 0.5 * cam.fov_rad) continue;

    const double uc = 0.5 * W + focal * lateral / z;
    const double half_w = focal * ped.radius_m / z;
    const double v_top = 0.5 * H - focal * (ped.height_m - cam.height_m) / z;
    const double v_bottom = 0.5 * H + focal * cam.height_m / z;
    const float value = static_cast<float>(std::clamp(z / scene.max_depth_m, 0.0, 1.0));

    // Pixel (r, c) is covered when its centre lies in [u0, u1) x [v0, v1).
    const int c0 = std::max(0, static_cast<int>(std::ceil(uc - half_w - 0.5)));
    const int c1 = std::min(W, static_cast<int>(std::ceil(uc + half_w - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(v_top - 0.5)));
    const int r1 = std::min(H, static_cast<int>(std::ceil(v_bottom - 0.5)));
    for (int r = r0; r < r1; ++r) {
      for (int c = c0; c < c1; ++c) {
        const auto k = static_cast<std::size_t>(r) * W + c;
        if (z < zbuf[k]) {
          zbuf[k] = z;
          frame[k] = value;
        }
      }
    }
  }
  return frame;
}

RawTrace synthesize_raw_trace(const SceneConfig& scene) {
  scene.validate();
  const int T = scene.duration_epochs;
  const int J = static_cast<int>(scene.base_stations.size());
  const int I = static_cast<int>(scene.cameras.size());
  const auto frame_size = static_cast<std::size_t>(scene.frame_width) * scene.frame_height;

  RawTrace raw;
  raw.epoch_interval_ms = scene.epoch_interval_ms;
  raw.length = T;
  raw.frame_width = scene.frame_width;
  raw.frame_height = scene.frame_height;
  raw.seed = scene.seed;
  raw.provenance = "synthetic" + (scene.note.empty() ? std::string() : ": " + scene.note);
  for (const auto& bs : scene.base_stations) raw.budgets.push_back(bs.budget);
  raw.frames.assign(I, std::vector<float>(frame_size * T));
  raw.powers_dbm.assign(J, std::vector<double>(T));

  // Sim epoch t = 0..T-1 is trace epoch t + 1.
#pragma omp parallel for schedule(static)
  for (int t = 0; t < T; ++t) {
    std::vector<Cylinder> bodies;
    for (const auto& path : scene.pedestrians) {
      if (auto p = pedestrian_position(path, t, scene.epoch_interval_ms))
        bodies.push_back({*p, path.radius_m, path.height_m});
    }
    for (int i = 1; i <= I; ++i) {
      const auto frame = render_depth_frame(scene, bodies, i);
      std::copy(frame.begin(), frame.end(), raw.frames[i - 1].begin() + t * frame_size);
    }
    std::vector<Vec2> points;
    for (const auto& b : bodies) points.push_back(b.center);
    for (int j = 1; j <= J; ++j)
      raw.powers_dbm[j - 1][t] =
          scene.base_stations[j - 1].clear_sky_dbm - blockage_attenuation_db(scene, points, j);
  }

  if (scene.jitter_db > 0.0) {
    std::mt19937_64 rng(scene.seed);
    std::normal_distribution<double> noise(0.0, scene.jitter_db);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j) raw.powers_dbm[j][t] += noise(rng);
  }
  return raw;
}

Trace synthesize_trace(const SceneConfig& scene) { return Trace::from_raw(synthesize_raw_trace(scene)); }

SceneConfig reference_scenario() {
  SceneConfig s;
  s.note = "reference scenario";
  s.sta = {0.0, 0.0};
  // BS1 east of the STA, BS2 west of it; BS1 is the stronger link. Both run
  // at modest SNR so a blocked link loses a large share of its capacity.
  s.base_stations = {
      {{6.0, 0.0}, -80.0, {40e6, -173.0}},
      {{-6.0, 0.0}, -85.0, {20e6, -173.0}},
  };
  // Both cameras look north from y = -5; each sees only its own link's walkers.
  const double fov = std::numbers::pi / 3.0;
  s.cameras = {
      {{3.0, -5.0}, std::numbers::pi / 2.0, fov, 1.0},
      {{-3.0, -5.0}, std::numbers::pi / 2.0, fov, 1.0},
  };
  // Walkers 1 and 2 pace across the BS1 link half a traversal apart; walker 3
  // paces across the BS2 link on its own period.
  s.pedestrians = {
      {{2.0, -1.25}, {2.0, 1.25}, 1.4, 0, 0.25, 1.7, true},
      {{4.0, 1.25}, {4.0, -1.25}, 1.4, 29, 0.25, 1.7, true},
      {{-3.0, -1.2}, {-3.0, 1.2}, 1.1, 0, 0.25, 1.7, true},
  };
  s.blockage_db = 15.0;
  s.blockage_radius_m = 0.3;
  s.ramp_width_m = 0.2;
  s.max_depth_m = 10.0;
  s.jitter_db = 0.5;
  s.epoch_interval_ms = 30;
  s.duration_epochs = 6000;
  s.seed = 1;
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

template <class T>
T field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

template <class T>
T field_or(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field<T>(j, key, path);
}

Vec2 vec_field(const json& j, const std::string& key, const std::string& path) {
  const auto arr = field<json>(j, key, path);
  if (!arr.is_array() || arr.size() != 2 || !arr[0].is_number() || !arr[1].is_number())
    throw ConfigError(path + "." + key + ": expected [x, y]");
  return {arr[0].get<double>(), arr[1].get<double>()};
}

json array_field(const json& j, const std::string& key, const std::string& path) {
  auto arr = field<json>(j, key, path);
  if (!arr.is_array()) throw ConfigError(path + "." + key + ": expected an array");
  return arr;
}

}  // namespace

json scene_to_json(const SceneConfig& s) {
  json bs = json::array();
  for (const auto& b : s.base_stations)
    bs.push_back({{"position", vec_json(b.position)},
                  {"clear_sky_dbm", b.clear_sky_dbm},
                  {"bandwidth_hz", b.budget.bandwidth_hz},
                  {"noise_psd_dbm_hz", b.budget.noise_psd_dbm_hz}});
  json cams = json::array();
  for (const auto& c : s.cameras)
    cams.push_back({{"position", vec_json(c.position)},
                    {"heading_rad", c.heading_rad},
                    {"fov_rad", c.fov_rad},
                    {"height_m", c.height_m}});
  json peds = json::array();
  for (const auto& p : s.pedestrians)
    peds.push_back({{"start", vec_json(p.start)},
                    {"end", vec_json(p.end)},
                    {"speed_mps", p.speed_mps},
                    {"start_epoch", p.start_epoch},
                    {"radius_m", p.radius_m},
                    {"height_m", p.height_m},
                    {"loop", p.loop}});
  return {{"base_stations", bs},
          {"sta", vec_json(s.sta)},
          {"cameras", cams},
          {"pedestrians", peds},
          {"blockage_db", s.blockage_db},
          {"blockage_radius_m", s.blockage_radius_m},
          {"ramp_width_m", s.ramp_width_m},
          {"max_depth_m", s.max_depth_m},
          {"jitter_db", s.jitter_db},
          {"epoch_interval_ms", s.epoch_interval_ms},
          {"duration_epochs", s.duration_epochs},
          {"frame_width", s.frame_width},
          {"frame_height", s.frame_height},
          {"seed", s.seed},
          {"note", s.note}};
}

SceneConfig scene_from_json(const json& j) {
  const std::string root = "scene";
  if (!j.is_object()) throw ConfigError("scene: expected a JSON object");
  SceneConfig s;
  const auto bs = array_field(j, "base_stations", root);
  for (std::size_t k = 0; k < bs.size(); ++k) {
    const std::string p = root + ".base_stations[" + std::to_string(k) + "]";
    s.base_stations.push_back({vec_field(bs[k], "position", p), field<double>(bs[k], "clear_sky_dbm", p),
                               {field<double>(bs[k], "bandwidth_hz", p),
                                field_or<double>(bs[k], "noise_psd_dbm_hz", p, -173.0)}});
  }
  s.sta = vec_field(j, "sta", root);
  const auto cams = array_field(j, "cameras", root);
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const std::string p = root + ".cameras[" + std::to_string(k) + "]";
    s.cameras.push_back({vec_field(cams[k], "position", p), field<double>(cams[k], "heading_rad", p),
                         field<double>(cams[k], "fov_rad", p),
                         field_or<double>(cams[k], "height_m", p, 1.0)});
  }
  const auto peds = array_field(j, "pedestrians", root);
  for (std::size_t k = 0; k < peds.size(); ++k) {
    const std::string p = root + ".pedestrians[" + std::to_string(k) + "]";
    s.pedestrians.push_back({vec_field(peds[k], "start", p), vec_field(peds[k], "end", p),
                             field<double>(peds[k], "speed_mps", p),
                             field_or<int>(peds[k], "start_epoch", p, 0),
                             field_or<double>(peds[k], "radius_m", p, 0.25),
                             field_or<double>(peds[k], "height_m", p, 1.7),
                             field_or<bool>(peds[k], "loop", p, true)});
  }
  s.blockage_db = field_or<double>(j, "blockage_db", root, s.blockage_db);
  s.blockage_radius_m = field_or<double>(j, "blockage_radius_m", root, s.blockage_radius_m);
  s.ramp_width_m = field_or<double>(j, "ramp_width_m", root, s.ramp_width_m);
  s.max_depth_m = field_or<double>(j, "max_depth_m", root, s.max_depth_m);
  s.jitter_db = field_or<double>(j, "jitter_db", root, s.jitter_db);
  s.epoch_interval_ms = field_or<int>(j, "epoch_interval_ms", root, s.epoch_interval_ms);
  s.duration_epochs = field<int>(j, "duration_epochs", root);
  s.frame_width = field_or<int>(j, "frame_width", root, s.frame_width);
  s.frame_height = field_or<int>(j, "frame_height", root, s.frame_height);
  s.seed = field_or<std::uint64_t>(j, "seed", root, s.seed);
  s.note = field_or<std::string>(j, "note", root, std::string());
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

}  // namespace camho
