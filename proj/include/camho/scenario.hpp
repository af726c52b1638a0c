#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camho/channel.hpp"
#include "camho/trace.hpp"
#include "json.hpp"

namespace camho {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct BaseStation {
  Vec2 position;
  double clear_sky_dbm = -60.0;
  LinkBudget budget{40e6, -173.0};
};

/// Pinhole depth camera looking horizontally along heading_rad.
struct CameraPose {
  Vec2 position;
  double heading_rad = 0.0;
  double fov_rad = 1.0;  // horizontal field of view
  double height_m = 1.0;
};

/// Straight walk from start to end; with loop set the walker turns around at
/// each endpoint, otherwise it leaves the scene on arrival.
struct PedestrianPath {
  Vec2 start;
  Vec2 end;
  double speed_mps = 1.4;
  int start_epoch = 0;
  double radius_m = 0.25;
  double height_m = 1.7;
  bool loop = true;
};

struct Cylinder {
  Vec2 center;
  double radius_m = 0.25;
  double height_m = 1.7;
};

struct SceneConfig {
  std::vector<BaseStation> base_stations;
  Vec2 sta;
  std::vector<CameraPose> cameras;
  std::vector<PedestrianPath> pedestrians;
  double blockage_db = 15.0;
  double blockage_radius_m = 0.3;
  double ramp_width_m = 0.2;
  double max_depth_m = 10.0;
  double jitter_db = 0.0;
  int epoch_interval_ms = 30;
  int duration_epochs = 1000;
  int frame_width = 40;
  int frame_height = 40;
  std::uint64_t seed = 1;
  std::string note;

  void validate() const;
};

std::optional<Vec2> pedestrian_position(const PedestrianPath& path, int t, int epoch_interval_ms);
/// Distance from p to the closed segment [a, b].
double distance_to_segment(Vec2 p, Vec2 a, Vec2 b);
/// Summed ramp attenuation of every pedestrian on the STA <-> BS link, clamped to [0, 2A].
double blockage_attenuation_db(const SceneConfig& scene, std::span<const Vec2> pedestrians, int bs);
/// Row-major frame_height x frame_width depth image, background 1.0.
std::vector<float> render_depth_frame(const SceneConfig& scene, std::span<const Cylinder> pedestrians,
                                      int camera);

RawTrace synthesize_raw_trace(const SceneConfig& scene);
Trace synthesize_trace(const SceneConfig& scene);

/// Two BSs, two cameras with complementary blind spots, three walkers.
SceneConfig reference_scenario();

nlohmann::json scene_to_json(const SceneConfig& scene);
/// Throws ConfigError with a field path on malformed input.
SceneConfig scene_from_json(const nlohmann::json& j);

}  // namespace camho
