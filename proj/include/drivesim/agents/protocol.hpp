#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "drivesim/scene/scenario.hpp"
#include "drivesim/scene/trajectory.hpp"

namespace drivesim::agents {

inline constexpr std::uint8_t kProtocolVersion = 1;
/// Upper bound on a frame body; anything larger is treated as a corrupt prefix.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

enum class MessageType : std::uint8_t {
  hello = 1,
  welcome = 2,
  observation = 3,
  plan = 4,
  error = 5,
  bye = 6,
};

enum class ErrorCode : std::uint8_t {
  version_mismatch = 1,
  duplicate_agent = 2,
  unknown_agent = 3,
  malformed = 4,
  timeout = 5,
};

/// Client -> harness: first message on a connection.
struct Hello {
  std::string agent_id;
  bool operator==(const Hello&) const = default;
};

/// Harness -> client: static session facts.
struct Welcome {
  std::string agent_id;
  double dt = 0.1;
  std::uint32_t plan_steps = 8;
  std::uint32_t total_steps = 0;
  scene::Command command = scene::Command::unknown;
  std::vector<std::array<double, 2>> route;
  std::map<std::string, double> params;
  bool operator==(const Welcome&) const = default;
};

struct EgoStatus {
  double t = 0.0, x = 0.0, y = 0.0, heading = 0.0, v = 0.0, a = 0.0;
  scene::Command command = scene::Command::unknown;
  bool operator==(const EgoStatus&) const = default;
};

struct WireImage {
  std::uint32_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // rows top to bottom, 3 bytes per pixel
  bool operator==(const WireImage&) const = default;
};

struct Observation {
  std::uint32_t step = 0;
  EgoStatus ego;
  std::uint32_t bev_cells = 0;
  double bev_extent = 0.0;
  std::vector<float> bev;  // (ix * cells + iy) * 2 + bin, ego frame
  std::vector<WireImage> images;
  std::vector<std::array<float, 3>> points;  // ego frame
  bool operator==(const Observation&) const = default;

  float bev_at(int ix, int iy, int bin) const { return bev[(std::size_t(ix) * bev_cells + iy) * 2 + bin]; }
};

struct Plan {
  std::uint32_t step = 0;
  scene::Trajectory trajectory;
  bool operator==(const Plan&) const = default;
};

struct ErrorMessage {
  ErrorCode code = ErrorCode::malformed;
  std::string text;
  bool operator==(const ErrorMessage&) const = default;
};

struct Bye {
  std::string reason;
  bool operator==(const Bye&) const = default;
};

using Message = std::variant<Hello, Welcome, Observation, Plan, ErrorMessage, Bye>;

MessageType type_of(const Message& m);

/// Full frame: u32 LE body length, then the body (u8 type, u8 version, payload).
std::vector<std::uint8_t> encode(const Message& m, std::uint8_t version = kProtocolVersion);

/// Decodes one complete frame. Throws VersionMismatch for a foreign version
/// and ProtocolError for anything malformed, including trailing bytes.
Message decode(std::span<const std::uint8_t> frame);

/// Length announced by a 4-byte prefix; throws ProtocolError when it cannot
/// hold a type and version or exceeds kMaxFrameBytes.
std::uint32_t body_length(std::span<const std::uint8_t, 4> prefix);

/// Quantizes [0,1] floats to bytes (round to nearest, clamped).
WireImage to_wire(const std::vector<float>& rgb, int width, int height);

}  // namespace drivesim::agents
