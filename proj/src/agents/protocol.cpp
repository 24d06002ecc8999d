#include "drivesim/agents/protocol.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "drivesim/common/error.hpp"

namespace drivesim::agents {

namespace {

static_assert(std::endian::native == std::endian::little, "wire encoding assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(std::uint32_t(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  void bytes(std::span<const std::uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> d) : data(d) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
    pos += n;
    return s;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(data.begin() + pos, data.begin() + pos + n);
    pos += n;
    return v;
  }
  /// Element count checked against the bytes left, so a corrupt count
  /// cannot trigger a huge allocation.
  std::uint32_t count(std::size_t min_element_bytes) {
    const auto n = get<std::uint32_t>();
    if (min_element_bytes && n > (data.size() - pos) / min_element_bytes) throw ProtocolError("count exceeds frame");
    return n;
  }
  void done() const {
    if (pos != data.size()) throw ProtocolError("trailing bytes in frame");
  }

 private:
  void need(std::size_t n) const {
    if (data.size() - pos < n) throw ProtocolError("truncated frame");
  }
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

scene::Command command_from(std::uint8_t c) {
  if (c > std::uint8_t(scene::Command::unknown)) throw ProtocolError("bad command value");
  return scene::Command(c);
}

void put_payload(Writer& w, const Hello& m) { w.str(m.agent_id); }

void put_payload(Writer& w, const Welcome& m) {
  w.str(m.agent_id);
  w.put(m.dt);
  w.put(m.plan_steps);
  w.put(m.total_steps);
  w.put(std::uint8_t(m.command));
  w.put(std::uint32_t(m.route.size()));
  for (const auto& p : m.route) {
    w.put(p[0]);
    w.put(p[1]);
  }
  w.put(std::uint32_t(m.params.size()));
  for (const auto& [k, v] : m.params) {
    w.str(k);
    w.put(v);
  }
}

void put_payload(Writer& w, const Observation& m) {
  w.put(m.step);
  for (double v : {m.ego.t, m.ego.x, m.ego.y, m.ego.heading, m.ego.v, m.ego.a}) w.put(v);
  w.put(std::uint8_t(m.ego.command));
  w.put(m.bev_cells);
  w.put(m.bev_extent);
  if (m.bev.size() != std::size_t(m.bev_cells) * m.bev_cells * 2) throw ProtocolError("bev size does not match cells");
  for (float c : m.bev) w.put(c);
  w.put(std::uint32_t(m.images.size()));
  for (const auto& img : m.images) {
    if (img.rgb.size() != std::size_t(img.width) * img.height * 3) throw ProtocolError("image size mismatch");
    w.put(img.width);
    w.put(img.height);
    w.bytes(img.rgb);
  }
  w.put(std::uint32_t(m.points.size()));
  for (const auto& p : m.points)
    for (float c : p) w.put(c);
}

void put_payload(Writer& w, const Plan& m) {
  w.put(m.step);
  w.put(std::uint32_t(m.trajectory.samples.size()));
  for (const auto& s : m.trajectory.samples)
    for (double v : {s.t, s.x, s.y, s.heading, s.v}) w.put(v);
}

void put_payload(Writer& w, const ErrorMessage& m) {
  w.put(std::uint8_t(m.code));
  w.str(m.text);
}

void put_payload(Writer& w, const Bye& m) { w.str(m.reason); }

Message read_payload(MessageType type, Reader& r) {
  switch (type) {
    case MessageType::hello:
      return Hello{r.str()};
    case MessageType::welcome: {
      Welcome m;
      m.agent_id = r.str();
      m.dt = r.get<double>();
      m.plan_steps = r.get<std::uint32_t>();
      m.total_steps = r.get<std::uint32_t>();
      m.command = command_from(r.get<std::uint8_t>());
      const auto n = r.count(16);
      for (std::uint32_t i = 0; i < n; ++i) {
        const double x = r.get<double>();
        m.route.push_back({x, r.get<double>()});
      }
      const auto np = r.count(12);
      for (std::uint32_t i = 0; i < np; ++i) {
        auto k = r.str();
        if (!m.params.emplace(k, r.get<double>()).second) throw ProtocolError("duplicate parameter " + k);
      }
      return m;
    }
    case MessageType::observation: {
      Observation m;
      m.step = r.get<std::uint32_t>();
      m.ego.t = r.get<double>();
      m.ego.x = r.get<double>();
      m.ego.y = r.get<double>();
      m.ego.heading = r.get<double>();
      m.ego.v = r.get<double>();
      m.ego.a = r.get<double>();
      m.ego.command = command_from(r.get<std::uint8_t>());
      m.bev_cells = r.get<std::uint32_t>();
      m.bev_extent = r.get<double>();
      if (m.bev_cells > 4096) throw ProtocolError("bev grid too large");
      const std::size_t nb = std::size_t(m.bev_cells) * m.bev_cells * 2;
      m.bev.resize(nb);
      for (auto& c : m.bev) c = r.get<float>();
      const auto ni = r.count(8);
      for (std::uint32_t i = 0; i < ni; ++i) {
        WireImage img;
        img.width = r.get<std::uint32_t>();
        img.height = r.get<std::uint32_t>();
        if (img.width > 16384 || img.height > 16384) throw ProtocolError("image too large");
        img.rgb = r.bytes(std::size_t(img.width) * img.height * 3);
        m.images.push_back(std::move(img));
      }
      const auto npts = r.count(12);
      m.points.resize(npts);
      for (auto& p : m.points)
        for (auto& c : p) c = r.get<float>();
      return m;
    }
    case MessageType::plan: {
      Plan m;
      m.step = r.get<std::uint32_t>();
      const auto n = r.count(40);
      for (std::uint32_t i = 0; i < n; ++i) {
        scene::TrajectorySample s;
        s.t = r.get<double>();
        s.x = r.get<double>();
        s.y = r.get<double>();
        s.heading = r.get<double>();
        s.v = r.get<double>();
        m.trajectory.samples.push_back(s);
      }
      return m;
    }
    case MessageType::error: {
      ErrorMessage m;
      const auto code = r.get<std::uint8_t>();
      if (code < 1 || code > std::uint8_t(ErrorCode::timeout)) throw ProtocolError("bad error code");
      m.code = ErrorCode(code);
      m.text = r.str();
      return m;
    }
    case MessageType::bye:
      return Bye{r.str()};
  }
  throw ProtocolError("unknown message type " + std::to_string(int(type)));
}

}  // namespace

MessageType type_of(const Message& m) { return MessageType(std::uint8_t(m.index() + 1)); }

std::vector<std::uint8_t> encode(const Message& m, std::uint8_t version) {
  Writer body;
  body.put(std::uint8_t(type_of(m)));
  body.put(version);
  std::visit([&](const auto& msg) { put_payload(body, msg); }, m);
  if (body.out.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  Writer frame;
  frame.put(std::uint32_t(body.out.size()));
  frame.bytes(body.out);
  return std::move(frame.out);
}

std::uint32_t body_length(std::span<const std::uint8_t, 4> prefix) {
  std::uint32_t n;
  std::memcpy(&n, prefix.data(), 4);
  if (n < 2) throw ProtocolError("frame length " + std::to_string(n) + " too short");
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " exceeds limit");
  return n;
}

Message decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < 4) throw ProtocolError("truncated length prefix");
  const auto n = body_length(frame.first<4>());
  if (frame.size() - 4 != n) throw ProtocolError("frame length does not match prefix");
  const std::uint8_t type = frame[4];
  const std::uint8_t version = frame[5];
  if (version != kProtocolVersion)
    throw VersionMismatch("protocol version " + std::to_string(version) + ", expected " +
                          std::to_string(kProtocolVersion));
  if (type < 1 || type > std::uint8_t(MessageType::bye)) throw ProtocolError("unknown message type " + std::to_string(type));
  Reader r(frame.subspan(6));
  Message m = read_payload(MessageType(type), r);
  r.done();
  return m;
}

WireImage to_wire(const std::vector<float>& rgb, int width, int height) {
  WireImage img;
  img.width = std::uint32_t(width);
  img.height = std::uint32_t(height);
  img.rgb.resize(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i)
    img.rgb[i] = std::uint8_t(std::lround(std::clamp(double(rgb[i]), 0.0, 1.0) * 255.0));
  return img;
}

}  // namespace drivesim::agents
