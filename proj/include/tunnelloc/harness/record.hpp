#ifndef TUNNELLOC_HARNESS_RECORD_HPP
#define TUNNELLOC_HARNESS_RECORD_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tunnelloc/sim/scan_sim.hpp"

namespace tunnelloc {

static_assert(std::endian::native == std::endian::little, "record format assumes a little-endian host");

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 4> kRecordMagic = {'T', 'L', 'R', 'C'};
inline constexpr std::uint8_t kRecordVersion = 1;

// Layout: magic, version byte, then records of [u32 length][payload]. The first record is a
// free-form metadata string; each following record is one frame. Scan points are stored as
// f32, which is exactly what the simulator produces.
namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* p, std::size_t n) : p_(p), n_(n) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > n_) throw RecordError("record payload truncated");
    T v;
    std::memcpy(&v, p_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == n_; }

 private:
  const char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

class RecordWriter {
 public:
  RecordWriter(const std::string& path, const std::string& meta) : out_(path, std::ios::binary) {
    if (!out_) throw RecordError("cannot open " + path + " for writing");
    out_.write(kRecordMagic.data(), 4);
    out_.put(static_cast<char>(kRecordVersion));
    write_record(std::vector<char>(meta.begin(), meta.end()));
  }

  void write(const SimFrame& f) {
    detail::ByteWriter w;
    w.put<std::int32_t>(f.index);
    w.put<double>(f.t);
    w.put<double>(f.truth.x);
    w.put<double>(f.truth.y);
    w.put<double>(f.truth.psi());
    w.put<double>(f.dr_speed);
    w.put<double>(f.dr_yaw_rate);
    w.put<std::uint8_t>(f.gps ? 1 : 0);
    if (f.gps) {
      w.put<double>(f.gps->x());
      w.put<double>(f.gps->y());
    }
    w.put<double>(f.scan.t);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f.scan.points.size()));
    for (const auto& p : f.scan.points) {
      w.put<float>(static_cast<float>(p.x));
      w.put<float>(static_cast<float>(p.y));
      w.put<float>(static_cast<float>(p.z));
      w.put<float>(static_cast<float>(p.intensity));
    }
    write_record(w.bytes());
  }

  void close() { out_.close(); }

 private:
  void write_record(const std::vector<char>& payload) {
    const auto n = static_cast<std::uint32_t>(payload.size());
    out_.write(reinterpret_cast<const char*>(&n), sizeof n);
    out_.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out_) throw RecordError("write failed");
  }

  std::ofstream out_;
};

class RecordReader {
 public:
  explicit RecordReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw RecordError("cannot open " + path);
    std::array<char, 4> magic{};
    in_.read(magic.data(), 4);
    if (!in_ || magic != kRecordMagic) throw RecordError(path + ": not a frame recording (bad magic)");
    const int version = in_.get();
    if (version != kRecordVersion)
      throw RecordError(path + ": unsupported record version " + std::to_string(version));
    auto meta = read_record();
    if (!meta) throw RecordError(path + ": missing metadata record");
    meta_.assign(meta->begin(), meta->end());
  }

  const std::string& meta() const { return meta_; }

  std::optional<SimFrame> next() {
    auto rec = read_record();
    if (!rec) return std::nullopt;
    detail::ByteReader r(rec->data(), rec->size());
    SimFrame f;
    f.index = r.get<std::int32_t>();
    f.t = r.get<double>();
    const double x = r.get<double>();
    const double y = r.get<double>();
    const double psi = r.get<double>();
    f.truth = Pose2D(x, y, psi);
    f.dr_speed = r.get<double>();
    f.dr_yaw_rate = r.get<double>();
    if (r.get<std::uint8_t>()) {
      const double gx = r.get<double>();
      const double gy = r.get<double>();
      f.gps = Vec2(gx, gy);
    }
    f.scan.t = r.get<double>();
    const auto n = r.get<std::uint32_t>();
    f.scan.points.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      Point3 p;
      p.x = r.get<float>();
      p.y = r.get<float>();
      p.z = r.get<float>();
      p.intensity = r.get<float>();
      f.scan.points.push_back(p);
    }
    if (!r.done()) throw RecordError("frame record has trailing bytes");
    return f;
  }

 private:
  std::optional<std::vector<char>> read_record() {
    std::uint32_t n = 0;
    in_.read(reinterpret_cast<char*>(&n), sizeof n);
    if (in_.gcount() == 0 && in_.eof()) return std::nullopt;
    if (in_.gcount() != sizeof n) throw RecordError("truncated record length");
    std::vector<char> buf(n);
    in_.read(buf.data(), n);
    if (static_cast<std::uint32_t>(in_.gcount()) != n) throw RecordError("truncated record");
    return buf;
  }

  std::ifstream in_;
  std::string meta_;
};

}  // namespace tunnelloc

#endif  // TUNNELLOC_HARNESS_RECORD_HPP
