#include "vpcl/trajectory_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace vpcl {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!in) throw std::runtime_error("VPCL: truncated file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void put_block(std::ostream& out, const Block3& b) {
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (int c = 0; c < 3; ++c) put_f64(out, b(i, c));
}

void get_block(std::istream& in, Block3& b) {
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (int c = 0; c < 3; ++c) b(i, c) = get_f64(in);
}

}  // namespace

void write_vpcl(std::ostream& out, const TrajectoryRecord& record) {
  out.write("VPCL", 4);
  put_le<std::uint32_t>(out, kVpclVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(record.kind));
  const auto n = static_cast<std::uint64_t>(record.particles());
  put_le<std::uint64_t>(out, n);
  put_le<std::uint64_t>(out, record.frames.size());
  put_f64(out, record.frame_dt);
  for (const auto& f : record.frames) {
    if (static_cast<std::uint64_t>(f.size()) != n) throw std::runtime_error("VPCL: frame sizes differ");
    put_block(out, f.q);
    put_block(out, f.p);
  }
  if (!out) throw std::runtime_error("VPCL: write failed");
}

void write_vpcl(const std::string& path, const TrajectoryRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("VPCL: cannot open " + path);
  write_vpcl(out, record);
}

TrajectoryRecord read_vpcl(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VPCL", 4) != 0) throw std::runtime_error("VPCL: bad magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVpclVersion) throw std::runtime_error("VPCL: unsupported version " + std::to_string(version));
  const auto kind = get_le<std::uint8_t>(in);
  if (kind > 3) throw std::runtime_error("VPCL: unknown flow kind");
  const auto n = get_le<std::uint64_t>(in);
  const auto frames = get_le<std::uint64_t>(in);
  TrajectoryRecord rec;
  rec.kind = static_cast<FlowKind>(kind);
  rec.frame_dt = get_f64(in);
  rec.frames.reserve(frames);
  for (std::uint64_t k = 0; k < frames; ++k) {
    PhaseState s(static_cast<Eigen::Index>(n));
    get_block(in, s.q);
    get_block(in, s.p);
    rec.frames.push_back(std::move(s));
  }
  return rec;
}

TrajectoryRecord read_vpcl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("VPCL: cannot open " + path);
  return read_vpcl(in);
}

}  // namespace vpcl
