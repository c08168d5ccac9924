#pragma once

#include "vpcl/dynamics.hpp"

#include <iosfwd>
#include <string>

namespace vpcl {

// VPCL snapshot layout, little-endian:
//   "VPCL" | version u32 | flow kind u8 | N u64 | frame count u64 | frame dt f64
//   then per frame: q as N*3 f64 (x,y,z per particle), p likewise.
inline constexpr std::uint32_t kVpclVersion = 1;

void write_vpcl(std::ostream& out, const TrajectoryRecord& record);
void write_vpcl(const std::string& path, const TrajectoryRecord& record);
TrajectoryRecord read_vpcl(std::istream& in);
TrajectoryRecord read_vpcl(const std::string& path);

}  // namespace vpcl
