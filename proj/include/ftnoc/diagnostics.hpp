#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ftnoc/engine.hpp"
#include "ftnoc/fault_injection.hpp"

namespace ftnoc {

/// One DDRM classification run on a 3x3x3 mesh with every mechanism on: a
/// random permanent fault of the given class and directed traffic that
/// crosses it. The stuck mask is redrawn until the traffic excites an
/// uncorrectable error.
struct DdrmTrial {
  HardFault fault{};
  RecoveryKind expected = RecoveryKind::None;
  std::optional<RecoveryRecord> observed;  // first terminal command
  std::uint64_t cycles = 0;
  int redraws = 0;  // stuck masks replaced because ECC always corrected them
  bool correct = false;

  std::string describe() const;
};

/// kind must be BufferSlot, CrossbarPath or Channel.
DdrmTrial ddrm_trial(FaultStructure kind, std::uint64_t seed);

}  // namespace ftnoc
