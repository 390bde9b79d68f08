#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qsync/sync_string.hpp"

namespace qsync {

enum class Polarization : std::uint8_t { H = 0, V = 1, D = 2, A = 3 };
enum class Basis : std::uint8_t { Z = 0, X = 1 };
enum class SlotKind : std::uint8_t { sync = 0, random = 1 };

constexpr Basis basis_of(Polarization p) noexcept {
  return (p == Polarization::H || p == Polarization::V) ? Basis::Z : Basis::X;
}
/// H and D encode bit 0, V and A encode bit 1.
constexpr int bit_of(Polarization p) noexcept {
  return (p == Polarization::V || p == Polarization::A) ? 1 : 0;
}
constexpr Polarization encode(Basis b, int bit) noexcept {
  if (b == Basis::Z) return bit ? Polarization::V : Polarization::H;
  return bit ? Polarization::A : Polarization::D;
}
char to_char(Polarization p) noexcept;
Polarization polarization_from_char(char c);

/// Interleaving of L sync bits into M*L random bits. Sync bit i sits at
/// frame slot i*(M+1); the other M slots of each block carry random bits.
struct FrameLayout {
  std::size_t M = 1;
  std::size_t L = 0;

  std::size_t frame_length() const noexcept { return (M + 1) * L; }
  std::size_t stride() const noexcept { return M + 1; }
  bool is_sync_slot(std::size_t frame_slot) const noexcept { return frame_slot % (M + 1) == 0; }

  bool operator==(const FrameLayout&) const = default;
};

FrameLayout build_layout(std::size_t M, const SyncString& s);

struct PulseRecord {
  std::uint64_t slot_index = 0;
  SlotKind kind = SlotKind::random;
  Polarization polarization = Polarization::H;
  Basis basis = Basis::Z;
  int bit = 0;

  bool operator==(const PulseRecord&) const = default;
};

/// Where the sync string is transmitted. `every_frame` is the distributed
/// scheme; `first_frame_only` reproduces a start-of-transmission sync
/// block, with all later slots random.
enum class SyncPlacement : std::uint8_t { every_frame, first_frame_only };

/// Alice's pulse schedule over `frames` consecutive frames.
///
/// Random-slot contents are a pure function of (seed, global slot), so the
/// schedule is stored implicitly and any pulse is recovered in O(1). Use
/// `materialize` when an explicit record list is needed.
class FrameSchedule {
 public:
  FrameSchedule(FrameLayout layout, SyncString sync, std::size_t frames, std::uint64_t seed,
                SyncPlacement placement = SyncPlacement::every_frame);

  const FrameLayout& layout() const noexcept { return layout_; }
  const SyncString& sync() const noexcept { return sync_; }
  std::size_t frames() const noexcept { return frames_; }
  std::uint64_t seed() const noexcept { return seed_; }
  SyncPlacement placement() const noexcept { return placement_; }
  std::uint64_t total_pulses() const noexcept {
    return static_cast<std::uint64_t>(frames_) * layout_.frame_length();
  }

  /// Unchecked O(1) lookup; `slot` must be < total_pulses().
  PulseRecord pulse(std::uint64_t slot) const noexcept;
  std::vector<PulseRecord> materialize() const;

 private:
  FrameLayout layout_;
  SyncString sync_;
  std::size_t frames_;
  std::uint64_t seed_;
  SyncPlacement placement_;
};

FrameSchedule build_schedule(const FrameLayout& layout, const SyncString& s, std::size_t frames,
                             std::uint64_t seed,
                             SyncPlacement placement = SyncPlacement::every_frame);

/// Bounds-checked lookup. Throws Error(out_of_range).
PulseRecord ground_truth_bit(const FrameSchedule& schedule, std::uint64_t global_slot);

}  // namespace qsync
