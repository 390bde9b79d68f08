#include "qsync/framing.hpp"

#include <utility>

#include "qsync/error.hpp"
#include "qsync/rng.hpp"

namespace qsync {

char to_char(Polarization p) noexcept {
  switch (p) {
    case Polarization::H: return 'H';
    case Polarization::V: return 'V';
    case Polarization::D: return 'D';
    case Polarization::A: return 'A';
  }
  return '?';
}

Polarization polarization_from_char(char c) {
  switch (c) {
    case 'H': return Polarization::H;
    case 'V': return Polarization::V;
    case 'D': return Polarization::D;
    case 'A': return Polarization::A;
    default: break;
  }
  throw Error(ErrorCode::parse_error, std::string("unknown polarization '") + c + "'");
}

FrameLayout build_layout(std::size_t M, const SyncString& s) {
  if (M == 0) throw Error(ErrorCode::invalid_argument, "frame layout needs M >= 1");
  if (s.size() == 0) throw Error(ErrorCode::invalid_argument, "empty sync string");
  return FrameLayout{M, s.size()};
}

FrameSchedule::FrameSchedule(FrameLayout layout, SyncString sync, std::size_t frames,
                             std::uint64_t seed, SyncPlacement placement)
    : layout_(layout), sync_(std::move(sync)), frames_(frames), seed_(seed), placement_(placement) {
  if (frames_ == 0) throw Error(ErrorCode::invalid_argument, "schedule needs at least one frame");
  if (layout_.M == 0 || layout_.L != sync_.size())
    throw Error(ErrorCode::layout_mismatch, "layout does not match sync string length");
}

PulseRecord FrameSchedule::pulse(std::uint64_t slot) const noexcept {
  const std::uint64_t nf = layout_.frame_length();
  const std::uint64_t frame = slot / nf;
  const std::uint64_t pos = slot % nf;
  PulseRecord r;
  r.slot_index = slot;
  const bool sync_frame = placement_ == SyncPlacement::every_frame || frame == 0;
  if (sync_frame && layout_.is_sync_slot(pos)) {
    r.kind = SlotKind::sync;
    r.basis = Basis::Z;
    const bool plus = sync_.bits[pos / layout_.stride()] > 0;
    r.polarization = plus ? Polarization::H : Polarization::V;
    r.bit = plus ? 0 : 1;
    return r;
  }
  const std::uint64_t word = CounterRng{seed_}.bits(2, slot);
  r.kind = SlotKind::random;
  r.basis = (word & 1U) ? Basis::X : Basis::Z;
  r.bit = static_cast<int>((word >> 1) & 1U);
  r.polarization = encode(r.basis, r.bit);
  return r;
}

std::vector<PulseRecord> FrameSchedule::materialize() const {
  std::vector<PulseRecord> out;
  out.reserve(total_pulses());
  for (std::uint64_t n = 0; n < total_pulses(); ++n) out.push_back(pulse(n));
  return out;
}

FrameSchedule build_schedule(const FrameLayout& layout, const SyncString& s, std::size_t frames,
                             std::uint64_t seed, SyncPlacement placement) {
  return FrameSchedule(layout, s, frames, seed, placement);
}

PulseRecord ground_truth_bit(const FrameSchedule& schedule, std::uint64_t global_slot) {
  if (global_slot >= schedule.total_pulses())
    throw Error(ErrorCode::out_of_range, "slot beyond end of schedule");
  return schedule.pulse(global_slot);
}

}  // namespace qsync
