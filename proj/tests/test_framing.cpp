#include <gtest/gtest.h>

#include "qsync/error.hpp"
#include "qsync/framing.hpp"

namespace {

using qsync::Basis;
using qsync::Polarization;
using qsync::SlotKind;

qsync::SyncString small_sync() { return qsync::generate_sync_string({8, 4, 1.0, 2}); }

TEST(Encoding, BasisAndBitOfEachPolarization) {
  EXPECT_EQ(qsync::basis_of(Polarization::H), Basis::Z);
  EXPECT_EQ(qsync::basis_of(Polarization::V), Basis::Z);
  EXPECT_EQ(qsync::basis_of(Polarization::D), Basis::X);
  EXPECT_EQ(qsync::basis_of(Polarization::A), Basis::X);
  EXPECT_EQ(qsync::bit_of(Polarization::H), 0);
  EXPECT_EQ(qsync::bit_of(Polarization::V), 1);
  EXPECT_EQ(qsync::bit_of(Polarization::D), 0);
  EXPECT_EQ(qsync::bit_of(Polarization::A), 1);
  for (Polarization p : {Polarization::H, Polarization::V, Polarization::D, Polarization::A}) {
    EXPECT_EQ(qsync::encode(qsync::basis_of(p), qsync::bit_of(p)), p);
    EXPECT_EQ(qsync::polarization_from_char(qsync::to_char(p)), p);
  }
  EXPECT_THROW(qsync::polarization_from_char('Q'), qsync::Error);
}

TEST(Layout, FrameLengthAndSyncPositions) {
  const auto s = small_sync();
  const auto layout = qsync::build_layout(3, s);
  EXPECT_EQ(layout.frame_length(), 4u * 32u);
  EXPECT_TRUE(layout.is_sync_slot(0));
  EXPECT_FALSE(layout.is_sync_slot(1));
  EXPECT_TRUE(layout.is_sync_slot(8));
  EXPECT_THROW(qsync::build_layout(0, s), qsync::Error);
}

TEST(Schedule, SyncSlotsCarryTheSyncStringInZBasis) {
  const auto s = small_sync();
  const auto sched = qsync::build_schedule(qsync::build_layout(1, s), s, 3, 99);
  for (std::uint64_t frame = 0; frame < 3; ++frame)
    for (std::size_t c = 0; c < s.size(); ++c) {
      const auto p = sched.pulse(frame * 64 + 2 * c);
      ASSERT_EQ(p.kind, SlotKind::sync);
      ASSERT_EQ(p.basis, Basis::Z);
      ASSERT_EQ(p.polarization, s[c] > 0 ? Polarization::H : Polarization::V);
    }
}

TEST(Schedule, MaterializeAgreesWithLookup) {
  const auto s = small_sync();
  const auto sched = qsync::build_schedule(qsync::build_layout(2, s), s, 2, 5);
  const auto all = sched.materialize();
  ASSERT_EQ(all.size(), sched.total_pulses());
  for (std::uint64_t i = 0; i < all.size(); ++i) {
    ASSERT_EQ(all[i], sched.pulse(i));
    ASSERT_EQ(all[i].slot_index, i);
    ASSERT_EQ(all[i].polarization, qsync::encode(all[i].basis, all[i].bit));
  }
}

TEST(Schedule, RandomSlotsAreBalanced) {
  const auto s = qsync::generate_sync_string({100, 100, 1.0, 1});
  const auto sched = qsync::build_schedule(qsync::build_layout(1, s), s, 2, 8);
  std::size_t n = 0, z = 0, ones = 0;
  for (std::uint64_t i = 0; i < sched.total_pulses(); ++i) {
    const auto p = sched.pulse(i);
    if (p.kind != SlotKind::random) continue;
    ++n;
    z += p.basis == Basis::Z;
    ones += p.bit;
  }
  EXPECT_NEAR(static_cast<double>(z) / n, 0.5, 0.01);
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 0.01);
}

TEST(Schedule, FirstFrameOnlyPlacement) {
  const auto s = small_sync();
  const auto layout = qsync::build_layout(1, s);
  const qsync::FrameSchedule sched(layout, s, 3, 5, qsync::SyncPlacement::first_frame_only);
  EXPECT_EQ(sched.pulse(0).kind, SlotKind::sync);
  EXPECT_EQ(sched.pulse(64).kind, SlotKind::random);
  EXPECT_EQ(sched.pulse(128 + 2).kind, SlotKind::random);
}

TEST(Schedule, GroundTruthIsBoundsChecked) {
  const auto s = small_sync();
  const auto sched = qsync::build_schedule(qsync::build_layout(1, s), s, 1, 5);
  EXPECT_EQ(qsync::ground_truth_bit(sched, 3), sched.pulse(3));
  EXPECT_THROW(qsync::ground_truth_bit(sched, sched.total_pulses()), qsync::Error);
}

}  // namespace
