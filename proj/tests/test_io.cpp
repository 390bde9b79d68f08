#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "qsync/error.hpp"
#include "qsync/io.hpp"

namespace {

namespace fs = std::filesystem;
using qsync::Detector;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qsync_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const char* name) const { return dir_ / name; }

  fs::path dir_;
};

TEST_F(IoTest, SyncStringRoundTrip) {
  const auto s = qsync::generate_sync_string({50, 8, 0.7, 99});
  qsync::io::write_sync_string(path("s.bin"), s);
  EXPECT_EQ(fs::file_size(path("s.bin")) - qsync::io::read_text(path("s.bin")).find('\n') - 1,
            s.size());
  EXPECT_EQ(qsync::io::read_sync_string(path("s.bin")), s);
}

TEST_F(IoTest, SyncStringRejectsCorruption) {
  qsync::io::write_text(path("bad.bin"), "{\"format\":\"something-else\"}\n");
  EXPECT_THROW(qsync::io::read_sync_string(path("bad.bin")), qsync::Error);

  const auto s = qsync::generate_sync_string({10, 2, 1.0, 1});
  qsync::io::write_sync_string(path("s.bin"), s);
  std::string text = qsync::io::read_text(path("s.bin"));
  text.pop_back();
  qsync::io::write_text(path("short.bin"), text);
  EXPECT_THROW(qsync::io::read_sync_string(path("short.bin")), qsync::Error);

  text.push_back('\x05');
  qsync::io::write_text(path("byte.bin"), text);
  EXPECT_THROW(qsync::io::read_sync_string(path("byte.bin")), qsync::Error);

  EXPECT_THROW(qsync::io::read_sync_string(path("missing.bin")), qsync::Error);
}

TEST(PulsePacking, AllCombinations) {
  for (auto kind : {qsync::SlotKind::sync, qsync::SlotKind::random}) {
    for (auto p : {qsync::Polarization::H, qsync::Polarization::V, qsync::Polarization::D,
                   qsync::Polarization::A}) {
      if (kind == qsync::SlotKind::sync && qsync::basis_of(p) != qsync::Basis::Z) continue;
      qsync::PulseRecord rec;
      rec.slot_index = 42;
      rec.kind = kind;
      rec.polarization = p;
      rec.basis = qsync::basis_of(p);
      rec.bit = qsync::bit_of(p);
      EXPECT_EQ(qsync::io::unpack_pulse(qsync::io::pack_pulse(rec), 42), rec);
    }
  }
}

TEST_F(IoTest, ScheduleRoundTrip) {
  const auto s = qsync::generate_sync_string({20, 5, 1.0, 3});
  const auto schedule = qsync::build_schedule(qsync::build_layout(2, s), s, 3, 17,
                                              qsync::SyncPlacement::first_frame_only);
  qsync::io::write_schedule(path("sched.bin"), schedule);
  const auto file = qsync::io::read_schedule(path("sched.bin"));
  EXPECT_EQ(file.layout, schedule.layout());
  EXPECT_EQ(file.sync, s.params);
  EXPECT_EQ(file.seed, 17u);
  EXPECT_EQ(file.frames, 3u);
  EXPECT_EQ(file.placement, qsync::SyncPlacement::first_frame_only);
  EXPECT_EQ(file.pulses, schedule.materialize());
  const auto rebuilt = qsync::io::rebuild_schedule(file);
  EXPECT_EQ(rebuilt.materialize(), schedule.materialize());
}

TEST_F(IoTest, DetectionsRoundTrip) {
  const qsync::DetectionStream stream{
      {-5, Detector::A, {}, {}},
      {100, Detector::H, 0, qsync::TruthKind::sync},
      {20100, Detector::D, 1, qsync::TruthKind::random},
      {40077, Detector::V, 2, qsync::TruthKind::dark}};
  qsync::io::write_detections_csv(path("d.csv"), stream);
  EXPECT_EQ(qsync::io::read_detections_csv(path("d.csv")), stream);
}

TEST_F(IoTest, DetectionsWithoutTruthAreSorted) {
  qsync::io::write_text(path("d.csv"), "t_ps,detector\n300,V\n100,H\n200,D\n");
  const auto d = qsync::io::read_detections_csv(path("d.csv"));
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].t_ps, 100);
  EXPECT_EQ(d[1].detector, Detector::D);
  EXPECT_EQ(d[2].t_ps, 300);
  EXPECT_FALSE(d[0].truth_slot.has_value());
  EXPECT_FALSE(d[0].truth_kind.has_value());
}

TEST_F(IoTest, DetectionsRejectBadInput) {
  qsync::io::write_text(path("h.csv"), "time,det\n1,H\n");
  EXPECT_THROW(qsync::io::read_detections_csv(path("h.csv")), qsync::Error);
  qsync::io::write_text(path("x.csv"), "t_ps,detector\n1,Q\n");
  EXPECT_THROW(qsync::io::read_detections_csv(path("x.csv")), qsync::Error);
  qsync::io::write_text(path("n.csv"), "t_ps,detector\nabc,H\n");
  EXPECT_THROW(qsync::io::read_detections_csv(path("n.csv")), qsync::Error);
}

TEST(Json, OffsetResultFields) {
  qsync::OffsetResult r;
  r.i_opt = 2;
  r.u_opt = 2;
  r.j_opt = 3;
  r.slot_offset = 605;
  r.offset_ps = 12100000.0;
  r.confidence = 7.5;
  r.success = true;
  const std::string j = qsync::io::to_json(r);
  for (const char* key : {"\"i_opt\": 2", "\"u_opt\": 2", "\"j_opt\": 3", "\"slot_offset\": 605",
                          "\"success\": true"})
    EXPECT_NE(j.find(key), std::string::npos) << key << " in " << j;
}

TEST_F(IoTest, CorrelationCsvLongFormat) {
  qsync::CorrelationTrace t;
  t.stage1 = {{1, 2}, {3, 4}};
  t.stage2 = {5, 6, 7};
  qsync::io::write_correlation_csv(path("c.csv"), t);
  const std::string text = qsync::io::read_text(path("c.csv"));
  EXPECT_EQ(text.rfind("stage,row,index,value\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
}

}  // namespace
