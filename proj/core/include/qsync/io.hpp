#pragma once

// File formats. Binary files start with one line of JSON header followed
// by a raw payload; text outputs are CSV with a header row.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qsync/channel.hpp"
#include "qsync/clock_recovery.hpp"
#include "qsync/framing.hpp"
#include "qsync/offset_recovery.hpp"
#include "qsync/sync_string.hpp"

namespace qsync::io {

/// Header {"format":"qsync-sync/1","L1","N1","lambda","seed"} then L bytes,
/// 0x01 for +1 and 0xFF for -1.
void write_sync_string(const std::filesystem::path& path, const SyncString& s);
SyncString read_sync_string(const std::filesystem::path& path);

struct ScheduleFile {
  FrameLayout layout;
  SyncStringParams sync;
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  SyncPlacement placement = SyncPlacement::every_frame;
  std::vector<PulseRecord> pulses;
};

/// Header {"format":"qsync-schedule/1","M","L1","N1","lambda","sync_seed",
/// "seed","frames","placement"} then one byte per pulse: bits 0-1 hold the
/// polarization, bit 2 is set for sync slots.
void write_schedule(const std::filesystem::path& path, const FrameSchedule& schedule);
ScheduleFile read_schedule(const std::filesystem::path& path);
/// Regenerate the implicit schedule described by a file header.
FrameSchedule rebuild_schedule(const ScheduleFile& file);

std::uint8_t pack_pulse(const PulseRecord& p) noexcept;
PulseRecord unpack_pulse(std::uint8_t byte, std::uint64_t slot);

/// Columns t_ps,detector,truth_slot,truth_kind; absent truth is written as
/// empty fields. The reader accepts files with only t_ps,detector.
void write_detections_csv(const std::filesystem::path& path, const DetectionStream& stream);
DetectionStream read_detections_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// {"i_opt","u_opt","j_opt","slot_offset","offset_ps","confidence","success"}
std::string to_json(const OffsetResult& r);
std::string to_json(const PeriodEstimate& e);
std::string to_json(const PathDelayEstimate& e);

void write_segments_csv(const std::filesystem::path& path,
                        std::span<const SegmentDiagnostic> segments);
/// Columns bin_center_ps,count over (-tau/2, tau/2].
void write_histogram_csv(const std::filesystem::path& path, std::span<const std::size_t> counts,
                         double tau_ps);
/// Long format: stage,row,index,value.
void write_correlation_csv(const std::filesystem::path& path, const CorrelationTrace& trace);

}  // namespace qsync::io
