#include "qsync/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsync/error.hpp"

namespace qsync::io {
namespace {

using nlohmann::json;

constexpr const char* sync_format = "qsync-sync/1";
constexpr const char* schedule_format = "qsync-schedule/1";

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return in;
}

json read_header(std::istream& in, const std::string& path, const char* format) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse_error, path + ": missing header");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": bad header: " + e.what());
  }
  if (h.value("format", std::string{}) != format)
    throw Error(ErrorCode::parse_error, path + ": expected format " + format);
  return h;
}

std::string read_payload(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
T get(const json& h, const char* key, const std::string& path) {
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::parse_error, path + ": header field '" + key + "' missing or invalid");
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(std::string_view field, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw Error(ErrorCode::parse_error,
                "line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(',', pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

TruthKind truth_kind_from(std::string_view s, std::size_t line) {
  if (s == "sync") return TruthKind::sync;
  if (s == "random") return TruthKind::random;
  if (s == "dark") return TruthKind::dark;
  throw Error(ErrorCode::parse_error,
              "line " + std::to_string(line) + ": unknown truth_kind '" + std::string(s) + "'");
}

}  // namespace

void write_sync_string(const std::filesystem::path& path, const SyncString& s) {
  json h;
  h["format"] = sync_format;
  h["L1"] = s.params.L1;
  h["N1"] = s.params.N1;
  h["lambda"] = s.params.lambda;
  h["seed"] = s.params.seed;
  auto out = open_out(path, true);
  out << h.dump() << '\n';
  std::string payload(s.bits.size(), '\0');
  for (std::size_t i = 0; i < s.bits.size(); ++i)
    payload[i] = static_cast<char>(static_cast<std::uint8_t>(s.bits[i]));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

SyncString read_sync_string(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  const json h = read_header(in, path.string(), sync_format);
  SyncString s;
  s.params.L1 = get<std::size_t>(h, "L1", path.string());
  s.params.N1 = get<std::size_t>(h, "N1", path.string());
  s.params.lambda = get<double>(h, "lambda", path.string());
  s.params.seed = get<std::uint64_t>(h, "seed", path.string());
  s.params.validate();
  const std::string payload = read_payload(in);
  if (payload.size() != s.params.length())
    throw Error(ErrorCode::parse_error, path.string() + ": payload length " +
                                            std::to_string(payload.size()) + " != L1*N1");
  s.bits.resize(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const auto b = static_cast<std::int8_t>(static_cast<std::uint8_t>(payload[i]));
    if (b != 1 && b != -1)
      throw Error(ErrorCode::parse_error, path.string() + ": symbol at " + std::to_string(i) +
                                              " is not +1/-1");
    s.bits[i] = b;
  }
  s.c0_nominal = nominal_c0(s.params.lambda);
  return s;
}

std::uint8_t pack_pulse(const PulseRecord& p) noexcept {
  return static_cast<std::uint8_t>(static_cast<std::uint8_t>(p.polarization) |
                                   (p.kind == SlotKind::sync ? 0x4 : 0x0));
}

PulseRecord unpack_pulse(std::uint8_t byte, std::uint64_t slot) {
  if (byte & ~0x7u) throw Error(ErrorCode::parse_error, "pulse byte has reserved bits set");
  PulseRecord p;
  p.slot_index = slot;
  p.polarization = static_cast<Polarization>(byte & 0x3);
  p.kind = (byte & 0x4) ? SlotKind::sync : SlotKind::random;
  p.basis = basis_of(p.polarization);
  p.bit = bit_of(p.polarization);
  return p;
}

void write_schedule(const std::filesystem::path& path, const FrameSchedule& schedule) {
  const SyncStringParams& sp = schedule.sync().params;
  json h;
  h["format"] = schedule_format;
  h["M"] = schedule.layout().M;
  h["L1"] = sp.L1;
  h["N1"] = sp.N1;
  h["lambda"] = sp.lambda;
  h["sync_seed"] = sp.seed;
  h["seed"] = schedule.seed();
  h["frames"] = schedule.frames();
  h["placement"] =
      schedule.placement() == SyncPlacement::every_frame ? "every_frame" : "first_frame_only";
  auto out = open_out(path, true);
  out << h.dump() << '\n';
  const std::uint64_t n = schedule.total_pulses();
  std::string payload(n, '\0');
  for (std::uint64_t slot = 0; slot < n; ++slot)
    payload[slot] = static_cast<char>(pack_pulse(schedule.pulse(slot)));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

ScheduleFile read_schedule(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  const std::string p = path.string();
  const json h = read_header(in, p, schedule_format);
  ScheduleFile f;
  f.sync.L1 = get<std::size_t>(h, "L1", p);
  f.sync.N1 = get<std::size_t>(h, "N1", p);
  f.sync.lambda = get<double>(h, "lambda", p);
  f.sync.seed = get<std::uint64_t>(h, "sync_seed", p);
  f.sync.validate();
  f.layout = FrameLayout{get<std::size_t>(h, "M", p), f.sync.length()};
  f.seed = get<std::uint64_t>(h, "seed", p);
  f.frames = get<std::size_t>(h, "frames", p);
  const auto placement = get<std::string>(h, "placement", p);
  if (placement == "every_frame")
    f.placement = SyncPlacement::every_frame;
  else if (placement == "first_frame_only")
    f.placement = SyncPlacement::first_frame_only;
  else
    throw Error(ErrorCode::parse_error, p + ": unknown placement '" + placement + "'");
  const std::string payload = read_payload(in);
  if (payload.size() != f.frames * f.layout.frame_length())
    throw Error(ErrorCode::parse_error, p + ": payload length does not match frames * N_f");
  f.pulses.reserve(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i)
    f.pulses.push_back(unpack_pulse(static_cast<std::uint8_t>(payload[i]), i));
  return f;
}

FrameSchedule rebuild_schedule(const ScheduleFile& file) {
  const SyncString s = generate_sync_string(file.sync);
  return build_schedule(build_layout(file.layout.M, s), s, file.frames, file.seed, file.placement);
}

void write_detections_csv(const std::filesystem::path& path, const DetectionStream& stream) {
  auto out = open_out(path, false);
  std::string buf = "t_ps,detector,truth_slot,truth_kind\n";
  for (const DetectionRecord& r : stream) {
    buf += std::to_string(r.t_ps);
    buf += ',';
    buf += to_char(r.detector);
    buf += ',';
    if (r.truth_slot) buf += std::to_string(*r.truth_slot);
    buf += ',';
    if (r.truth_kind) buf += to_string(*r.truth_kind);
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

DetectionStream read_detections_csv(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse_error, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cols = split_commas(line);
  int c_t = -1, c_det = -1, c_slot = -1, c_kind = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const int ci = static_cast<int>(i);
    if (cols[i] == "t_ps") c_t = ci;
    else if (cols[i] == "detector") c_det = ci;
    else if (cols[i] == "truth_slot") c_slot = ci;
    else if (cols[i] == "truth_kind") c_kind = ci;
  }
  if (c_t < 0 || c_det < 0)
    throw Error(ErrorCode::parse_error, path.string() + ": header lacks t_ps or detector");

  DetectionStream stream;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_commas(line);
    if (f.size() != cols.size())
      throw Error(ErrorCode::parse_error, "line " + std::to_string(lineno) + ": expected " +
                                              std::to_string(cols.size()) + " fields");
    DetectionRecord r;
    r.t_ps = parse_number<std::int64_t>(f[c_t], lineno);
    if (f[c_det].size() != 1)
      throw Error(ErrorCode::parse_error, "line " + std::to_string(lineno) + ": bad detector");
    r.detector = polarization_from_char(f[c_det][0]);
    if (c_slot >= 0 && !f[c_slot].empty()) r.truth_slot = parse_number<std::int64_t>(f[c_slot], lineno);
    if (c_kind >= 0 && !f[c_kind].empty()) r.truth_kind = truth_kind_from(f[c_kind], lineno);
    stream.push_back(r);
  }
  if (!std::is_sorted(stream.begin(), stream.end(),
                      [](const auto& a, const auto& b) { return a.t_ps < b.t_ps; }))
    std::stable_sort(stream.begin(), stream.end(),
                     [](const auto& a, const auto& b) { return a.t_ps < b.t_ps; });
  return stream;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, false);
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  return read_payload(in);
}

std::string to_json(const OffsetResult& r) {
  json j;
  j["i_opt"] = r.i_opt;
  j["u_opt"] = r.u_opt;
  j["j_opt"] = r.j_opt;
  j["slot_offset"] = r.slot_offset;
  j["offset_ps"] = r.offset_ps;
  j["confidence"] = r.confidence;
  j["success"] = r.success;
  return j.dump(2);
}

std::string to_json(const PeriodEstimate& e) {
  json j;
  j["tau_B0_ps"] = e.tau_B0_ps;
  j["k"] = e.k;
  j["tau_B_ps"] = e.tau_B_ps;
  j["n_samples"] = e.n_samples;
  j["residual_std_ps"] = e.residual_std_ps;
  j["phase_origin_ps"] = e.phase_origin_ps;
  return j.dump(2);
}

std::string to_json(const PathDelayEstimate& e) {
  json j;
  for (Detector d : all_detectors) {
    const auto idx = static_cast<std::size_t>(d);
    const std::string key(1, to_char(d));
    j[key] = {{"delay_ps", e.delays[d]}, {"count", e.counts[idx]}, {"ambiguous", e.ambiguous[idx]}};
  }
  return j.dump(2);
}

void write_segments_csv(const std::filesystem::path& path,
                        std::span<const SegmentDiagnostic> segments) {
  auto out = open_out(path, false);
  out << "t_start_ps,t_end_ps,count,slope,intercept_ps\n";
  for (const SegmentDiagnostic& s : segments)
    out << fmt_double(s.t_start_ps) << ',' << fmt_double(s.t_end_ps) << ',' << s.count << ','
        << fmt_double(s.slope) << ',' << fmt_double(s.intercept_ps) << '\n';
}

void write_histogram_csv(const std::filesystem::path& path, std::span<const std::size_t> counts,
                         double tau_ps) {
  auto out = open_out(path, false);
  out << "bin_center_ps,count\n";
  const double w = tau_ps / static_cast<double>(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b)
    out << fmt_double(-tau_ps / 2 + (static_cast<double>(b) + 0.5) * w) << ',' << counts[b]
        << '\n';
}

void write_correlation_csv(const std::filesystem::path& path, const CorrelationTrace& trace) {
  auto out = open_out(path, false);
  out << "stage,row,index,value\n";
  for (std::size_t r = 0; r < trace.stage1.size(); ++r)
    for (std::size_t u = 0; u < trace.stage1[r].size(); ++u)
      out << "1," << r + 1 << ',' << u << ',' << trace.stage1[r][u] << '\n';
  for (std::size_t j = 0; j < trace.stage2.size(); ++j)
    out << "2,," << j << ',' << trace.stage2[j] << '\n';
}

}  // namespace qsync::io
