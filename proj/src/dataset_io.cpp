#include "faultbench/dataset_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "faultbench/error.hpp"
#include "faultbench/image_io.hpp"

namespace faultbench::io {

namespace fs = std::filesystem;

namespace {

constexpr double kQuaternionTolerance = 1e-3;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

// Line-oriented CSV reader that tracks 1-based line numbers for messages.
class CsvReader {
 public:
  explicit CsvReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }

  // Skips blank lines and '#' comments (EuRoC headers start with '#'). A
  // first row whose leading field is not an integer is taken as a header.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++line_number_;
      const auto body = trim(line_);
      if (body.empty() || body.front() == '#') continue;
      fields = split_fields(body);
      if (!seen_row_) {
        seen_row_ = true;
        std::int64_t v = 0;
        const auto f = fields.front();
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc() && !f.empty() && !std::isdigit(static_cast<unsigned char>(f.front())) &&
            f.front() != '-' && f.front() != '+') {
          continue;
        }
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_.string() + ":" + std::to_string(line_number_) + ": " + what);
  }

  std::int64_t integer(std::string_view field) const {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      fail("expected integer timestamp, got '" + std::string(field) + "'");
    }
    return value;
  }

  double real(std::string_view field) const {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      fail("expected number, got '" + std::string(field) + "'");
    }
    return value;
  }

  int line_number() const { return line_number_; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ifstream in_;
  std::string line_;
  int line_number_ = 0;
  bool seen_row_ = false;
};

void check_increasing(const CsvReader& reader, TimestampNs previous, TimestampNs current, bool first) {
  if (!first && current <= previous) {
    throw OrderingError(reader.path().string() + ":" + std::to_string(reader.line_number()) +
                        ": timestamp " + std::to_string(current) + " does not follow " +
                        std::to_string(previous));
  }
}

std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

Eigen::Quaterniond checked_quaternion(const CsvReader& reader, double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  const double norm = q.norm();
  if (!(std::abs(norm - 1.0) <= kQuaternionTolerance)) {
    throw DataError(reader.path().string() + ":" + std::to_string(reader.line_number()) +
                    ": quaternion norm " + format_double(norm) + " deviates from 1 by more than 1e-3");
  }
  q.coeffs() /= norm;
  return q;
}

void write_pose_row(std::ostream& out, const TimedPose& p) {
  const auto& q = p.orientation;
  out << p.t << ',' << format_double(p.position.x()) << ',' << format_double(p.position.y()) << ','
      << format_double(p.position.z()) << ',' << format_double(q.w()) << ',' << format_double(q.x())
      << ',' << format_double(q.y()) << ',' << format_double(q.z()) << '\n';
}

fs::path resolve_mav0(const fs::path& root) {
  if (fs::exists(root / "imu0")) return root;
  if (fs::exists(root / "mav0" / "imu0")) return root / "mav0";
  throw IoError("no EuRoC mav0 folder (imu0/) found under " + root.string());
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::vector<ImuSample> load_euroc_imu(const fs::path& csv) {
  CsvReader reader(csv);
  std::vector<ImuSample> samples;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 7) reader.fail("expected 7 columns, found " + std::to_string(f.size()));
    ImuSample s;
    s.t = reader.integer(f[0]);
    s.gyro = {reader.real(f[1]), reader.real(f[2]), reader.real(f[3])};
    s.accel = {reader.real(f[4]), reader.real(f[5]), reader.real(f[6])};
    s.index = static_cast<std::int64_t>(samples.size());
    check_increasing(reader, samples.empty() ? 0 : samples.back().t, s.t, samples.empty());
    samples.push_back(s);
  }
  return samples;
}

void write_euroc_imu(const fs::path& csv, const std::vector<ImuSample>& samples) {
  auto out = open_for_write(csv);
  out << "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
         "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n";
  for (const auto& s : samples) {
    out << s.t;
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.gyro[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.accel[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + csv.string());
}

std::vector<CameraFrame> load_euroc_cam_index(const fs::path& index_csv, const fs::path& left_dir,
                                              const fs::path& right_dir, bool load_pixels) {
  CsvReader reader(index_csv);
  std::vector<CameraFrame> frames;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 2) reader.fail("expected 2 columns, found " + std::to_string(f.size()));
    CameraFrame frame;
    frame.t = reader.integer(f[0]);
    check_increasing(reader, frames.empty() ? 0 : frames.back().t, frame.t, frames.empty());
    const std::string name(f[1]);
    frame.index = static_cast<std::int64_t>(frames.size());
    if (!load_pixels) {
      frames.push_back(std::move(frame));
      continue;
    }
    frame.left = read_gray_image(left_dir / name);
    frame.right = read_gray_image(right_dir / name);
    if (frame.left.width() != frame.right.width() || frame.left.height() != frame.right.height()) {
      throw FormatError("stereo dimension mismatch for " + name + ": left " +
                        std::to_string(frame.left.width()) + "x" + std::to_string(frame.left.height()) +
                        ", right " + std::to_string(frame.right.width()) + "x" +
                        std::to_string(frame.right.height()));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_euroc_cameras(const fs::path& mav0_dir, const std::vector<CameraFrame>& frames) {
  for (const char* cam : {"cam0", "cam1"}) {
    const fs::path dir = mav0_dir / cam;
    fs::create_directories(dir / "data");
    auto out = open_for_write(dir / "data.csv");
    out << "#timestamp [ns],filename\n";
    const bool left = std::string_view(cam) == "cam0";
    for (const auto& frame : frames) {
      const std::string name = std::to_string(frame.t) + ".png";
      out << frame.t << ',' << name << '\n';
      write_png(dir / "data" / name, left ? frame.left : frame.right);
    }
  }
}

Trajectory load_euroc_groundtruth(const fs::path& csv) {
  CsvReader reader(csv);
  Trajectory traj;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() < 8) reader.fail("expected at least 8 columns, found " + std::to_string(f.size()));
    TimedPose p;
    p.t = reader.integer(f[0]);
    p.position = {reader.real(f[1]), reader.real(f[2]), reader.real(f[3])};
    for (std::size_t i = 8; i < f.size(); ++i) reader.real(f[i]);  // validated, then ignored
    p.orientation = checked_quaternion(reader, reader.real(f[4]), reader.real(f[5]), reader.real(f[6]),
                                       reader.real(f[7]));
    check_increasing(reader, traj.empty() ? 0 : traj.poses.back().t, p.t, traj.empty());
    traj.poses.push_back(p);
  }
  return traj;
}

void write_euroc_groundtruth(const fs::path& csv, const Trajectory& trajectory) {
  auto out = open_for_write(csv);
  out << "#timestamp, p_RS_R_x [m], p_RS_R_y [m], p_RS_R_z [m], q_RS_w [], q_RS_x [], q_RS_y [], "
         "q_RS_z []\n";
  for (const auto& p : trajectory.poses) write_pose_row(out, p);
}

Trajectory read_trajectory_csv(const fs::path& csv) {
  CsvReader reader(csv);
  Trajectory traj;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 8) reader.fail("expected 8 columns, found " + std::to_string(f.size()));
    TimedPose p;
    p.t = reader.integer(f[0]);
    p.position = {reader.real(f[1]), reader.real(f[2]), reader.real(f[3])};
    p.orientation = checked_quaternion(reader, reader.real(f[4]), reader.real(f[5]), reader.real(f[6]),
                                       reader.real(f[7]));
    check_increasing(reader, traj.empty() ? 0 : traj.poses.back().t, p.t, traj.empty());
    traj.poses.push_back(p);
  }
  return traj;
}

void write_trajectory_csv(const fs::path& csv, const Trajectory& trajectory) {
  auto out = open_for_write(csv);
  out << "#timestamp_ns,px,py,pz,qw,qx,qy,qz\n";
  for (const auto& p : trajectory.poses) write_pose_row(out, p);
  if (!out) throw IoError("failed writing " + csv.string());
}

EurocSequence load_euroc_sequence(const fs::path& root, bool load_pixels) {
  const fs::path mav0 = resolve_mav0(root);
  EurocSequence seq;
  seq.imu = load_euroc_imu(mav0 / "imu0" / "data.csv");
  seq.cameras = load_euroc_cam_index(mav0 / "cam0" / "data.csv", mav0 / "cam0" / "data",
                                     mav0 / "cam1" / "data", load_pixels);
  const fs::path gt = mav0 / "state_groundtruth_estimate0" / "data.csv";
  if (fs::exists(gt)) seq.groundtruth = load_euroc_groundtruth(gt);
  return seq;
}

void write_euroc_sequence(const fs::path& mav0_dir, const EurocSequence& sequence) {
  write_euroc_imu(mav0_dir / "imu0" / "data.csv", sequence.imu);
  write_euroc_cameras(mav0_dir, sequence.cameras);
  if (!sequence.groundtruth.empty()) {
    write_euroc_groundtruth(mav0_dir / "state_groundtruth_estimate0" / "data.csv", sequence.groundtruth);
  }
}

}  // namespace faultbench::io
