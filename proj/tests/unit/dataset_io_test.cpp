#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "faultbench/dataset_io.hpp"
#include "faultbench/error.hpp"
#include "faultbench/image_io.hpp"
#include "faultbench/rng.hpp"
#include "faultbench/synthetic.hpp"
#include "oracles/temp_dir.hpp"

namespace faultbench::io {
namespace {

using testutil::TempDir;
using testutil::write_file;

constexpr const char* kImuHeader =
    "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
    "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n";

std::size_t count_data_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++n;
  }
  return n;
}

TEST(LoadEurocImu, HeaderOnlyIsEmpty) {
  TempDir dir;
  write_file(dir / "imu.csv", kImuHeader);
  EXPECT_TRUE(load_euroc_imu(dir / "imu.csv").empty());
}

TEST(LoadEurocImu, ThreeRowFixture) {
  TempDir dir;
  write_file(dir / "imu.csv", std::string(kImuHeader) +
                                  "0,0.1,0.2,0.3,0,0,9.81\n"
                                  "5000000,0.1,0.2,0.3,0,0,9.81\n"
                                  "10000000, 0.1, 0.2, 0.3, 0, 0, 9.81\r\n");
  const auto s = load_euroc_imu(dir / "imu.csv");
  ASSERT_EQ(s.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s[i].index, static_cast<std::int64_t>(i));
  EXPECT_EQ(s[1].t - s[0].t, 5'000'000);
  EXPECT_EQ(s[2].t - s[1].t, 5'000'000);
  EXPECT_EQ(s[2].gyro, Eigen::Vector3d(0.1, 0.2, 0.3));
  EXPECT_EQ(s[2].accel, Eigen::Vector3d(0, 0, 9.81));
}

TEST(LoadEurocImu, PlainHeaderWithoutHash) {
  TempDir dir;
  write_file(dir / "imu.csv", "timestamp,wx,wy,wz,ax,ay,az\n1,0,0,0,0,0,0\n");
  EXPECT_EQ(load_euroc_imu(dir / "imu.csv").size(), 1u);
}

TEST(LoadEurocImu, MalformedRowNamesLine) {
  TempDir dir;
  write_file(dir / "imu.csv", std::string(kImuHeader) + "0,0,0,0,0,0,0\n1,0,0,zero,0,0,0\n");
  try {
    load_euroc_imu(dir / "imu.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  write_file(dir / "short.csv", std::string(kImuHeader) + "0,0,0,0,0,0\n");
  EXPECT_THROW(load_euroc_imu(dir / "short.csv"), ParseError);
}

TEST(LoadEurocImu, NonMonotoneTimestamps) {
  TempDir dir;
  write_file(dir / "imu.csv", std::string(kImuHeader) + "10,0,0,0,0,0,0\n10,0,0,0,0,0,0\n");
  EXPECT_THROW(load_euroc_imu(dir / "imu.csv"), OrderingError);
  write_file(dir / "back.csv", std::string(kImuHeader) + "10,0,0,0,0,0,0\n5,0,0,0,0,0,0\n");
  EXPECT_THROW(load_euroc_imu(dir / "back.csv"), OrderingError);
}

TEST(LoadEurocImu, MissingFile) {
  EXPECT_THROW(load_euroc_imu("/nonexistent/imu.csv"), IoError);
}

TEST(LoadEurocImu, SixtySecondsAt200Hz) {
  TempDir dir;
  const auto streams = synthesize(SyntheticProfile::standard(4));
  write_euroc_imu(dir / "imu.csv", streams.imu);
  const auto loaded = load_euroc_imu(dir / "imu.csv");
  EXPECT_EQ(count_data_lines(dir / "imu.csv"), 12'000u);
  EXPECT_EQ(loaded.size(), 12'000u);
}

TEST(EurocImu, RoundTripIsBitExact) {
  TempDir dir;
  Xoshiro256StarStar rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ImuSample> samples;
    TimestampNs t = static_cast<TimestampNs>(rng.next() % 1'000'000'000'000ULL);
    for (int i = 0; i < 200; ++i) {
      ImuSample s;
      t += 1 + static_cast<TimestampNs>(rng.next() % 10'000'000);
      s.t = t;
      s.index = i;
      for (int k = 0; k < 3; ++k) {
        s.gyro[k] = std::ldexp(rng.normal(), static_cast<int>(rng.next() % 40) - 20);
        s.accel[k] = std::ldexp(rng.normal(), static_cast<int>(rng.next() % 40) - 20);
      }
      samples.push_back(s);
    }
    write_euroc_imu(dir / "rt.csv", samples);
    ASSERT_EQ(load_euroc_imu(dir / "rt.csv"), samples);
  }
}

void write_pgm_bytes(const std::filesystem::path& p, int w, int h, const std::vector<std::uint8_t>& px) {
  std::ofstream out(p, std::ios::binary);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

TEST(LoadEurocCamIndex, EmptyIndex) {
  TempDir dir;
  write_file(dir / "data.csv", "#timestamp [ns],filename\n");
  EXPECT_TRUE(load_euroc_cam_index(dir / "data.csv", dir.path(), dir.path()).empty());
}

TEST(LoadEurocCamIndex, DecodesCraftedImages) {
  TempDir dir;
  std::filesystem::create_directories(dir / "l");
  std::filesystem::create_directories(dir / "r");
  const std::vector<std::uint8_t> a = {0, 1, 254, 255}, b = {10, 20, 30, 40};
  write_pgm_bytes(dir / "l/1.pgm", 2, 2, a);
  write_pgm_bytes(dir / "r/1.pgm", 2, 2, b);
  write_png(dir / "l/2.png", GrayImage(2, 2, b));
  write_png(dir / "r/2.png", GrayImage(2, 2, a));
  write_file(dir / "data.csv", "#timestamp [ns],filename\n100,1.pgm\n200,2.png\n");

  const auto frames = load_euroc_cam_index(dir / "data.csv", dir / "l", dir / "r");
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].t, 100);
  EXPECT_EQ(frames[1].index, 1);
  EXPECT_EQ(frames[0].left.pixels(), a);
  EXPECT_EQ(frames[0].right.pixels(), b);
  EXPECT_EQ(frames[1].left.pixels(), b);
  EXPECT_EQ(frames[1].right.pixels(), a);

  const auto bare = load_euroc_cam_index(dir / "data.csv", dir / "l", dir / "r", false);
  ASSERT_EQ(bare.size(), 2u);
  EXPECT_TRUE(bare[0].left.empty());
  EXPECT_EQ(bare[1].t, 200);
}

TEST(LoadEurocCamIndex, MissingImageNamesFile) {
  TempDir dir;
  write_file(dir / "data.csv", "#t,f\n100,gone.png\n");
  try {
    load_euroc_cam_index(dir / "data.csv", dir.path(), dir.path());
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("gone.png"), std::string::npos);
  }
}

TEST(LoadEurocCamIndex, StereoDimensionMismatch) {
  TempDir dir;
  std::filesystem::create_directories(dir / "l");
  std::filesystem::create_directories(dir / "r");
  write_png(dir / "l/x.png", GrayImage::filled(2, 2, 0));
  write_png(dir / "r/x.png", GrayImage::filled(3, 2, 0));
  write_file(dir / "data.csv", "#t,f\n1,x.png\n");
  EXPECT_THROW(load_euroc_cam_index(dir / "data.csv", dir / "l", dir / "r"), FormatError);
}

TEST(ImageIo, FormatDetectedFromContent) {
  TempDir dir;
  const GrayImage img(3, 1, {7, 8, 9});
  write_png(dir / "really_png.pgm", img);
  EXPECT_EQ(read_gray_image(dir / "really_png.pgm"), img);
  write_pgm(dir / "p.pgm", img);
  EXPECT_EQ(read_gray_image(dir / "p.pgm"), img);
  write_file(dir / "junk.png", "not an image");
  EXPECT_THROW(read_gray_image(dir / "junk.png"), FormatError);
}

TEST(ImageIo, NoisyImagesPersistRenderedPixels) {
  TempDir dir;
  const GrayImage noisy = GrayImage::filled(16, 8, 128).with_noise(30.0, 5);
  write_png(dir / "n.png", noisy);
  EXPECT_EQ(read_png(dir / "n.png").pixels(), noisy.pixels());
}

TEST(LoadEurocGroundtruth, IdentityRow) {
  TempDir dir;
  write_file(dir / "gt.csv", "#timestamp,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bwx,bwy,bwz,bax,bay,baz\n"
                             "7,0,0,0,1,0,0,0,0.5,0.5,0.5,0,0,0,0,0,0\n");
  const auto gt = load_euroc_groundtruth(dir / "gt.csv");
  ASSERT_EQ(gt.size(), 1u);
  EXPECT_EQ(gt.poses[0].t, 7);
  EXPECT_EQ(gt.poses[0].position, Eigen::Vector3d::Zero());
  EXPECT_TRUE(gt.poses[0].orientation.isApprox(Eigen::Quaterniond::Identity(), 0.0));
}

TEST(LoadEurocGroundtruth, QuaternionNormTolerance) {
  TempDir dir;
  write_file(dir / "ok.csv", "#h\n1,0,0,0,1.0005,0,0,0\n");
  const auto gt = load_euroc_groundtruth(dir / "ok.csv");
  EXPECT_NEAR(gt.poses[0].orientation.norm(), 1.0, 1e-15);
  write_file(dir / "bad.csv", "#h\n1,0,0,0,0.5,0,0,0\n");
  EXPECT_THROW(load_euroc_groundtruth(dir / "bad.csv"), DataError);
}

TEST(TrajectoryCsv, CommentsAndRoundTrip) {
  TempDir dir;
  write_file(dir / "t.csv", "# estimate\n#timestamp_ns,px,py,pz,qw,qx,qy,qz\n"
                            "1,1,2,3,1,0,0,0\n# midway comment\n2,4,5,6,0,1,0,0\n");
  const auto t = read_trajectory_csv(dir / "t.csv");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.poses[1].position, Eigen::Vector3d(4, 5, 6));

  const auto truth = synthesize(SyntheticProfile::standard(2)).truth;
  write_trajectory_csv(dir / "rt.csv", truth);
  const auto back = read_trajectory_csv(dir / "rt.csv");
  ASSERT_EQ(back.size(), truth.size());
  for (std::size_t i = 0; i < truth.size(); i += 97) {
    EXPECT_EQ(back.poses[i].t, truth.poses[i].t);
    EXPECT_EQ(back.poses[i].position, truth.poses[i].position);
    EXPECT_TRUE(back.poses[i].orientation.coeffs().isApprox(truth.poses[i].orientation.coeffs(), 1e-15));
  }
}

TEST(EurocSequence, WriteThenLoad) {
  TempDir dir;
  auto profile = SyntheticProfile::standard(3);
  profile.duration_s = 0.5;
  profile.image_width = 8;
  profile.image_height = 4;
  const auto s = synthesize(profile);
  EurocSequence seq{s.imu, s.cameras, s.truth};
  seq.cameras[1].left = seq.cameras[1].left.with_noise(10.0, 77);
  write_euroc_sequence(dir / "seq/mav0", seq);

  const auto loaded = load_euroc_sequence(dir / "seq");  // parent of mav0
  EXPECT_EQ(loaded.imu, seq.imu);
  ASSERT_EQ(loaded.cameras.size(), seq.cameras.size());
  for (std::size_t i = 0; i < seq.cameras.size(); ++i) EXPECT_EQ(loaded.cameras[i], seq.cameras[i]);
  EXPECT_EQ(loaded.groundtruth.size(), seq.groundtruth.size());
  EXPECT_THROW(load_euroc_sequence(dir / "nothing_here"), IoError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 9.81, -1e-300, 6.02214076e23, std::numeric_limits<double>::denorm_min()}) {
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
}

}  // namespace
}  // namespace faultbench::io
