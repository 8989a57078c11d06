#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "faultbench/error.hpp"
#include "faultbench/fault_injection.hpp"
#include "faultbench/synthetic.hpp"

namespace faultbench::faults {
namespace {

std::vector<CameraFrame> make_frames(std::size_t n, int side = 4, std::uint8_t gray = 128) {
  std::vector<CameraFrame> frames(n);
  const auto img = GrayImage::filled(side, side, gray);
  for (std::size_t i = 0; i < n; ++i) {
    frames[i].t = static_cast<TimestampNs>(i) * 50'000'000;
    frames[i].index = static_cast<std::int64_t>(i);
    frames[i].left = img;
    frames[i].right = img;
  }
  return frames;
}

std::vector<ImuSample> make_imu(std::size_t n) {
  std::vector<ImuSample> imu(n);
  for (std::size_t i = 0; i < n; ++i) {
    imu[i].t = static_cast<TimestampNs>(i) * 5'000'000;
    imu[i].index = static_cast<std::int64_t>(i);
    const double x = static_cast<double>(i);
    imu[i].gyro = Eigen::Vector3d(0.01 * std::sin(x), -0.02, 0.003 * x / 1000.0);
    imu[i].accel = Eigen::Vector3d(0.1, std::cos(0.01 * x), 9.81);
  }
  return imu;
}

FaultSpec camera(FaultKind kind, std::int64_t start, std::optional<std::int64_t> duration, double severity = 0.0,
                 std::uint64_t seed = 42) {
  FaultSpec s;
  s.modality = Modality::camera;
  s.kind = kind;
  s.start = start;
  s.duration = duration;
  s.severity = severity;
  s.seed = seed;
  s.id = "camera.0";
  return s;
}

FaultSpec imu(FaultKind kind, std::int64_t start, std::optional<std::int64_t> duration, double severity = 0.0,
              std::uint64_t seed = 42) {
  FaultSpec s = camera(kind, start, duration, severity, seed);
  s.modality = Modality::imu;
  s.id = "imu.0";
  return s;
}

std::vector<std::int64_t> indices_of(const auto& stream) {
  std::vector<std::int64_t> out;
  for (const auto& e : stream) out.push_back(e.index);
  return out;
}

TEST(ConsecutiveDrop, RemovesExactWindow) {
  const auto frames = make_frames(1200);
  const auto out = apply_camera_consecutive_drop(frames, camera(FaultKind::consecutive_drop, 100, 50));
  ASSERT_EQ(out.stream.size(), 1150u);
  ASSERT_EQ(out.log.size(), 50u);
  for (std::size_t i = 0; i < out.log.size(); ++i) {
    EXPECT_EQ(out.log[i].index, 100 + static_cast<std::int64_t>(i));
    EXPECT_EQ(out.log[i].event, FaultEvent::frame_dropped);
    EXPECT_EQ(out.log[i].t, frames[100 + i].t);
  }
  for (const auto& f : out.stream) EXPECT_FALSE(f.index >= 100 && f.index < 150);
  EXPECT_EQ(out.stream[99].index, 99);
  EXPECT_EQ(out.stream[100].index, 150);
}

TEST(ConsecutiveDrop, ClipsAtEndOfStream) {
  const auto out = apply_camera_consecutive_drop(make_frames(10), camera(FaultKind::consecutive_drop, 8, 5));
  EXPECT_EQ(indices_of(out.stream), (std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(out.log.size(), 2u);
}

TEST(ConsecutiveDrop, ZeroDurationIsIdentity) {
  const auto frames = make_frames(20);
  const auto out = apply_camera_consecutive_drop(frames, camera(FaultKind::consecutive_drop, 5, 0));
  EXPECT_EQ(out.stream, frames);
  EXPECT_TRUE(out.log.empty());
}

TEST(ConsecutiveDrop, StartBeyondStreamIsIdentity) {
  const auto frames = make_frames(20);
  const auto out = apply_camera_consecutive_drop(frames, camera(FaultKind::consecutive_drop, 50, 10));
  EXPECT_EQ(out.stream, frames);
}

TEST(RandomDrop, ProbabilityExtremes) {
  const auto frames = make_frames(1200);
  EXPECT_EQ(apply_camera_random_drop(frames, camera(FaultKind::random_drop, 0, 1200, 0.0)).stream.size(), 1200u);
  const auto all = apply_camera_random_drop(frames, camera(FaultKind::random_drop, 0, 1200, 1.0));
  EXPECT_TRUE(all.stream.empty());
  EXPECT_EQ(all.log.size(), 1200u);
}

TEST(RandomDrop, HalfProbabilityCountAndDeterminism) {
  const auto frames = make_frames(1200);
  const auto spec = camera(FaultKind::random_drop, 0, 1200, 0.5, 7);
  const auto a = apply_camera_random_drop(frames, spec);
  const auto b = apply_camera_random_drop(frames, spec);
  EXPECT_GE(a.log.size(), 510u);
  EXPECT_LE(a.log.size(), 690u);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(indices_of(a.stream), indices_of(b.stream));

  auto other = spec;
  other.seed = 8;
  EXPECT_NE(apply_camera_random_drop(frames, other).log, a.log);
}

TEST(RandomDrop, OnlyInsideWindow) {
  const auto frames = make_frames(300);
  const auto out = apply_camera_random_drop(frames, camera(FaultKind::random_drop, 100, 100, 0.9));
  for (const auto& e : out.log) {
    EXPECT_GE(e.index, 100);
    EXPECT_LT(e.index, 200);
  }
  EXPECT_EQ(out.stream.size() + out.log.size(), 300u);
}

TEST(CameraNoise, ZeroSigmaLeavesPixels) {
  const auto frames = make_frames(5);
  const auto out = apply_camera_noise(frames, camera(FaultKind::gaussian_noise, 0, 5, 0.0));
  for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(out.stream[i].left.pixels(), frames[i].left.pixels());
  EXPECT_EQ(out.log.size(), 5u);
}

TEST(CameraNoise, MomentsOnMidGray) {
  const auto frames = make_frames(1, 200);
  const auto out = apply_camera_noise(frames, camera(FaultKind::gaussian_noise, 0, 1, 50.0));
  const auto px = out.stream[0].left.pixels();
  double sum = 0.0;
  for (auto p : px) sum += p;
  const double mean = sum / px.size();
  double var = 0.0;
  for (auto p : px) var += (p - mean) * (p - mean);
  const double sd = std::sqrt(var / (px.size() - 1));
  EXPECT_NEAR(mean, 128.0, 1.0);
  EXPECT_GE(sd, 45.0);
  EXPECT_LE(sd, 52.0);
  EXPECT_NE(out.stream[0].left.pixels(), out.stream[0].right.pixels());
}

TEST(CameraNoise, ClampsAtBlack) {
  const auto frames = make_frames(1, 64, 0);
  const auto px = apply_camera_noise(frames, camera(FaultKind::gaussian_noise, 0, 1, 10.0)).stream[0].left.pixels();
  std::size_t zeros = 0;
  double sum = 0.0;
  for (auto p : px) {
    zeros += p == 0;
    sum += p;
  }
  EXPECT_GT(zeros, px.size() / 3);
  EXPECT_GT(sum / px.size(), 2.0);
}

TEST(CameraNoise, KeepsTimestampsAndWindow) {
  const auto frames = make_frames(10);
  const auto out = apply_camera_noise(frames, camera(FaultKind::gaussian_noise, 3, 2, 20.0));
  ASSERT_EQ(out.stream.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(out.stream[i].t, frames[i].t);
    const bool inside = i == 3 || i == 4;
    EXPECT_EQ(out.stream[i].left == frames[i].left, !inside) << i;
  }
}

TEST(NoiseAmplification, ScalesReadings) {
  auto samples = make_imu(3);
  samples[1].gyro = Eigen::Vector3d(0.01, -0.02, 0.03);
  samples[1].accel = Eigen::Vector3d(0.1, 0.2, 9.81);
  const auto out = apply_imu_noise_amplification(samples, imu(FaultKind::noise_amplification, 1, 1, 5.0));
  EXPECT_EQ(out.stream[1].gyro, 5.0 * samples[1].gyro);
  EXPECT_EQ(out.stream[1].accel, 5.0 * samples[1].accel);
  EXPECT_NEAR(out.stream[1].accel.z(), 49.05, 1e-12);
  EXPECT_EQ(out.stream[0], samples[0]);
  EXPECT_EQ(out.stream[2], samples[2]);
}

TEST(NoiseAmplification, CorruptsExactWindow) {
  const auto samples = make_imu(12000);
  const auto out = apply_imu_noise_amplification(samples, imu(FaultKind::noise_amplification, 6000, 200, 5.0));
  ASSERT_EQ(out.log.size(), 200u);
  EXPECT_EQ(out.log.front().index, 6000);
  EXPECT_EQ(out.log.back().index, 6199);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool inside = i >= 6000 && i < 6200;
    if (!inside) EXPECT_EQ(out.stream[i], samples[i]);
  }
}

TEST(NoiseAmplification, AdditiveModeMoments) {
  std::vector<ImuSample> samples = make_imu(20000);
  for (auto& s : samples) s.gyro.setZero();
  auto spec = imu(FaultKind::noise_amplification, 0, 20000, 3.0);
  spec.mode = AmplificationMode::additive;
  spec.nominal_gyro_std = 0.01;
  const auto out = apply_imu_noise_amplification(samples, spec);
  double sum = 0.0, sq = 0.0;
  for (const auto& s : out.stream) {
    sum += s.gyro.x();
    sq += s.gyro.x() * s.gyro.x();
  }
  const double n = static_cast<double>(samples.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 0.02, 0.02 * 0.05);
  EXPECT_NEAR(sum / n, 0.0, 3 * 0.02 / std::sqrt(n));
}

TEST(Dropout, RemovesSamplesAndLeavesGap) {
  const auto samples = make_imu(12000);
  const auto out = apply_imu_dropout(samples, imu(FaultKind::dropout, 5000, 800));
  ASSERT_EQ(out.stream.size(), 11200u);
  EXPECT_EQ(out.log.size(), 800u);
  EXPECT_EQ(out.log.front().event, FaultEvent::sample_dropped);

  const auto short_gap = apply_imu_dropout(samples, imu(FaultKind::dropout, 5000, 50));
  TimestampNs widest = 0;
  for (std::size_t i = 1; i < short_gap.stream.size(); ++i) {
    widest = std::max(widest, short_gap.stream[i].t - short_gap.stream[i - 1].t);
  }
  EXPECT_EQ(widest, 255'000'000);  // 50 missing samples plus the regular step
}

TEST(BiasDrift, LinearInElapsedTime) {
  const auto samples = make_imu(1000);
  auto spec = imu(FaultKind::bias_drift, 0, std::nullopt, 0.05);
  spec.axis = Eigen::Vector3d::UnitX();
  const auto out = apply_imu_bias_drift(samples, spec);
  // 400 samples at 200 Hz = 2 s
  EXPECT_NEAR(out.stream[400].gyro.x() - samples[400].gyro.x(), 0.1, 1e-15);
  EXPECT_EQ(out.stream[400].gyro.y(), samples[400].gyro.y());
  EXPECT_EQ(out.stream[0].gyro, samples[0].gyro);
  EXPECT_EQ(out.log.size(), 1000u);
}

TEST(BiasDrift, ContinuousAtOnset) {
  const auto samples = make_imu(500);
  const auto out = apply_imu_bias_drift(samples, imu(FaultKind::bias_drift, 200, std::nullopt, 0.1));
  EXPECT_EQ(out.stream[199].gyro, samples[199].gyro);
  EXPECT_EQ(out.stream[200].gyro, samples[200].gyro);
  EXPECT_NEAR((out.stream[201].gyro - samples[201].gyro).norm(), 0.1 * 0.005, 1e-15);
  EXPECT_EQ(out.log.front().index, 200);
}

TEST(BiasDrift, ExplicitOnset) {
  const auto samples = make_imu(100);
  auto spec = imu(FaultKind::bias_drift, 10, 20, 1.0);
  spec.axis = Eigen::Vector3d::UnitZ();
  const auto out = apply_imu_bias_drift(samples, spec, samples[0].t);
  EXPECT_NEAR(out.stream[10].gyro.z() - samples[10].gyro.z(), 0.05, 1e-15);
  EXPECT_EQ(out.stream[30], samples[30]);
}

TEST(Transforms, ConserveElementsAndIndices) {
  const auto frames = make_frames(400);
  for (const auto& spec : {camera(FaultKind::consecutive_drop, 40, 90), camera(FaultKind::random_drop, 0, 400, 0.3)}) {
    const auto out = apply_camera_fault(frames, spec);
    std::set<std::int64_t> seen;
    for (const auto& f : out.stream) seen.insert(f.index);
    for (const auto& e : out.log) {
      EXPECT_FALSE(seen.contains(e.index));
      seen.insert(e.index);
    }
    EXPECT_EQ(seen.size(), frames.size());
    EXPECT_TRUE(std::is_sorted(out.stream.begin(), out.stream.end(),
                               [](const CameraFrame& a, const CameraFrame& b) { return a.t < b.t; }));
  }
}

TEST(Transforms, WrongKindThrows) {
  EXPECT_THROW(apply_camera_fault(make_frames(3), imu(FaultKind::dropout, 0, 1)), ConfigError);
  EXPECT_THROW(apply_imu_fault(make_imu(3), camera(FaultKind::random_drop, 0, 1, 0.5)), ConfigError);
  EXPECT_THROW(apply_imu_dropout(make_imu(3), imu(FaultKind::bias_drift, 0, 1)), ConfigError);
}

TEST(ParseFaultConfig, ReadsDocument) {
  const auto cfg = parse_fault_config(R"({
    "global_seed": 9,
    "camera_faults": [{"kind": "consecutive_drop", "start": 100, "duration": 50},
                      {"kind": "gaussian_noise", "start": 0, "duration": 10, "severity": 30, "seed": 5}],
    "imu_faults": [{"kind": "bias_drift", "start": 0, "severity": 0.05, "axis": [0, 0, 2]},
                   {"kind": "noise_amplification", "start": 6000, "duration": 200, "severity": 5,
                    "mode": "additive", "nominal_gyro_std": 0.001}]
  })");
  EXPECT_EQ(cfg.global_seed, 9u);
  ASSERT_EQ(cfg.camera_faults.size(), 2u);
  ASSERT_EQ(cfg.imu_faults.size(), 2u);
  EXPECT_EQ(cfg.camera_faults[0].id, "camera.0");
  EXPECT_EQ(cfg.imu_faults[1].id, "imu.1");
  EXPECT_EQ(cfg.camera_faults[1].seed, 5u);
  EXPECT_FALSE(cfg.imu_faults[0].duration.has_value());
  EXPECT_EQ(cfg.imu_faults[0].axis, Eigen::Vector3d::UnitZ());
  EXPECT_EQ(cfg.imu_faults[1].mode, AmplificationMode::additive);
  EXPECT_EQ(cfg.imu_faults[1].nominal_gyro_std, 0.001);
  EXPECT_TRUE(cfg.is_stochastic());

  const auto again = parse_fault_config(fault_config_to_json(cfg));
  EXPECT_EQ(fault_config_to_json(again), fault_config_to_json(cfg));
}

TEST(ParseFaultConfig, DeterministicConfigs) {
  EXPECT_FALSE(parse_fault_config(R"({"camera_faults": [{"kind": "consecutive_drop", "start": 1, "duration": 2}]})")
                   .is_stochastic());
  EXPECT_TRUE(parse_fault_config("{}").empty());
}

void expect_config_error(const std::string& text, const std::string& fragment) {
  try {
    parse_fault_config(text);
    FAIL() << "accepted: " << text;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(ParseFaultConfig, RejectsBadInput) {
  expect_config_error(R"({"camera_faults": [{"kind": "dropout", "start": 0, "duration": 1}]})",
                      "camera_faults[0].kind");
  expect_config_error(R"({"imu_faults": [{"kind": "random_drop", "start": 0, "duration": 1, "severity": 0.1}]})",
                      "is not a imu fault");
  expect_config_error(R"({"camera_faults": [{"kind": "consecutive_drop", "start": 0, "duration": 1, "oops": 1}]})",
                      "camera_faults[0].oops: unknown key");
  expect_config_error(R"({"extra": 1})", "extra: unknown key");
  expect_config_error(R"({"camera_faults": [{"kind": "random_drop", "start": 0, "duration": 5}]})", ".severity");
  expect_config_error(R"({"camera_faults": [{"kind": "random_drop", "start": 0, "duration": 5, "severity": 1.5}]})",
                      ".severity");
  expect_config_error(R"({"camera_faults": [{"kind": "consecutive_drop", "start": 0}]})", ".duration: required");
  expect_config_error(R"({"camera_faults": [{"kind": "consecutive_drop", "start": -1, "duration": 3}]})", ".start");
  expect_config_error(R"({"imu_faults": [{"kind": "noise_amplification", "start": 0, "duration": 3, "severity": 0.5}]})",
                      ".severity");
  expect_config_error(R"({"camera_faults": [{"kind": "consecutive_drop", "start": 0, "duration": 10},
                                            {"kind": "random_drop", "start": 5, "duration": 10, "severity": 0.5}]})",
                      "overlap");
  expect_config_error(R"({"imu_faults": [{"kind": "bias_drift", "start": 0, "severity": 0.1, "axis": [0, 0, 0]}]})",
                      ".axis");
  expect_config_error("[1, 2", "invalid JSON");
}

TEST(ParseFaultConfig, AdjacentDropWindowsAllowed) {
  EXPECT_NO_THROW(parse_fault_config(R"({"camera_faults": [
      {"kind": "consecutive_drop", "start": 0, "duration": 10},
      {"kind": "consecutive_drop", "start": 10, "duration": 10}]})"));
}

TEST(ApplyAll, DeterministicAndOrdered) {
  const auto frames = make_frames(1200);
  const auto samples = make_imu(12000);
  const auto cfg = parse_fault_config(R"({
    "global_seed": 3,
    "camera_faults": [{"kind": "random_drop", "start": 0, "duration": 1200, "severity": 0.2},
                      {"kind": "gaussian_noise", "start": 0, "duration": 100, "severity": 10}],
    "imu_faults": [{"kind": "dropout", "start": 100, "duration": 50},
                   {"kind": "noise_amplification", "start": 4000, "duration": 100, "severity": 2, "mode": "additive"}]
  })");
  const auto a = apply_all(frames, samples, cfg);
  const auto b = apply_all(frames, samples, cfg);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.imu, b.imu);
  EXPECT_EQ(a.cameras, b.cameras);
  EXPECT_EQ(fault_log_csv(a.log), fault_log_csv(b.log));
  EXPECT_TRUE(std::is_sorted(a.log.begin(), a.log.end(),
                             [](const FaultLogEntry& x, const FaultLogEntry& y) { return x.t < y.t; }));

  auto reseeded = cfg;
  reseeded.global_seed = 4;
  EXPECT_NE(apply_all(frames, samples, reseeded).log, a.log);
}

TEST(ApplyAll, WindowsReferToOriginalIndices) {
  const auto cfg = parse_fault_config(R"({"imu_faults": [
      {"kind": "dropout", "start": 10, "duration": 10},
      {"kind": "noise_amplification", "start": 20, "duration": 5, "severity": 2}]})");
  const auto samples = make_imu(40);
  const auto out = apply_all({}, samples, cfg);
  ASSERT_EQ(out.imu.size(), 30u);
  EXPECT_EQ(out.imu[10].index, 20);
  EXPECT_EQ(out.imu[10].accel, 2.0 * samples[20].accel);
  EXPECT_EQ(out.imu[15], samples[25]);
}

TEST(ApplyAll, BiasOnsetIgnoresEarlierDropout) {
  const auto cfg = parse_fault_config(R"({"imu_faults": [
      {"kind": "dropout", "start": 50, "duration": 10},
      {"kind": "bias_drift", "start": 50, "severity": 1.0, "axis": [1, 0, 0]}]})");
  const auto samples = make_imu(100);
  const auto out = apply_all({}, samples, cfg);
  // first surviving windowed sample is index 60, 0.05 s after the original onset
  EXPECT_EQ(out.imu[50].index, 60);
  EXPECT_NEAR(out.imu[50].gyro.x() - samples[60].gyro.x(), 0.05, 1e-15);
}

TEST(ApplyAll, EmptyConfigIsIdentity) {
  const auto frames = make_frames(10);
  const auto samples = make_imu(100);
  const auto out = apply_all(frames, samples, FaultConfig{});
  EXPECT_EQ(out.cameras, frames);
  EXPECT_EQ(out.imu, samples);
  EXPECT_TRUE(out.log.empty());
}

TEST(ApplyAll, DerivedSeedsDifferPerPosition) {
  FaultConfig cfg;
  cfg.global_seed = 11;
  cfg.camera_faults.push_back(camera(FaultKind::random_drop, 0, 10, 0.5));
  cfg.camera_faults.push_back(camera(FaultKind::gaussian_noise, 0, 10, 5.0));
  for (auto& s : cfg.camera_faults) s.seed.reset();
  const auto resolved = cfg.resolved();
  EXPECT_TRUE(resolved.camera_faults[0].seed.has_value());
  EXPECT_NE(resolved.camera_faults[0].seed, resolved.camera_faults[1].seed);
  EXPECT_EQ(resolved.camera_faults[0].seed, cfg.resolved().camera_faults[0].seed);
}

TEST(FaultLog, CsvFormat) {
  FaultLog log = {{"camera.0", FaultEvent::frame_dropped, 5'000'000'000, 100},
                  {"imu.1", FaultEvent::sample_corrupted, 5'005'000'000, 1001}};
  EXPECT_EQ(fault_log_csv(log),
            "spec_id,event,timestamp_ns,index\n"
            "camera.0,frame_dropped,5000000000,100\n"
            "imu.1,sample_corrupted,5005000000,1001\n");
  EXPECT_EQ(fault_log_csv({}), "spec_id,event,timestamp_ns,index\n");
}

TEST(ApplyAll, FullLengthStreamsAreFast) {
  const auto s = io::synthesize(io::SyntheticProfile::standard(1));
  const auto cfg = parse_fault_config(R"({
    "global_seed": 1,
    "camera_faults": [{"kind": "random_drop", "start": 0, "duration": 1200, "severity": 0.3},
                      {"kind": "gaussian_noise", "start": 0, "duration": 1200, "severity": 50}],
    "imu_faults": [{"kind": "noise_amplification", "start": 0, "duration": 12000, "severity": 5},
                   {"kind": "bias_drift", "start": 0, "severity": 0.1}]
  })");
  const auto begin = std::chrono::steady_clock::now();
  const auto out = apply_all(s.cameras, s.imu, cfg);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  EXPECT_LT(elapsed, 1.0);
  EXPECT_EQ(out.imu.size(), 12000u);
}

}  // namespace
}  // namespace faultbench::faults
