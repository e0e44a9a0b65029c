#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <unistd.h>

#include "reboard/feedsim/generator.hpp"
#include "reboard/feedsim/manifest.hpp"
#include "reboard/feedsim/scenario.hpp"
#include "reboard/motion/motion.hpp"

using namespace reboard;
using namespace reboard::feedsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("reboard-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

const char* kBase = R"(
name = unit
camera = cam-x
start_ms = 1000000
duration = 120
seed = 7
noise = 0
)";

Scenario with(const std::string& extra) { return parse_scenario(std::string(kBase) + extra); }

}  // namespace

// Manifest ---------------------------------------------------------------------

TEST(Manifest, EmptyManifestIsEmptyStream) {
  ManifestReplay replay(parse_manifest("fps=1\n"));
  EXPECT_EQ(replay.size(), 0u);
  EXPECT_FALSE(replay.next());
}

TEST(Manifest, ThreeEntriesKeepTimestamps) {
  const auto dir = temp_dir("manifest3");
  for (int i = 0; i < 3; ++i) imaging::write_png(dir / ("f" + std::to_string(i) + ".png"), imaging::GrayImage(4, 3, 10 * i));
  const auto m = parse_manifest("fps=1\nf0.png\t1000\nf1.png\t2000\nf2.png\t3500\n", dir);
  ManifestReplay replay(m);
  std::vector<long long> ts;
  while (auto f = replay.next()) {
    ts.push_back(to_epoch_ms(f->timestamp));
    EXPECT_EQ(f->width, 4);
  }
  EXPECT_EQ(ts, (std::vector<long long>{1000, 2000, 3500}));
  fs::remove_all(dir);
}

TEST(Manifest, ValidationErrors) {
  expect_code(ErrorCode::InvalidManifest, [] { parse_manifest("a.png\t1\n"); });
  expect_code(ErrorCode::InvalidManifest, [] { parse_manifest("fps=1\na.png\t2000\nb.png\t1000\n"); });
  expect_code(ErrorCode::InvalidManifest, [] { parse_manifest("fps=1\na.png\t1000\nb.png\t1000\n"); });
  expect_code(ErrorCode::InvalidManifest, [] { parse_manifest("fps=1\na.png 1000\n"); });
  expect_code(ErrorCode::InvalidManifest, [] { parse_manifest("fps=0\n"); });
  expect_code(ErrorCode::InvalidManifest, [] { parse_manifest("fps=1\na.png\tabc\n"); });
  expect_code(ErrorCode::MissingFile, [] { load_manifest("/nonexistent/manifest.txt"); });
}

TEST(Manifest, MissingAndCorruptFrames) {
  const auto dir = temp_dir("manifest-bad");
  std::ofstream(dir / "bad.png") << "not a png";
  ManifestReplay missing(parse_manifest("fps=1\nnope.png\t1\n", dir));
  expect_code(ErrorCode::MissingFile, [&] { missing.next(); });
  ManifestReplay corrupt(parse_manifest("fps=1\nbad.png\t1\n", dir));
  expect_code(ErrorCode::DecodeError, [&] { corrupt.next(); });
  fs::remove_all(dir);
}

TEST(Manifest, FormatParseRoundTrip) {
  FrameManifest m;
  m.fps = 10;
  m.entries = {{"a/1.png", from_epoch_ms(5)}, {"a/2.png", from_epoch_ms(105)}};
  const auto back = parse_manifest(format_manifest(m));
  EXPECT_EQ(back.fps, 10);
  EXPECT_EQ(back.entries, m.entries);
}

TEST(Manifest, SourceReturnsLatestFrameAtOrBefore) {
  const auto dir = temp_dir("manifest-src");
  imaging::write_png(dir / "a.png", imaging::GrayImage(2, 2, 10));
  imaging::write_png(dir / "b.png", imaging::GrayImage(2, 2, 20));
  ManifestSource src(parse_manifest("fps=1\na.png\t1000\nb.png\t2000\n", dir));
  EXPECT_EQ(src.grab(from_epoch_ms(500)).pixels[0], 10);
  EXPECT_EQ(src.grab(from_epoch_ms(1999)).pixels[0], 10);
  EXPECT_EQ(src.grab(from_epoch_ms(2000)).pixels[0], 20);
  EXPECT_EQ(to_epoch_ms(src.grab(from_epoch_ms(9000)).timestamp), 9000);
  fs::remove_all(dir);
}

// Scenario scripts ---------------------------------------------------------------

TEST(ScenarioScript, ParsesEveryEventKind) {
  const auto sc = with(R"(
event stroke at=10 region=0.1,0.1,0.2,0.2 contrast=120 segments=3 width=3
event erase at=50 region=0,0,1,1
event walker start=5 end=30.5 x=20 to=40 y=60 w=50 h=150 sway=4
event lighting start=60 end=90 delta=-20 shape=ramp
event lighting start=95 end=100 delta=30 shape=flicker period=0.25
event occluder start=40 end=70 rect=100,100,80,90 luma=50
redact start=100 end=110
)");
  EXPECT_EQ(sc.name, "unit");
  EXPECT_EQ(sc.camera_id, "cam-x");
  EXPECT_EQ(sc.duration, Millis{120'000});
  ASSERT_EQ(sc.strokes.size(), 1u);
  EXPECT_EQ(sc.strokes[0].contrast, 120);
  EXPECT_EQ(sc.strokes[0].width, 3);
  ASSERT_EQ(sc.walkers.size(), 1u);
  EXPECT_EQ(sc.walkers[0].end, Millis{30'500});
  EXPECT_EQ(sc.walkers[0].sway, 4);
  ASSERT_EQ(sc.lighting.size(), 2u);
  EXPECT_EQ(sc.lighting[0].shape, LightShape::Ramp);
  EXPECT_EQ(sc.lighting[1].period, Millis{250});
  EXPECT_EQ(sc.occluders[0].rect, (imaging::Rect{100, 100, 80, 90}));
  EXPECT_EQ(sc.redactions.size(), 1u);
}

TEST(ScenarioScript, RejectsBadScripts) {
  expect_code(ErrorCode::InvalidScript, [] { with("bogus = 1\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event dance at=1\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event stroke at=500 region=0.1,0.1,0.2,0.2\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event stroke at=5 region=0.9,0.1,0.2,0.2\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event stroke at=5 region=0.1,0.1,0.2\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event stroke at=5 region=0.1,0.1,0.2,0.2 color=red\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event walker start=5 end=3 x=10 y=10 w=50 h=150\n"); });
  // 10x10 px is far below the person band.
  expect_code(ErrorCode::InvalidScript, [] { with("event walker start=1 end=3 x=10 y=10 w=10 h=10\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("event walker start=1 end=3 x=300 y=10 w=50 h=150\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("corners = 0,0 10,0 0,10 10,10\n"); });
  expect_code(ErrorCode::InvalidScript, [] { with("duration = abc\n"); });
}

// Generator --------------------------------------------------------------------------

TEST(Generator, NoEventsGivesConstantFramesAndNoTruth) {
  const auto sc = with("");
  auto feed = generate(sc);
  EXPECT_TRUE(feed.truth.events.empty());
  const auto a = feed.renderer.grab(sc.start), b = feed.renderer.grab(sc.start + Millis{60'000});
  EXPECT_EQ(a.pixels, b.pixels);
}

TEST(Generator, SingleStrokeWithoutWalkers) {
  const auto sc = with("event stroke at=60 region=0.2,0.2,0.3,0.3\n");
  const auto gt = derive_truth(sc);
  ASSERT_EQ(gt.events.size(), 1u);
  EXPECT_EQ(gt.events[0].at, sc.start + Millis{60'000});
  EXPECT_FALSE(gt.events[0].collaborative);
  EXPECT_EQ(gt.events[0].kind, "stroke");
}

TEST(Generator, TwoWalkersAroundStrokeAreCollaborative) {
  // Two walkers present for ten minutes around the stroke.
  const auto sc = parse_scenario(std::string(kBase) + R"(
duration = 1200
event walker start=300 end=900 x=20 y=60 w=50 h=150
event walker start=300 end=900 x=200 y=60 w=50 h=150
event walker start=1000 end=1100 x=20 y=60 w=50 h=150
event stroke at=600 region=0.2,0.2,0.3,0.3
event stroke at=1050 region=0.6,0.2,0.3,0.3
event stroke at=100 region=0.6,0.6,0.3,0.3
)");
  const auto gt = derive_truth(sc);
  ASSERT_EQ(gt.events.size(), 3u);
  // Presence oracle: count scripted spans containing each event time.
  for (const auto& e : gt.events) {
    int present = 0;
    for (const auto& w : sc.walkers) present += (e.at >= sc.start + w.start && e.at < sc.start + w.end);
    EXPECT_EQ(e.collaborative, present >= 2);
  }
  EXPECT_TRUE(gt.events[1].collaborative);
  EXPECT_FALSE(gt.events[0].collaborative);
  EXPECT_FALSE(gt.events[2].collaborative);
  const std::vector<PresenceStep> expected{{sc.start, 0},
                                           {sc.start + Millis{300'000}, 2},
                                           {sc.start + Millis{900'000}, 0},
                                           {sc.start + Millis{1'000'000}, 1},
                                           {sc.start + Millis{1'100'000}, 0}};
  EXPECT_EQ(gt.presence, expected);
}

TEST(Generator, TruthListsEveryUpdateOnceInOrder) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::string script;
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<long> times;
    for (int i = 0; i < n; ++i) {
      const long t = 1 + static_cast<long>(rng() % 119);
      times.push_back(t);
      script += std::string(rng() % 2 ? "event stroke" : "event erase") + " at=" + std::to_string(t) +
                " region=0.1,0.1,0.5,0.5\n";
    }
    const auto gt = derive_truth(with(script));
    ASSERT_EQ(gt.events.size(), static_cast<std::size_t>(n));
    std::sort(times.begin(), times.end());
    for (int i = 0; i < n; ++i) EXPECT_EQ(to_epoch_ms(gt.events[i].at), 1'000'000 + times[i] * 1000);
  }
}

TEST(Generator, DeterministicForSeed) {
  const std::string script =
      "noise = 2\nevent walker start=5 end=20 x=20 to=60 y=60 w=50 h=150\n"
      "event stroke at=10 region=0.2,0.2,0.3,0.3\nevent lighting start=30 end=60 delta=20\n";
  SceneRenderer a(with(script)), b(with(script));
  for (long ms : {0L, 7'300L, 12'000L, 45'000L}) {
    EXPECT_EQ(a.grab(from_epoch_ms(1'000'000 + ms)).pixels, b.grab(from_epoch_ms(1'000'000 + ms)).pixels);
  }
  SceneRenderer c(with(script + "seed = 8\n"));
  EXPECT_NE(a.grab(from_epoch_ms(1'007'300)).pixels, c.grab(from_epoch_ms(1'007'300)).pixels);
}

TEST(Generator, StrokeStaysInsideItsRegion) {
  const auto sc = with("event stroke at=10 region=0.25,0.3,0.2,0.25 segments=6\n");
  SceneRenderer r(sc);
  const auto& before = r.board_canvas(sc.start);
  const imaging::GrayImage blank = before;
  const auto& after = r.board_canvas(sc.start + Millis{20'000});
  int changed = 0;
  for (int y = 0; y < after.height(); ++y)
    for (int x = 0; x < after.width(); ++x) {
      if (after(x, y) == blank(x, y)) continue;
      ++changed;
      EXPECT_GE(x, std::floor(0.25 * after.width()));
      EXPECT_LT(x, std::ceil(0.45 * after.width()));
      EXPECT_GE(y, std::floor(0.3 * after.height()));
      EXPECT_LT(y, std::ceil(0.55 * after.height()));
    }
  EXPECT_GT(changed, 50);
}

TEST(Generator, EraseRestoresTheBoard) {
  const auto sc = with("event stroke at=10 region=0.25,0.3,0.2,0.25\nevent erase at=20 region=0.2,0.2,0.4,0.5\n");
  SceneRenderer r(sc);
  const imaging::GrayImage blank = r.board_canvas(sc.start);
  EXPECT_NE(r.board_canvas(sc.start + Millis{15'000}), blank);
  EXPECT_EQ(r.board_canvas(sc.start + Millis{25'000}), blank);
}

TEST(Generator, WalkersStayInsidePersonBand) {
  const auto sc = with(
      "event walker start=0 end=100 x=10 to=250 y=40 w=50 h=150 sway=8\n"
      "event walker start=20 end=60 x=200 to=120 y=80 w=40 h=120 sway=3\n");
  SceneRenderer r(sc);
  const motion::MotionConfig person;
  const double frame_area = 320.0 * 240.0;
  for (const auto& w : sc.walkers) {
    for (Millis t = w.start; t < w.end; t += Millis{250}) {
      const auto rect = r.walker_rect(w, t);
      EXPECT_GE(rect.x, 0);
      EXPECT_LE(rect.right(), 320);
      const double frac = rect.area() / frame_area;
      EXPECT_GE(frac, person.min_blob_area);
      EXPECT_LE(frac, person.max_blob_area);
    }
  }
}

TEST(Generator, ThreeWalkersCountAsThree) {
  const auto sc = with(
      "noise = 2\n"
      "event walker start=0 end=100 x=10 to=20 y=60 w=50 h=150\n"
      "event walker start=0 end=100 x=120 to=130 y=60 w=50 h=150\n"
      "event walker start=0 end=100 x=240 to=250 y=60 w=50 h=150\n");
  SceneRenderer r(sc);
  motion::MotionDetector det("cam-x", {});
  std::vector<int> counts;
  for (int s = 0; s < 10; ++s) counts.push_back(det.process(r.grab(sc.start + Millis{s * 1000})).person_count);
  for (std::size_t i = 1; i < counts.size(); ++i) EXPECT_EQ(counts[i], 3) << "frame " << i;
}

TEST(Generator, LightingShapes) {
  LightingEvent pulse{Millis{10'000}, Millis{70'000}, 30, LightShape::Pulse, Millis{20'000}, Millis{300}};
  EXPECT_DOUBLE_EQ(lighting_offset(pulse, Millis{0}), 0.0);
  EXPECT_DOUBLE_EQ(lighting_offset(pulse, Millis{20'000}), 15.0);
  EXPECT_DOUBLE_EQ(lighting_offset(pulse, Millis{40'000}), 30.0);
  EXPECT_DOUBLE_EQ(lighting_offset(pulse, Millis{60'000}), 15.0);
  EXPECT_DOUBLE_EQ(lighting_offset(pulse, Millis{70'000}), 0.0);
  LightingEvent ramp{Millis{0}, Millis{100}, -10, LightShape::Ramp, Millis{1}, Millis{1}};
  EXPECT_DOUBLE_EQ(lighting_offset(ramp, Millis{50}), -5.0);
  EXPECT_DOUBLE_EQ(lighting_offset(ramp, Millis{5000}), -10.0);
  LightingEvent flicker{Millis{0}, Millis{1000}, 20, LightShape::Flicker, Millis{1}, Millis{300}};
  EXPECT_DOUBLE_EQ(lighting_offset(flicker, Millis{100}), 0.0);
  EXPECT_DOUBLE_EQ(lighting_offset(flicker, Millis{400}), 20.0);
  EXPECT_DOUBLE_EQ(lighting_offset(flicker, Millis{700}), 0.0);
}

TEST(Generator, TruthJsonRoundTrip) {
  const auto sc = with(
      "event walker start=5 end=20 x=20 y=60 w=50 h=150\nevent walker start=5 end=20 x=200 y=60 w=50 h=150\n"
      "event stroke at=10 region=0.2,0.2,0.3,0.3\nevent erase at=40 region=0,0,0.5,0.5\nredact start=50 end=60\n");
  const auto gt = derive_truth(sc);
  EXPECT_EQ(truth_from_json(nlohmann::json::parse(truth_to_json(gt).dump())), gt);
  expect_code(ErrorCode::InvalidArgument, [] { truth_from_json(nlohmann::json::parse("{\"events\":[]}")); });
}

TEST(Generator, WrittenFeedReplaysIdentically) {
  const auto dir = temp_dir("feed");
  const auto sc = with("duration = 6\nnoise = 2\nevent stroke at=3 region=0.2,0.2,0.3,0.3\n");
  write_feed(sc, dir);
  const auto m = load_manifest(dir / "manifest.txt");
  ASSERT_EQ(m.entries.size(), 6u);
  SceneRenderer r(sc);
  ManifestReplay replay(m);
  std::size_t n = 0;
  while (auto f = replay.next()) {
    const auto expect = r.grab(f->timestamp);
    EXPECT_EQ(f->pixels, expect.pixels);
    ++n;
  }
  EXPECT_EQ(n, 6u);
  EXPECT_EQ(load_truth(dir / "truth.json"), derive_truth(sc));
  fs::remove_all(dir);
}
