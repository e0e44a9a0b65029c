#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "reboard/coordinator/config.hpp"
#include "support/records.hpp"

using namespace reboard;
using namespace reboard::coordinator;
namespace rbt = reboard::testing;
using reboard::testing::Cell;
using reboard::testing::Fixture;
using reboard::testing::kT0;

namespace {

template <class F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

using DetectorView = std::map<std::string, std::string>;  // camera -> serialised assignment

void apply_delta(DetectorView& v, const AssignmentDelta& d) {
  for (const auto& c : d.removed) v.erase(c);
  for (const auto& a : d.upserts) {
    v[a.camera_id] = to_json(a.settings).dump() + nlohmann::json(a.manual_requests).dump();
  }
}

DetectorView full_view(const Coordinator& c, const std::string& det) {
  DetectorView v;
  apply_delta(v, c.poll_assignments(det, 0));
  return v;
}

collab::CollaborationInterval interval(const std::string& cam, std::int64_t s, std::int64_t e) {
  return {cam, from_epoch_ms(kT0 + s), from_epoch_ms(kT0 + e)};
}

std::vector<RecordId> ids(const std::vector<RecordPtr>& rs) {
  std::vector<RecordId> out;
  for (const auto& r : rs) out.push_back(r->id);
  return out;
}

}  // namespace

// ---- assignments ---------------------------------------------------------------

TEST(Assignments, UnchangedAssignmentsGiveEmptyDelta) {
  Fixture f;
  f.coord->assign("office-a", "det-a");
  const auto first = f.coord->poll_assignments("det-a", 0);
  ASSERT_EQ(first.upserts.size(), 1u);
  EXPECT_EQ(first.upserts[0].camera_id, "office-a");
  const auto again = f.coord->poll_assignments("det-a", first.revision);
  EXPECT_TRUE(again.empty());
  EXPECT_EQ(again.revision, first.revision);
}

TEST(Assignments, MovingCameraRemovesFromOldDetectorAndAddsToNew) {
  Fixture f;
  f.coord->assign("office-a", "det-a");
  const auto ra = f.coord->poll_assignments("det-a", 0).revision;
  const auto rb = f.coord->poll_assignments("det-b", 0).revision;
  f.coord->assign("office-a", "det-b");
  const auto da = f.coord->poll_assignments("det-a", ra);
  const auto db = f.coord->poll_assignments("det-b", rb);
  EXPECT_EQ(da.removed, std::vector<std::string>{"office-a"});
  EXPECT_TRUE(da.upserts.empty());
  ASSERT_EQ(db.upserts.size(), 1u);
  EXPECT_EQ(db.upserts[0].camera_id, "office-a");
  EXPECT_GT(db.revision, rb);
}

TEST(Assignments, UnknownDetector) {
  Fixture f;
  expect_code(ErrorCode::UnknownDetector, [&] { f.coord->poll_assignments("nope", 0); });
  expect_code(ErrorCode::UnknownDetector, [&] { f.coord->assign("office-a", "nope"); });
  expect_code(ErrorCode::UnknownCamera, [&] { f.coord->assign("nope", "det-a"); });
}

TEST(Assignments, DetectorsOfOtherRolesKeepTheirCameras) {
  Fixture f;
  f.coord->put_detector({"motion-1", "motion"});
  f.coord->assign("office-a", "det-a");
  f.coord->assign("office-a", "motion-1");
  EXPECT_EQ(full_view(*f.coord, "det-a").size(), 1u);
  EXPECT_EQ(full_view(*f.coord, "motion-1").size(), 1u);
}

TEST(Assignments, ReplayFromAnyRevisionReachesCurrentState) {
  Fixture f;
  f.coord->put_camera(Fixture::camera("office-c", "carol"));
  f.coord->put_camera(Fixture::camera("office-d", "carol"));
  const std::vector<std::string> cams{"office-a", "office-b", "office-c", "office-d"};
  const std::vector<std::string> dets{"det-a", "det-b"};
  const std::map<std::string, std::string> owner{
      {"office-a", "alice"}, {"office-b", "bob"}, {"office-c", "carol"}, {"office-d", "carol"}};

  std::map<std::string, std::string> holder;  // registry oracle: camera -> detector
  std::vector<std::pair<Revision, std::map<std::string, DetectorView>>> history;
  auto snapshot = [&] {
    std::map<std::string, DetectorView> v;
    for (const auto& d : dets) v[d] = full_view(*f.coord, d);
    return v;
  };
  history.emplace_back(f.coord->revision(), snapshot());

  std::mt19937 rng(11);
  for (int step = 0; step < 120; ++step) {
    const auto& cam = cams[rng() % cams.size()];
    const auto& det = dets[rng() % dets.size()];
    switch (rng() % 5) {
      case 0:
      case 1:
        f.coord->assign(cam, det);
        holder[cam] = det;
        break;
      case 2:
        f.coord->unassign(cam, det);
        if (holder.count(cam) && holder[cam] == det) holder.erase(cam);
        break;
      case 3:
        f.coord->set_capture_enabled(cam, owner.at(cam), rng() % 2 == 0);
        break;
      default: {
        auto c = f.coord->camera(cam);
        if (c.capture_enabled) {
          f.coord->request_manual_capture(cam, owner.at(cam));
        } else {
          c.location = "moved " + std::to_string(step);
          f.coord->put_camera(c);
        }
      }
    }
    const auto now = snapshot();
    ASSERT_GE(f.coord->revision(), history.back().first);
    if (now != history.back().second) ASSERT_GT(f.coord->revision(), history.back().first);
    history.emplace_back(f.coord->revision(), now);

    for (const auto& d : dets) {
      std::set<std::string> expected;
      for (const auto& [c, h] : holder)
        if (h == d) expected.insert(c);
      std::set<std::string> got;
      for (const auto& [c, s] : now.at(d)) got.insert(c);
      ASSERT_EQ(got, expected) << "step " << step << " detector " << d;
    }
  }

  const auto current = history.back().second;
  for (const auto& [rev, views] : history) {
    for (const auto& d : dets) {
      DetectorView v = views.at(d);
      apply_delta(v, f.coord->poll_assignments(d, rev));
      EXPECT_EQ(v, current.at(d)) << "replay from revision " << rev;
    }
  }
}

TEST(Assignments, CaptureEnabledPropagatesThroughPoll) {
  Fixture f;
  f.coord->assign("office-a", "det-a");
  const auto r0 = f.coord->poll_assignments("det-a", 0).revision;
  expect_code(ErrorCode::NotOwner, [&] { f.coord->set_capture_enabled("office-a", "bob", false); });
  expect_code(ErrorCode::UnknownCamera, [&] { f.coord->set_capture_enabled("nope", "alice", false); });
  f.coord->set_capture_enabled("office-a", "alice", false);
  const auto d = f.coord->poll_assignments("det-a", r0);
  ASSERT_EQ(d.upserts.size(), 1u);
  EXPECT_FALSE(d.upserts[0].settings.capture_enabled);
  EXPECT_FALSE(f.coord->camera("office-a").capture_enabled);
}

// ---- ingestion ------------------------------------------------------------------

TEST(Ingest, CaptureWithNoIntervalsIsPersonal) {
  Fixture f;
  const auto r = f.capture("office-a", 1000, {{2, 3}});
  EXPECT_EQ(r.content_type, ContentType::Personal);
  EXPECT_EQ(r.changed_cell_count, 1);
  EXPECT_TRUE(f.coord->images().contains(r.image_ref));
}

TEST(Ingest, CaptureInsideStoredIntervalIsCollaborative) {
  Fixture f;
  f.coord->ingest_collaboration(interval("office-a", 10'000, 20'000));
  EXPECT_EQ(f.capture("office-a", 15'000, {{1, 1}}).content_type, ContentType::Collaborative);
  EXPECT_EQ(f.capture("office-a", 25'000, {{1, 1}}).content_type, ContentType::Personal);
  EXPECT_EQ(f.capture("office-b", 15'000, {{1, 1}}).content_type, ContentType::Personal);
}

TEST(Ingest, IntervalBoundariesAreClosed) {
  Fixture f;
  f.coord->ingest_collaboration(interval("office-a", 10'000, 20'000));
  EXPECT_EQ(f.capture("office-a", 10'000, {{1, 1}}).content_type, ContentType::Collaborative);
  EXPECT_EQ(f.capture("office-a", 20'000, {{1, 1}}).content_type, ContentType::Collaborative);
  EXPECT_EQ(f.capture("office-a", 9'999, {{1, 1}}).content_type, ContentType::Personal);
  EXPECT_EQ(f.capture("office-a", 20'001, {{1, 1}}).content_type, ContentType::Personal);
}

TEST(Ingest, IntervalUpgradesPriorCaptures) {
  Fixture f;
  f.capture("office-a", 5'000, {{1, 1}});
  f.capture("office-a", 12'000, {{1, 1}});
  f.capture("office-a", 18'000, {{2, 2}});
  f.capture("office-b", 15'000, {{1, 1}});
  EXPECT_EQ(f.coord->ingest_collaboration(interval("office-a", 10'000, 20'000)), 2);
  EXPECT_EQ(f.coord->ingest_collaboration(interval("office-a", 30'000, 40'000)), 0);
  // Overlapping the first: already collaborative records are not counted again.
  EXPECT_EQ(f.coord->ingest_collaboration(interval("office-a", 15'000, 25'000)), 0);
  EXPECT_EQ(f.coord->ingest_collaboration(interval("office-a", 10'000, 20'000)), 0);
  EXPECT_EQ(f.coord->intervals("office-a").size(), 3u);
}

TEST(Ingest, UnknownCameraAndBadInput) {
  Fixture f;
  expect_code(ErrorCode::UnknownCamera, [&] { f.capture("nope", 0, {}); });
  expect_code(ErrorCode::UnknownCamera, [&] { f.coord->ingest_collaboration(interval("nope", 0, 1)); });
  expect_code(ErrorCode::InvalidArgument, [&] { f.coord->ingest_collaboration(interval("office-a", 5, 1)); });
  auto ev = rbt::make_event("office-a", 0, {});
  ev.timestamp = from_epoch_ms(-5);
  expect_code(ErrorCode::InvalidArgument, [&] { f.coord->ingest_capture(ev); });
}

TEST(Ingest, DisabledCameraRejectsCaptures) {
  Fixture f;
  f.coord->set_capture_enabled("office-a", "alice", false);
  expect_code(ErrorCode::CaptureDisabled, [&] { f.capture("office-a", 1000, {{1, 1}}); });
  expect_code(ErrorCode::CaptureDisabled, [&] { f.coord->request_manual_capture("office-a", "alice"); });
  f.coord->set_capture_enabled("office-a", "alice", true);
  EXPECT_NO_THROW(f.capture("office-a", 2000, {{1, 1}}));
}

TEST(Ingest, LabelsIndependentOfArrivalOrder) {
  std::mt19937 rng(3);
  std::vector<std::int64_t> capture_times;
  for (int i = 0; i < 20; ++i) capture_times.push_back(std::uniform_int_distribution<std::int64_t>(0, 3'600'000)(rng));
  std::vector<std::pair<std::int64_t, std::int64_t>> spans;
  for (int i = 0; i < 5; ++i) {
    const auto s = std::uniform_int_distribution<std::int64_t>(0, 3'400'000)(rng);
    spans.emplace_back(s, s + std::uniform_int_distribution<std::int64_t>(0, 400'000)(rng));
  }
  // Pin a couple of captures onto interval boundaries.
  capture_times[0] = spans[0].first;
  capture_times[1] = spans[1].second;

  std::map<std::int64_t, ContentType> oracle;
  for (auto t : capture_times) {
    const bool in = std::any_of(spans.begin(), spans.end(), [&](auto s) { return s.first <= t && t <= s.second; });
    oracle[t] = in ? ContentType::Collaborative : ContentType::Personal;
  }

  std::vector<int> order(25);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 40; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    Fixture f;
    for (int k : order) {
      if (k < 20) {
        f.capture("office-a", capture_times[k], {{k % 16, k % 10}});
      } else {
        f.coord->ingest_collaboration(interval("office-a", spans[k - 20].first, spans[k - 20].second));
      }
    }
    for (const auto& r : f.coord->query_captures("alice", {})) {
      EXPECT_EQ(r->content_type, oracle.at(to_epoch_ms(r->timestamp) - kT0)) << "trial " << trial;
    }
  }
}

// ---- sharing --------------------------------------------------------------------

TEST(Share, DefaultCropIsBoundingBoxOfTheOnlyCluster) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{3, 2}, {4, 2}, {4, 3}, {4, 4}});
  const auto shared = f.coord->share(r.id, "alice", {"bob"});
  ASSERT_TRUE(shared.shared_with.at("bob").has_value());
  EXPECT_EQ(*shared.shared_with.at("bob"), (imaging::Rect{30, 20, 20, 30}));
  EXPECT_TRUE(shared.is_shared());
  EXPECT_EQ(ids(f.coord->query_captures("bob", {})), std::vector<RecordId>{r.id});
}

TEST(Share, LargestClusterWinsAndTiesGoToRasterOrder) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{0, 0}, {1, 0}, {10, 5}, {10, 6}, {11, 6}, {14, 9}});
  EXPECT_EQ(*f.coord->share(r.id, "alice", {"bob"}).shared_with.at("bob"), (imaging::Rect{100, 50, 20, 20}));
  const auto tie = f.capture("office-a", 1, {{5, 5}, {5, 6}, {0, 9}, {1, 9}});
  EXPECT_EQ(*f.coord->share(tie.id, "alice", {"bob"}).shared_with.at("bob"), (imaging::Rect{50, 50, 10, 20}));
}

TEST(Share, ExplicitFullImageRegion) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{1, 1}});
  const auto s = f.coord->share(r.id, "alice", {"bob", "carol"}, imaging::Rect{0, 0, r.width, r.height});
  EXPECT_EQ(*s.shared_with.at("carol"), (imaging::Rect{0, 0, rbt::kBoardW, rbt::kBoardH}));
  expect_code(ErrorCode::InvalidArgument, [&] { f.coord->share(r.id, "alice", {"bob"}, imaging::Rect{0, 0, 161, 10}); });
  expect_code(ErrorCode::InvalidArgument, [&] { f.coord->share(r.id, "alice", {"bob"}, imaging::Rect{5, 5, 0, 10}); });
}

TEST(Share, Errors) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{1, 1}});
  const auto blank = f.capture("office-a", 1, {});
  expect_code(ErrorCode::NotOwner, [&] { f.coord->share(r.id, "bob", {"carol"}); });
  expect_code(ErrorCode::UnknownRecord, [&] { f.coord->share(999, "alice", {"bob"}); });
  expect_code(ErrorCode::EmptyChange, [&] { f.coord->share(blank.id, "alice", {"bob"}); });
  expect_code(ErrorCode::UnknownUser, [&] { f.coord->share(r.id, "alice", {"mallory"}); });
  expect_code(ErrorCode::InvalidArgument, [&] { f.coord->share(r.id, "alice", {}); });
  // A contributor is not the owner and may not re-share.
  f.coord->set_metadata(r.id, "alice", {.contributors = std::set<std::string>{"bob"}});
  expect_code(ErrorCode::NotOwner, [&] { f.coord->share(r.id, "bob", {"carol"}); });
}

TEST(Share, DefaultCropMatchesFloodFillOracle) {
  Fixture f;
  std::mt19937 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const auto cells = rbt::random_pattern(rng);
    const auto r = f.capture("office-a", trial, cells);
    std::vector<std::vector<bool>> on(10, std::vector<bool>(16, false));
    for (auto [c, rr] : cells) on[rr][c] = true;
    const auto box = rbt::oracle_largest_cluster(on);
    ASSERT_TRUE(box);
    const auto crop = *f.coord->share(r.id, "alice", {"bob"}).shared_with.at("bob");
    const imaging::Rect expected{(*box)[0] * 10, (*box)[1] * 10, ((*box)[2] - (*box)[0] + 1) * 10,
                                 ((*box)[3] - (*box)[1] + 1) * 10};
    EXPECT_EQ(crop, expected) << "trial " << trial;
  }
}

TEST(Share, CellsToPixelsCoversEveryPixelOfUnevenCells) {
  // 7 cells over 23 pixels: cells have 3 or 4 pixels.
  for (int c0 = 0; c0 < 7; ++c0)
    for (int c1 = c0; c1 < 7; ++c1) {
      const auto r = cells_to_pixels({c0, 0, c1, 0}, 7, 1, 23, 5);
      for (int x = 0; x < 23; ++x) {
        const int cell = x * 7 / 23;
        const bool inside = x >= r.x && x < r.right();
        EXPECT_EQ(inside, cell >= c0 && cell <= c1) << c0 << ".." << c1 << " x=" << x;
      }
    }
}

TEST(Share, ShareOnlyViewerGetsCroppedImage) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{3, 2}, {4, 2}});
  f.coord->share(r.id, "alice", {"bob"});
  const auto full = imaging::decode_png_gray(f.coord->image_png(r.id, "alice"));
  const auto part = imaging::decode_png_gray(f.coord->image_png(r.id, "bob"));
  EXPECT_EQ(full.width(), rbt::kBoardW);
  EXPECT_EQ(part.width(), 20);
  EXPECT_EQ(part.height(), 10);
  EXPECT_EQ(part(0, 0), 40);
  expect_code(ErrorCode::NotAuthorized, [&] { f.coord->image_png(r.id, "carol"); });
}

// ---- metadata -------------------------------------------------------------------

TEST(Metadata, AddingContributorMakesRecordRetrievable) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{1, 1}});
  EXPECT_TRUE(f.coord->query_captures("carol", {}).empty());
  f.coord->set_metadata(r.id, "alice", {.contributors = std::set<std::string>{"carol"}});
  EXPECT_EQ(ids(f.coord->query_captures("carol", {})), std::vector<RecordId>{r.id});
}

TEST(Metadata, LabelsTagsBookmarksAndClearing) {
  Fixture f;
  const auto r = f.capture("office-a", 0, {{1, 1}});
  auto u = f.coord->set_metadata(
      r.id, "alice", {.tags = std::set<std::string>{"uml", "design"}, .label = "UML sketch", .bookmarked = true});
  EXPECT_EQ(u.label, "UML sketch");
  EXPECT_TRUE(u.bookmarked);
  EXPECT_EQ(u.tags.size(), 2u);
  u = f.coord->set_metadata(r.id, "alice", {.label = ""});
  EXPECT_EQ(u.label, "");
  EXPECT_EQ(u.tags.size(), 2u);
  expect_code(ErrorCode::UnknownRecord, [&] { f.coord->set_metadata(77, "alice", {}); });
  expect_code(ErrorCode::UnknownUser,
              [&] { f.coord->set_metadata(r.id, "alice", {.contributors = std::set<std::string>{"zed"}}); });
}

TEST(Metadata, AuthorizationMatrix) {
  // Oracle: owner or contributor may edit; share recipients and strangers may not.
  Fixture f;
  const auto r = f.capture("office-a", 0, {{1, 1}});
  f.coord->set_metadata(r.id, "alice", {.contributors = std::set<std::string>{"bob"}});
  f.coord->put_user({"dave", "dave", {}});
  f.coord->share(r.id, "alice", {"dave"});
  const std::map<std::string, bool> may_edit{{"alice", true}, {"bob", true}, {"carol", false}, {"dave", false}};
  for (const auto& [user, allowed] : may_edit) {
    MetadataPatch p{.description = "edited by " + user};
    if (allowed) {
      EXPECT_EQ(f.coord->set_metadata(r.id, user, p).description, "edited by " + user);
    } else {
      expect_code(ErrorCode::NotAuthorized, [&] { f.coord->set_metadata(r.id, user, p); });
    }
  }
}

// ---- queries --------------------------------------------------------------------

TEST(Query, OwnerSeesOwnRecordsInTimeOrder) {
  Fixture f;
  const auto b = f.capture("office-a", 5000, {{1, 1}});
  const auto a = f.capture("office-a", 1000, {{1, 1}});
  f.capture("office-b", 3000, {{1, 1}});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {})), (std::vector<RecordId>{a.id, b.id}));
  expect_code(ErrorCode::UnknownUser, [&] { f.coord->query_captures("nobody", {}); });
}

TEST(Query, KeywordMatchesLabelOrDescriptionCaseInsensitively) {
  Fixture f;
  const auto uml = f.capture("office-a", 1000, {{1, 1}});
  const auto other = f.capture("office-a", 2000, {{1, 1}});
  f.capture("office-a", 3000, {{1, 1}});
  f.coord->set_metadata(uml.id, "alice", {.label = "Class diagram (UML)"});
  f.coord->set_metadata(other.id, "alice", {.description = "todo list"});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.keyword = "UML"})), std::vector<RecordId>{uml.id});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.keyword = "uml"})), std::vector<RecordId>{uml.id});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.keyword = "TODO"})), std::vector<RecordId>{other.id});
}

TEST(Query, FiltersCombineConjunctively) {
  Fixture f;
  f.coord->ingest_collaboration(interval("office-a", 0, 10'000));
  const auto c1 = f.capture("office-a", 5'000, {{1, 1}});
  const auto p1 = f.capture("office-a", 20'000, {{2, 2}});
  const auto p2 = f.capture("office-a", 30'000, {{15, 9}});
  f.coord->share(p2.id, "alice", {"bob"});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.types = kCollaborative})), std::vector<RecordId>{c1.id});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.types = kPersonal})), (std::vector<RecordId>{p1.id, p2.id}));
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.types = kShared})), std::vector<RecordId>{p2.id});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.types = kShared | kCollaborative})),
            (std::vector<RecordId>{c1.id, p2.id}));
  CaptureFilter range{.from = from_epoch_ms(kT0 + 5'000), .to = from_epoch_ms(kT0 + 30'000)};
  EXPECT_EQ(ids(f.coord->query_captures("alice", range)), (std::vector<RecordId>{c1.id, p1.id}));
  range.types = kPersonal;
  EXPECT_EQ(ids(f.coord->query_captures("alice", range)), std::vector<RecordId>{p1.id});
  EXPECT_TRUE(f.coord->query_captures("alice", {.cameras = {"office-b"}}).empty());
  expect_code(ErrorCode::MalformedFilter, [&] {
    f.coord->query_captures("alice", {.from = from_epoch_ms(10), .to = from_epoch_ms(5)});
  });
  expect_code(ErrorCode::MalformedFilter,
              [&] { f.coord->query_captures("alice", {.region = BoardRegion{0.5, 0, 0.2, 1}}); });
}

TEST(Query, RegionFilterUsesFineCells) {
  Fixture f;
  const auto left = f.capture("office-a", 1000, {{0, 0}, {1, 1}});
  const auto right = f.capture("office-a", 2000, {{15, 9}});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.region = BoardRegion{0, 0, 0.25, 0.5}})),
            std::vector<RecordId>{left.id});
  EXPECT_EQ(ids(f.coord->query_captures("alice", {.region = BoardRegion{0.9, 0.9, 1, 1}})),
            std::vector<RecordId>{right.id});
  // Never-changed area.
  EXPECT_TRUE(f.coord->query_captures("alice", {.region = BoardRegion{0.4, 0.3, 0.6, 0.6}}).empty());
}

TEST(Query, NeverReturnsInvisibleRecords) {
  Fixture f;
  std::mt19937 rng(9);
  const std::vector<std::string> users{"alice", "bob", "carol"};
  for (int i = 0; i < 40; ++i) {
    const auto cam = rng() % 2 ? "office-a" : "office-b";
    const auto owner = std::string(cam) == "office-a" ? "alice" : "bob";
    const auto r = f.capture(cam, i * 1000, {{int(rng() % 16), int(rng() % 10)}});
    if (rng() % 3 == 0) f.coord->share(r.id, owner, {users[rng() % 3]});
    if (rng() % 3 == 0) f.coord->set_metadata(r.id, owner, {.contributors = std::set<std::string>{users[rng() % 3]}});
  }
  for (const auto& u : users) {
    for (const auto& r : f.coord->query_captures(u, {})) {
      const bool owner = f.coord->camera(r->camera_id).owner == u;
      EXPECT_TRUE(owner || r->contributors.contains(u) || r->shared_with.contains(u)) << u << " saw " << r->id;
    }
  }
}

// ---- manual capture ----------------------------------------------------------------

TEST(ManualCapture, RequestIsRelayedAndResolvedByCapture) {
  Fixture f;
  f.coord->assign("office-a", "det-a");
  const auto r0 = f.coord->poll_assignments("det-a", 0).revision;
  expect_code(ErrorCode::NotOwner, [&] { f.coord->request_manual_capture("office-a", "bob"); });
  const auto req = f.coord->request_manual_capture("office-a", "alice");
  auto d = f.coord->poll_assignments("det-a", r0);
  ASSERT_EQ(d.upserts.size(), 1u);
  EXPECT_EQ(d.upserts[0].manual_requests, std::vector<std::string>{req.id});

  auto ev = rbt::make_event("office-a", 1000, {}, capture::Trigger::Manual);
  ev.request_id = req.id;
  const auto rec = f.coord->ingest_capture(ev);
  EXPECT_EQ(rec.trigger, capture::Trigger::Manual);
  const auto status = f.coord->manual_request(req.id, "alice");
  EXPECT_EQ(status.status, ManualStatus::Done);
  EXPECT_EQ(status.record, rec.id);
  d = f.coord->poll_assignments("det-a", d.revision);
  ASSERT_EQ(d.upserts.size(), 1u);
  EXPECT_TRUE(d.upserts[0].manual_requests.empty());
}

TEST(ManualCapture, FailureIsRecorded) {
  Fixture f;
  const auto req = f.coord->request_manual_capture("office-a", "alice");
  f.coord->fail_manual_capture("office-a", req.id, "Obstructed");
  const auto s = f.coord->manual_request(req.id, "alice");
  EXPECT_EQ(s.status, ManualStatus::Failed);
  EXPECT_EQ(s.reason, "Obstructed");
  expect_code(ErrorCode::UnknownRecord, [&] { f.coord->fail_manual_capture("office-a", "req-99", "x"); });
}

// ---- persistence ------------------------------------------------------------------

TEST(Persistence, StateSurvivesReopen) {
  const auto dir = rbt::scratch_dir("persist");
  const auto db = (dir / "reboard.db").string();
  RecordId shared_id = 0;
  Revision rev = 0;
  {
    Fixture f(db);
    f.coord->assign("office-a", "det-a");
    f.coord->ingest_collaboration(interval("office-a", 0, 10'000));
    const auto r = f.capture("office-a", 5'000, {{1, 1}, {2, 1}});
    shared_id = r.id;
    f.coord->share(r.id, "alice", {"bob"});
    f.coord->set_metadata(r.id, "alice",
                          {.contributors = std::set<std::string>{"carol"}, .tags = std::set<std::string>{"x"},
                           .label = "L", .description = "D", .bookmarked = true});
    f.coord->request_manual_capture("office-a", "alice");
    rev = f.coord->revision();
  }
  Coordinator reopened(std::make_unique<Store>(db), ImageStore(dir / "images2"));
  EXPECT_EQ(reopened.revision(), rev);
  const auto r = reopened.record(shared_id, "alice");
  EXPECT_EQ(r->content_type, ContentType::Collaborative);
  EXPECT_EQ(*r->shared_with.at("bob"), (imaging::Rect{10, 10, 20, 10}));
  EXPECT_EQ(r->contributors, std::set<std::string>{"carol"});
  EXPECT_EQ(r->tags, std::set<std::string>{"x"});
  EXPECT_EQ(r->label, "L");
  EXPECT_TRUE(r->bookmarked);
  EXPECT_EQ(r->changed_cell_count, 2);
  EXPECT_EQ(reopened.intervals("office-a").size(), 1u);
  const auto d = reopened.poll_assignments("det-a", 0);
  ASSERT_EQ(d.upserts.size(), 1u);
  EXPECT_EQ(d.upserts[0].manual_requests.size(), 1u);
  // New records continue the id sequence.
  const auto next = reopened.ingest_capture(rbt::make_event("office-a", 99'000, {}));
  EXPECT_GT(next.id, shared_id);
  std::filesystem::remove_all(dir);
}

TEST(Persistence, IdenticalImagesShareOneFile) {
  Fixture f;
  const auto a = f.capture("office-a", 0, {{1, 1}});
  const auto b = f.capture("office-a", 1000, {{1, 1}});
  EXPECT_EQ(a.image_ref, b.image_ref);
  EXPECT_EQ(a.image_ref, sha256_hex(f.coord->images().get(a.image_ref)));
}

TEST(Codec, CaptureEventRoundTrip) {
  const auto ev = rbt::make_event("office-a", kT0, {{3, 4}, {5, 6}}, capture::Trigger::Manual);
  const auto back = capture_event_from_json(nlohmann::json::parse(to_json(ev).dump()));
  EXPECT_EQ(back.camera_id, ev.camera_id);
  EXPECT_EQ(back.timestamp, ev.timestamp);
  EXPECT_EQ(back.image, ev.image);
  EXPECT_EQ(back.grids, ev.grids);
  EXPECT_EQ(back.trigger, capture::Trigger::Manual);
  for (std::size_t n = 0; n < 8; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37);
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
  expect_code(ErrorCode::InvalidArgument, [] { capture_event_from_json(nlohmann::json{{"camera_id", "x"}}); });
}

TEST(Codec, SettingsAndDeltaRoundTrip) {
  Fixture f;
  auto cam = f.coord->camera("office-a");
  cam.config.capture.change_threshold = 0.0123;
  cam.config.collab.start_threshold = 2.5;
  f.coord->put_camera(cam);
  f.coord->assign("office-a", "det-a");
  const auto d = f.coord->poll_assignments("det-a", 0);
  const auto back = delta_from_json(nlohmann::json::parse(to_json(d).dump()));
  ASSERT_EQ(back.upserts.size(), 1u);
  EXPECT_EQ(back.upserts[0].settings.capture, cam.config.capture);
  EXPECT_EQ(back.upserts[0].settings.collab, cam.config.collab);
  EXPECT_EQ(back.upserts[0].settings.geometry, cam.geometry);
  EXPECT_EQ(back.revision, d.revision);
}

// ---- configuration -------------------------------------------------------------------

TEST(Config, ParsesIniAndAppliesIdempotently) {
  std::istringstream in(R"(
[server]
port = 9090
database = data/r.db
images = data/img

[users]
alice = Alice Example
bob = Bob Example

[detector.det-1]
role = pipeline

[camera.room-1]
owner = alice
location = Room 1
detector = det-1
corners = 24,20 296,22 294,214 26,212
aspect_ratio = 1.6
capture.change_threshold = 0.0075
capture.out_height = 160
motion.aggregation_frames = 2
)");
  const auto cfg = parse_server_config(in, "/srv/reboard");
  EXPECT_EQ(cfg.port, 9090);
  EXPECT_EQ(cfg.database, std::filesystem::path("/srv/reboard/data/r.db"));
  ASSERT_EQ(cfg.cameras.size(), 1u);
  const auto& cam = cfg.cameras[0].camera;
  EXPECT_DOUBLE_EQ(cam.config.capture.change_threshold, 0.0075);
  EXPECT_EQ(cam.config.capture.out_height, 160);
  EXPECT_EQ(cam.config.motion.aggregation_frames, 2);
  EXPECT_EQ(cam.geometry.corners[2].x, 294);

  Fixture f;
  apply_config(*f.coord, cfg);
  const auto rev = f.coord->revision();
  EXPECT_EQ(full_view(*f.coord, "det-1").size(), 1u);
  f.coord->set_capture_enabled("room-1", "alice", false);
  const auto rev2 = f.coord->revision();
  EXPECT_GT(rev2, rev);
  apply_config(*f.coord, cfg);
  EXPECT_FALSE(f.coord->camera("room-1").capture_enabled);  // runtime state is kept
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_server_config(in);
  };
  expect_code(ErrorCode::InvalidArgument, [&] { parse("[server]\nprot = 1\n"); });
  expect_code(ErrorCode::InvalidArgument, [&] { parse("[bogus]\nx = 1\n"); });
  expect_code(ErrorCode::InvalidArgument, [&] {
    parse("[camera.c]\nowner = a\ncorners = 0,0 10,0 10,10 0,10\naspect_ratio = 1\ncapture.nope = 1\n");
  });
  expect_code(ErrorCode::InvalidArgument, [&] {
    parse("[camera.c]\nowner = a\ncorners = 0,0 10,0 10,10 0,10\naspect_ratio = 1\ncapture.change_threshold = x\n");
  });
  expect_code(ErrorCode::InvalidArgument, [&] { parse("[camera.c]\nowner = a\ncorners = 0,0 10,0\naspect_ratio = 1\n"); });
  expect_code(ErrorCode::InvalidArgument, [&] { parse("[server]\nport = 1\nport = 2\n"); });
}
