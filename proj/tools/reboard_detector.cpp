#include <chrono>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "reboard/detector/client.hpp"
#include "reboard/feedsim/scenario.hpp"

namespace fs = std::filesystem;
using namespace reboard;

namespace {

std::unique_ptr<feedsim::FrameFeed> open_feed(const fs::path& path) {
  if (path.extension() == ".scn") return std::make_unique<feedsim::ScenarioFeed>(feedsim::load_scenario(path));
  const auto manifest = fs::is_directory(path) ? path / "manifest.txt" : path;
  return std::make_unique<feedsim::ManifestFeed>(feedsim::load_manifest(manifest));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detector service: polls the server for camera assignments and runs the capture pipeline."};
  std::string host = "127.0.0.1", id;
  int port = 8080, frames_per_poll = 10, wait_s = 60;
  double speed = 0.0;
  std::vector<std::string> feed_args;
  app.add_option("--host", host, "Server host")->capture_default_str();
  app.add_option("--port", port, "Server port")->capture_default_str();
  app.add_option("--id", id, "Detector id registered on the server")->required();
  app.add_option("--feed", feed_args, "camera=path to a .scn script, manifest file or feed directory (repeatable)")
      ->required();
  app.add_option("--frames-per-poll", frames_per_poll, "Frames between assignment polls")->capture_default_str();
  app.add_option("--speed", speed, "Replay speed relative to stream time; 0 runs unpaced")->capture_default_str();
  app.add_option("--wait", wait_s, "Seconds to wait for a first assignment")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    std::map<std::string, fs::path> feeds;
    for (const auto& a : feed_args) {
      const auto eq = a.find('=');
      if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidArgument, "--feed wants camera=path: " + a);
      feeds[a.substr(0, eq)] = a.substr(eq + 1);
    }
    detector::CoordinatorClient client(host, port);
    detector::DetectorService service(id, client, [&](const detector::CameraSettings& s) {
      auto it = feeds.find(s.camera_id);
      if (it == feeds.end()) throw Error(ErrorCode::SourceUnavailable, "no --feed given for camera " + s.camera_id);
      return open_feed(it->second);
    });

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(wait_s);
    service.sync();
    while (service.cameras().empty()) {
      if (std::chrono::steady_clock::now() > deadline) throw Error(ErrorCode::SourceUnavailable, "no assignments");
      std::this_thread::sleep_for(std::chrono::milliseconds(500));
      service.sync();
    }
    std::cerr << "assigned:";
    for (const auto& c : service.cameras()) std::cerr << " " << c;
    std::cerr << "\n";

    const auto wall0 = std::chrono::steady_clock::now();
    std::optional<Timestamp> stream0;
    for (int n = 1; service.step(); ++n) {
      if (n % frames_per_poll == 0) service.sync();
      if (speed > 0 && (stream0 || (stream0 = service.stream_time()))) {
        const auto elapsed = *service.stream_time() - *stream0;
        std::this_thread::sleep_until(wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                  std::chrono::duration<double, std::milli>(elapsed.count() / speed)));
      }
    }
    service.sync();
    const auto& st = service.stats();
    std::cout << st.frames << " frames, " << st.captures_posted << " captures, " << st.intervals_posted
              << " collaboration intervals, " << st.manual_served << " manual captures (" << st.manual_failed
              << " failed)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "reboard-detector: " << e.what() << "\n";
    return 1;
  }
}
