#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reboard/eval/eval.hpp"
#include "reboard/feedsim/scenario.hpp"

namespace fs = std::filesystem;
using namespace reboard;

namespace {

struct Run {
  std::string name;
  std::vector<eval::VariantResult> results;
};

Run run_scenario(const fs::path& path, std::span<const eval::Variant> variants, Millis window, int contrast) {
  const auto sc = feedsim::load_scenario(path);
  eval::ScenarioFeed feed(sc);
  return {sc.name, eval::run_variants(feed, feedsim::derive_truth(sc), variants, eval::settings_for(sc, contrast),
                                      window).results};
}

std::vector<fs::path> suite_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".scn") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorCode::MissingFile, "no .scn files in " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replays feeds through the capture variants and scores them against ground truth."};
  std::vector<std::string> scenarios;
  std::string suite, manifest, truth, out, variant_list = "combined,motion_only,filtering_only";
  int window_min = 15, contrast = 100;
  auto* sc_opt = app.add_option("--scenario", scenarios, "Scenario script (repeatable)")->check(CLI::ExistingFile);
  auto* suite_opt = app.add_option("--suite", suite, "Directory of .scn scripts")->check(CLI::ExistingDirectory);
  auto* man_opt = app.add_option("--manifest", manifest, "Frame manifest of a recorded feed")->check(CLI::ExistingFile);
  auto* truth_opt = app.add_option("--truth", truth, "Ground truth JSON for --manifest")->check(CLI::ExistingFile);
  app.add_option("--variants", variant_list, "Comma-separated variants")->capture_default_str();
  app.add_option("--window-min", window_min, "Matching window, minutes either side")->capture_default_str();
  app.add_option("--contrast", contrast, "Mark contrast the threshold is calibrated for")->capture_default_str();
  app.add_option("--out", out, "Write the JSON report here");
  man_opt->needs(truth_opt);
  truth_opt->needs(man_opt);
  man_opt->excludes(sc_opt)->excludes(suite_opt);
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<eval::Variant> variants;
    std::stringstream vs(variant_list);
    for (std::string v; std::getline(vs, v, ',');)
      if (!v.empty()) variants.push_back(detector::parse_variant(v));
    if (variants.empty()) throw Error(ErrorCode::InvalidArgument, "no variants given");
    const Millis window{static_cast<long long>(window_min) * 60'000};

    std::vector<Run> runs;
    if (!manifest.empty()) {
      const auto gt = feedsim::load_truth(truth);
      const auto m = feedsim::load_manifest(manifest);
      auto settings = eval::settings_for(gt, contrast);
      eval::fit_bursts_to_recording(settings, m.fps);
      eval::ManifestFeed feed(m);
      runs.push_back({fs::path(manifest).parent_path().filename().string(),
                      eval::run_variants(feed, gt, variants, settings, window).results});
    } else {
      std::vector<fs::path> files(scenarios.begin(), scenarios.end());
      if (!suite.empty())
        for (auto& f : suite_files(suite)) files.push_back(f);
      if (files.empty()) throw Error(ErrorCode::InvalidArgument, "give --scenario, --suite or --manifest");
      std::vector<std::future<Run>> jobs;
      for (const auto& f : files)
        jobs.push_back(std::async(std::launch::async, run_scenario, f, std::span<const eval::Variant>(variants),
                                  window, contrast));
      for (auto& j : jobs) runs.push_back(j.get());
    }

    nlohmann::json per_run = nlohmann::json::array();
    std::vector<eval::VariantResult> totals;
    for (const auto& run : runs) {
      std::cout << "== " << run.name << "\n" << eval::report_table(run.results) << "\n";
      auto j = eval::report_json(run.results);
      j["name"] = run.name;
      per_run.push_back(j);
    }
    for (std::size_t v = 0; v < variants.size(); ++v) {
      std::vector<eval::VariantResult> same;
      for (const auto& run : runs) same.push_back(run.results[v]);
      totals.push_back(eval::aggregate(same));
    }
    if (runs.size() > 1) std::cout << "== all feeds\n" << eval::report_table(totals);

    auto report = eval::report_json(totals);
    report["runs"] = per_run;
    if (!out.empty()) {
      std::ofstream f(out);
      if (!f) throw Error(ErrorCode::MissingFile, "cannot write " + out);
      f << report.dump(2) << "\n";
    }
    if (const auto ok = eval::variant_ordering_holds(totals); ok && !*ok) {
      std::cerr << "variant ordering does not hold: filtering_only should have the most false positives\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "evalharness: " << e.what() << "\n";
    return 1;
  }
}
