#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "reboard/feedsim/generator.hpp"
#include "reboard/feedsim/scenario.hpp"

using namespace reboard;

int main(int argc, char** argv) {
  CLI::App app{"Renders a scenario script to a frame directory with manifest.txt and truth.json."};
  std::string scenario, out;
  bool quiet = false;
  app.add_option("--scenario", scenario, "Scenario script")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory")->required();
  app.add_flag("-q,--quiet", quiet, "No progress output");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto sc = feedsim::load_scenario(scenario);
    const auto m = feedsim::write_feed(sc, out, [&](std::size_t done, std::size_t total) {
      if (!quiet && (done % 500 == 0 || done == total)) std::cerr << "\r" << done << "/" << total << std::flush;
    });
    if (!quiet) std::cerr << "\n";
    std::cout << m.entries.size() << " frames written to " << out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "reboard-feedsim: " << e.what() << "\n";
    return 1;
  }
}
