#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "reboard/coordinator/config.hpp"
#include "reboard/coordinator/http.hpp"

using namespace reboard;

int main(int argc, char** argv) {
  CLI::App app{"ReBoard application server."};
  std::string config_path;
  int port = -1;
  app.add_option("-c,--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("-p,--port", port, "Override the configured port (0 picks a free one)");
  CLI11_PARSE(app, argc, argv);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    auto cfg = coordinator::load_server_config(config_path);
    if (port >= 0) cfg.port = port;
    if (cfg.database != ":memory:" && cfg.database.has_parent_path()) {
      std::filesystem::create_directories(cfg.database.parent_path());
    }
    coordinator::Coordinator coord(std::make_unique<coordinator::Store>(cfg.database.string()),
                                   coordinator::ImageStore(cfg.images));
    coordinator::apply_config(coord, cfg);

    coordinator::HttpServer server(coord, {cfg.admin_token});
    const int bound = server.bind(cfg.host, cfg.port);
    std::cout << "listening on " << cfg.host << ":" << bound << std::endl;

    std::thread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    });
    server.listen();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "reboard-server: " << e.what() << "\n";
    return 1;
  }
}
