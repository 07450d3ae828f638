// Stdio front end for the reference memo programs: one JSON request per line
// in, one reply per line out. Used as a real-process candidate in tests.
#include <unistd.h>

#include <cstdio>
#include <iostream>
#include <string>

#include "memosearch/reference_candidates.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: memo_ref_candidate <name>\n";
    return 2;
  }
  std::unique_ptr<memosearch::reference::ProtocolServer> server;
  try {
    server = memosearch::reference::make_server(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  std::string line;
  while (std::getline(std::cin, line)) {
    auto action = server->handle(line);
    using Kind = memosearch::reference::ServerAction::Kind;
    if (action.kind == Kind::hang) {
      for (;;) pause();
    }
    if (action.kind == Kind::exit) {
      std::cout.flush();
      std::_Exit(action.exit_code);
    }
    std::cout << action.line << "\n" << std::flush;
    if (line.find("\"shutdown\"") != std::string::npos) break;
  }
  return 0;
}
