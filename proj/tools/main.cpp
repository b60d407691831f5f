#include "cli.hpp"

#include "aero/io.hpp"

extern char** environ;

int main(int argc, char** argv) {
  aero::tune_allocator();
  return aero::cli::run(argc, argv, environ);
}
