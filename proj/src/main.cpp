#include <cstdio>

// Placeholder entry point; subcommands land with the pipeline CLI.
int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::fprintf(stderr, "poseloop: no subcommands wired yet\n");
  return 2;
}
