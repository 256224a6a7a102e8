#include "gwnav/harness.hpp"

int main(int argc, char** argv) { return gwnav::run_cli(argc, argv); }
