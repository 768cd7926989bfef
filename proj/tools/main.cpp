#include "cli.hpp"

int main(int argc, char** argv) { return fecam::cli_main(argc, argv); }
