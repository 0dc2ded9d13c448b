#include "daslam/cli.hpp"

int main(int argc, char** argv) { return daslam::cli::run_main(argc, argv); }
