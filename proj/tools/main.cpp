#include "fiberkit/app.hpp"

int main(int argc, char** argv) { return fiberkit::run_cli(argc, argv); }
