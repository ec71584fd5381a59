#include "scenefit/cli.hpp"

int main(int argc, char** argv) { return scenefit::run_cli(argc, argv); }
