#include "clustre/cli/app.hpp"

int main(int argc, char** argv) { return clustre::cli::run(argc, argv); }
