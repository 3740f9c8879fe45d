#include "commands.hpp"

int main(int argc, char** argv) { return hyloc::cli::run(argc, argv); }
