#include "gyrolatent/cli/commands.hpp"

int main(int argc, char** argv) { return gyrolatent::cli::main_entry(argc, argv); }
