#include "cli/commands.hpp"

int main(int argc, char** argv) { return gsfcli::main_entry(argc, argv); }
